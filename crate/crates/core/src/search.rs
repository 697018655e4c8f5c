//! Backtracking search for W-colorings that extend a partial coloring.
//!
//! Subsets of an `n`-element universe are addressed by position bitmasks.
//! The fixed part must be downward closed (every subset of a fixed set is
//! fixed), and free sets are assigned in an order of nondecreasing size. Under
//! those two conditions, assigning a set completes exactly one new set, namely
//! itself, so each step needs a single monochromaticity test: a set of size
//! `s ≥ 2` is monochromatic iff all its `(s−1)`-subsets are, with one common
//! diagram.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::RngCore;

use crate::diagrams::{AllowedDiagrams, Diagram, Language, RelSymbol};
use crate::structures::ColoringStructure;

/// Largest universe the engine accepts.
pub const MAX_POSITIONS: usize = 20;

const UNSET: u32 = u32::MAX;
const NOT_MONO: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SearchError {
    #[error("universe of {0} positions is too large")]
    TooLarge(usize),
    #[error("fixed set {mask:#b} is monochromatic with disallowed diagram {diagram}")]
    FixedViolation { mask: u32, diagram: Diagram },
    #[error("set {0:#b} has an unassigned subset when it is reached")]
    BadOrder(u32),
    #[error("set {0:#b} is neither fixed nor free")]
    Uncovered(u32),
}

/// A monochromatic set whose diagram is not allowed, found while exploring
/// the branch that gives the first free set the color `branch`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conflict {
    pub branch: Option<(u32, u32)>,
    pub mask: u32,
    pub diagram: Diagram,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SearchOutcome {
    /// Color id of every set, indexed by mask (entry 0 unused).
    Found(Vec<u32>),
    /// Exhaustively refuted; one conflict per value of the first free set.
    Unsat(Vec<Conflict>),
    BudgetExhausted,
}

/// Result of enumerating all solutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Enumeration {
    pub count: u64,
    /// False when the budget ran out or the visitor stopped early.
    pub complete: bool,
}

/// Extension problem on `n` positions.
pub struct Problem<'a, W: ?Sized> {
    n: usize,
    fixed: Vec<u32>,
    free: Vec<u32>,
    candidates: Vec<Vec<u32>>,
    tree: &'a W,
}

impl<'a, W> Problem<'a, W>
where
    W: AllowedDiagrams<Symbol = RelSymbol> + ?Sized,
{
    /// `fixed[mask]` gives the color of fixed sets; every other nonempty set
    /// is free and assigned in size-then-lexicographic order.
    pub fn new(
        n: usize,
        fixed: &[Option<u32>],
        language: &Language,
        tree: &'a W,
    ) -> Result<Self, SearchError> {
        if n > MAX_POSITIONS {
            return Err(SearchError::TooLarge(n));
        }
        let free: Vec<u32> = (1..1u32 << n)
            .filter(|m| fixed.get(*m as usize).copied().flatten().is_none())
            .collect();
        Self::with_order(n, fixed, free_in_default_order(free), language, tree)
    }

    /// As [`Problem::new`] with an explicit order for the free sets.
    pub fn with_order(
        n: usize,
        fixed: &[Option<u32>],
        free: Vec<u32>,
        language: &Language,
        tree: &'a W,
    ) -> Result<Self, SearchError> {
        if n > MAX_POSITIONS {
            return Err(SearchError::TooLarge(n));
        }
        let mut table = vec![UNSET; 1 << n];
        for (mask, c) in fixed.iter().enumerate().skip(1).take((1 << n) - 1) {
            if let Some(id) = c {
                table[mask] = *id;
            }
        }
        let candidates = (0..=n as u32)
            .map(|k| (0..language.count(k)).collect())
            .collect();
        let p = Problem {
            n,
            fixed: table,
            free,
            candidates,
            tree,
        };
        p.check_shape()?;
        Ok(p)
    }

    fn check_shape(&self) -> Result<(), SearchError> {
        let mut ready: Vec<bool> = self.fixed.iter().map(|c| *c != UNSET).collect();
        ready[0] = true;
        let subsets_ready =
            |ready: &[bool], mask: u32| bits(mask).all(|b| ready[(mask & !(1 << b)) as usize]);
        for mask in 1..1u32 << self.n {
            if ready[mask as usize] && !subsets_ready(&ready, mask) {
                return Err(SearchError::BadOrder(mask));
            }
        }
        for &mask in &self.free {
            if !subsets_ready(&ready, mask) {
                return Err(SearchError::BadOrder(mask));
            }
            ready[mask as usize] = true;
        }
        if let Some(m) = (1..1u32 << self.n).find(|m| !ready[*m as usize]) {
            return Err(SearchError::Uncovered(m));
        }
        Ok(())
    }

    pub fn positions(&self) -> usize {
        self.n
    }

    pub fn free_sets(&self) -> &[u32] {
        &self.free
    }

    /// Deterministic depth-first search; values are tried in increasing id.
    pub fn solve(&self, budget: u64) -> Result<SearchOutcome, SearchError> {
        let mut st = State::start(self)?;
        Ok(st.run(budget, None))
    }

    /// Depth-first search with values tried in a random order.
    pub fn solve_randomized(
        &self,
        budget: u64,
        rng: &mut dyn RngCore,
    ) -> Result<SearchOutcome, SearchError> {
        let mut st = State::start(self)?;
        Ok(st.run(budget, Some(rng)))
    }

    /// Visits every solution in search order until `visit` returns false.
    pub fn enumerate(
        &self,
        budget: u64,
        mut visit: impl FnMut(&[u32]) -> bool,
    ) -> Result<Enumeration, SearchError> {
        let mut st = State::start(self)?;
        st.budget = budget;
        let mut count = 0u64;
        let complete = st.enumerate(0, &mut |t| {
            count += 1;
            visit(t)
        });
        Ok(Enumeration { count, complete })
    }
}

/// Orders masks by size, then by their sorted position lists.
pub fn free_in_default_order(mut free: Vec<u32>) -> Vec<u32> {
    free.sort_by_key(|m| (m.count_ones(), lex_key(*m)));
    free
}

/// Key whose numeric order is the lexicographic order of the position list
/// among masks of equal size.
pub fn lex_key(mask: u32) -> u32 {
    !mask.reverse_bits()
}

fn bits(mask: u32) -> impl Iterator<Item = u32> {
    (0..32).filter(move |b| mask >> b & 1 == 1)
}

/// Diagrams met during a search, stored as a trie of node ids with the
/// membership verdict cached per node.
struct Interner<'w, W: ?Sized> {
    tree: &'w W,
    nodes: Vec<(u32, RelSymbol, bool)>,
    index: BTreeMap<(u32, RelSymbol), u32>,
}

impl<'w, W> Interner<'w, W>
where
    W: AllowedDiagrams<Symbol = RelSymbol> + ?Sized,
{
    fn new(tree: &'w W) -> Self {
        let root_ok = tree.allows(&[]);
        Interner {
            tree,
            nodes: vec![(0, RelSymbol::new(0, 0), root_ok)],
            index: BTreeMap::new(),
        }
    }

    fn child(&mut self, parent: u32, s: RelSymbol) -> u32 {
        if let Some(id) = self.index.get(&(parent, s)) {
            return *id;
        }
        let allowed = self.nodes[parent as usize].2 && {
            let mut d = self.diagram(parent).symbols().to_vec();
            d.push(s);
            self.tree.allows(&d)
        };
        let id = self.nodes.len() as u32;
        self.nodes.push((parent, s, allowed));
        self.index.insert((parent, s), id);
        id
    }

    fn allowed(&self, node: u32) -> bool {
        self.nodes[node as usize].2
    }

    fn diagram(&self, mut node: u32) -> Diagram {
        let mut v = Vec::new();
        while node != 0 {
            let (p, s, _) = self.nodes[node as usize];
            v.push(s);
            node = p;
        }
        v.reverse();
        Diagram::new(v)
    }
}

struct State<'p, 'a, W: ?Sized> {
    problem: &'p Problem<'a, W>,
    colors: Vec<u32>,
    mono: Vec<u32>,
    interner: Interner<'a, W>,
    budget: u64,
    first_conflict: Option<(u32, u32)>,
}

enum Flow {
    Found,
    Failed,
    OutOfBudget,
}

impl<'p, 'a, W> State<'p, 'a, W>
where
    W: AllowedDiagrams<Symbol = RelSymbol> + ?Sized,
{
    fn start(problem: &'p Problem<'a, W>) -> Result<Self, SearchError> {
        let size = 1usize << problem.n;
        let mut st = State {
            problem,
            colors: problem.fixed.clone(),
            mono: vec![NOT_MONO; size],
            interner: Interner::new(problem.tree),
            budget: 0,
            first_conflict: None,
        };
        st.mono[0] = 0;
        let mut order: Vec<u32> = (1..size as u32)
            .filter(|m| problem.fixed[*m as usize] != UNSET)
            .collect();
        order.sort_by_key(|m| m.count_ones());
        for mask in order {
            let node = st.mono_node(mask, st.colors[mask as usize]);
            if node != NOT_MONO && !st.interner.allowed(node) {
                return Err(SearchError::FixedViolation {
                    mask,
                    diagram: st.interner.diagram(node),
                });
            }
            st.mono[mask as usize] = node;
        }
        Ok(st)
    }

    /// Diagram node of `mask` if it is monochromatic once colored `id`.
    fn mono_node(&mut self, mask: u32, id: u32) -> u32 {
        let k = mask.count_ones();
        let sym = RelSymbol::new(k, id);
        if k == 1 {
            return self.interner.child(0, sym);
        }
        let mut common = None;
        for b in bits(mask) {
            let m = self.mono[(mask & !(1 << b)) as usize];
            if m == NOT_MONO {
                return NOT_MONO;
            }
            match common {
                None => common = Some(m),
                Some(c) if c != m => return NOT_MONO,
                _ => {}
            }
        }
        self.interner.child(common.expect("k ≥ 2"), sym)
    }

    fn values(&self, mask: u32, rng: &mut Option<&mut dyn RngCore>) -> Vec<u32> {
        let mut v = self.problem.candidates[mask.count_ones() as usize].clone();
        if let Some(r) = rng.as_deref_mut() {
            v.shuffle(r);
        }
        v
    }

    /// Tries `id` on `mask`; false (with the conflict noted) if it completes
    /// a disallowed monochromatic set.
    fn place(&mut self, mask: u32, id: u32) -> bool {
        let node = self.mono_node(mask, id);
        if node != NOT_MONO && !self.interner.allowed(node) {
            if self.first_conflict.is_none() {
                self.first_conflict = Some((mask, node));
            }
            return false;
        }
        self.colors[mask as usize] = id;
        self.mono[mask as usize] = node;
        true
    }

    fn unplace(&mut self, mask: u32) {
        self.colors[mask as usize] = UNSET;
        self.mono[mask as usize] = NOT_MONO;
    }

    fn run(&mut self, budget: u64, mut rng: Option<&mut dyn RngCore>) -> SearchOutcome {
        self.budget = budget;
        let free = &self.problem.free;
        if free.is_empty() {
            return SearchOutcome::Found(self.table());
        }
        let first = free[0];
        let mut conflicts = Vec::new();
        for id in self.values(first, &mut rng) {
            self.first_conflict = None;
            match self.step(0, id, &mut rng) {
                Flow::Found => return SearchOutcome::Found(self.table()),
                Flow::OutOfBudget => return SearchOutcome::BudgetExhausted,
                Flow::Failed => {
                    let (mask, node) = self.first_conflict.expect("failure has a cause");
                    conflicts.push(Conflict {
                        branch: Some((first, id)),
                        mask,
                        diagram: self.interner.diagram(node),
                    });
                }
            }
        }
        SearchOutcome::Unsat(conflicts)
    }

    fn step(&mut self, i: usize, id: u32, rng: &mut Option<&mut dyn RngCore>) -> Flow {
        if self.budget == 0 {
            return Flow::OutOfBudget;
        }
        self.budget -= 1;
        let mask = self.problem.free[i];
        if !self.place(mask, id) {
            return Flow::Failed;
        }
        if i + 1 == self.problem.free.len() {
            return Flow::Found;
        }
        let next = self.problem.free[i + 1];
        for v in self.values(next, rng) {
            match self.step(i + 1, v, rng) {
                Flow::Failed => {}
                other => return other,
            }
        }
        self.unplace(mask);
        Flow::Failed
    }

    /// Returns false if stopped early or out of budget.
    fn enumerate(&mut self, i: usize, visit: &mut dyn FnMut(&[u32]) -> bool) -> bool {
        if i == self.problem.free.len() {
            let t = self.table();
            return visit(&t);
        }
        let mask = self.problem.free[i];
        for id in self.problem.candidates[mask.count_ones() as usize].clone() {
            if self.budget == 0 {
                return false;
            }
            self.budget -= 1;
            if self.place(mask, id) {
                let go_on = self.enumerate(i + 1, visit);
                self.unplace(mask);
                if !go_on {
                    return false;
                }
            }
        }
        true
    }

    fn table(&self) -> Vec<u32> {
        let mut t = self.colors.clone();
        t[0] = 0;
        t
    }
}

/// Turns a color table over the positions of `universe` into a structure.
pub fn table_to_structure(universe: &[u32], table: &[u32]) -> ColoringStructure {
    let mut m = ColoringStructure::new(universe.to_vec()).expect("distinct universe");
    for (mask, id) in table.iter().enumerate().skip(1) {
        let s = m.subset_of_mask(mask as u64);
        m.set(&s, *id).expect("subset of the universe");
    }
    m
}

/// Reads the colors of `m` into a mask-indexed table over its own universe.
pub fn structure_to_table(m: &ColoringStructure) -> Vec<Option<u32>> {
    use crate::structures::Coloring;
    let n = m.len();
    let mut t = vec![None; 1 << n];
    for (mask, slot) in t.iter_mut().enumerate().skip(1) {
        let s = m.subset_of_mask(mask as u64);
        *slot = Some(m.color(&s).id);
    }
    t
}

/// Finds a W-coloring of `0..n` (the first in search order), if one exists
/// within budget.
pub fn search_coloring<W>(
    n: usize,
    language: &Language,
    tree: &W,
    budget: u64,
) -> Result<SearchOutcome, SearchError>
where
    W: AllowedDiagrams<Symbol = RelSymbol> + ?Sized,
{
    Problem::new(n, &[], language, tree)?.solve(budget)
}
