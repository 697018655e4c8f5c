//! Model builders: `κ_α`, disjoint sums and Δ-splitting colorings.
//!
//! Binary strings of length `m` are encoded as integers whose most
//! significant of `m` bits is position 0. With that encoding, the
//! lexicographic order of strings is numeric order and `Δ(f,g)`, the first
//! position where `f` and `g` differ, is `m − 1 − ⌊log₂(f ⊕ g)⌋`.
//!
//! Whenever a construction only needs "some symbol of arity n", it uses id 0.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::diagrams::{Diagram, DiagramSet, RelSymbol};
use crate::ordinal::{CardinalExpr, Ordinal};
use crate::rank::{er_rank_finite, rank_witness_chain};
use crate::search::{search_coloring, table_to_structure, SearchError, SearchOutcome};
use crate::structures::{monochromatic_model, Coloring, ColoringStructure, StructureError};

/// Longest strings the builders accept (2¹⁶ elements).
pub const MAX_STRING_LENGTH: u32 = 16;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConstructionError {
    #[error("string length {0} is out of range")]
    BadLength(u32),
    #[error("tuple must be strictly increasing in the lexicographic order")]
    NotIncreasing,
    #[error("tuple has {got} elements, at least {need} are needed")]
    TooFew { got: usize, need: usize },
    #[error("element {0} is not a string of the given length")]
    NotAString(u32),
    #[error("components {0} and {1} share the root color")]
    DuplicateRootColor(usize, usize),
    #[error("component {0} has singletons of a color other than its root")]
    RootColorMismatch(usize),
    #[error("{0} has the wrong length")]
    WrongLength(Diagram),
    #[error("{0} does not extend the stem")]
    NotExtending(Diagram),
    #[error("diagram {0} occurs twice")]
    Duplicate(Diagram),
    #[error("{0} is not a member of W")]
    NotMember(Diagram),
    #[error("expected {expected} component colorings, got {got}")]
    ComponentCount { expected: usize, got: usize },
    #[error("component {0} must color exactly the positions of its block")]
    ComponentUniverse(usize),
    #[error("no canonical {size}-set of positions exists among {available}")]
    NoCanonicalSet { size: usize, available: usize },
    #[error("blocks must partition 0..m into consecutive nonempty intervals")]
    BadBlocks,
    #[error("second-level colors of the blocks must be distinct")]
    BlockColorsCollide,
    #[error("{0} has fewer than {1} children")]
    NotEnoughChildren(Diagram, usize),
    #[error("no coloring of {size} points exists in the component class {index}")]
    NoComponentColoring { index: usize, size: usize },
    #[error("search budget exhausted")]
    BudgetExhausted,
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

/// `κ_α`: `α` below ω, a supremum at limits, a power set at successors of
/// infinite ordinals, `ℶ_α` from ω² on.
pub fn kappa(alpha: &Ordinal) -> CardinalExpr {
    if let Some(n) = alpha.as_finite() {
        return CardinalExpr::Finite(n);
    }
    if *alpha >= Ordinal::omega_pow(Ordinal::nat(2)) {
        return CardinalExpr::beth(alpha.clone(), CardinalExpr::Aleph0);
    }
    match alpha.pred() {
        Some(beta) => CardinalExpr::PowerSet(Box::new(CardinalExpr::Kappa(beta))),
        None => CardinalExpr::Sup {
            below: alpha.clone(),
        },
    }
}

fn check_length(m: u32) -> Result<(), ConstructionError> {
    if m > MAX_STRING_LENGTH {
        return Err(ConstructionError::BadLength(m));
    }
    Ok(())
}

/// First position where two distinct strings of length `m` differ.
pub fn delta(f: u32, g: u32, m: u32) -> u32 {
    debug_assert!(f != g);
    m - 1 - (31 - (f ^ g).leading_zeros())
}

/// `⟨Δ(f₀,f₁), Δ(f₁,f₂), …⟩` for a ≺-increasing tuple.
pub fn delta_sequence(x: &[u32], m: u32) -> Result<Vec<u32>, ConstructionError> {
    check_length(m)?;
    if x.len() < 2 {
        return Err(ConstructionError::TooFew {
            got: x.len(),
            need: 2,
        });
    }
    if let Some(e) = x.iter().find(|e| m < 32 && **e >> m != 0) {
        return Err(ConstructionError::NotAString(*e));
    }
    if x.windows(2).any(|p| p[0] >= p[1]) {
        return Err(ConstructionError::NotIncreasing);
    }
    Ok(x.windows(2).map(|p| delta(p[0], p[1], m)).collect())
}

/// Increase/decrease pattern of adjacent Δ values: 0 where `Δ` goes up,
/// 1 where it goes down. Adjacent values never coincide.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignPattern(pub Vec<u8>);

impl SignPattern {
    pub fn of_deltas(d: &[u32]) -> SignPattern {
        SignPattern(d.windows(2).map(|p| u8::from(p[0] > p[1])).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Enumeration index: the constant-0 pattern is 0, the constant-1
    /// pattern is 1, the rest follow in increasing binary value (first entry
    /// most significant) from 2 on.
    pub fn index(&self) -> usize {
        let l = self.0.len();
        let value = self
            .0
            .iter()
            .fold(0usize, |acc, b| (acc << 1) | *b as usize);
        let ones = (1usize << l) - 1;
        if value == 0 {
            0
        } else if value == ones {
            1
        } else {
            // the value−1 non-constant patterns below `value` come first
            value + 1
        }
    }

    /// Inverse of [`SignPattern::index`] for patterns of length `len`.
    pub fn from_index(len: usize, j: usize) -> SignPattern {
        let ones = (1usize << len) - 1;
        let value = match j {
            0 => 0,
            1 => ones,
            _ => j - 1,
        };
        SignPattern(
            (0..len)
                .map(|i| ((value >> (len - 1 - i)) & 1) as u8)
                .collect(),
        )
    }
}

/// `s_X` for a ≺-increasing tuple of at least three strings.
pub fn s_pattern(x: &[u32], m: u32) -> Result<SignPattern, ConstructionError> {
    if x.len() < 3 {
        return Err(ConstructionError::TooFew {
            got: x.len(),
            need: 3,
        });
    }
    Ok(SignPattern::of_deltas(&delta_sequence(x, m)?))
}

fn strictly_increasing(d: &[u32]) -> bool {
    d.windows(2).all(|p| p[0] < p[1])
}

fn strictly_decreasing(d: &[u32]) -> bool {
    d.windows(2).all(|p| p[0] > p[1])
}

fn sorted_set(d: &[u32]) -> Vec<u32> {
    let mut v = d.to_vec();
    v.sort_unstable();
    v
}

/// A component coloring read in the language shifted by one: a set of size
/// `s` gets a symbol of arity `s + 1`.
fn lifted(comp: &ColoringStructure, y: &[u32]) -> u32 {
    comp.color(y).id
}

/// Disjoint union of models whose singletons carry pairwise distinct
/// colors. Component `i` is relabelled onto the next `|M_i|` integers; sets
/// meeting two components get id 0 (they cannot be monochromatic).
#[derive(Debug, Clone)]
pub struct LimitSum {
    universe: Vec<u32>,
    parts: Vec<(u32, ColoringStructure)>,
}

pub fn build_limit_sum(components: &[ColoringStructure]) -> Result<LimitSum, ConstructionError> {
    let mut roots: Vec<Option<RelSymbol>> = Vec::new();
    for (i, c) in components.iter().enumerate() {
        let mut colors = c.universe().iter().map(|e| c.color(&[*e]));
        let root = colors.next();
        if colors.any(|s| Some(s) != root) {
            return Err(ConstructionError::RootColorMismatch(i));
        }
        if let Some(j) = roots.iter().position(|r| r.is_some() && *r == root) {
            return Err(ConstructionError::DuplicateRootColor(j, i));
        }
        roots.push(root);
    }
    let mut parts = Vec::new();
    let mut offset = 0u32;
    for c in components {
        parts.push((offset, c.clone()));
        offset += c.len() as u32;
    }
    Ok(LimitSum {
        universe: (0..offset).collect(),
        parts,
    })
}

impl LimitSum {
    fn part(&self, e: u32) -> usize {
        self.parts
            .iter()
            .rposition(|(o, _)| *o <= e)
            .expect("element of the universe")
    }
}

impl Coloring for LimitSum {
    fn universe(&self) -> &[u32] {
        &self.universe
    }

    fn color(&self, subset: &[u32]) -> RelSymbol {
        let k = subset.len() as u32;
        let p = self.part(subset[0]);
        if self.part(subset[subset.len() - 1]) != p {
            return RelSymbol::new(k, 0);
        }
        let (offset, c) = &self.parts[p];
        let local: Vec<u32> = subset
            .iter()
            .map(|e| c.universe()[(e - offset) as usize])
            .collect();
        c.color(&local)
    }
}

/// Strings of length `m`: singletons get `w̄(1)`, pairs `w̄_{Δ}(2)`, larger
/// sets id 0. No triple is monochromatic since its three Δ values cannot all
/// agree.
#[derive(Debug, Clone)]
pub struct PairSplitting {
    m: u32,
    universe: Vec<u32>,
    unary: RelSymbol,
    pair_colors: Vec<u32>,
}

pub fn build_pair_splitting(
    m: u32,
    wbar: &Diagram,
    wn: &[Diagram],
    w: &DiagramSet,
) -> Result<PairSplitting, ConstructionError> {
    check_length(m)?;
    if m == 0 {
        return Err(ConstructionError::BadLength(0));
    }
    if wbar.len() != 1 {
        return Err(ConstructionError::WrongLength(wbar.clone()));
    }
    if !w.contains(wbar.symbols()) {
        return Err(ConstructionError::NotMember(wbar.clone()));
    }
    if wn.len() != m as usize {
        return Err(ConstructionError::ComponentCount {
            expected: m as usize,
            got: wn.len(),
        });
    }
    let mut seen = BTreeSet::new();
    for d in wn {
        if d.len() != 2 {
            return Err(ConstructionError::WrongLength(d.clone()));
        }
        if !wbar.is_prefix_of(d) {
            return Err(ConstructionError::NotExtending(d.clone()));
        }
        if !w.contains(d.symbols()) {
            return Err(ConstructionError::NotMember(d.clone()));
        }
        if !seen.insert(d.clone()) {
            return Err(ConstructionError::Duplicate(d.clone()));
        }
    }
    Ok(PairSplitting {
        m,
        universe: (0..1u32 << m).collect(),
        unary: wbar.at(1).expect("length 1"),
        pair_colors: wn.iter().map(|d| d.at(2).expect("length 2").id).collect(),
    })
}

impl Coloring for PairSplitting {
    fn universe(&self) -> &[u32] {
        &self.universe
    }

    fn color(&self, subset: &[u32]) -> RelSymbol {
        match subset {
            [_] => self.unary,
            [f, g] => RelSymbol::new(2, self.pair_colors[delta(*f, *g, self.m) as usize]),
            _ => RelSymbol::new(subset.len() as u32, 0),
        }
    }
}

/// Splitting above a stem `w̄` of length `k`: sets of size at most `k` get
/// `w̄(|X|)`; `(k+1)`-sets are dispatched on their sign pattern to the
/// component colorings of positions; larger sets use component 0 or 1 when
/// `Δ(X)` is monotone and id 0 otherwise.
#[derive(Debug, Clone)]
pub struct KSplitting {
    m: u32,
    universe: Vec<u32>,
    stem: Diagram,
    comps: Vec<ColoringStructure>,
}

pub fn build_k_splitting(
    m: u32,
    wbar: &Diagram,
    comps: Vec<ColoringStructure>,
    w: &DiagramSet,
) -> Result<KSplitting, ConstructionError> {
    check_length(m)?;
    let k = wbar.len();
    if k < 2 {
        return Err(ConstructionError::WrongLength(wbar.clone()));
    }
    if !w.contains(wbar.symbols()) {
        return Err(ConstructionError::NotMember(wbar.clone()));
    }
    let expected = 1usize << (k - 1);
    if comps.len() != expected {
        return Err(ConstructionError::ComponentCount {
            expected,
            got: comps.len(),
        });
    }
    let positions: Vec<u32> = (0..m).collect();
    if let Some(i) = comps
        .iter()
        .position(|c| c.universe() != positions.as_slice())
    {
        return Err(ConstructionError::ComponentUniverse(i));
    }
    // a (k+1)-set with a non-monotone pattern needs a canonical k-set of positions
    if expected > 2 && (m as usize) < k && (1u64 << m) > k as u64 {
        return Err(ConstructionError::NoCanonicalSet {
            size: k,
            available: m as usize,
        });
    }
    Ok(KSplitting {
        m,
        universe: (0..1u32 << m).collect(),
        stem: wbar.clone(),
        comps,
    })
}

impl Coloring for KSplitting {
    fn universe(&self) -> &[u32] {
        &self.universe
    }

    fn color(&self, x: &[u32]) -> RelSymbol {
        let k = self.stem.len();
        let n = x.len();
        if n <= k {
            return self.stem.at(n).expect("n ≤ k");
        }
        let d: Vec<u32> = x.windows(2).map(|p| delta(p[0], p[1], self.m)).collect();
        let id = if n == k + 1 {
            match SignPattern::of_deltas(&d).index() {
                j @ (0 | 1) => lifted(&self.comps[j], &sorted_set(&d)),
                j => {
                    let y: Vec<u32> = (0..k as u32).collect();
                    lifted(&self.comps[j], &y)
                }
            }
        } else if strictly_increasing(&d) {
            lifted(&self.comps[0], &d)
        } else if strictly_decreasing(&d) {
            lifted(&self.comps[1], &sorted_set(&d))
        } else {
            0
        };
        RelSymbol::new(n as u32, id)
    }
}

/// Data for one block of an interval splitting.
#[derive(Debug, Clone)]
pub struct Block {
    /// First position and one past the last.
    pub start: u32,
    pub end: u32,
    /// `w̄_i`, length 2; its second symbol colors pairs whose Δ is in the block.
    pub pair: Diagram,
    /// `w̄*_i`, length `k_i + 2`, extending `pair`.
    pub star: Diagram,
    /// `2^{k_i+1}` colorings of the block's positions.
    pub comps: Vec<ColoringStructure>,
}

/// Several splittings side by side: pairs are colored by the block holding
/// their Δ; a set whose pairwise Δ values all lie in block `i` follows block
/// `i`'s stem `w̄*_i`, sign-pattern dispatch and monotone components; any
/// other set of size ≥ 3 gets id 0 (it has two pair colors).
#[derive(Debug, Clone)]
pub struct IntervalSplitting {
    m: u32,
    universe: Vec<u32>,
    unary: RelSymbol,
    blocks: Vec<Block>,
    block_of: Vec<usize>,
}

pub fn build_interval_splitting(
    m: u32,
    wbar: &Diagram,
    blocks: Vec<Block>,
    w: &DiagramSet,
) -> Result<IntervalSplitting, ConstructionError> {
    check_length(m)?;
    if wbar.len() != 1 {
        return Err(ConstructionError::WrongLength(wbar.clone()));
    }
    if !w.contains(wbar.symbols()) {
        return Err(ConstructionError::NotMember(wbar.clone()));
    }
    let mut next = 0;
    for b in &blocks {
        if b.start != next || b.end <= b.start {
            return Err(ConstructionError::BadBlocks);
        }
        next = b.end;
    }
    if next != m {
        return Err(ConstructionError::BadBlocks);
    }
    let mut pair_colors = BTreeSet::new();
    for (i, b) in blocks.iter().enumerate() {
        for d in [&b.pair, &b.star] {
            if !w.contains(d.symbols()) {
                return Err(ConstructionError::NotMember(d.clone()));
            }
        }
        if b.pair.len() != 2 {
            return Err(ConstructionError::WrongLength(b.pair.clone()));
        }
        if !wbar.is_prefix_of(&b.pair) {
            return Err(ConstructionError::NotExtending(b.pair.clone()));
        }
        if b.star.len() < 2 {
            return Err(ConstructionError::WrongLength(b.star.clone()));
        }
        if !b.pair.is_prefix_of(&b.star) {
            return Err(ConstructionError::NotExtending(b.star.clone()));
        }
        if !pair_colors.insert(b.pair.at(2)) {
            return Err(ConstructionError::BlockColorsCollide);
        }
        let ki = b.star.len() - 2;
        let expected = 1usize << (ki + 1);
        if b.comps.len() != expected {
            return Err(ConstructionError::ComponentCount {
                expected,
                got: b.comps.len(),
            });
        }
        let positions: Vec<u32> = (b.start..b.end).collect();
        if b.comps.iter().any(|c| c.universe() != positions.as_slice()) {
            return Err(ConstructionError::ComponentUniverse(i));
        }
        let width = (b.end - b.start) as usize;
        if expected > 2 && width < ki + 2 && (1u64 << width) > (ki + 2) as u64 {
            return Err(ConstructionError::NoCanonicalSet {
                size: ki + 2,
                available: width,
            });
        }
    }
    let mut block_of = vec![0; m as usize];
    for (i, b) in blocks.iter().enumerate() {
        for p in b.start..b.end {
            block_of[p as usize] = i;
        }
    }
    Ok(IntervalSplitting {
        m,
        universe: (0..1u32 << m).collect(),
        unary: wbar.at(1).expect("length 1"),
        blocks,
        block_of,
    })
}

impl Coloring for IntervalSplitting {
    fn universe(&self) -> &[u32] {
        &self.universe
    }

    fn color(&self, x: &[u32]) -> RelSymbol {
        let n = x.len();
        if n == 1 {
            return self.unary;
        }
        let d: Vec<u32> = x.windows(2).map(|p| delta(p[0], p[1], self.m)).collect();
        let i = self.block_of[d[0] as usize];
        let b = &self.blocks[i];
        if n == 2 {
            return b.pair.at(2).expect("length 2");
        }
        // Δ of any two members is the least adjacent Δ between them, so
        // membership in A_i only depends on the adjacent values.
        if d.iter().any(|p| self.block_of[*p as usize] != i) {
            return RelSymbol::new(n as u32, 0);
        }
        let ki = b.star.len() - 2;
        if n <= ki + 2 {
            return b.star.at(n).expect("n ≤ k_i + 2");
        }
        let id = if n == ki + 3 {
            match SignPattern::of_deltas(&d).index() {
                j @ (0 | 1) => lifted(&b.comps[j], &sorted_set(&d)),
                j => {
                    let y: Vec<u32> = (b.start..b.start + ki as u32 + 2).collect();
                    lifted(&b.comps[j], &y)
                }
            }
        } else if strictly_increasing(&d) {
            lifted(&b.comps[0], &d)
        } else if strictly_decreasing(&d) {
            lifted(&b.comps[1], &sorted_set(&d))
        } else {
            0
        };
        RelSymbol::new(n as u32, id)
    }
}

/// Searches a coloring of the positions `universe` in `u`, relabelled onto
/// `universe`.
fn component_coloring(
    u: &DiagramSet,
    universe: &[u32],
    index: usize,
    budget: u64,
) -> Result<ColoringStructure, ConstructionError> {
    match search_coloring(universe.len(), u.language(), u, budget)? {
        SearchOutcome::Found(t) => Ok(table_to_structure(universe, &t)),
        SearchOutcome::Unsat(_) => Err(ConstructionError::NoComponentColoring {
            index,
            size: universe.len(),
        }),
        SearchOutcome::BudgetExhausted => Err(ConstructionError::BudgetExhausted),
    }
}

/// Component colorings above `star`: the `j`-th uses the class
/// `(W_{S_j}) / (star↾[1])` with `S_j` the `j`-th child of `star`.
fn plan_components(
    w: &DiagramSet,
    star: &Diagram,
    count: usize,
    universe: &[u32],
    budget: u64,
) -> Result<Vec<ColoringStructure>, ConstructionError> {
    let children: Vec<Diagram> = w.children(star).take(count).cloned().collect();
    if children.len() < count {
        return Err(ConstructionError::NotEnoughChildren(star.clone(), count));
    }
    let head = star.prefix(1);
    children
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let pruned = w.prune(core::slice::from_ref(s)).expect("member");
            let u = pruned.quotient(&head).expect("member");
            component_coloring(&u, universe, j, budget)
        })
        .collect()
}

/// Picks components for [`build_k_splitting`] from `W` and builds.
pub fn plan_k_splitting(
    m: u32,
    wbar: &Diagram,
    w: &DiagramSet,
    budget: u64,
) -> Result<KSplitting, ConstructionError> {
    check_length(m)?;
    if !w.contains(wbar.symbols()) {
        return Err(ConstructionError::NotMember(wbar.clone()));
    }
    if wbar.len() < 2 {
        return Err(ConstructionError::WrongLength(wbar.clone()));
    }
    let positions: Vec<u32> = (0..m).collect();
    let comps = plan_components(w, wbar, 1 << (wbar.len() - 1), &positions, budget)?;
    build_k_splitting(m, wbar, comps, w)
}

/// Picks block data for [`build_interval_splitting`]: block `i` uses the
/// `i`-th child of `w̄` as `w̄_i`, the least descendant of `w̄_i` at length
/// `k_i + 2` with enough children as `w̄*_i`, and searched components.
pub fn plan_interval_splitting(
    m: u32,
    wbar: &Diagram,
    bounds: &[(u32, u32, usize)],
    w: &DiagramSet,
    budget: u64,
) -> Result<IntervalSplitting, ConstructionError> {
    check_length(m)?;
    if !w.contains(wbar.symbols()) {
        return Err(ConstructionError::NotMember(wbar.clone()));
    }
    let pairs: Vec<Diagram> = w.children(wbar).cloned().collect();
    if pairs.len() < bounds.len() {
        return Err(ConstructionError::NotEnoughChildren(
            wbar.clone(),
            bounds.len(),
        ));
    }
    let mut blocks = Vec::new();
    for (i, &(start, end, ki)) in bounds.iter().enumerate() {
        let pair = pairs[i].clone();
        let count = 1usize << (ki + 1);
        let star = w
            .descendants(&pair)
            .chain(core::iter::once(&pair))
            .filter(|d| d.len() == ki + 2)
            .find(|d| w.children(d).count() >= count)
            .cloned()
            .ok_or_else(|| ConstructionError::NotEnoughChildren(pair.clone(), count))?;
        let positions: Vec<u32> = (start..end).collect();
        let comps = plan_components(w, &star, count, &positions, budget)?;
        blocks.push(Block {
            start,
            end,
            pair,
            star,
            comps,
        });
    }
    build_interval_splitting(m, wbar, blocks, w)
}

/// The monochromatic model of the rank witness chain: a model of size
/// `ER(∅; W)` for a finite tree.
pub fn rank_model(w: &DiagramSet) -> ColoringStructure {
    let top = er_rank_finite(w, &Diagram::empty()).expect("root is a member");
    let chain = rank_witness_chain(w, top).expect("rank is attained");
    let last = chain.last().expect("nonempty").clone();
    monochromatic_model(&last, top as usize)
}

/// Largest `n ≤ limit` such that `K(W)` has a model on `n` points, found by
/// exhaustive search upwards from 0 (membership is hereditary, so the first
/// size without a model bounds all larger ones). `Ok(None)` means models
/// exist up to `limit`.
pub fn max_model_size(
    w: &DiagramSet,
    limit: usize,
    budget: u64,
) -> Result<Option<(usize, ColoringStructure)>, ConstructionError> {
    let mut best = ColoringStructure::new(vec![])?;
    for n in 1..=limit {
        match search_coloring(n, w.language(), w, budget)? {
            SearchOutcome::Found(t) => {
                best = table_to_structure(&(0..n as u32).collect::<Vec<_>>(), &t);
            }
            SearchOutcome::Unsat(_) => return Ok(Some((n - 1, best))),
            SearchOutcome::BudgetExhausted => return Err(ConstructionError::BudgetExhausted),
        }
    }
    Ok(None)
}
