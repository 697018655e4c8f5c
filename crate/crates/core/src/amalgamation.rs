//! Amalgamation of one-point extensions.
//!
//! For coloring classes, amalgamation questions reduce to special systems: a
//! base set `X`, two fresh points `a₁ ≠ a₂` and W-colorings `c₁` of `X ∪ {a₁}`
//! and `c₂` of `X ∪ {a₂}` that agree on `X`. A disjoint amalgam is a W-coloring
//! of `X ∪ {a₁, a₂}` extending both; only the sets containing both fresh
//! points need colors. Larger amalgams restrict to one of this shape, so the
//! search never looks further.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diagrams::{Diagram, DiagramSet, RelSymbol};
use crate::rank::{er_rank_finite, InfiniteDiagram};
use crate::search::{lex_key, table_to_structure, Conflict, Problem, SearchError, SearchOutcome};
use crate::structures::{
    agree, for_each_combination, in_class, is_monochromatic, monochromatic_sets, Coloring,
    ColoringStructure, MembershipViolation,
};

/// Two one-point extensions of a common base.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecialSystem {
    pub x: Vec<u32>,
    pub a1: u32,
    pub a2: u32,
    pub c1: ColoringStructure,
    pub c2: ColoringStructure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Search,
    Case1,
    Case2,
    Case3,
    InfiniteDiagram,
    Quotient,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Search => "search",
            Method::Case1 => "case1",
            Method::Case2 => "case2",
            Method::Case3 => "case3",
            Method::InfiniteDiagram => "infinite-diagram",
            Method::Quotient => "quotient",
        }
    }

    pub fn from_name(s: &str) -> Option<Method> {
        [
            Method::Search,
            Method::Case1,
            Method::Case2,
            Method::Case3,
            Method::InfiniteDiagram,
            Method::Quotient,
        ]
        .into_iter()
        .find(|m| m.name() == s)
    }
}

/// A monochromatic set that leaves `W` in every completion of one branch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Refutation {
    /// The first free set and the color tried on it.
    pub branch: Option<(Vec<u32>, RelSymbol)>,
    pub subset: Vec<u32>,
    pub diagram: Diagram,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AmalgamResult {
    /// A W-coloring of `X ∪ {a₁, a₂}` extending `c₁ ∪ c₂`.
    Witness {
        coloring: ColoringStructure,
        method: Method,
    },
    /// `c₁` and `c₂` agree after identifying `a₁` with `a₂`; the amalgam is
    /// `c₁` itself with `point = a₁`.
    Identified {
        amalgam: ColoringStructure,
        point: u32,
    },
    Unsat {
        refutations: Vec<Refutation>,
    },
    BudgetExhausted,
}

impl AmalgamResult {
    pub fn is_sat(&self) -> bool {
        matches!(
            self,
            AmalgamResult::Witness { .. } | AmalgamResult::Identified { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AmalgamError {
    #[error("invalid system: {0}")]
    InvalidSystem(&'static str),
    #[error("c{which} is not a W-coloring: {subset:?} has diagram {diagram}")]
    NotWColoring {
        which: u8,
        subset: Vec<u32>,
        diagram: Diagram,
    },
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("hypothesis fails: arity {0} has a single symbol")]
    SingleSymbolArity(u32),
    #[error("hypothesis fails: {0} has no two extensions differing at their last place")]
    NoSplit(Diagram),
    #[error("the AP oracle gave no disjoint amalgam for a system that needs one")]
    OracleRefused,
    #[error("no non-monochromatic set through a₁ can be recolored")]
    NoRecolorableSet,
    #[error("a diagram d with d(1) = c(a₁), consistent to depth {0}, is required")]
    NoConsistentDiagram(usize),
    #[error("stem must be a length-2 member whose first symbol is c(a₁) = c(a₂)")]
    StemMismatch,
    #[error("c* must color exactly the base set")]
    BaseMismatch,
    #[error("no coloring of the base exists in the quotient class")]
    NoQuotientColoring,
}

impl SpecialSystem {
    /// Checks the shape conditions (not W-membership).
    pub fn validate(&self) -> Result<(), AmalgamError> {
        if self.x.windows(2).any(|w| w[0] >= w[1]) {
            return Err(AmalgamError::InvalidSystem("X must be sorted and distinct"));
        }
        if self.a1 == self.a2 {
            return Err(AmalgamError::InvalidSystem("a1 = a2"));
        }
        if self.x.binary_search(&self.a1).is_ok() || self.x.binary_search(&self.a2).is_ok() {
            return Err(AmalgamError::InvalidSystem("fresh point lies in X"));
        }
        if self.c1.universe() != with_point(&self.x, self.a1).as_slice() {
            return Err(AmalgamError::InvalidSystem("c1 must color X ∪ {a1}"));
        }
        if self.c2.universe() != with_point(&self.x, self.a2).as_slice() {
            return Err(AmalgamError::InvalidSystem("c2 must color X ∪ {a2}"));
        }
        if self.x.len() + 2 > crate::search::MAX_POSITIONS {
            return Err(AmalgamError::InvalidSystem("X too large"));
        }
        let r1 = self.c1.restrict(&self.x).expect("X inside universe");
        let r2 = self.c2.restrict(&self.x).expect("X inside universe");
        if !agree(&r1, &r2) {
            return Err(AmalgamError::InvalidSystem("c1 and c2 disagree on X"));
        }
        Ok(())
    }

    /// Shape checks plus W-membership of both colorings.
    pub fn validate_in(&self, w: &DiagramSet) -> Result<(), AmalgamError> {
        self.validate()?;
        for (which, c) in [(1u8, &self.c1), (2u8, &self.c2)] {
            if let Err(MembershipViolation { subset, diagram }) = in_class(c, w) {
                return Err(AmalgamError::NotWColoring {
                    which,
                    subset,
                    diagram,
                });
            }
        }
        Ok(())
    }

    /// `X ∪ {a₁, a₂}`, sorted.
    pub fn joint_universe(&self) -> Vec<u32> {
        with_point(&with_point(&self.x, self.a1), self.a2)
    }

    /// Color of `C ∪ {a_i}` for `C ⊆ X` in `c_i`.
    fn color_with(&self, i: u8, c: &[u32]) -> RelSymbol {
        let (a, col) = if i == 1 {
            (self.a1, &self.c1)
        } else {
            (self.a2, &self.c2)
        };
        col.color(&with_point(c, a))
    }

    /// Some `C ⊆ X` with `c₁(C ∪ {a₁}) ≠ c₂(C ∪ {a₂})`, least by size then
    /// lexicographically.
    pub fn distinguishing_set(&self) -> Option<Vec<u32>> {
        for k in 0..=self.x.len() {
            let mut found = None;
            for_each_combination(&self.x, k, |c| {
                if self.color_with(1, c) != self.color_with(2, c) {
                    found = Some(c.to_vec());
                    return false;
                }
                true
            });
            if found.is_some() {
                return found;
            }
        }
        None
    }

    /// The joint structure with `c₁ ∪ c₂` fixed and every set containing both
    /// fresh points colored by `fill(C)`, where `C` is the part inside `X`.
    fn joint_with(&self, mut fill: impl FnMut(&[u32]) -> u32) -> ColoringStructure {
        let u = self.joint_universe();
        let mut m = ColoringStructure::new(u.clone()).expect("distinct");
        for mask in 1u64..1 << u.len() {
            let s = m.subset_of_mask(mask);
            let has1 = s.contains(&self.a1);
            let has2 = s.contains(&self.a2);
            let id = match (has1, has2) {
                (true, true) => {
                    let c: Vec<u32> = s
                        .iter()
                        .copied()
                        .filter(|e| *e != self.a1 && *e != self.a2)
                        .collect();
                    fill(&c)
                }
                (_, true) => self.c2.color(&s).id,
                _ => self.c1.color(&s).id,
            };
            m.set(&s, id).expect("subset of the universe");
        }
        m
    }
}

fn with_point(x: &[u32], a: u32) -> Vec<u32> {
    let mut v = x.to_vec();
    let pos = v.binary_search(&a).unwrap_or_else(|p| p);
    v.insert(pos, a);
    v
}

/// Decides disjoint amalgamation of `sys` in `K(W)` by exhaustive search.
///
/// Sets `C ∪ {a₁, a₂}` are colored by increasing `|C|`, then lexicographically
/// in `C`, trying symbol ids in increasing order; a branch is cut as soon as a
/// monochromatic set gets a diagram outside `W`.
pub fn dap_search(
    sys: &SpecialSystem,
    w: &DiagramSet,
    budget: u64,
) -> Result<AmalgamResult, AmalgamError> {
    sys.validate_in(w)?;
    let u = sys.joint_universe();
    let n = u.len();
    let p1 = 1u32 << u.binary_search(&sys.a1).expect("in universe");
    let p2 = 1u32 << u.binary_search(&sys.a2).expect("in universe");
    let both = p1 | p2;
    let joint = ColoringStructure::new(u.clone()).expect("distinct");
    let mut fixed = vec![None; 1 << n];
    let mut free = Vec::new();
    for mask in 1u32..1 << n {
        if mask & both == both {
            free.push(mask);
            continue;
        }
        let s = joint.subset_of_mask(mask as u64);
        let c = if mask & p2 != 0 { &sys.c2 } else { &sys.c1 };
        fixed[mask as usize] = Some(c.color(&s).id);
    }
    free.sort_by_key(|m| ((m & !both).count_ones(), lex_key(m & !both)));
    let problem = Problem::with_order(n, &fixed, free, w.language(), w)?;
    Ok(match problem.solve(budget)? {
        SearchOutcome::Found(table) => AmalgamResult::Witness {
            coloring: table_to_structure(&u, &table),
            method: Method::Search,
        },
        SearchOutcome::Unsat(conflicts) => AmalgamResult::Unsat {
            refutations: conflicts
                .into_iter()
                .map(|c| refutation(&joint, c))
                .collect(),
        },
        SearchOutcome::BudgetExhausted => AmalgamResult::BudgetExhausted,
    })
}

fn refutation(joint: &ColoringStructure, c: Conflict) -> Refutation {
    Refutation {
        branch: c.branch.map(|(mask, id)| {
            let s = joint.subset_of_mask(mask as u64);
            let sym = RelSymbol::new(s.len() as u32, id);
            (s, sym)
        }),
        subset: joint.subset_of_mask(c.mask as u64),
        diagram: c.diagram,
    }
}

/// Amalgamation, allowing `a₁` and `a₂` to be identified: if `c₁` and `c₂`
/// agree once `a₁ = a₂`, `c₁` is already an amalgam; otherwise only a
/// disjoint amalgam can exist.
pub fn ap_search(
    sys: &SpecialSystem,
    w: &DiagramSet,
    budget: u64,
) -> Result<AmalgamResult, AmalgamError> {
    sys.validate_in(w)?;
    if sys.distinguishing_set().is_none() {
        return Ok(AmalgamResult::Identified {
            amalgam: sys.c1.clone(),
            point: sys.a1,
        });
    }
    dap_search(sys, w, budget)
}

/// Checks the richness hypotheses under which AP and DAP coincide, at the
/// scale needed for a base of size `lambda`: more than one symbol at every
/// arity `2..=2λ+4`, and two extensions of every unary diagram that differ
/// at their last place.
pub fn check_ap_dap_hypotheses(w: &DiagramSet, lambda: usize) -> Result<(), AmalgamError> {
    for k in 2..=2 * lambda as u32 + 4 {
        if w.language().count(k) < 2 {
            return Err(AmalgamError::SingleSymbolArity(k));
        }
    }
    for u in w.level(1) {
        if split_pair(w, u).is_none() {
            return Err(AmalgamError::NoSplit(u.clone()));
        }
    }
    Ok(())
}

/// Least `n` and a lexicographically least pair `w₁ < w₂` in `Wⁿ`, both
/// extending `u`, with different last symbols.
fn split_pair(w: &DiagramSet, u: &Diagram) -> Option<(Diagram, Diagram)> {
    for n in u.len() + 1..=w.depth() {
        let level: Vec<&Diagram> = w.descendants(u).filter(|d| d.len() == n).collect();
        for (i, w1) in level.iter().enumerate() {
            if let Some(w2) = level[i + 1..].iter().find(|w2| w2.last() != w1.last()) {
                return Some(((*w1).clone(), (*w2).clone()));
            }
        }
    }
    None
}

/// Outcome of [`dap_from_ap`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseWitness {
    pub coloring: ColoringStructure,
    pub method: Method,
    /// Case 3 only: the set recolored before calling the oracle, with its
    /// original and temporary colors.
    pub recolored: Option<(Vec<u32>, u32, u32)>,
}

/// Builds a disjoint amalgam from an AP oracle by the three-case argument.
///
/// 1. Some `C ⊆ X` has `c₁(C∪{a₁}) ≠ c₂(C∪{a₂})`: `a₁` and `a₂` cannot be
///    identified, so the oracle's amalgam is disjoint.
/// 2. Some `w ∈ Wᵏ` extending `(c(a₁))` is the diagram of no monochromatic
///    `k`-set of `X ∪ {a₁}`: color `C ∪ {a₁,a₂}` by `w(|C|+2)` for
///    `|C| ≤ k−2` and by id 0 above.
/// 3. Otherwise recolor one non-monochromatic set through `a₁`, which puts
///    the system in case 1, amalgamate, and restore the color.
pub fn dap_from_ap(
    sys: &SpecialSystem,
    w: &DiagramSet,
    ap_oracle: &mut dyn FnMut(&SpecialSystem) -> Result<AmalgamResult, AmalgamError>,
) -> Result<CaseWitness, AmalgamError> {
    sys.validate_in(w)?;
    check_ap_dap_hypotheses(w, sys.x.len())?;

    let disjoint = |r: AmalgamResult| match r {
        AmalgamResult::Witness { coloring, .. } => Ok(coloring),
        _ => Err(AmalgamError::OracleRefused),
    };

    if sys.distinguishing_set().is_some() {
        return Ok(CaseWitness {
            coloring: disjoint(ap_oracle(sys)?)?,
            method: Method::Case1,
            recolored: None,
        });
    }

    let head = Diagram::new(vec![sys.c1.color(&[sys.a1])]);
    let u1 = with_point(&sys.x, sys.a1);
    let realized: Vec<Diagram> = monochromatic_sets(&sys.c1, w.depth().max(1))
        .into_iter()
        .flatten()
        .map(|(_, d)| d)
        .collect();
    for k in 2..=w.depth() {
        let unrealized = w
            .descendants(&head)
            .filter(|d| d.len() == k)
            .find(|d| !realized.contains(d));
        if let Some(target) = unrealized {
            let coloring = sys.joint_with(|c| {
                if c.len() + 2 <= k {
                    target.at(c.len() + 2).expect("length k").id
                } else {
                    0
                }
            });
            return Ok(CaseWitness {
                coloring,
                method: Method::Case2,
                recolored: None,
            });
        }
    }

    let c = case3_set(sys, w, &head, &u1).ok_or(AmalgamError::NoRecolorableSet)?;
    let original = sys.c1.color(&c).id;
    let temporary = if original == 0 { 1 } else { 0 };
    let mut c1p = sys.c1.clone();
    c1p.set(&c, temporary).expect("subset of X ∪ {a1}");
    let modified = SpecialSystem {
        c1: c1p,
        ..sys.clone()
    };
    let mut coloring = disjoint(ap_oracle(&modified)?)?;
    coloring
        .set(&c, original)
        .expect("subset of the joint universe");
    Ok(CaseWitness {
        coloring,
        method: Method::Case3,
        recolored: Some((c, original, temporary)),
    })
}

/// The set recolored in case 3. Preferred: a `k`-set through `a₁` containing
/// monochromatic `B₁, B₂` whose diagrams extend `(c(a₁))` and differ at their
/// last place, with `k` the least admissible size having two symbols. If no
/// such set fits inside `X ∪ {a₁}`, any non-monochromatic set through `a₁`
/// with a recolorable size will do: recoloring it cannot create a
/// monochromatic set, since every superset still contains it.
fn case3_set(sys: &SpecialSystem, w: &DiagramSet, head: &Diagram, u1: &[u32]) -> Option<Vec<u32>> {
    let lang = w.language();
    let max_k = u1.len();
    if let Some((w1, w2)) = split_pair(w, head) {
        let n = w1.len();
        let find = |target: &Diagram| -> Option<Vec<u32>> {
            let mut hit: Option<Vec<u32>> = None;
            for_each_combination(u1, n, |b| {
                if is_monochromatic(&sys.c1, b) == Ok(true)
                    && crate::structures::diagram_of(&sys.c1, b).ok().as_ref() == Some(target)
                {
                    let better = match &hit {
                        None => true,
                        Some(h) => b.contains(&sys.a1) && !h.contains(&sys.a1),
                    };
                    if better {
                        hit = Some(b.to_vec());
                    }
                }
                true
            });
            hit
        };
        if let (Some(b1), Some(b2)) = (find(&w1), find(&w2)) {
            let mut core: Vec<u32> = b1.iter().chain(&b2).copied().collect();
            core.push(sys.a1);
            core.sort_unstable();
            core.dedup();
            let lo = core.len().max(2 * n);
            if let Some(k) = (lo..=max_k).find(|k| lang.count(*k as u32) > 1) {
                let mut c = core.clone();
                for e in &sys.x {
                    if c.len() == k {
                        break;
                    }
                    if !c.contains(e) {
                        c.push(*e);
                    }
                }
                c.sort_unstable();
                return Some(c);
            }
        }
    }
    for k in 2..=max_k {
        if lang.count(k as u32) < 2 {
            continue;
        }
        let mut hit = None;
        for_each_combination(u1, k, |c| {
            if c.contains(&sys.a1) && is_monochromatic(&sys.c1, c) == Ok(false) {
                hit = Some(c.to_vec());
                return false;
            }
            true
        });
        if hit.is_some() {
            return hit;
        }
    }
    None
}

/// Disjoint amalgam from an infinite branch: if `c₁(a₁) ≠ c₂(a₂)` no set
/// containing both points can be monochromatic and every such set gets id 0;
/// otherwise `C ∪ {a₁,a₂}` gets `d(|C|+2)`, which needs `d(1) = c(a₁)` and
/// `d↾[n] ∈ W` for `n ≤ |X|+2`.
pub fn amalgamate_infinite(
    sys: &SpecialSystem,
    w: &DiagramSet,
    d: Option<&InfiniteDiagram>,
) -> Result<ColoringStructure, AmalgamError> {
    sys.validate_in(w)?;
    let s1 = sys.c1.color(&[sys.a1]);
    if s1 != sys.c2.color(&[sys.a2]) {
        return Ok(sys.joint_with(|_| 0));
    }
    let depth = sys.x.len() + 2;
    let d = d
        .filter(|d| d.at(1) == s1 && d.consistent_with(w, depth))
        .ok_or(AmalgamError::NoConsistentDiagram(depth))?;
    Ok(sys.joint_with(|c| d.at(c.len() as u32 + 2).id))
}

/// Disjoint amalgam from a quotient coloring: `{a₁,a₂}` gets `w̄(2)` and
/// `Y ∪ {a₁,a₂}` gets `c*(Y)` (a symbol of arity `|Y|` in the shifted
/// language, i.e. arity `|Y|+2` here).
pub fn amalgamate_quotient(
    sys: &SpecialSystem,
    w: &DiagramSet,
    wbar: &Diagram,
    cstar: &ColoringStructure,
) -> Result<ColoringStructure, AmalgamError> {
    sys.validate_in(w)?;
    let s1 = sys.c1.color(&[sys.a1]);
    if wbar.len() != 2
        || !w.contains(wbar.symbols())
        || wbar.at(1) != Some(s1)
        || sys.c2.color(&[sys.a2]) != s1
    {
        return Err(AmalgamError::StemMismatch);
    }
    if cstar.universe() != sys.x.as_slice() {
        return Err(AmalgamError::BaseMismatch);
    }
    let pair = wbar.at(2).expect("length 2").id;
    Ok(sys.joint_with(|y| {
        if y.is_empty() {
            pair
        } else {
            cstar.color(y).id
        }
    }))
}

/// Full quotient route: pick the stem `w̄ ∈ W²` above `c(a₁)` of largest
/// rank (lexicographically least among ties), search a `W/w̄`-coloring of
/// `X`, and amalgamate. Falls back to id 0 when `c₁(a₁) ≠ c₂(a₂)`.
pub fn quotient_amalgam(
    sys: &SpecialSystem,
    w: &DiagramSet,
    budget: u64,
) -> Result<AmalgamResult, AmalgamError> {
    sys.validate_in(w)?;
    let s1 = sys.c1.color(&[sys.a1]);
    if s1 != sys.c2.color(&[sys.a2]) {
        return Ok(AmalgamResult::Witness {
            coloring: sys.joint_with(|_| 0),
            method: Method::Quotient,
        });
    }
    let head = Diagram::new(vec![s1]);
    let mut best: Option<(u64, &Diagram)> = None;
    for stem in w.children(&head) {
        let r = er_rank_finite(w, stem).expect("member");
        if best.is_none_or(|(b, _)| r > b) {
            best = Some((r, stem));
        }
    }
    let (_, stem) = best.ok_or(AmalgamError::StemMismatch)?;
    let u = w.quotient(stem).expect("member with nonempty stem");
    let n = sys.x.len();
    match Problem::new(n, &[], u.language(), &u)?.solve(budget)? {
        SearchOutcome::Found(table) => {
            let cstar = table_to_structure(&sys.x, &table);
            Ok(AmalgamResult::Witness {
                coloring: amalgamate_quotient(sys, w, stem, &cstar)?,
                method: Method::Quotient,
            })
        }
        SearchOutcome::BudgetExhausted => Ok(AmalgamResult::BudgetExhausted),
        SearchOutcome::Unsat(_) => Err(AmalgamError::NoQuotientColoring),
    }
}

/// Amalgam of two structures over their common part, by direct search on the
/// union (a convenience for multi-point extensions; no completeness claim
/// beyond the search budget).
pub fn amalgamate_pair(
    m2: &ColoringStructure,
    m3: &ColoringStructure,
    w: &DiagramSet,
    budget: u64,
) -> Result<AmalgamResult, AmalgamError> {
    let common: Vec<u32> = m2
        .universe()
        .iter()
        .copied()
        .filter(|e| m3.universe().binary_search(e).is_ok())
        .collect();
    let r2 = m2.restrict(&common).expect("common part");
    let r3 = m3.restrict(&common).expect("common part");
    if !agree(&r2, &r3) {
        return Err(AmalgamError::InvalidSystem(
            "structures disagree on the common part",
        ));
    }
    let mut u: Vec<u32> = m2.universe().iter().chain(m3.universe()).copied().collect();
    u.sort_unstable();
    u.dedup();
    if u.len() > crate::search::MAX_POSITIONS {
        return Err(AmalgamError::InvalidSystem("union too large"));
    }
    let joint = ColoringStructure::new(u.clone()).expect("distinct");
    let mut fixed = vec![None; 1 << u.len()];
    for (mask, slot) in fixed.iter_mut().enumerate().skip(1) {
        let s = joint.subset_of_mask(mask as u64);
        let inside =
            |m: &ColoringStructure| s.iter().all(|e| m.universe().binary_search(e).is_ok());
        if inside(m2) {
            *slot = Some(m2.color(&s).id);
        } else if inside(m3) {
            *slot = Some(m3.color(&s).id);
        }
    }
    Ok(
        match Problem::new(u.len(), &fixed, w.language(), w)?.solve(budget)? {
            SearchOutcome::Found(t) => AmalgamResult::Witness {
                coloring: table_to_structure(&u, &t),
                method: Method::Search,
            },
            SearchOutcome::Unsat(cs) => AmalgamResult::Unsat {
                refutations: cs.into_iter().map(|c| refutation(&joint, c)).collect(),
            },
            SearchOutcome::BudgetExhausted => AmalgamResult::BudgetExhausted,
        },
    )
}

/// Whether the witness extends both colorings of the system.
pub fn extends_system(sys: &SpecialSystem, m: &ColoringStructure) -> bool {
    let u1 = with_point(&sys.x, sys.a1);
    let u2 = with_point(&sys.x, sys.a2);
    match (m.restrict(&u1), m.restrict(&u2)) {
        (Ok(r1), Ok(r2)) => agree(&r1, &sys.c1) && agree(&r2, &sys.c2),
        _ => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectraMode {
    Exhaustive,
    Sampled { seed: u64, trials: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Yes,
    /// A system with no amalgam.
    No(Box<SpecialSystem>),
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpectraRow {
    pub lambda: usize,
    pub dap: Verdict,
    pub ap: Verdict,
}

/// Verdicts for every base size `1 ≤ λ ≤ lambda_max`, one after another.
pub fn spectra_scan(
    w: &DiagramSet,
    lambda_max: usize,
    mode: SpectraMode,
    budget: u64,
) -> Result<Vec<SpectraRow>, AmalgamError> {
    (1..=lambda_max)
        .map(|l| spectra_row(w, l, mode, budget))
        .collect()
}

/// AP/DAP verdicts for bases of size `lambda`, with base `0..λ` and fresh
/// points `λ`, `λ+1`.
///
/// Exhaustive mode enumerates every W-coloring of the base and every pair of
/// one-point extensions (unordered, a pair may repeat an extension); the
/// first failing system in that order is the certificate. Sampled mode draws
/// systems by randomized search and can only answer "no" or "unknown",
/// except that a base with no W-coloring at all makes both properties hold.
pub fn spectra_row(
    w: &DiagramSet,
    lambda: usize,
    mode: SpectraMode,
    budget: u64,
) -> Result<SpectraRow, AmalgamError> {
    if lambda + 2 > crate::search::MAX_POSITIONS {
        return Err(AmalgamError::InvalidSystem("base too large"));
    }
    let lang = w.language();
    let x: Vec<u32> = (0..lambda as u32).collect();
    let (a1, a2) = (lambda as u32, lambda as u32 + 1);
    let system = |e1: &[u32], e2: &[u32]| {
        let c1 = table_to_structure(&with_point(&x, a1), e1);
        let c2 = table_to_structure(&with_point(&x, a2), e2);
        SpecialSystem {
            x: x.clone(),
            a1,
            a2,
            c1,
            c2,
        }
    };
    let ext_fixed = |base: &[u32]| {
        let mut f = vec![None; 1 << (lambda + 1)];
        for (mask, slot) in f.iter_mut().enumerate().take(1 << lambda).skip(1) {
            *slot = Some(base[mask]);
        }
        f
    };

    let mut dap: Option<Verdict> = None;
    let mut ap: Option<Verdict> = None;
    let mut incomplete = false;
    let judge = |sys: SpecialSystem,
                 dap: &mut Option<Verdict>,
                 ap: &mut Option<Verdict>,
                 incomplete: &mut bool|
     -> Result<(), AmalgamError> {
        if dap.is_none() {
            match dap_search(&sys, w, budget)? {
                AmalgamResult::Unsat { .. } => *dap = Some(Verdict::No(Box::new(sys.clone()))),
                AmalgamResult::BudgetExhausted => *incomplete = true,
                _ => {}
            }
        }
        if ap.is_none() {
            match ap_search(&sys, w, budget)? {
                AmalgamResult::Unsat { .. } => *ap = Some(Verdict::No(Box::new(sys))),
                AmalgamResult::BudgetExhausted => *incomplete = true,
                _ => {}
            }
        }
        Ok(())
    };

    match mode {
        SpectraMode::Exhaustive => {
            let mut bases = Vec::new();
            let e = Problem::new(lambda, &[], lang, w)?.enumerate(budget, |t| {
                bases.push(t.to_vec());
                true
            })?;
            incomplete |= !e.complete;
            'bases: for base in &bases {
                let mut exts = Vec::new();
                let e = Problem::new(lambda + 1, &ext_fixed(base), lang, w)?.enumerate(
                    budget,
                    |t| {
                        exts.push(t.to_vec());
                        true
                    },
                )?;
                incomplete |= !e.complete;
                for i in 0..exts.len() {
                    for j in i..exts.len() {
                        judge(
                            system(&exts[i], &exts[j]),
                            &mut dap,
                            &mut ap,
                            &mut incomplete,
                        )?;
                        if dap.is_some() && ap.is_some() {
                            break 'bases;
                        }
                    }
                }
            }
            let settle = |v: Option<Verdict>| {
                v.unwrap_or(if incomplete {
                    Verdict::Unknown
                } else {
                    Verdict::Yes
                })
            };
            Ok(SpectraRow {
                lambda,
                dap: settle(dap),
                ap: settle(ap),
            })
        }
        SpectraMode::Sampled { seed, trials } => {
            let mut rng = ChaCha8Rng::seed_from_u64(
                seed ^ (lambda as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            );
            let base_problem = Problem::new(lambda, &[], lang, w)?;
            let mut no_models = false;
            for _ in 0..trials {
                let base = match base_problem.solve_randomized(budget, &mut rng)? {
                    SearchOutcome::Found(t) => t,
                    SearchOutcome::Unsat(_) => {
                        no_models = true;
                        break;
                    }
                    SearchOutcome::BudgetExhausted => continue,
                };
                let ext = Problem::new(lambda + 1, &ext_fixed(&base), lang, w)?;
                let e1 = ext.solve_randomized(budget, &mut rng)?;
                let e2 = ext.solve_randomized(budget, &mut rng)?;
                if let (SearchOutcome::Found(e1), SearchOutcome::Found(e2)) = (e1, e2) {
                    judge(system(&e1, &e2), &mut dap, &mut ap, &mut incomplete)?;
                    if dap.is_some() && ap.is_some() {
                        break;
                    }
                }
            }
            let settle = |v: Option<Verdict>| {
                v.unwrap_or(if no_models {
                    Verdict::Yes
                } else {
                    Verdict::Unknown
                })
            };
            Ok(SpectraRow {
                lambda,
                dap: settle(dap),
                ap: settle(ap),
            })
        }
    }
}

/// Every table of colors for the sets containing both fresh points, checked
/// one by one against `W` via [`in_class`]. Independent of the search engine;
/// meant for confirming refutations on tiny systems.
pub fn brute_force_dap(sys: &SpecialSystem, w: &DiagramSet) -> Option<ColoringStructure> {
    let u = sys.joint_universe();
    let template = sys.joint_with(|_| 0);
    let free: Vec<Vec<u32>> = (1u64..1 << u.len())
        .map(|m| template.subset_of_mask(m))
        .filter(|s| s.contains(&sys.a1) && s.contains(&sys.a2))
        .collect();
    let counts: Vec<u32> = free
        .iter()
        .map(|s| w.language().count(s.len() as u32))
        .collect();
    let mut digits = vec![0u32; free.len()];
    loop {
        let mut m = template.clone();
        for (s, id) in free.iter().zip(&digits) {
            m.set(s, *id).expect("subset");
        }
        if in_class(&m, w).is_ok() {
            return Some(m);
        }
        // odometer increment
        let mut i = 0;
        loop {
            if i == digits.len() {
                return None;
            }
            digits[i] += 1;
            if digits[i] < counts[i] {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagrams::fixtures::*;
    use crate::diagrams::{FullTree, Language};

    /// Builds `c_i` on `X ∪ {a}` from a color function of the subset.
    fn coloring(u: &[u32], mut f: impl FnMut(&[u32]) -> u32) -> ColoringStructure {
        let mut m = ColoringStructure::new(u.to_vec()).unwrap();
        for mask in 1u64..1 << u.len() {
            let s = m.subset_of_mask(mask);
            let id = f(&s);
            m.set(&s, id).unwrap();
        }
        m
    }

    /// X = {0}, a₁ = 1, a₂ = 2; {x} ↦ A, {a_i} ↦ B, {x,a_i} ↦ C.
    fn b_system() -> SpecialSystem {
        let f = |s: &[u32]| match s {
            [0] => 0,
            [_] => 1,
            _ => 0,
        };
        SpecialSystem {
            x: vec![0],
            a1: 1,
            a2: 2,
            c1: coloring(&[0, 1], f),
            c2: coloring(&[0, 2], f),
        }
    }

    #[test]
    fn dap_examples() {
        let t = t1();
        let sys = b_system();
        match dap_search(&sys, &t, 1 << 20).unwrap() {
            AmalgamResult::Unsat { refutations } => {
                // the pair {a1,a2} is tried first; both colors make it
                // monochromatic with diagram (B, ·)
                assert_eq!(refutations.len(), 2);
                for r in &refutations {
                    assert_eq!(r.subset, vec![1, 2]);
                    assert_eq!(r.diagram.at(1), Some(B));
                }
            }
            other => panic!("{other:?}"),
        }
        assert!(brute_force_dap(&sys, &t).is_none());

        let sys = SpecialSystem {
            x: vec![],
            a1: 0,
            a2: 1,
            c1: coloring(&[0], |_| 0),
            c2: coloring(&[1], |_| 1),
        };
        match dap_search(&sys, &t, 1 << 20).unwrap() {
            AmalgamResult::Witness { coloring, method } => {
                assert_eq!(method, Method::Search);
                assert_eq!(coloring.color(&[0, 1]).id, 0);
                assert!(in_class(&coloring, &t).is_ok());
            }
            other => panic!("{other:?}"),
        }

        let full3 = FullTree {
            language: t1_language(),
        }
        .truncate(3);
        let f = |_: &[u32]| 0;
        let sys = SpecialSystem {
            x: vec![0],
            a1: 1,
            a2: 2,
            c1: coloring(&[0, 1], f),
            c2: coloring(&[0, 2], f),
        };
        match dap_search(&sys, &full3, 1 << 20).unwrap() {
            AmalgamResult::Witness { coloring, .. } => {
                assert_eq!(coloring.color(&[1, 2]), C);
                assert_eq!(coloring.color(&[0, 1, 2]), E);
                assert!(in_class(&coloring, &full3).is_ok());
                assert!(extends_system(&sys, &coloring));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ap_examples() {
        let t = t1();
        assert!(matches!(
            ap_search(&b_system(), &t, 1 << 20).unwrap(),
            AmalgamResult::Identified { point: 1, .. }
        ));
        let sys = SpecialSystem {
            x: vec![],
            a1: 0,
            a2: 1,
            c1: coloring(&[0], |_| 0),
            c2: coloring(&[1], |_| 1),
        };
        assert!(matches!(
            ap_search(&sys, &t, 1 << 20).unwrap(),
            AmalgamResult::Witness { .. }
        ));

        // No depth-2 extensions of (A) or (B): every pair must be
        // non-monochromatic. Two points colored A, B with pair colors that
        // differ between the extensions; a₁, a₂ both A force {a₁,a₂} mono.
        let lang = Language::new([(1, 2), (2, 2)], false).unwrap();
        let w = DiagramSet::new(lang, [d(&[]), d(&[A]), d(&[B])]).unwrap();
        let sys = SpecialSystem {
            x: vec![0],
            a1: 1,
            a2: 2,
            c1: coloring(&[0, 1], |s| match s {
                [0] => 1,
                [_] => 0,
                _ => 0,
            }),
            c2: coloring(&[0, 2], |s| match s {
                [0] => 1,
                [_] => 0,
                _ => 1,
            }),
        };
        assert!(matches!(
            ap_search(&sys, &w, 1 << 20).unwrap(),
            AmalgamResult::Unsat { .. }
        ));
    }

    #[test]
    fn invalid_systems() {
        let t = t1();
        let mut sys = b_system();
        sys.a2 = 1;
        assert!(matches!(
            dap_search(&sys, &t, 10),
            Err(AmalgamError::InvalidSystem(_))
        ));
        let mut sys = b_system();
        sys.c2.set(&[0], 1).unwrap();
        assert!(matches!(
            dap_search(&sys, &t, 10),
            Err(AmalgamError::InvalidSystem(_))
        ));
        // (B, D) is not in T1
        let mut sys = b_system();
        sys.x = vec![];
        sys.c1 = coloring(&[1], |_| 1);
        sys.c2 = coloring(&[2], |_| 1);
        assert!(dap_search(&sys, &t, 10).is_ok());
        let mut sys = b_system();
        sys.c1.set(&[0], 1).unwrap();
        sys.c2.set(&[0], 1).unwrap();
        assert!(matches!(
            dap_search(&sys, &t, 10),
            Err(AmalgamError::NotWColoring { which: 1, .. })
        ));
    }

    #[test]
    fn infinite_diagram_amalgams() {
        let full = FullTree {
            language: t1_language(),
        }
        .truncate(5);
        let f = |_: &[u32]| 0;
        let sys = SpecialSystem {
            x: vec![0, 1],
            a1: 2,
            a2: 3,
            c1: coloring(&[0, 1, 2], f),
            c2: coloring(&[0, 1, 3], f),
        };
        let d = InfiniteDiagram::Periodic {
            prefix: vec![0, 1],
            tail: 0,
        };
        let m = amalgamate_infinite(&sys, &full, Some(&d)).unwrap();
        assert_eq!(m.color(&[2, 3]).id, 1);
        assert_eq!(m.color(&[0, 2, 3]).id, 0);
        assert!(in_class(&m, &full).is_ok());
        assert!(extends_system(&sys, &m));
        assert!(matches!(
            amalgamate_infinite(&sys, &full, None),
            Err(AmalgamError::NoConsistentDiagram(4))
        ));

        let sys0 = SpecialSystem {
            x: vec![],
            a1: 0,
            a2: 1,
            c1: coloring(&[0], f),
            c2: coloring(&[1], f),
        };
        let m = amalgamate_infinite(&sys0, &full, Some(&d)).unwrap();
        assert_eq!(m.color(&[0, 1]).id, 1);

        let t = t1();
        let sys = SpecialSystem {
            x: vec![],
            a1: 0,
            a2: 1,
            c1: coloring(&[0], |_| 0),
            c2: coloring(&[1], |_| 1),
        };
        assert!(in_class(&amalgamate_infinite(&sys, &t, None).unwrap(), &t).is_ok());
    }

    #[test]
    fn quotient_amalgams() {
        let t = t1();
        // {x} ↦ A, {a_i} ↦ A, {x, a_i} ↦ D
        let f = |s: &[u32]| if s.len() == 2 { 1 } else { 0 };
        let sys = SpecialSystem {
            x: vec![0],
            a1: 1,
            a2: 2,
            c1: coloring(&[0, 1], f),
            c2: coloring(&[0, 2], f),
        };
        let cstar = coloring(&[0], |_| 0);
        let m = amalgamate_quotient(&sys, &t, &d(&[A, C]), &cstar).unwrap();
        assert_eq!(m.color(&[1, 2]), C);
        assert_eq!(m.color(&[0, 1, 2]), E);
        assert!(in_class(&m, &t).is_ok());

        let sys0 = SpecialSystem {
            x: vec![],
            a1: 0,
            a2: 1,
            c1: coloring(&[0], |_| 0),
            c2: coloring(&[1], |_| 0),
        };
        let empty = ColoringStructure::new(vec![]).unwrap();
        let m = amalgamate_quotient(&sys0, &t, &d(&[A, C]), &empty).unwrap();
        assert_eq!(m.color(&[0, 1]), C);
        assert_eq!(
            amalgamate_quotient(&sys0, &t, &d(&[B]), &empty),
            Err(AmalgamError::StemMismatch)
        );
        assert!(matches!(
            quotient_amalgam(&sys, &t, 1 << 20).unwrap(),
            AmalgamResult::Witness {
                method: Method::Quotient,
                ..
            }
        ));
    }

    /// Two symbols at every arity up to 12; every unary diagram has two
    /// extensions at level 2.
    fn rich_tree(depth: usize) -> DiagramSet {
        FullTree {
            language: Language::uniform(12, 2, false),
        }
        .truncate(depth)
    }

    #[test]
    fn three_cases() {
        let mut oracle = |s: &SpecialSystem| -> Result<AmalgamResult, AmalgamError> {
            ap_search(s, &rich_tree(3), 1 << 20)
        };
        let w = rich_tree(3);

        // case 1: the pairs through a₁ and a₂ get different colors
        let sys = SpecialSystem {
            x: vec![0],
            a1: 1,
            a2: 2,
            c1: coloring(&[0, 1], |_| 0),
            c2: coloring(&[0, 2], |s| if s.len() == 2 { 1 } else { 0 }),
        };
        let r = dap_from_ap(&sys, &w, &mut oracle).unwrap();
        assert_eq!(r.method, Method::Case1);
        assert!(in_class(&r.coloring, &w).is_ok());
        assert!(extends_system(&sys, &r.coloring));

        // case 2: X = {0} cannot realize any diagram of length 3
        let same = |_: &[u32]| 0;
        let sys = SpecialSystem {
            x: vec![0],
            a1: 1,
            a2: 2,
            c1: coloring(&[0, 1], same),
            c2: coloring(&[0, 2], same),
        };
        let r = dap_from_ap(&sys, &w, &mut oracle).unwrap();
        assert_eq!(r.method, Method::Case2);
        assert!(in_class(&r.coloring, &w).is_ok());
        assert!(extends_system(&sys, &r.coloring));

        // case 3: depth-2 tree; {0,a} realizes (A,C), {0,1} realizes (A,D),
        // and the B-colored point 2 leaves room for a non-monochromatic 4-set
        let w2 = rich_tree(2);
        let mut oracle2 = |s: &SpecialSystem| -> Result<AmalgamResult, AmalgamError> {
            ap_search(s, &rich_tree(2), 1 << 20)
        };
        let col = |s: &[u32]| match s {
            [2] => 1,
            [_] => 0,
            [0, 3] | [1, 3] | [0, 4] | [1, 4] => 0,
            [_, _] => 1,
            _ => 0,
        };
        let sys = SpecialSystem {
            x: vec![0, 1, 2],
            a1: 3,
            a2: 4,
            c1: coloring(&[0, 1, 2, 3], col),
            c2: coloring(&[0, 1, 2, 4], col),
        };
        sys.validate_in(&w2).unwrap();
        let r = dap_from_ap(&sys, &w2, &mut oracle2).unwrap();
        assert_eq!(r.method, Method::Case3);
        let (set, original, temporary) = r.recolored.clone().unwrap();
        assert!(set.contains(&3));
        assert_ne!(original, temporary);
        assert!(in_class(&r.coloring, &w2).is_ok());
        assert!(extends_system(&sys, &r.coloring));

        // hypotheses are checked
        let t = t1();
        assert!(matches!(
            dap_from_ap(&b_system(), &t, &mut oracle),
            Err(AmalgamError::SingleSymbolArity(3))
        ));
    }

    #[test]
    fn spectra_examples() {
        let t = t1();
        let rows = spectra_scan(&t, 2, SpectraMode::Exhaustive, 1 << 22).unwrap();
        assert_eq!(rows.len(), 2);
        match &rows[0].dap {
            Verdict::No(sys) => {
                assert_eq!(**sys, b_system());
                assert!(!dap_search(sys, &t, 1 << 20).unwrap().is_sat());
                assert!(brute_force_dap(sys, &t).is_none());
            }
            other => panic!("{other:?}"),
        }

        let one = FullTree {
            language: Language::uniform(1, 1, false),
        }
        .truncate(6);
        let rows = spectra_scan(&one, 2, SpectraMode::Exhaustive, 1 << 22).unwrap();
        assert!(rows
            .iter()
            .all(|r| r.dap == Verdict::Yes && r.ap == Verdict::Yes));

        let mode = SpectraMode::Sampled {
            seed: 42,
            trials: 20,
        };
        let a = spectra_scan(&t, 2, mode, 1 << 20).unwrap();
        let b = spectra_scan(&t, 2, mode, 1 << 20).unwrap();
        assert_eq!(a, b);
        assert!(matches!(a[0].dap, Verdict::No(_) | Verdict::Unknown));
    }

    #[test]
    fn pair_amalgam() {
        let t = t1();
        let m2 = coloring(&[0, 1], |s| if s.len() == 1 { 0 } else { 1 });
        let m3 = coloring(&[0, 2], |s| if s == [2] { 1 } else { 0 });
        let r = amalgamate_pair(&m2, &m3, &t, 1 << 20).unwrap();
        match r {
            AmalgamResult::Witness { coloring, .. } => assert!(in_class(&coloring, &t).is_ok()),
            other => panic!("{other:?}"),
        }
    }
}
