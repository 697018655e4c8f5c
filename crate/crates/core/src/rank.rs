//! Existence ranks of allowed diagrams.
//!
//! On a finite tree the existence rank of a node is its height: leaves have
//! rank 0 and every other node sits one above its highest child.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::diagrams::{AllowedDiagrams, Diagram, DiagramSet, FinitelyBranching, RelSymbol};
use crate::ordinal::{bound_index, CardinalExpr, Ordinal};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RankError {
    #[error("{0} is not a member")]
    NotMember(Diagram),
    #[error("rank of the root is {rank}, below the requested chain length {k}")]
    RankTooSmall { rank: u64, k: u64 },
    #[error("budget must be positive")]
    ZeroBudget,
}

/// Existence rank of every member of a finite [`DiagramSet`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankTable {
    ranks: BTreeMap<Diagram, Ordinal>,
}

impl RankTable {
    pub fn compute(w: &DiagramSet) -> Self {
        let heights = heights(w);
        RankTable {
            ranks: heights
                .into_iter()
                .map(|(d, h)| (d.clone(), Ordinal::nat(h)))
                .collect(),
        }
    }

    /// Builds a table from an arbitrary rank assignment, e.g. a closed form.
    pub fn from_fn(w: &DiagramSet, mut rank: impl FnMut(&Diagram) -> Ordinal) -> Self {
        RankTable {
            ranks: w.members().map(|d| (d.clone(), rank(d))).collect(),
        }
    }

    pub fn get(&self, w: &Diagram) -> Option<&Ordinal> {
        self.ranks.get(w)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Diagram, &Ordinal)> + '_ {
        self.ranks.iter()
    }

    /// First member (in order) where `rank(w) ≠ max over children of
    /// rank(child)+1`, with leaves required to be 0.
    pub fn check(&self, w: &DiagramSet) -> Result<(), Diagram> {
        for d in w.members() {
            let expected = w
                .children(d)
                .filter_map(|c| self.ranks.get(c))
                .map(Ordinal::succ)
                .max()
                .unwrap_or_else(Ordinal::zero);
            if self.ranks.get(d) != Some(&expected) {
                return Err(d.clone());
            }
        }
        Ok(())
    }
}

/// Heights of all members. Members are visited in reverse lexicographic order,
/// so every node is final before its parent reads it.
fn heights(w: &DiagramSet) -> BTreeMap<&Diagram, u64> {
    let mut h: BTreeMap<&Diagram, u64> = w.members().map(|d| (d, 0)).collect();
    for d in w.members().rev() {
        let mine = h[d];
        if let Some(parent) = d.parent() {
            if let Some(p) = h.get_mut(&parent) {
                *p = (*p).max(mine + 1);
            }
        }
    }
    h
}

/// `ER(w; W)` on a finite tree.
pub fn er_rank(w_set: &DiagramSet, w: &Diagram) -> Result<Ordinal, RankError> {
    er_rank_finite(w_set, w).map(Ordinal::nat)
}

/// As [`er_rank`], as a plain integer.
pub fn er_rank_finite(w_set: &DiagramSet, w: &Diagram) -> Result<u64, RankError> {
    if !w_set.contains(w.symbols()) {
        return Err(RankError::NotMember(w.clone()));
    }
    // Only the subtree above w matters.
    let mut best = 0u64;
    let base = w.len();
    let mut h: BTreeMap<&Diagram, u64> = BTreeMap::new();
    let sub: Vec<&Diagram> = w_set.descendants(w).collect();
    for d in sub.iter().rev() {
        let mine = h.get(*d).copied().unwrap_or(0);
        if d.len() == base + 1 {
            best = best.max(mine + 1);
        } else if let Some(parent) = d.parent() {
            let p = sub
                .binary_search_by(|x| (*x).cmp(&parent))
                .map(|i| sub[i])
                .expect("prefix-closed");
            let e = h.entry(p).or_insert(0);
            *e = (*e).max(mine + 1);
        }
    }
    Ok(best)
}

/// A chain `∅ = w₀ ⊂ w₁ ⊂ … ⊂ w_k` whose ranks drop by exactly one per step.
/// At each step the lexicographically least eligible child is taken.
pub fn rank_witness_chain(w_set: &DiagramSet, k: u64) -> Result<Vec<Diagram>, RankError> {
    let h = heights(w_set);
    let root = Diagram::empty();
    let top = *h.get(&root).ok_or(RankError::NotMember(root.clone()))?;
    if top < k {
        return Err(RankError::RankTooSmall { rank: top, k });
    }
    let mut chain = alloc::vec![root];
    for j in 1..=k {
        let cur = chain.last().expect("nonempty");
        let next = w_set
            .children(cur)
            .find(|c| h[*c] == top - j)
            .expect("a node of rank r > 0 has a child of rank r-1")
            .clone();
        chain.push(next);
    }
    Ok(chain)
}

/// Symbolic upper bound `ℶ_{β + n·k + k(k−1)/2}(|L|)` on models all of whose
/// monochromatic diagrams extend `w` (with `n = |w|`), where the rank of `w`
/// is below `rank_strict_bound = β + k`.
pub fn max_model_bound(
    w: &Diagram,
    rank_strict_bound: &Ordinal,
    langsize: CardinalExpr,
) -> CardinalExpr {
    let (beta, k) = rank_strict_bound.split();
    CardinalExpr::beth(bound_index(&beta, w.len() as u64, k), langsize).normalize()
}

/// A total map `n ↦ d(n)` from positive integers to symbols of arity `n`.
#[derive(Clone)]
pub enum InfiniteDiagram {
    /// `d(n) = prefix[n-1]` while defined, then `tail` forever.
    Periodic { prefix: Vec<u32>, tail: u32 },
    /// Symbol ids produced by a function of the arity.
    Generated(Arc<dyn Fn(u32) -> u32 + Send + Sync>),
}

impl InfiniteDiagram {
    /// `d(n) = id 0` for every `n`.
    pub fn constant_zero() -> Self {
        InfiniteDiagram::Periodic {
            prefix: Vec::new(),
            tail: 0,
        }
    }

    /// `d(n)` for `n ≥ 1`.
    pub fn at(&self, n: u32) -> RelSymbol {
        let id = match self {
            InfiniteDiagram::Periodic { prefix, tail } => {
                prefix.get(n as usize - 1).copied().unwrap_or(*tail)
            }
            InfiniteDiagram::Generated(f) => f(n),
        };
        RelSymbol::new(n, id)
    }

    /// `d↾[n]`.
    pub fn prefix(&self, n: usize) -> Diagram {
        Diagram::new((1..=n as u32).map(|k| self.at(k)).collect())
    }

    pub fn consistent_with<T>(&self, tree: &T, depth: usize) -> bool
    where
        T: AllowedDiagrams<Symbol = RelSymbol> + ?Sized,
    {
        infinite_diagram_consistent(tree, |n| self.at(n), depth)
    }
}

impl fmt::Debug for InfiniteDiagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InfiniteDiagram::Periodic { prefix, tail } => f
                .debug_struct("Periodic")
                .field("prefix", prefix)
                .field("tail", tail)
                .finish(),
            InfiniteDiagram::Generated(_) => f.write_str("Generated(..)"),
        }
    }
}

/// Whether `d↾[n]` is allowed for every `n ≤ depth`, where `d(n)` is produced
/// by `gen(n)`. Works for any symbol type, so it also covers the intensional
/// W(α) family.
pub fn infinite_diagram_consistent<T, F>(tree: &T, mut gen: F, depth: usize) -> bool
where
    T: AllowedDiagrams + ?Sized,
    F: FnMut(u32) -> T::Symbol,
{
    let mut w = Vec::with_capacity(depth);
    if !tree.allows(&w) {
        return false;
    }
    for n in 1..=depth as u32 {
        w.push(gen(n));
        if !tree.allows(&w) {
            return false;
        }
    }
    true
}

/// Outcome of a budgeted rank exploration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankVerdict {
    Exact(u64),
    AtLeast(u64),
}

/// Rank of the root of a finitely branching tree, exploring at most `budget`
/// levels. A branch of length `budget` proves rank ≥ `budget`; for finitely
/// branching trees unbounded rank is the same as an infinite branch.
pub fn has_infinite_rank_surrogate<T>(tree: &T, budget: u64) -> Result<RankVerdict, RankError>
where
    T: FinitelyBranching,
    T::Symbol: Clone,
{
    if budget == 0 {
        return Err(RankError::ZeroBudget);
    }
    fn height<T: FinitelyBranching>(tree: &T, w: &mut Vec<T::Symbol>, budget: u64) -> Option<u64>
    where
        T::Symbol: Clone,
    {
        if w.len() as u64 >= budget {
            return None;
        }
        let mut best = 0;
        for s in tree.extensions(w) {
            w.push(s);
            let h = height(tree, w, budget);
            w.pop();
            best = best.max(h? + 1);
        }
        Some(best)
    }
    let mut w = Vec::new();
    Ok(match height(tree, &mut w, budget) {
        Some(h) if h < budget => RankVerdict::Exact(h),
        _ => RankVerdict::AtLeast(budget),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagrams::fixtures::*;
    use crate::diagrams::{FullTree, Language};
    use proptest::prelude::*;
    use std::vec;

    /// Direct recursion over the definition, independent of the table code.
    fn naive(w_set: &DiagramSet, w: &Diagram) -> u64 {
        w_set
            .members()
            .filter(|u| u.len() == w.len() + 1 && w.is_prefix_of(u))
            .map(|u| naive(w_set, u) + 1)
            .max()
            .unwrap_or(0)
    }

    #[test]
    fn t1_ranks() {
        let t = t1();
        assert_eq!(er_rank(&t, &d(&[A, C, E])).unwrap(), Ordinal::nat(0));
        assert_eq!(er_rank(&t, &d(&[A])).unwrap(), Ordinal::nat(2));
        assert_eq!(er_rank(&t, &Diagram::empty()).unwrap(), Ordinal::nat(3));
        assert_eq!(er_rank(&t, &d(&[B])).unwrap(), Ordinal::nat(0));
        assert_eq!(
            er_rank(&t, &d(&[B, C])),
            Err(RankError::NotMember(d(&[B, C])))
        );
        let table = RankTable::compute(&t);
        assert_eq!(table.check(&t), Ok(()));
    }

    #[test]
    fn witness_chains() {
        let t = t1();
        assert_eq!(
            rank_witness_chain(&t, 3).unwrap(),
            vec![d(&[]), d(&[A]), d(&[A, C]), d(&[A, C, E])]
        );
        assert_eq!(rank_witness_chain(&t, 0).unwrap(), vec![d(&[])]);
        let chain = DiagramSet::new(t1_language(), [d(&[]), d(&[A]), d(&[A, C])]).unwrap();
        assert_eq!(
            rank_witness_chain(&chain, 2).unwrap(),
            vec![d(&[]), d(&[A]), d(&[A, C])]
        );
        assert_eq!(
            rank_witness_chain(&chain, 3),
            Err(RankError::RankTooSmall { rank: 2, k: 3 })
        );
    }

    #[test]
    fn bounds() {
        let l = CardinalExpr::named("|L|");
        assert_eq!(max_model_bound(&d(&[]), &Ordinal::one(), l.clone()), l);
        assert_eq!(
            max_model_bound(&d(&[]), &Ordinal::nat(3), l.clone()),
            CardinalExpr::beth(Ordinal::nat(3), l.clone())
        );
        let w_plus_1 = Ordinal::omega().succ();
        assert_eq!(
            max_model_bound(&d(&[A, C]), &w_plus_1, l.clone()),
            CardinalExpr::beth(Ordinal::omega() + Ordinal::nat(2), l)
        );
    }

    #[test]
    fn infinite_diagrams() {
        let t = t1();
        let dd = InfiniteDiagram::Periodic {
            prefix: vec![0, 0, 0],
            tail: 0,
        };
        assert!(dd.consistent_with(&t, 3));
        assert!(!dd.consistent_with(&t, 4));
        let full = FullTree {
            language: Language::uniform(1, 1, false),
        };
        assert!(InfiniteDiagram::constant_zero().consistent_with(&full, 50));
        let gen = InfiniteDiagram::Generated(Arc::new(|n| n % 2));
        assert_eq!(gen.prefix(3), Diagram::from_ids(&[1, 0, 1]));
    }

    #[test]
    fn surrogate() {
        assert_eq!(
            has_infinite_rank_surrogate(&t1(), 10),
            Ok(RankVerdict::Exact(3))
        );
        let full = FullTree {
            language: Language::uniform(1, 1, false),
        };
        assert_eq!(
            has_infinite_rank_surrogate(&full, 6),
            Ok(RankVerdict::AtLeast(6))
        );
        assert_eq!(
            has_infinite_rank_surrogate(&t1(), 3),
            Ok(RankVerdict::AtLeast(3))
        );
        assert_eq!(
            has_infinite_rank_surrogate(&t1(), 0),
            Err(RankError::ZeroBudget)
        );
    }

    fn arb_tree() -> impl Strategy<Value = DiagramSet> {
        proptest::collection::vec(proptest::collection::vec(0u32..2, 1..5), 0..12).prop_map(
            |paths| {
                DiagramSet::prefix_closure(
                    Language::uniform(5, 2, false),
                    paths.iter().map(|p| Diagram::from_ids(p)),
                )
                .unwrap()
            },
        )
    }

    proptest! {
        #[test]
        fn matches_naive(t in arb_tree()) {
            let table = RankTable::compute(&t);
            prop_assert_eq!(table.check(&t), Ok(()));
            for w in t.members() {
                let r = er_rank_finite(&t, w).unwrap();
                prop_assert_eq!(r, naive(&t, w));
                prop_assert_eq!(table.get(w), Some(&Ordinal::nat(r)));
                // leaf law and strict decrease
                prop_assert_eq!(r == 0, t.children(w).next().is_none());
                for c in t.children(w) {
                    prop_assert!(er_rank_finite(&t, c).unwrap() < r);
                }
            }
        }

        #[test]
        fn prune_and_quotient_laws(t in arb_tree()) {
            for w in t.members() {
                let rw = er_rank_finite(&t, w).unwrap();
                for m in 0..=w.len() {
                    let u = w.prefix(m);
                    let p = t.prune(core::slice::from_ref(&u)).unwrap();
                    prop_assert_eq!(er_rank_finite(&p, w).unwrap(), rw);
                    if m > 0 {
                        let q = t.quotient(&u).unwrap();
                        let img = crate::diagrams::quotient_image(w, m);
                        prop_assert!(er_rank_finite(&q, &img).unwrap() >= rw);
                    }
                }
            }
        }

        #[test]
        fn chain_terminates_at_a_leaf(t in arb_tree()) {
            let top = er_rank_finite(&t, &Diagram::empty()).unwrap();
            let chain = rank_witness_chain(&t, top).unwrap();
            prop_assert_eq!(chain.len() as u64, top + 1);
            prop_assert_eq!(er_rank_finite(&t, chain.last().unwrap()).unwrap(), 0);
            prop_assert_eq!(chain.last().unwrap().len() as u64, top);
        }
    }
}
