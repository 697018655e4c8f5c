//! Relational languages, diagrams and prefix-closed diagram sets.
//!
//! A [`Diagram`] is a finite sequence whose `k`-th entry (1-based) is a
//! relation symbol of arity `k`. A [`DiagramSet`] is a finite, prefix-closed
//! set of diagrams, i.e. a finite tree rooted at the empty diagram. Members
//! are kept in lexicographic order, which puts every diagram immediately
//! before all of its proper extensions.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::borrow::Borrow;
use core::fmt;
use core::ops::Bound;

/// A relation symbol, identified by its arity and its index among the
/// symbols of that arity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelSymbol {
    pub arity: u32,
    pub id: u32,
}

impl RelSymbol {
    pub const fn new(arity: u32, id: u32) -> Self {
        RelSymbol { arity, id }
    }
}

impl fmt::Display for RelSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.arity, self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LanguageError {
    #[error("arity {0} has no symbols")]
    EmptyArity(u32),
    #[error("tracked arities must be 1..=n without gaps (missing {0})")]
    Gap(u32),
}

/// Per-arity symbol counts.
///
/// Counts are tracked for arities `1..=max_arity`. Beyond that, a language
/// with `repeats` set reuses the count of `max_arity`; otherwise every further
/// arity has exactly one symbol (id 0), so every arity stays inhabited.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Language {
    counts: BTreeMap<u32, u32>,
    repeats: bool,
}

impl Language {
    pub fn new(
        counts: impl IntoIterator<Item = (u32, u32)>,
        repeats: bool,
    ) -> Result<Self, LanguageError> {
        let counts: BTreeMap<u32, u32> = counts.into_iter().collect();
        for (expected, (&arity, &count)) in (1u32..).zip(counts.iter()) {
            if arity != expected {
                return Err(LanguageError::Gap(expected));
            }
            if count == 0 {
                return Err(LanguageError::EmptyArity(arity));
            }
        }
        Ok(Language { counts, repeats })
    }

    /// `count` symbols at each arity `1..=max_arity`.
    pub fn uniform(max_arity: u32, count: u32, repeats: bool) -> Self {
        Language::new((1..=max_arity).map(|a| (a, count.max(1))), repeats)
            .expect("uniform language is well formed")
    }

    pub fn max_arity(&self) -> u32 {
        self.counts.keys().next_back().copied().unwrap_or(0)
    }

    pub fn repeats(&self) -> bool {
        self.repeats
    }

    /// Tracked `(arity, count)` pairs.
    pub fn tracked(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.counts.iter().map(|(a, c)| (*a, *c))
    }

    pub fn count(&self, arity: u32) -> u32 {
        if arity == 0 {
            return 0;
        }
        match self.counts.get(&arity) {
            Some(c) => *c,
            None if self.repeats => self.counts.values().next_back().copied().unwrap_or(1),
            None => 1,
        }
    }

    pub fn symbols(&self, arity: u32) -> impl Iterator<Item = RelSymbol> {
        (0..self.count(arity)).map(move |id| RelSymbol { arity, id })
    }

    pub fn contains(&self, s: RelSymbol) -> bool {
        s.id < self.count(s.arity)
    }

    /// The language `L/w̄` for a stem of length `k`: arity `n` gets the symbols
    /// of arity `n + k`.
    pub fn shift(&self, k: u32) -> Language {
        let counts = self
            .counts
            .iter()
            .filter(|(a, _)| **a > k)
            .map(|(a, c)| (*a - k, *c))
            .collect();
        let mut out = Language {
            counts,
            repeats: self.repeats,
        };
        if out.counts.is_empty() && self.repeats && k > 0 {
            // keep the repeated tail count visible after shifting past it
            out.counts.insert(1, self.count(k + 1));
        }
        out
    }

    /// Total number of symbols at tracked arities.
    pub fn tracked_size(&self) -> u64 {
        self.counts.values().map(|c| *c as u64).sum()
    }
}

/// A function `[n] → R` with `w(k)` of arity `k`, stored as a sequence.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Diagram(Vec<RelSymbol>);

impl Diagram {
    pub fn empty() -> Self {
        Diagram(Vec::new())
    }

    /// No arity check; see [`Diagram::is_well_formed`].
    pub fn new(symbols: Vec<RelSymbol>) -> Self {
        Diagram(symbols)
    }

    /// Diagram whose `k`-th symbol is `RelSymbol { arity: k, id: ids[k-1] }`.
    pub fn from_ids(ids: &[u32]) -> Self {
        Diagram(
            ids.iter()
                .enumerate()
                .map(|(i, &id)| RelSymbol::new(i as u32 + 1, id))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[RelSymbol] {
        &self.0
    }

    /// `w(k)` for `1 ≤ k ≤ len`.
    pub fn at(&self, k: usize) -> Option<RelSymbol> {
        k.checked_sub(1).and_then(|i| self.0.get(i).copied())
    }

    pub fn last(&self) -> Option<RelSymbol> {
        self.0.last().copied()
    }

    pub fn prefix(&self, m: usize) -> Diagram {
        Diagram(self.0[..m.min(self.0.len())].to_vec())
    }

    pub fn parent(&self) -> Option<Diagram> {
        if self.0.is_empty() {
            None
        } else {
            Some(self.prefix(self.0.len() - 1))
        }
    }

    pub fn is_prefix_of(&self, other: &Diagram) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn comparable(&self, other: &Diagram) -> bool {
        self.is_prefix_of(other) || other.is_prefix_of(self)
    }

    pub fn extended(&self, s: RelSymbol) -> Diagram {
        let mut v = self.0.clone();
        v.push(s);
        Diagram(v)
    }

    /// Concatenation `self ⌢ tail`, re-arity-ing `tail` so the result is
    /// well formed when both pieces are.
    pub fn concat_shifted(&self, tail: &Diagram) -> Diagram {
        let k = self.0.len() as u32;
        let mut v = self.0.clone();
        v.extend(tail.0.iter().map(|s| RelSymbol::new(s.arity + k, s.id)));
        Diagram(v)
    }

    pub fn is_well_formed(&self) -> bool {
        self.0
            .iter()
            .enumerate()
            .all(|(i, s)| s.arity == i as u32 + 1)
    }
}

impl Borrow<[RelSymbol]> for Diagram {
    fn borrow(&self) -> &[RelSymbol] {
        &self.0
    }
}

impl From<Vec<RelSymbol>> for Diagram {
    fn from(v: Vec<RelSymbol>) -> Self {
        Diagram(v)
    }
}

impl fmt::Display for Diagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{s}")?;
        }
        f.write_str("]")
    }
}

impl fmt::Debug for Diagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Why a candidate diagram set is not a set of allowed diagrams.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Violation {
    #[error("the empty diagram is missing")]
    MissingRoot,
    #[error("{diagram}: prefix of length {} is missing", .diagram.len() - 1)]
    MissingPrefix { diagram: Diagram },
    #[error("{diagram}: position {position} holds a symbol of arity {arity}")]
    ArityMismatch {
        diagram: Diagram,
        position: usize,
        arity: u32,
    },
    #[error("{diagram}: position {position} holds a symbol outside the language")]
    UnknownSymbol { diagram: Diagram, position: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DiagramError {
    #[error("{0} is not a member")]
    NotMember(Diagram),
    #[error("quotient needs a nonempty stem")]
    EmptyStem,
    #[error(transparent)]
    Invalid(#[from] Violation),
}

/// Something that decides membership of finite sequences in a tree of
/// allowed diagrams.
pub trait AllowedDiagrams {
    type Symbol;

    fn allows(&self, w: &[Self::Symbol]) -> bool;
}

/// A tree whose one-step extensions can be listed.
pub trait FinitelyBranching: AllowedDiagrams {
    /// Every `s` with `w ⌢ s` allowed, assuming `w` is allowed.
    fn extensions(&self, w: &[Self::Symbol]) -> Vec<Self::Symbol>;
}

/// A finite set of allowed diagrams over a [`Language`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagramSet {
    language: Language,
    members: BTreeSet<Diagram>,
}

impl DiagramSet {
    /// Builds and validates.
    pub fn new(
        language: Language,
        members: impl IntoIterator<Item = Diagram>,
    ) -> Result<Self, Violation> {
        let set = DiagramSet::from_parts(language, members);
        set.validate()?;
        Ok(set)
    }

    /// Builds without validating; use [`DiagramSet::validate`] afterwards.
    pub fn from_parts(language: Language, members: impl IntoIterator<Item = Diagram>) -> Self {
        DiagramSet {
            language,
            members: members.into_iter().collect(),
        }
    }

    /// Adds every prefix of every given diagram.
    pub fn prefix_closure(
        language: Language,
        diagrams: impl IntoIterator<Item = Diagram>,
    ) -> Result<Self, Violation> {
        let mut members = BTreeSet::new();
        members.insert(Diagram::empty());
        for d in diagrams {
            for m in 1..=d.len() {
                members.insert(d.prefix(m));
            }
        }
        DiagramSet::new(language, members)
    }

    pub fn validate(&self) -> Result<(), Violation> {
        if !self.members.contains(&Diagram::empty()) {
            return Err(Violation::MissingRoot);
        }
        for w in &self.members {
            for (i, s) in w.symbols().iter().enumerate() {
                if s.arity != i as u32 + 1 {
                    return Err(Violation::ArityMismatch {
                        diagram: w.clone(),
                        position: i + 1,
                        arity: s.arity,
                    });
                }
                if !self.language.contains(*s) {
                    return Err(Violation::UnknownSymbol {
                        diagram: w.clone(),
                        position: i + 1,
                    });
                }
            }
            if let Some(parent) = w.parent() {
                if !self.members.contains(&parent) {
                    return Err(Violation::MissingPrefix { diagram: w.clone() });
                }
            }
        }
        Ok(())
    }

    pub fn language(&self) -> &Language {
        &self.language
    }

    pub fn members(&self) -> impl DoubleEndedIterator<Item = &Diagram> + '_ {
        self.members.iter()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, w: &[RelSymbol]) -> bool {
        self.members.contains(w)
    }

    pub fn depth(&self) -> usize {
        self.members.iter().map(Diagram::len).max().unwrap_or(0)
    }

    /// Members of length `n`.
    pub fn level(&self, n: usize) -> impl Iterator<Item = &Diagram> + '_ {
        self.members.iter().filter(move |w| w.len() == n)
    }

    /// Proper extensions of `w`, in order.
    pub fn descendants<'a>(&'a self, w: &'a Diagram) -> impl Iterator<Item = &'a Diagram> + 'a {
        self.members
            .range::<Diagram, _>((Bound::Excluded(w), Bound::Unbounded))
            .take_while(move |u| w.is_prefix_of(u))
    }

    /// One-step extensions of `w`, in order.
    pub fn children<'a>(&'a self, w: &'a Diagram) -> impl Iterator<Item = &'a Diagram> + 'a {
        let n = w.len() + 1;
        self.descendants(w).filter(move |u| u.len() == n)
    }

    /// `W_S`: the members comparable with some element of `keep`.
    pub fn prune(&self, keep: &[Diagram]) -> Result<DiagramSet, DiagramError> {
        if let Some(missing) = keep.iter().find(|u| !self.members.contains(*u)) {
            return Err(DiagramError::NotMember(missing.clone()));
        }
        let members = self
            .members
            .iter()
            .filter(|w| keep.iter().any(|u| w.comparable(u)))
            .cloned()
            .collect();
        Ok(DiagramSet {
            language: self.language.clone(),
            members,
        })
    }

    /// `W/w̄`: the subtree above `stem` with the stem removed, over the
    /// shifted language.
    pub fn quotient(&self, stem: &Diagram) -> Result<DiagramSet, DiagramError> {
        if stem.is_empty() {
            return Err(DiagramError::EmptyStem);
        }
        if !self.members.contains(stem) {
            return Err(DiagramError::NotMember(stem.clone()));
        }
        let k = stem.len();
        let mut members = BTreeSet::new();
        members.insert(Diagram::empty());
        members.extend(self.descendants(stem).map(|w| quotient_image(w, k)));
        Ok(DiagramSet {
            language: self.language.shift(k as u32),
            members,
        })
    }
}

/// `w/w̄` for a stem of length `k`: the entries after position `k`, with
/// arities shifted down by `k`.
pub fn quotient_image(w: &Diagram, k: usize) -> Diagram {
    Diagram(
        w.symbols()[k..]
            .iter()
            .map(|s| RelSymbol::new(s.arity - k as u32, s.id))
            .collect(),
    )
}

impl AllowedDiagrams for DiagramSet {
    type Symbol = RelSymbol;

    fn allows(&self, w: &[RelSymbol]) -> bool {
        self.contains(w)
    }
}

impl FinitelyBranching for DiagramSet {
    fn extensions(&self, w: &[RelSymbol]) -> Vec<RelSymbol> {
        let w = Diagram(w.to_vec());
        self.children(&w).filter_map(Diagram::last).collect()
    }
}

/// Every well-formed diagram over a language (the full tree). Its depth is
/// unbounded, since untracked arities always carry at least one symbol.
#[derive(Debug, Clone)]
pub struct FullTree {
    pub language: Language,
}

impl FullTree {
    /// All members of length at most `depth`.
    pub fn truncate(&self, depth: usize) -> DiagramSet {
        let mut members = BTreeSet::new();
        let mut frontier = alloc::vec![Diagram::empty()];
        while let Some(w) = frontier.pop() {
            if w.len() < depth {
                for s in self.language.symbols(w.len() as u32 + 1) {
                    frontier.push(w.extended(s));
                }
            }
            members.insert(w);
        }
        DiagramSet {
            language: self.language.clone(),
            members,
        }
    }
}

impl AllowedDiagrams for FullTree {
    type Symbol = RelSymbol;

    fn allows(&self, w: &[RelSymbol]) -> bool {
        w.iter()
            .enumerate()
            .all(|(i, s)| s.arity == i as u32 + 1 && self.language.contains(*s))
    }
}

impl FinitelyBranching for FullTree {
    fn extensions(&self, w: &[RelSymbol]) -> Vec<RelSymbol> {
        self.language.symbols(w.len() as u32 + 1).collect()
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;
    use std::vec;

    fn set(ds: &[&[RelSymbol]]) -> BTreeSet<Diagram> {
        ds.iter().map(|s| d(s)).collect()
    }

    #[test]
    fn validate_examples() {
        let lang = t1_language();
        let ok = DiagramSet::from_parts(lang.clone(), [d(&[]), d(&[A]), d(&[A, C])]);
        assert_eq!(ok.validate(), Ok(()));

        let broken = DiagramSet::from_parts(lang.clone(), [d(&[]), d(&[A, C])]);
        assert_eq!(
            broken.validate(),
            Err(Violation::MissingPrefix {
                diagram: d(&[A, C])
            })
        );

        let arity = DiagramSet::from_parts(lang.clone(), [d(&[]), d(&[C])]);
        assert_eq!(
            arity.validate(),
            Err(Violation::ArityMismatch {
                diagram: d(&[C]),
                position: 1,
                arity: 2
            })
        );

        let rootless = DiagramSet::from_parts(lang.clone(), [d(&[A])]);
        assert_eq!(rootless.validate(), Err(Violation::MissingRoot));

        let unknown = DiagramSet::from_parts(lang, [d(&[]), d(&[RelSymbol::new(1, 7)])]);
        assert!(matches!(
            unknown.validate(),
            Err(Violation::UnknownSymbol { position: 1, .. })
        ));
    }

    #[test]
    fn level_examples() {
        let t = t1();
        let l1: BTreeSet<Diagram> = t.level(1).cloned().collect();
        assert_eq!(l1, set(&[&[A], &[B]]));
        let l3: BTreeSet<Diagram> = t.level(3).cloned().collect();
        assert_eq!(l3, set(&[&[A, C, E]]));
        let l0: Vec<&Diagram> = t.level(0).collect();
        assert_eq!(l0, vec![&Diagram::empty()]);
    }

    #[test]
    fn prune_examples() {
        let t = t1();
        let p = t.prune(&[d(&[A])]).unwrap();
        let expect = set(&[&[], &[A], &[A, C], &[A, D], &[A, C, E]]);
        assert_eq!(p.members().cloned().collect::<BTreeSet<_>>(), expect);

        assert_eq!(t.prune(&[Diagram::empty()]).unwrap(), t);

        let p = t.prune(&[d(&[A, C, E])]).unwrap();
        let expect = set(&[&[], &[A], &[A, C], &[A, C, E]]);
        assert_eq!(p.members().cloned().collect::<BTreeSet<_>>(), expect);

        assert_eq!(
            t.prune(&[d(&[B, C])]),
            Err(DiagramError::NotMember(d(&[B, C])))
        );
    }

    #[test]
    fn quotient_examples() {
        let t = t1();
        let q = t.quotient(&d(&[A])).unwrap();
        // shifted: C,D become unary (ids 0,1), E becomes binary id 0
        let c1 = RelSymbol::new(1, 0);
        let d1 = RelSymbol::new(1, 1);
        let e2 = RelSymbol::new(2, 0);
        assert_eq!(
            q.members().cloned().collect::<BTreeSet<_>>(),
            set(&[&[], &[c1], &[d1], &[c1, e2]])
        );
        assert_eq!(q.language().count(1), 2);
        assert_eq!(q.language().count(2), 1);
        q.validate().unwrap();

        let q = t.quotient(&d(&[A, C])).unwrap();
        let e1 = RelSymbol::new(1, 0);
        assert_eq!(
            q.members().cloned().collect::<BTreeSet<_>>(),
            set(&[&[], &[e1]])
        );

        let chain = DiagramSet::new(t1_language(), [d(&[]), d(&[A])]).unwrap();
        let q = chain.quotient(&d(&[A])).unwrap();
        assert_eq!(
            q.members().cloned().collect::<Vec<_>>(),
            vec![Diagram::empty()]
        );

        assert_eq!(t.quotient(&Diagram::empty()), Err(DiagramError::EmptyStem));
        assert!(matches!(
            t.quotient(&d(&[B, D])),
            Err(DiagramError::NotMember(_))
        ));
    }

    #[test]
    fn children_are_contiguous() {
        let t = t1();
        let a = d(&[A]);
        let kids: Vec<&Diagram> = t.children(&a).collect();
        assert_eq!(kids, vec![&d(&[A, C]), &d(&[A, D])]);
        assert_eq!(t.extensions(&[]), vec![A, B]);
        assert!(t.extensions(&[B]).is_empty());
    }

    #[test]
    fn language_tail_rules() {
        let fin = Language::new([(1, 2), (2, 3)], false).unwrap();
        assert_eq!(fin.count(2), 3);
        assert_eq!(fin.count(7), 1);
        let rep = Language::new([(1, 2), (2, 3)], true).unwrap();
        assert_eq!(rep.count(7), 3);
        assert_eq!(
            Language::new([(1, 2), (3, 1)], false),
            Err(LanguageError::Gap(2))
        );
        assert_eq!(
            Language::new([(1, 0)], false),
            Err(LanguageError::EmptyArity(1))
        );
    }

    #[test]
    fn full_tree_truncation() {
        let lang = Language::new([(1, 2), (2, 2), (3, 1)], false).unwrap();
        let t = FullTree { language: lang }.truncate(3);
        // 1 + 2 + 4 + 4
        assert_eq!(t.len(), 11);
        t.validate().unwrap();
    }

    /// Random prefix-closed trees over a two-symbol-per-arity language.
    pub(crate) fn arb_tree() -> impl Strategy<Value = DiagramSet> {
        proptest::collection::vec(proptest::collection::vec(0u32..2, 1..5), 0..12).prop_map(
            |paths| {
                let lang = Language::uniform(5, 2, false);
                DiagramSet::prefix_closure(lang, paths.iter().map(|p| Diagram::from_ids(p)))
                    .unwrap()
            },
        )
    }

    proptest! {
        #[test]
        fn prune_and_quotient_stay_valid(t in arb_tree(), pick in 0usize..64) {
            let members: Vec<Diagram> = t.members().cloned().collect();
            let u = &members[pick % members.len()];
            let p = t.prune(core::slice::from_ref(u)).unwrap();
            prop_assert!(p.validate().is_ok());
            prop_assert_eq!(p.prune(core::slice::from_ref(u)).unwrap(), p.clone());
            for w in t.descendants(u) {
                prop_assert!(p.contains(w.symbols()));
            }
            if !u.is_empty() {
                let q = t.quotient(u).unwrap();
                prop_assert!(q.validate().is_ok());
            }
        }
    }
}
