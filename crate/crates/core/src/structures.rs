//! Coloring structures, monochromatic subsets and class membership.
//!
//! Subsets are passed as strictly increasing slices of element ids. Colors
//! are stored as symbol ids only; the arity of a color is the size of the
//! subset it colors.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::diagrams::{AllowedDiagrams, Diagram, RelSymbol};
use crate::rank::InfiniteDiagram;

/// Largest universe stored as a full table.
pub const DENSE_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StructureError {
    #[error("subset is empty")]
    EmptySubset,
    #[error("element {0} is not in the universe")]
    NotInUniverse(u32),
    #[error("subset is not strictly increasing")]
    Unsorted,
    #[error("subset is not monochromatic")]
    NotMonochromatic,
    #[error("universe of size {0} is too large to materialize")]
    TooLarge(usize),
    #[error("fresh element {0} already belongs to a structure")]
    NotDisjoint(u32),
    #[error("diagram leaves the allowed set before depth {0}")]
    InconsistentDiagram(usize),
    #[error("first structure is not a substructure of the others")]
    NotSubstructure,
    #[error("duplicate element {0}")]
    Duplicate(u32),
}

/// Anything that colors the nonempty finite subsets of a finite universe.
pub trait Coloring {
    /// Sorted, distinct.
    fn universe(&self) -> &[u32];

    /// Color of a nonempty sorted subset of the universe; its arity is the
    /// subset's size.
    fn color(&self, subset: &[u32]) -> RelSymbol;
}

/// A finite coloring structure with explicit storage.
///
/// Universes of at most [`DENSE_LIMIT`] elements keep one entry per subset;
/// larger ones keep a default symbol per subset size plus explicit overrides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColoringStructure {
    universe: Vec<u32>,
    store: Store,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Store {
    /// Indexed by the bitmask of universe positions.
    Dense(Vec<u32>),
    /// Entries equal to the size default are never stored; defaults equal to
    /// 0 are never stored.
    Sparse {
        defaults: BTreeMap<u32, u32>,
        overrides: BTreeMap<Vec<u32>, u32>,
    },
}

impl ColoringStructure {
    /// Every subset colored with symbol id 0.
    pub fn new(mut universe: Vec<u32>) -> Result<Self, StructureError> {
        universe.sort_unstable();
        if let Some(w) = universe.windows(2).find(|w| w[0] == w[1]) {
            return Err(StructureError::Duplicate(w[0]));
        }
        let store = if universe.len() <= DENSE_LIMIT {
            Store::Dense(vec![0; 1usize << universe.len()])
        } else {
            Store::Sparse {
                defaults: BTreeMap::new(),
                overrides: BTreeMap::new(),
            }
        };
        Ok(ColoringStructure { universe, store })
    }

    /// Universe `0..n`, every `k`-set colored `ids(k)`.
    pub fn uniform(n: u32, mut ids: impl FnMut(u32) -> u32) -> Self {
        let mut m = ColoringStructure::new((0..n).collect()).expect("distinct");
        for k in 1..=n {
            m.set_size_default(k, ids(k));
        }
        m
    }

    /// Materializes any coloring on a small universe.
    pub fn from_coloring<C: Coloring + ?Sized>(c: &C) -> Result<Self, StructureError> {
        let universe = c.universe().to_vec();
        if universe.len() > DENSE_LIMIT {
            return Err(StructureError::TooLarge(universe.len()));
        }
        let mut m = ColoringStructure::new(universe)?;
        let mut buf = Vec::new();
        if let Store::Dense(table) = &mut m.store {
            for mask in 1..table.len() {
                buf.clear();
                buf.extend(
                    m.universe
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| mask >> i & 1 == 1)
                        .map(|(_, e)| *e),
                );
                table[mask] = c.color(&buf).id;
            }
        }
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.universe.len()
    }

    pub fn is_empty(&self) -> bool {
        self.universe.is_empty()
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.store, Store::Dense(_))
    }

    /// Bitmask of universe positions, after checking the subset.
    pub fn mask_of(&self, subset: &[u32]) -> Result<u64, StructureError> {
        self.check_subset(subset)?;
        let mut mask = 0u64;
        for e in subset {
            let i = self.universe.binary_search(e).expect("checked");
            mask |= 1 << i;
        }
        Ok(mask)
    }

    fn check_subset(&self, subset: &[u32]) -> Result<(), StructureError> {
        if subset.is_empty() {
            return Err(StructureError::EmptySubset);
        }
        if subset.windows(2).any(|w| w[0] >= w[1]) {
            return Err(StructureError::Unsorted);
        }
        if let Some(e) = subset
            .iter()
            .find(|e| self.universe.binary_search(e).is_err())
        {
            return Err(StructureError::NotInUniverse(*e));
        }
        Ok(())
    }

    pub fn get(&self, subset: &[u32]) -> Result<RelSymbol, StructureError> {
        self.check_subset(subset)?;
        Ok(self.color(subset))
    }

    pub fn set(&mut self, subset: &[u32], id: u32) -> Result<(), StructureError> {
        self.check_subset(subset)?;
        match &mut self.store {
            Store::Dense(table) => {
                let mut mask = 0usize;
                for e in subset {
                    mask |= 1 << self.universe.binary_search(e).expect("checked");
                }
                table[mask] = id;
            }
            Store::Sparse {
                defaults,
                overrides,
            } => {
                let k = subset.len() as u32;
                if defaults.get(&k).copied().unwrap_or(0) == id {
                    overrides.remove(subset);
                } else {
                    overrides.insert(subset.to_vec(), id);
                }
            }
        }
        Ok(())
    }

    /// Recolors every `k`-subset with `id`, discarding earlier entries of
    /// that size.
    pub fn set_size_default(&mut self, k: u32, id: u32) {
        match &mut self.store {
            Store::Dense(table) => {
                for (mask, slot) in table.iter_mut().enumerate() {
                    if mask.count_ones() == k {
                        *slot = id;
                    }
                }
            }
            Store::Sparse {
                defaults,
                overrides,
            } => {
                overrides.retain(|s, _| s.len() as u32 != k);
                if id == 0 {
                    defaults.remove(&k);
                } else {
                    defaults.insert(k, id);
                }
            }
        }
    }

    /// Size defaults (sparse storage only; dense storage has none).
    pub fn size_defaults(&self) -> Vec<(u32, u32)> {
        match &self.store {
            Store::Dense(_) => Vec::new(),
            Store::Sparse { defaults, .. } => defaults.iter().map(|(k, v)| (*k, *v)).collect(),
        }
    }

    /// Explicitly stored colors, ordered by size and then lexicographically.
    /// Dense storage lists every subset.
    pub fn explicit_colors(&self) -> Vec<(Vec<u32>, u32)> {
        let mut out: Vec<(Vec<u32>, u32)> = match &self.store {
            Store::Dense(table) => (1..table.len())
                .map(|mask| (self.subset_of_mask(mask as u64), table[mask]))
                .collect(),
            Store::Sparse { overrides, .. } => {
                overrides.iter().map(|(s, v)| (s.clone(), *v)).collect()
            }
        };
        out.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(&b.0)));
        out
    }

    pub fn subset_of_mask(&self, mask: u64) -> Vec<u32> {
        self.universe
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, e)| *e)
            .collect()
    }

    /// Color id by position mask (dense storage only).
    pub fn id_by_mask(&self, mask: u64) -> Option<u32> {
        match &self.store {
            Store::Dense(table) => table.get(mask as usize).copied(),
            Store::Sparse { .. } => None,
        }
    }

    /// The induced substructure on `subset`.
    pub fn restrict(&self, subset: &[u32]) -> Result<ColoringStructure, StructureError> {
        if !subset.is_empty() {
            self.check_subset(subset)?;
        }
        let view = Restricted {
            parent: self,
            universe: subset,
        };
        if subset.len() <= DENSE_LIMIT {
            return ColoringStructure::from_coloring(&view);
        }
        let mut out = ColoringStructure::new(subset.to_vec())?;
        if let Store::Sparse {
            defaults,
            overrides,
        } = &self.store
        {
            for (k, v) in defaults {
                out.set_size_default(*k, *v);
            }
            for (s, v) in overrides {
                if s.iter().all(|e| subset.binary_search(e).is_ok()) {
                    out.set(s, *v)?;
                }
            }
        }
        Ok(out)
    }
}

struct Restricted<'a> {
    parent: &'a ColoringStructure,
    universe: &'a [u32],
}

impl Coloring for Restricted<'_> {
    fn universe(&self) -> &[u32] {
        self.universe
    }

    fn color(&self, subset: &[u32]) -> RelSymbol {
        self.parent.color(subset)
    }
}

impl Coloring for ColoringStructure {
    fn universe(&self) -> &[u32] {
        &self.universe
    }

    fn color(&self, subset: &[u32]) -> RelSymbol {
        let k = subset.len() as u32;
        let id = match &self.store {
            Store::Dense(table) => {
                let mut mask = 0usize;
                for e in subset {
                    mask |= 1
                        << self
                            .universe
                            .binary_search(e)
                            .expect("subset of the universe");
                }
                table[mask]
            }
            Store::Sparse {
                defaults,
                overrides,
            } => overrides
                .get(subset)
                .or_else(|| defaults.get(&k))
                .copied()
                .unwrap_or(0),
        };
        RelSymbol::new(k, id)
    }
}

/// Calls `f` on every `k`-subset of `items` in lexicographic order (items
/// must be sorted). Stops early when `f` returns `false`.
pub fn for_each_combination(items: &[u32], k: usize, mut f: impl FnMut(&[u32]) -> bool) {
    let n = items.len();
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    let mut buf: Vec<u32> = idx.iter().map(|i| items[*i]).collect();
    loop {
        if !f(&buf) {
            return;
        }
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
        for j in i..k {
            buf[j] = items[idx[j]];
        }
    }
}

/// Whether all equal-size subsets of `a` share a color, at every size.
pub fn is_monochromatic<C: Coloring + ?Sized>(m: &C, a: &[u32]) -> Result<bool, StructureError> {
    Ok(mono_diagram(m, a)?.is_some())
}

/// `d_M` of a monochromatic subset.
pub fn diagram_of<C: Coloring + ?Sized>(m: &C, a: &[u32]) -> Result<Diagram, StructureError> {
    mono_diagram(m, a)?.ok_or(StructureError::NotMonochromatic)
}

fn mono_diagram<C: Coloring + ?Sized>(m: &C, a: &[u32]) -> Result<Option<Diagram>, StructureError> {
    if a.is_empty() {
        return Err(StructureError::EmptySubset);
    }
    if a.windows(2).any(|w| w[0] >= w[1]) {
        return Err(StructureError::Unsorted);
    }
    let u = m.universe();
    if let Some(e) = a.iter().find(|e| u.binary_search(e).is_err()) {
        return Err(StructureError::NotInUniverse(*e));
    }
    let mut symbols = Vec::with_capacity(a.len());
    for k in 1..=a.len() {
        let first = m.color(&a[..k]);
        let mut same = true;
        for_each_combination(a, k, |s| {
            same = m.color(s) == first;
            same
        });
        if !same {
            return Ok(None);
        }
        symbols.push(first);
    }
    Ok(Some(Diagram::new(symbols)))
}

/// A monochromatic subset whose diagram is not allowed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MembershipViolation {
    pub subset: Vec<u32>,
    pub diagram: Diagram,
}

/// Every monochromatic subset of size at most `max_size`, with its diagram,
/// grouped by size and in lexicographic order within a size.
///
/// Built level by level: a set of size `s+1 ≥ 2` is monochromatic exactly when
/// all of its `s`-subsets are monochromatic with one common diagram.
pub fn monochromatic_sets<C: Coloring + ?Sized>(
    m: &C,
    max_size: usize,
) -> Vec<Vec<(Vec<u32>, Diagram)>> {
    let mut levels = Vec::new();
    walk_levels(m, max_size, |level| {
        levels.push(level.to_vec());
        true
    });
    levels
}

/// Level-by-level walk; `visit` sees each complete level and may stop the walk.
fn walk_levels<C: Coloring + ?Sized>(
    m: &C,
    max_size: usize,
    mut visit: impl FnMut(&[(Vec<u32>, Diagram)]) -> bool,
) {
    if max_size == 0 {
        return;
    }
    let mut level: Vec<(Vec<u32>, Diagram)> = m
        .universe()
        .iter()
        .map(|e| (vec![*e], Diagram::new(vec![m.color(&[*e])])))
        .collect();
    let mut size = 1;
    while !level.is_empty() {
        if !visit(&level) || size == max_size {
            return;
        }
        let index: BTreeMap<&[u32], &Diagram> =
            level.iter().map(|(s, d)| (s.as_slice(), d)).collect();
        let mut next = Vec::new();
        let mut start = 0;
        while start < level.len() {
            // group sharing all but the last element
            let prefix = &level[start].0[..size - 1];
            let mut end = start + 1;
            while end < level.len() && &level[end].0[..size - 1] == prefix {
                end += 1;
            }
            for i in start..end {
                for j in i + 1..end {
                    let (si, di) = &level[i];
                    let (sj, dj) = &level[j];
                    if di != dj {
                        continue;
                    }
                    let mut cand = si.clone();
                    cand.push(*sj.last().expect("nonempty"));
                    // the remaining s-subsets drop one of the first s-1 elements
                    let all = (0..size - 1).all(|drop| {
                        let sub: Vec<u32> = cand
                            .iter()
                            .enumerate()
                            .filter(|(p, _)| *p != drop)
                            .map(|(_, e)| *e)
                            .collect();
                        index.get(sub.as_slice()) == Some(&di)
                    });
                    if all {
                        let d = di.extended(m.color(&cand));
                        next.push((cand, d));
                    }
                }
            }
            start = end;
        }
        level = next;
        size += 1;
    }
}

/// Checks `M ∈ K(W)`: every monochromatic subset has its diagram in `W`.
/// Returns the least violating subset (by size, then lexicographically).
pub fn in_class<C, W>(m: &C, w: &W) -> Result<(), MembershipViolation>
where
    C: Coloring + ?Sized,
    W: AllowedDiagrams<Symbol = RelSymbol> + ?Sized,
{
    let mut violation = None;
    // Every set on a level survived the previous level's check, so the walk
    // never climbs more than one level past the tree's depth.
    walk_levels(m, usize::MAX, |level| {
        for (s, d) in level {
            if !w.allows(d.symbols()) {
                violation = Some(MembershipViolation {
                    subset: s.clone(),
                    diagram: d.clone(),
                });
                return false;
            }
        }
        true
    });
    match violation {
        Some(v) => Err(v),
        None => Ok(()),
    }
}

/// Source of the symbols `d(1), d(2), …` of a (finite or infinite) diagram.
pub trait DiagramSource {
    /// `d(k)`, or `None` past the end.
    fn symbol(&self, k: u32) -> Option<RelSymbol>;

    fn length(&self) -> Option<usize>;
}

impl DiagramSource for Diagram {
    fn symbol(&self, k: u32) -> Option<RelSymbol> {
        self.at(k as usize)
    }

    fn length(&self) -> Option<usize> {
        Some(self.len())
    }
}

impl DiagramSource for InfiniteDiagram {
    fn symbol(&self, k: u32) -> Option<RelSymbol> {
        Some(self.at(k))
    }

    fn length(&self) -> Option<usize> {
        None
    }
}

/// The structure on `0..n` in which every `k`-set has color `d(k)`. Sizes
/// past the end of a finite `d` get symbol id 0.
pub fn monochromatic_model<D: DiagramSource + ?Sized>(d: &D, n: usize) -> ColoringStructure {
    ColoringStructure::uniform(n as u32, |k| d.symbol(k).map_or(0, |s| s.id))
}

/// Extensions `N₁ ⊂ N₂, N₃` of `M₁ ⊂ M₂, M₃` by a common fresh set `X`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripleExtension {
    pub n1: ColoringStructure,
    pub n2: ColoringStructure,
    pub n3: ColoringStructure,
    pub fresh: Vec<u32>,
}

/// Adds the fresh points `x` to each `M_i`: old subsets keep their colors,
/// every subset meeting `x` gets `d(|A|)`. Requires `d↾[n]` allowed for all
/// `n ≤ max(|M₂|, |M₃|) + |x|`, which keeps each `N_i` inside `K(W)`.
pub fn extend_triple<W>(
    m1: &ColoringStructure,
    m2: &ColoringStructure,
    m3: &ColoringStructure,
    x: &[u32],
    d: &InfiniteDiagram,
    w: &W,
) -> Result<TripleExtension, StructureError>
where
    W: AllowedDiagrams<Symbol = RelSymbol> + ?Sized,
{
    let mut fresh = x.to_vec();
    fresh.sort_unstable();
    if let Some(pair) = fresh.windows(2).find(|p| p[0] == p[1]) {
        return Err(StructureError::Duplicate(pair[0]));
    }
    for e in &fresh {
        if m2.universe().binary_search(e).is_ok() || m3.universe().binary_search(e).is_ok() {
            return Err(StructureError::NotDisjoint(*e));
        }
    }
    for big in [m2, m3] {
        if !is_substructure(m1, big) {
            return Err(StructureError::NotSubstructure);
        }
    }
    let depth = m2.len().max(m3.len()) + fresh.len();
    if !d.consistent_with(w, depth) {
        return Err(StructureError::InconsistentDiagram(depth));
    }
    let extend = |m: &ColoringStructure| -> Result<ColoringStructure, StructureError> {
        let view = Extended {
            base: m,
            fresh: &fresh,
            d,
            universe: merged(m.universe(), &fresh),
        };
        ColoringStructure::from_coloring(&view)
    };
    Ok(TripleExtension {
        n1: extend(m1)?,
        n2: extend(m2)?,
        n3: extend(m3)?,
        fresh,
    })
}

fn merged(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut v: Vec<u32> = a.iter().chain(b).copied().collect();
    v.sort_unstable();
    v
}

struct Extended<'a> {
    base: &'a ColoringStructure,
    fresh: &'a [u32],
    d: &'a InfiniteDiagram,
    universe: Vec<u32>,
}

impl Coloring for Extended<'_> {
    fn universe(&self) -> &[u32] {
        &self.universe
    }

    fn color(&self, subset: &[u32]) -> RelSymbol {
        if subset.iter().any(|e| self.fresh.binary_search(e).is_ok()) {
            self.d.at(subset.len() as u32)
        } else {
            self.base.color(subset)
        }
    }
}

/// Whether `small`'s universe is inside `big`'s and the colorings agree there.
pub fn is_substructure(small: &ColoringStructure, big: &ColoringStructure) -> bool {
    if small
        .universe()
        .iter()
        .any(|e| big.universe().binary_search(e).is_err())
    {
        return false;
    }
    match big.restrict(small.universe()) {
        Ok(r) => agree(&r, small),
        Err(_) => false,
    }
}

/// Color-by-color equality on a common universe.
pub fn agree<A: Coloring + ?Sized, B: Coloring + ?Sized>(a: &A, b: &B) -> bool {
    let u = a.universe();
    if u != b.universe() {
        return false;
    }
    (1..=u.len()).all(|k| {
        let mut ok = true;
        for_each_combination(u, k, |s| {
            ok = a.color(s) == b.color(s);
            ok
        });
        ok
    })
}
