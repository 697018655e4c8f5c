//! The family `W(α)` over the symbols `P_{n;γ,β}`: unary heads carry rank
//! index α, and rank indices strictly descend along a diagram. The rank of a
//! node is the index of its last symbol, which finite truncations let us
//! check against the tree-rank oracle.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::diagrams::{
    AllowedDiagrams, Diagram, DiagramSet, FinitelyBranching, Language, RelSymbol,
};
use crate::ordinal::Ordinal;
use crate::rank::RankTable;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WAlphaSymbol {
    pub arity: u32,
    pub gamma: u32,
    pub beta: Ordinal,
}

impl WAlphaSymbol {
    pub fn new(arity: u32, gamma: u32, beta: Ordinal) -> Self {
        WAlphaSymbol { arity, gamma, beta }
    }
}

impl fmt::Display for WAlphaSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P_{{{};{},{}}}", self.arity, self.gamma, self.beta)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WAlphaParams {
    pub alpha: Ordinal,
    /// Finite stand-in for the number of colors per arity.
    pub kappa_surrogate: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WAlphaError {
    #[error("alpha must be at least 1")]
    AlphaZero,
    #[error("kappa surrogate must be positive")]
    KappaZero,
    #[error("the index set F is empty")]
    EmptyF,
    #[error("index {0} exceeds alpha")]
    AboveAlpha(Ordinal),
    #[error("the diagram is empty")]
    Empty,
    #[error("the diagram is not in the family")]
    NotAllowed,
}

impl WAlphaParams {
    pub fn new(alpha: Ordinal, kappa_surrogate: u32) -> Result<Self, WAlphaError> {
        if alpha.is_zero() {
            return Err(WAlphaError::AlphaZero);
        }
        if kappa_surrogate == 0 {
            return Err(WAlphaError::KappaZero);
        }
        Ok(WAlphaParams {
            alpha,
            kappa_surrogate,
        })
    }
}

/// Arity discipline, the unary head's index α, color bounds and strictly
/// descending indices. Unary colors may reach the surrogate itself.
pub fn walpha_is_allowed(params: &WAlphaParams, w: &[WAlphaSymbol]) -> bool {
    let mut prev: Option<&Ordinal> = None;
    for (i, s) in w.iter().enumerate() {
        if s.arity != i as u32 + 1 {
            return false;
        }
        let ok = if i == 0 {
            s.beta == params.alpha && s.gamma <= params.kappa_surrogate
        } else {
            s.beta <= params.alpha
                && s.gamma < params.kappa_surrogate
                && prev.is_some_and(|p| *p > s.beta)
        };
        if !ok {
            return false;
        }
        prev = Some(&s.beta);
    }
    true
}

/// Closed-form existence rank: the index of the last symbol.
pub fn walpha_rank(params: &WAlphaParams, w: &[WAlphaSymbol]) -> Result<Ordinal, WAlphaError> {
    let last = w.last().ok_or(WAlphaError::Empty)?;
    if !walpha_is_allowed(params, w) {
        return Err(WAlphaError::NotAllowed);
    }
    Ok(last.beta.clone())
}

/// The whole family as an intensional tree.
#[derive(Debug, Clone)]
pub struct WAlphaFamily {
    pub params: WAlphaParams,
}

impl AllowedDiagrams for WAlphaFamily {
    type Symbol = WAlphaSymbol;

    fn allows(&self, w: &[WAlphaSymbol]) -> bool {
        walpha_is_allowed(&self.params, w)
    }
}

/// The finite fragment: indices from `F`, arities up to `max_arity`, colors
/// below `max_gamma`.
#[derive(Debug, Clone)]
pub struct WAlphaTruncation {
    pub params: WAlphaParams,
    f: Vec<Ordinal>,
    pub max_arity: u32,
    pub max_gamma: u32,
}

impl WAlphaTruncation {
    pub fn new(
        params: WAlphaParams,
        f: &[Ordinal],
        max_arity: u32,
        max_gamma: u32,
    ) -> Result<Self, WAlphaError> {
        if f.is_empty() {
            return Err(WAlphaError::EmptyF);
        }
        if let Some(b) = f.iter().find(|b| **b > params.alpha) {
            return Err(WAlphaError::AboveAlpha(b.clone()));
        }
        let mut f = f.to_vec();
        f.sort();
        f.dedup();
        // colors beyond the surrogate are not family symbols
        let max_gamma = max_gamma.min(params.kappa_surrogate);
        Ok(WAlphaTruncation {
            params,
            f,
            max_arity,
            max_gamma,
        })
    }

    pub fn indices(&self) -> &[Ordinal] {
        &self.f
    }

    /// Order type of `{β′ ∈ F : β′ < β}`.
    pub fn order_type_below(&self, beta: &Ordinal) -> u64 {
        self.f.partition_point(|b| b < beta) as u64
    }

    pub fn language(&self) -> Language {
        let per = self.max_gamma * self.f.len() as u32;
        Language::new(
            (1..=self.max_arity.max(1)).map(|n| (n, if n == 1 { self.max_gamma } else { per })),
            false,
        )
        .expect("arities 1..=n")
    }

    /// Unary `P_{1;γ,α}` ↦ id γ; `P_{n;γ,β}` ↦ id `γ·|F| + pos(β)`.
    pub fn encode(&self, s: &WAlphaSymbol) -> Option<RelSymbol> {
        if s.gamma >= self.max_gamma || s.arity == 0 || s.arity > self.max_arity {
            return None;
        }
        if s.arity == 1 {
            return (s.beta == self.params.alpha).then_some(RelSymbol::new(1, s.gamma));
        }
        let pos = self.f.binary_search(&s.beta).ok()? as u32;
        Some(RelSymbol::new(s.arity, s.gamma * self.f.len() as u32 + pos))
    }

    pub fn decode(&self, s: RelSymbol) -> Option<WAlphaSymbol> {
        if s.arity == 1 {
            return (s.id < self.max_gamma)
                .then(|| WAlphaSymbol::new(1, s.id, self.params.alpha.clone()));
        }
        let n = self.f.len() as u32;
        let (gamma, pos) = (s.id / n, s.id % n);
        (gamma < self.max_gamma && s.arity <= self.max_arity)
            .then(|| WAlphaSymbol::new(s.arity, gamma, self.f[pos as usize].clone()))
    }

    pub fn decode_diagram(&self, w: &Diagram) -> Option<Vec<WAlphaSymbol>> {
        w.symbols().iter().map(|s| self.decode(*s)).collect()
    }

    /// Expected rank of a node. Nonempty nodes: the order type below their
    /// last index, capped by the arities still available; the root sits one
    /// above its best head.
    pub fn expected_rank(&self, w: &[WAlphaSymbol]) -> u64 {
        let room = (self.max_arity as u64).saturating_sub(w.len() as u64);
        match w.last() {
            Some(s) => self.order_type_below(&s.beta).min(room),
            None if self.max_gamma == 0 || self.max_arity == 0 => 0,
            None => (self.order_type_below(&self.params.alpha) + 1).min(room),
        }
    }
}

impl AllowedDiagrams for WAlphaTruncation {
    type Symbol = WAlphaSymbol;

    fn allows(&self, w: &[WAlphaSymbol]) -> bool {
        w.len() <= self.max_arity as usize
            && w.iter().all(|s| self.encode(s).is_some())
            && walpha_is_allowed(&self.params, w)
    }
}

impl FinitelyBranching for WAlphaTruncation {
    fn extensions(&self, w: &[WAlphaSymbol]) -> Vec<WAlphaSymbol> {
        let n = w.len() as u32 + 1;
        if n > self.max_arity {
            return vec![];
        }
        if n == 1 {
            return (0..self.max_gamma)
                .map(|g| WAlphaSymbol::new(1, g, self.params.alpha.clone()))
                .collect();
        }
        let top = &w[w.len() - 1].beta;
        let below = self.order_type_below(top) as usize;
        (0..self.max_gamma)
            .flat_map(|g| {
                self.f[..below]
                    .iter()
                    .map(move |b| WAlphaSymbol::new(n, g, b.clone()))
            })
            .collect()
    }
}

/// Extensional truncation of the family.
pub fn walpha_truncate(
    params: &WAlphaParams,
    f: &[Ordinal],
    max_arity: u32,
    max_gamma: u32,
) -> Result<DiagramSet, WAlphaError> {
    let t = WAlphaTruncation::new(params.clone(), f, max_arity, max_gamma)?;
    Ok(truncation_set(&t))
}

pub fn truncation_set(t: &WAlphaTruncation) -> DiagramSet {
    let mut members = vec![Diagram::empty()];
    let mut frontier: Vec<Vec<WAlphaSymbol>> = vec![vec![]];
    while let Some(w) = frontier.pop() {
        for s in t.extensions(&w) {
            let mut next = w.clone();
            next.push(s);
            members.push(Diagram::new(
                next.iter()
                    .map(|s| t.encode(s).expect("generated in range"))
                    .collect(),
            ));
            frontier.push(next);
        }
    }
    DiagramSet::new(t.language(), members).expect("generated prefix-closed")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClaimMismatch {
    pub node: Diagram,
    pub expected: u64,
    pub actual: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClaimReport {
    pub checked: usize,
    pub mismatches: Vec<ClaimMismatch>,
}

impl ClaimReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Compares the rank oracle on `w_set` with the closed form of `t` at every
/// member. Members that do not decode to family symbols are reported with
/// expected rank `u64::MAX`.
pub fn check_closed_form(t: &WAlphaTruncation, w_set: &DiagramSet) -> ClaimReport {
    let table = RankTable::compute(w_set);
    let mut mismatches = Vec::new();
    let mut checked = 0;
    for (node, rank) in table.iter() {
        checked += 1;
        let actual = rank.as_finite().expect("finite tree");
        let expected = t
            .decode_diagram(node)
            .map_or(u64::MAX, |w| t.expected_rank(&w));
        if expected != actual {
            mismatches.push(ClaimMismatch {
                node: node.clone(),
                expected,
                actual,
            });
        }
    }
    ClaimReport {
        checked,
        mismatches,
    }
}

/// Builds the truncation and checks every node against the closed form.
pub fn walpha_verify_claim(
    params: &WAlphaParams,
    f: &[Ordinal],
    max_arity: u32,
    max_gamma: u32,
) -> Result<ClaimReport, WAlphaError> {
    let t = WAlphaTruncation::new(params.clone(), f, max_arity, max_gamma)?;
    Ok(check_closed_form(&t, &truncation_set(&t)))
}

/// Ranks of the truncation keyed by decoded diagrams; handy for reports.
pub fn decoded_ranks(t: &WAlphaTruncation) -> BTreeMap<Vec<WAlphaSymbol>, Ordinal> {
    RankTable::compute(&truncation_set(t))
        .iter()
        .map(|(d, r)| (t.decode_diagram(d).expect("own member"), r.clone()))
        .collect()
}
