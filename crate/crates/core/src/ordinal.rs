//! Ordinals below ε₀ in Cantor normal form, plus symbolic cardinal expressions.
//!
//! An [`Ordinal`] is stored as a strictly descending list of terms
//! `ω^e₁·c₁ + … + ω^eₙ·cₙ` with every coefficient positive; the empty list is
//! zero. Because the normal form is unique, structural equality is ordinal
//! equality and comparison is a lexicographic walk over the terms.
//!
//! The text form is `w^2*3+w*1+4`. Exponents that are not natural numbers are
//! parenthesised, e.g. `w^(w*1)*1` for ω^ω.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::ops::Add;
use core::str::FromStr;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OrdinalError {
    #[error("{0} is not a limit ordinal")]
    NotLimit(Ordinal),
    #[error("terms are not in Cantor normal form")]
    NotNormalForm,
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: &'static str },
}

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Ordinal {
    terms: Vec<Term>,
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct Term {
    exponent: Ordinal,
    coefficient: u64,
}

impl Ordinal {
    pub fn zero() -> Self {
        Ordinal { terms: Vec::new() }
    }

    pub fn one() -> Self {
        Ordinal::nat(1)
    }

    pub fn nat(n: u64) -> Self {
        if n == 0 {
            return Ordinal::zero();
        }
        Ordinal {
            terms: alloc::vec![Term {
                exponent: Ordinal::zero(),
                coefficient: n,
            }],
        }
    }

    pub fn omega() -> Self {
        Ordinal::omega_pow(Ordinal::one())
    }

    /// ω^e.
    pub fn omega_pow(exponent: Ordinal) -> Self {
        Ordinal {
            terms: alloc::vec![Term {
                exponent,
                coefficient: 1,
            }],
        }
    }

    /// Builds an ordinal from `(exponent, coefficient)` pairs, which must
    /// already be in normal form.
    pub fn from_terms(terms: Vec<(Ordinal, u64)>) -> Result<Self, OrdinalError> {
        for pair in terms.windows(2) {
            if pair[0].0 <= pair[1].0 {
                return Err(OrdinalError::NotNormalForm);
            }
        }
        if terms.iter().any(|(_, c)| *c == 0) {
            return Err(OrdinalError::NotNormalForm);
        }
        Ok(Ordinal {
            terms: terms
                .into_iter()
                .map(|(exponent, coefficient)| Term {
                    exponent,
                    coefficient,
                })
                .collect(),
        })
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Ordinal, u64)> + '_ {
        self.terms.iter().map(|t| (&t.exponent, t.coefficient))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.as_finite().is_some()
    }

    pub fn as_finite(&self) -> Option<u64> {
        match self.terms.as_slice() {
            [] => Some(0),
            [t] if t.exponent.is_zero() => Some(t.coefficient),
            _ => None,
        }
    }

    pub fn is_limit(&self) -> bool {
        self.terms.last().is_some_and(|t| !t.exponent.is_zero())
    }

    pub fn is_successor(&self) -> bool {
        self.terms.last().is_some_and(|t| t.exponent.is_zero())
    }

    pub fn succ(&self) -> Ordinal {
        self + &Ordinal::one()
    }

    pub fn pred(&self) -> Option<Ordinal> {
        if !self.is_successor() {
            return None;
        }
        let mut out = self.clone();
        let last = out.terms.last_mut().expect("successor has a term");
        if last.coefficient == 1 {
            out.terms.pop();
        } else {
            last.coefficient -= 1;
        }
        Some(out)
    }

    /// Writes `self = beta + k` with `beta` zero or a limit and `k` finite.
    pub fn split(&self) -> (Ordinal, u64) {
        match self.terms.last() {
            Some(t) if t.exponent.is_zero() => {
                let mut beta = self.clone();
                let k = beta.terms.pop().map(|t| t.coefficient).unwrap_or(0);
                (beta, k)
            }
            _ => (self.clone(), 0),
        }
    }

    /// `self · n` for a natural number `n`.
    pub fn mul_nat(&self, n: u64) -> Ordinal {
        if n == 0 || self.is_zero() {
            return Ordinal::zero();
        }
        // (ω^a·c + r)·n = ω^a·(c·n) + r
        let mut out = self.clone();
        out.terms[0].coefficient *= n;
        out
    }

    /// The canonical fundamental sequence of a limit ordinal.
    ///
    /// For `β = γ + ω^(δ+1)` the sequence is `γ + ω^δ·i`; for `β = γ + ω^e`
    /// with `e` a limit it is `γ + ω^(e[i])`.
    pub fn fundamental_sequence(&self, i: u64) -> Result<Ordinal, OrdinalError> {
        if !self.is_limit() {
            return Err(OrdinalError::NotLimit(self.clone()));
        }
        let mut prefix = self.clone();
        let last = prefix.terms.pop().expect("limit has a term");
        if last.coefficient > 1 {
            prefix.terms.push(Term {
                exponent: last.exponent.clone(),
                coefficient: last.coefficient - 1,
            });
        }
        let tail = match last.exponent.pred() {
            Some(delta) => Ordinal::omega_pow(delta).mul_nat(i),
            None => Ordinal::omega_pow(last.exponent.fundamental_sequence(i)?),
        };
        Ok(&prefix + &tail)
    }
}

/// `beta + n·k + k(k−1)/2`, the ℶ-index of the model-size bound for a
/// diagram of length `n` whose rank is below `beta + k`.
pub fn bound_index(beta: &Ordinal, n: u64, k: u64) -> Ordinal {
    let finite = n * k + k * k.saturating_sub(1) / 2;
    beta + &Ordinal::nat(finite)
}

impl Ord for Ordinal {
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.terms.iter().zip(other.terms.iter()) {
            let ord = a
                .exponent
                .cmp(&b.exponent)
                .then(a.coefficient.cmp(&b.coefficient));
            if ord != Ordering::Equal {
                return ord;
            }
        }
        self.terms.len().cmp(&other.terms.len())
    }
}

impl PartialOrd for Ordinal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for &Ordinal {
    type Output = Ordinal;

    fn add(self, rhs: &Ordinal) -> Ordinal {
        let Some(lead) = rhs.terms.first() else {
            return self.clone();
        };
        let mut terms: Vec<Term> = self
            .terms
            .iter()
            .take_while(|t| t.exponent >= lead.exponent)
            .cloned()
            .collect();
        let mut rest = rhs.terms.iter();
        if let Some(last) = terms.last_mut() {
            if last.exponent == lead.exponent {
                last.coefficient += lead.coefficient;
                rest.next();
            }
        }
        terms.extend(rest.cloned());
        Ordinal { terms }
    }
}

impl Add for Ordinal {
    type Output = Ordinal;

    fn add(self, rhs: Ordinal) -> Ordinal {
        &self + &rhs
    }
}

impl From<u64> for Ordinal {
    fn from(n: u64) -> Self {
        Ordinal::nat(n)
    }
}

impl fmt::Display for Ordinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str("+")?;
            }
            match t.exponent.as_finite() {
                Some(0) => write!(f, "{}", t.coefficient)?,
                Some(1) => write!(f, "w*{}", t.coefficient)?,
                Some(e) => write!(f, "w^{}*{}", e, t.coefficient)?,
                None => write!(f, "w^({})*{}", t.exponent, t.coefficient)?,
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Ordinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Ordinal {
    type Err = OrdinalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = Parser { src: s, pos: 0 };
        let value = p.sum()?;
        p.skip_ws();
        if p.pos != s.len() {
            return Err(p.error("trailing input"));
        }
        Ok(value)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &'static str) -> OrdinalError {
        OrdinalError::Parse { pos: self.pos, msg }
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) {
        if let Some(c) = self.peek() {
            self.pos += c.len_utf8();
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_omega(&mut self) -> bool {
        self.eat('w') || self.eat('ω')
    }

    fn nat(&mut self) -> Result<u64, OrdinalError> {
        self.skip_ws();
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
        }
        if start == self.pos {
            return Err(self.error("expected a natural number"));
        }
        self.src[start..self.pos]
            .parse()
            .map_err(|_| OrdinalError::Parse {
                pos: start,
                msg: "number out of range",
            })
    }

    fn sum(&mut self) -> Result<Ordinal, OrdinalError> {
        let mut acc = self.term()?;
        while self.eat('+') {
            let t = self.term()?;
            acc = &acc + &t;
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Ordinal, OrdinalError> {
        if self.eat_omega() {
            let exponent = if self.eat('^') {
                self.exponent()?
            } else {
                Ordinal::one()
            };
            let coefficient = if self.eat('*') { self.nat()? } else { 1 };
            Ok(Ordinal::omega_pow(exponent).mul_nat(coefficient))
        } else {
            Ok(Ordinal::nat(self.nat()?))
        }
    }

    fn exponent(&mut self) -> Result<Ordinal, OrdinalError> {
        if self.eat('(') {
            let inner = self.sum()?;
            if !self.eat(')') {
                return Err(self.error("expected ')'"));
            }
            Ok(inner)
        } else if self.eat_omega() {
            Ok(Ordinal::omega())
        } else {
            Ok(Ordinal::nat(self.nat()?))
        }
    }
}

/// A symbolic cardinal. Nothing transfinite is ever evaluated; expressions are
/// only normalised and rendered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CardinalExpr {
    Finite(u64),
    Aleph0,
    /// A named parameter such as `|L|`.
    Named(String),
    /// `sup { κ_β : β < below }`.
    Sup {
        below: Ordinal,
    },
    PowerSet(Box<CardinalExpr>),
    /// `ℶ_index(base)`.
    Beth {
        index: Ordinal,
        base: Box<CardinalExpr>,
    },
    /// `κ_index`.
    Kappa(Ordinal),
}

/// Result of trying to evaluate a cardinal expression as a natural number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Finiteness {
    Finite(u128),
    /// Finite but does not fit in `u128`.
    Overflow,
    Transfinite,
}

impl CardinalExpr {
    pub fn named(name: &str) -> Self {
        CardinalExpr::Named(name.to_string())
    }

    pub fn beth(index: Ordinal, base: CardinalExpr) -> Self {
        CardinalExpr::Beth {
            index,
            base: Box::new(base),
        }
    }

    pub fn normalize(&self) -> CardinalExpr {
        match self {
            CardinalExpr::Kappa(a) => match a.as_finite() {
                Some(n) => CardinalExpr::Finite(n),
                None if *a >= Ordinal::omega_pow(Ordinal::nat(2)) => {
                    CardinalExpr::beth(a.clone(), CardinalExpr::Aleph0)
                }
                None => self.clone(),
            },
            CardinalExpr::Beth { index, base } if index.is_zero() => base.normalize(),
            CardinalExpr::Beth { index, base } => {
                CardinalExpr::beth(index.clone(), base.normalize())
            }
            CardinalExpr::PowerSet(inner) => CardinalExpr::PowerSet(Box::new(inner.normalize())),
            _ => self.clone(),
        }
    }

    /// Evaluates expressions built from finite pieces, e.g. `ℶ_3(5)`.
    /// Names are treated as transfinite.
    pub fn evaluate_finite(&self) -> Finiteness {
        fn pow2(x: Finiteness) -> Finiteness {
            match x {
                Finiteness::Finite(v) if v < 128 => Finiteness::Finite(1u128 << v),
                Finiteness::Finite(_) | Finiteness::Overflow => Finiteness::Overflow,
                Finiteness::Transfinite => Finiteness::Transfinite,
            }
        }
        match self {
            CardinalExpr::Finite(n) => Finiteness::Finite(*n as u128),
            CardinalExpr::Aleph0 | CardinalExpr::Named(_) | CardinalExpr::Sup { .. } => {
                Finiteness::Transfinite
            }
            CardinalExpr::PowerSet(inner) => pow2(inner.evaluate_finite()),
            CardinalExpr::Kappa(a) => match a.as_finite() {
                Some(n) => Finiteness::Finite(n as u128),
                None => Finiteness::Transfinite,
            },
            CardinalExpr::Beth { index, base } => {
                let Some(steps) = index.as_finite() else {
                    return Finiteness::Transfinite;
                };
                let mut v = base.evaluate_finite();
                for _ in 0..steps {
                    v = pow2(v);
                    if !matches!(v, Finiteness::Finite(_)) {
                        break;
                    }
                }
                v
            }
        }
    }
}

impl fmt::Display for CardinalExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CardinalExpr::Finite(n) => write!(f, "{n}"),
            CardinalExpr::Aleph0 => f.write_str("aleph_0"),
            CardinalExpr::Named(s) => f.write_str(s),
            CardinalExpr::Sup { below } => write!(f, "sup{{kappa_b : b < {below}}}"),
            CardinalExpr::PowerSet(inner) => write!(f, "2^({inner})"),
            CardinalExpr::Beth { index, base } => write!(f, "beth_{{{index}}}({base})"),
            CardinalExpr::Kappa(a) => write!(f, "kappa_{{{a}}}"),
        }
    }
}
