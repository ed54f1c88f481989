//! Exact scalars and truncated formal Laurent series in the deformation
//! parameter.
//!
//! Scalars are finite sums `sum_j c_j * pi^(j/2)` with rational `c_j`; the
//! half-integer powers of pi are exactly what fiber-sphere integrals of
//! monomials produce, so the whole trace pipeline stays exact.
//!
//! Series are Laurent series in `eps` with a finite singular part and a
//! certified window: coefficients above `exact_up_to` have been discarded and
//! reads beyond the window are errors, never silent zeros.

use std::collections::BTreeMap;
use std::fmt;

use crate::coeff::{Coeff, Rat};
use crate::error::{EngineError, Result};

/// `sum_j c_j * pi^(j/2)`, keyed by the number `j` of half-powers.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PiScalar<C: Coeff> {
    terms: BTreeMap<i32, C>,
}

pub type ExactScalar = PiScalar<Rat>;

impl<C: Coeff> PiScalar<C> {
    pub fn zero() -> Self {
        PiScalar { terms: BTreeMap::new() }
    }

    pub fn from_coeff(c: C) -> Self {
        Self::single(0, c)
    }

    /// `c * pi^(half_powers/2)`.
    pub fn single(half_powers: i32, c: C) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(half_powers, c);
        }
        PiScalar { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        for (k, v) in &other.terms {
            let entry = terms.entry(*k).or_insert_with(C::zero);
            *entry = entry.add_ref(v);
            if entry.is_zero() {
                terms.remove(k);
            }
        }
        PiScalar { terms }
    }

    pub fn neg(&self) -> Self {
        PiScalar { terms: self.terms.iter().map(|(k, v)| (*k, v.neg_ref())).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out: BTreeMap<i32, C> = BTreeMap::new();
        for (ka, va) in &self.terms {
            for (kb, vb) in &other.terms {
                let prod = va.mul_ref(vb);
                if prod.is_zero() {
                    continue;
                }
                let entry = out.entry(ka + kb).or_insert_with(C::zero);
                *entry = entry.add_ref(&prod);
                if entry.is_zero() {
                    out.remove(&(ka + kb));
                }
            }
        }
        PiScalar { terms: out }
    }

    pub fn scale(&self, r: &Rat) -> Self {
        if num::Zero::is_zero(r) {
            return Self::zero();
        }
        PiScalar { terms: self.terms.iter().map(|(k, v)| (*k, v.mul_rat(r))).collect() }
    }

    pub fn coefficient(&self, half_powers: i32) -> C {
        self.terms.get(&half_powers).cloned().unwrap_or_else(C::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&i32, &C)> {
        self.terms.iter()
    }

    pub fn map_coeffs<D: Coeff>(&self, f: impl Fn(&C) -> D) -> PiScalar<D> {
        let mut terms = BTreeMap::new();
        for (k, v) in &self.terms {
            let w = f(v);
            if !w.is_zero() {
                terms.insert(*k, w);
            }
        }
        PiScalar { terms }
    }
}

impl ExactScalar {
    pub fn from_rat(r: Rat) -> Self {
        Self::single(0, r)
    }

    pub fn from_int(v: i64) -> Self {
        Self::from_rat(Rat::from_integer(v.into()))
    }

    /// Numeric value, for the float cross-checker only.
    pub fn to_f64(&self) -> f64 {
        let mut acc = 0.0;
        for (k, v) in &self.terms {
            let c = rat_to_f64(v);
            acc += c * std::f64::consts::PI.powf(*k as f64 / 2.0);
        }
        acc
    }
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    use num::ToPrimitive;
    r.to_f64().unwrap_or_else(|| {
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

impl<C: Coeff> fmt::Display for PiScalar<C> {
    /// Canonical form `c + c*pi^(k/2)`, summands sorted by exponent.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, v) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if *k == 0 {
                write!(f, "{}", v)?;
            } else if *k == 2 {
                write!(f, "{}*pi", v)?;
            } else if k % 2 == 0 {
                write!(f, "{}*pi^{}", v, k / 2)?;
            } else {
                write!(f, "{}*pi^({}/2)", v, k)?;
            }
        }
        Ok(())
    }
}

/// Element of a module over the coefficient ring: what an `EpsSeries` can hold.
pub trait SeriesElem: Clone + PartialEq + Debug + Send + Sync {
    fn zero_elem() -> Self;
    fn is_zero_elem(&self) -> bool;
    fn add_elem(&self, other: &Self) -> Self;
    fn neg_elem(&self) -> Self;
    /// Product, used by the Cauchy product of series. Not required to be
    /// commutative.
    fn mul_elem(&self, other: &Self) -> Self;
}

use std::fmt::Debug;

impl<C: Coeff> SeriesElem for PiScalar<C> {
    fn zero_elem() -> Self {
        Self::zero()
    }
    fn is_zero_elem(&self) -> bool {
        self.is_zero()
    }
    fn add_elem(&self, other: &Self) -> Self {
        self.add(other)
    }
    fn neg_elem(&self) -> Self {
        self.neg()
    }
    fn mul_elem(&self, other: &Self) -> Self {
        self.mul(other)
    }
}

/// Truncated formal Laurent series `sum_k c_k eps^k` with finite singular part.
///
/// `exact_up_to` is the certified window: every coefficient at exponent
/// `<= exact_up_to` is exact; anything above has been discarded.
#[derive(Clone, PartialEq, Debug)]
pub struct EpsSeries<T: SeriesElem> {
    lowest: i64,
    coeffs: Vec<T>,
    exact_up_to: i64,
}

impl<T: SeriesElem> EpsSeries<T> {
    pub fn zero(n_trunc: i64) -> Self {
        EpsSeries { lowest: 0, coeffs: Vec::new(), exact_up_to: n_trunc }
    }

    pub fn single(k: i64, value: T, n_trunc: i64) -> Self {
        let mut s = Self::zero(n_trunc);
        s.add_term(k, value);
        s
    }

    pub fn from_coeffs(lowest: i64, coeffs: Vec<T>, n_trunc: i64) -> Self {
        let mut s = EpsSeries { lowest, coeffs, exact_up_to: n_trunc };
        s.trim();
        s
    }

    pub fn exact_up_to(&self) -> i64 {
        self.exact_up_to
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Lowest exponent carrying a nonzero coefficient; `None` for the zero series.
    pub fn valuation(&self) -> Option<i64> {
        if self.coeffs.is_empty() {
            None
        } else {
            Some(self.lowest)
        }
    }

    fn trim(&mut self) {
        while let Some(last) = self.coeffs.last() {
            if last.is_zero_elem() {
                self.coeffs.pop();
            } else {
                break;
            }
        }
        while let Some(first) = self.coeffs.first() {
            if first.is_zero_elem() {
                self.coeffs.remove(0);
                self.lowest += 1;
            } else {
                break;
            }
        }
        // Drop anything outside the certified window.
        while !self.coeffs.is_empty() && self.lowest + self.coeffs.len() as i64 - 1 > self.exact_up_to {
            self.coeffs.pop();
        }
        if self.coeffs.is_empty() {
            self.lowest = 0;
        }
    }

    pub fn add_term(&mut self, k: i64, value: T) {
        if value.is_zero_elem() || k > self.exact_up_to {
            return;
        }
        if self.coeffs.is_empty() {
            self.lowest = k;
            self.coeffs.push(value);
            return;
        }
        if k < self.lowest {
            let pad = (self.lowest - k) as usize;
            let mut new_coeffs = Vec::with_capacity(pad + self.coeffs.len());
            new_coeffs.push(value);
            for _ in 1..pad {
                new_coeffs.push(T::zero_elem());
            }
            new_coeffs.append(&mut self.coeffs);
            self.coeffs = new_coeffs;
            self.lowest = k;
        } else {
            let idx = (k - self.lowest) as usize;
            while self.coeffs.len() <= idx {
                self.coeffs.push(T::zero_elem());
            }
            self.coeffs[idx] = self.coeffs[idx].add_elem(&value);
        }
        self.trim();
    }

    /// Exact coefficient of `eps^k`. Reads beyond the certified window are
    /// errors, never silently zero.
    pub fn coefficient(&self, k: i64) -> Result<T> {
        if k > self.exact_up_to {
            return Err(EngineError::OutOfCertifiedRange { k, upto: self.exact_up_to });
        }
        if self.coeffs.is_empty() || k < self.lowest || k >= self.lowest + self.coeffs.len() as i64 {
            return Ok(T::zero_elem());
        }
        Ok(self.coeffs[(k - self.lowest) as usize].clone())
    }

    pub fn iter_terms(&self) -> impl Iterator<Item = (i64, &T)> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero_elem())
            .map(move |(i, c)| (self.lowest + i as i64, c))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.exact_up_to != other.exact_up_to {
            return Err(EngineError::TruncationMismatch(self.exact_up_to, other.exact_up_to));
        }
        let mut out = self.clone();
        for (k, v) in other.iter_terms() {
            out.add_term(k, v.clone());
        }
        Ok(out)
    }

    pub fn neg(&self) -> Self {
        EpsSeries {
            lowest: self.lowest,
            coeffs: self.coeffs.iter().map(|c| c.neg_elem()).collect(),
            exact_up_to: self.exact_up_to,
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    /// Cauchy product truncated at the shared window.
    ///
    /// The window of the product accounts for the discarded tails of both
    /// factors: coefficient `k` of the product is exact only when no discarded
    /// coefficient of either factor can reach it.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.exact_up_to != other.exact_up_to {
            return Err(EngineError::TruncationMismatch(self.exact_up_to, other.exact_up_to));
        }
        if self.is_zero() || other.is_zero() {
            return Ok(Self::zero(self.exact_up_to));
        }
        let window = (self.exact_up_to + other.lowest).min(other.exact_up_to + self.lowest);
        let mut out = EpsSeries { lowest: 0, coeffs: Vec::new(), exact_up_to: window };
        for (ka, va) in self.iter_terms() {
            for (kb, vb) in other.iter_terms() {
                let prod = va.mul_elem(vb);
                out.add_term(ka + kb, prod);
            }
        }
        Ok(out)
    }

    pub fn shift(&self, by: i64) -> Self {
        if self.is_zero() {
            let mut s = self.clone();
            s.exact_up_to = self.exact_up_to + by;
            return s;
        }
        EpsSeries {
            lowest: self.lowest + by,
            coeffs: self.coeffs.clone(),
            exact_up_to: self.exact_up_to + by,
        }
    }

    pub fn map<U: SeriesElem>(&self, f: impl Fn(&T) -> U) -> EpsSeries<U> {
        let mut out = EpsSeries::zero(self.exact_up_to);
        for (k, v) in self.iter_terms() {
            out.add_term(k, f(v));
        }
        out
    }

    /// Restrict the certified window (never widens it).
    pub fn with_window(&self, window: i64) -> Self {
        let mut s = self.clone();
        s.exact_up_to = s.exact_up_to.min(window);
        s.trim();
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::rat_int;

    fn sc(v: i64) -> ExactScalar {
        ExactScalar::from_int(v)
    }

    #[test]
    fn exponent_cancellation() {
        // (eps^-1) * (eps) = 1
        let a = EpsSeries::single(-1, sc(1), 4);
        let b = EpsSeries::single(1, sc(1), 4);
        let p = a.mul(&b).unwrap();
        assert_eq!(p.coefficient(0).unwrap(), sc(1));
        assert_eq!(p.valuation(), Some(0));
    }

    #[test]
    fn polynomial_square() {
        // (1 + eps)^2 = 1 + 2 eps + eps^2
        let mut a = EpsSeries::single(0, sc(1), 8);
        a.add_term(1, sc(1));
        let p = a.mul(&a).unwrap();
        assert_eq!(p.coefficient(0).unwrap(), sc(1));
        assert_eq!(p.coefficient(1).unwrap(), sc(2));
        assert_eq!(p.coefficient(2).unwrap(), sc(1));
        assert_eq!(p.coefficient(3).unwrap(), ExactScalar::zero());
    }

    #[test]
    fn truncation_contract() {
        // (eps^-1 + 1) * eps truncated at order 0: the kept part is exactly 1
        // and the eps^1 coefficient is flagged as outside the window.
        let mut a = EpsSeries::single(-1, sc(1), 1);
        a.add_term(0, sc(1));
        let b = EpsSeries::single(1, sc(1), 1);
        let p = a.mul(&b).unwrap();
        assert_eq!(p.exact_up_to(), 0);
        assert_eq!(p.coefficient(0).unwrap(), sc(1));
        assert!(p.coefficient(1).is_err());
    }

    #[test]
    fn coefficient_reads() {
        // 4 pi eps^-1 + 7
        let mut s = EpsSeries::single(-1, ExactScalar::single(2, rat_int(4)), 1);
        s.add_term(0, sc(7));
        assert_eq!(s.coefficient(0).unwrap(), sc(7));
        assert_eq!(s.coefficient(-1).unwrap(), ExactScalar::single(2, rat_int(4)));
        assert!(matches!(
            s.coefficient(2),
            Err(EngineError::OutOfCertifiedRange { k: 2, upto: 1 })
        ));
    }

    #[test]
    fn window_shrinks_through_singular_products() {
        // a has a discarded tail above eps^2; multiplying by eps^-2 means
        // coefficients above eps^0 of the product depend on it.
        let mut a = EpsSeries::single(0, sc(1), 2);
        a.add_term(2, sc(5));
        let b = EpsSeries::single(-2, sc(1), 2);
        let p = a.mul(&b).unwrap();
        assert_eq!(p.exact_up_to(), 0);
        assert_eq!(p.coefficient(0).unwrap(), sc(5));
        assert!(p.coefficient(1).is_err());
    }

    #[test]
    fn pi_scalar_display() {
        let v = ExactScalar::from_int(7)
            .add(&ExactScalar::single(2, rat_int(4)))
            .add(&ExactScalar::single(3, crate::coeff::rat(1, 2)));
        assert_eq!(v.to_string(), "7 + 4*pi + 1/2*pi^(3/2)");
    }

    #[test]
    fn pi_scalar_ring() {
        // (2 + pi^(1/2))^2 = 4 + 4 pi^(1/2) + pi
        let v = ExactScalar::from_int(2).add(&ExactScalar::single(1, rat_int(1)));
        let sq = v.mul(&v);
        assert_eq!(sq.coefficient(0), rat_int(4));
        assert_eq!(sq.coefficient(1), rat_int(4));
        assert_eq!(sq.coefficient(2), rat_int(1));
    }
}
