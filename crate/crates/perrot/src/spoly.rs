//! Polynomials in simplex coordinates, with exact Dirichlet integration.
//!
//! Heat factors inside a cocycle component carry symbolic simplex coordinates;
//! every integral that appears is of a polynomial over a standard simplex and
//! is evaluated exactly by the Dirichlet monomial formula
//! `int_{Sigma^p} s0^a0 ... sp^ap ds = prod(ai!) / (sum(ai) + p)!`.

use std::collections::BTreeMap;
use std::fmt;


use crate::coeff::{factorial, Coeff, Rat};

/// Sparse polynomial over the rationals in variables `s0, s1, ...`.
///
/// Monomial keys store exponents with trailing zeros trimmed, so the variable
/// count is implicit.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SPoly {
    terms: BTreeMap<Vec<u8>, Rat>,
}

impl SPoly {
    pub fn constant(r: Rat) -> Self {
        let mut terms = BTreeMap::new();
        if !r.is_zero() {
            terms.insert(Vec::new(), r);
        }
        SPoly { terms }
    }

    pub fn var(index: usize) -> Self {
        let mut exps = vec![0u8; index + 1];
        exps[index] = 1;
        let mut terms = BTreeMap::new();
        terms.insert(exps, Rat::from_integer(1.into()));
        SPoly { terms }
    }

    fn insert(&mut self, mut exps: Vec<u8>, coeff: Rat) {
        if coeff.is_zero() {
            return;
        }
        while exps.last() == Some(&0) {
            exps.pop();
        }
        let entry = self.terms.entry(exps.clone()).or_insert_with(Rat::zero);
        *entry += coeff;
        if entry.is_zero() {
            self.terms.remove(&exps);
        }
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..k {
            acc = acc.mul_ref(self);
        }
        acc
    }

    /// Total degree in the variables with index `>= from`.
    fn degree_from(exps: &[u8], from: usize) -> u64 {
        exps.iter().skip(from).map(|&e| e as u64).sum()
    }

    /// Exact integral over the standard simplex spanned by the variables
    /// `s_from .. s_{from+count-1}` (which must be every variable the monomial
    /// uses at index `>= from`), leaving lower-indexed variables symbolic.
    ///
    /// `count` is the number of simplex coordinates, so the simplex has
    /// dimension `count - 1`.
    pub fn integrate_simplex(&self, from: usize, count: usize) -> SPoly {
        assert!(count >= 1);
        let p = (count - 1) as u64;
        let mut out = SPoly::constant(Rat::zero());
        for (exps, c) in &self.terms {
            let outer: Vec<u8> = exps.iter().take(from).cloned().collect();
            let total = Self::degree_from(exps, from);
            let mut value = factorial(total + p);
            let mut numer = Rat::from_integer(1.into());
            for i in from..from + count {
                let e = exps.get(i).copied().unwrap_or(0) as u64;
                numer *= factorial(e);
            }
            debug_assert!(exps.len() <= from + count, "monomial uses variables beyond the simplex");
            value = numer / value;
            out.insert(outer, c * value);
        }
        out
    }

    /// Substitute variable `index` by the constant 1 (used to impose the
    /// simplex constraint on heat markers).
    pub fn set_var_one(&self, index: usize) -> SPoly {
        let mut out = SPoly::constant(Rat::zero());
        for (exps, c) in &self.terms {
            let mut e = exps.clone();
            if e.len() > index {
                e[index] = 0;
            }
            out.insert(e, c.clone());
        }
        out
    }

    pub fn eval(&self, values: &[Rat]) -> Rat {
        let mut acc = Rat::zero();
        for (exps, c) in &self.terms {
            let mut m = c.clone();
            for (i, &e) in exps.iter().enumerate() {
                for _ in 0..e {
                    m *= &values[i];
                }
            }
            acc += m;
        }
        acc
    }

    pub fn max_var_index(&self) -> Option<usize> {
        self.terms.keys().filter(|e| !e.is_empty()).map(|e| e.len() - 1).max()
    }
}

impl fmt::Display for SPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (exps, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{}", c)?;
            for (i, &e) in exps.iter().enumerate() {
                if e == 1 {
                    write!(f, "*s{}", i)?;
                } else if e > 1 {
                    write!(f, "*s{}^{}", i, e)?;
                }
            }
        }
        Ok(())
    }
}

impl Coeff for SPoly {
    fn zero() -> Self {
        SPoly::constant(Rat::zero())
    }
    fn one() -> Self {
        SPoly::constant(Rat::from_integer(1.into()))
    }
    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    fn add_ref(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.insert(e.clone(), c.clone());
        }
        out
    }
    fn neg_ref(&self) -> Self {
        SPoly { terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect() }
    }
    fn mul_ref(&self, other: &Self) -> Self {
        let mut out = SPoly::constant(Rat::zero());
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let len = ea.len().max(eb.len());
                let mut e = vec![0u8; len];
                for (i, v) in ea.iter().enumerate() {
                    e[i] += v;
                }
                for (i, v) in eb.iter().enumerate() {
                    e[i] += v;
                }
                out.insert(e, ca * cb);
            }
        }
        out
    }
    fn from_rat(r: Rat) -> Self {
        SPoly::constant(r)
    }
    fn mul_rat(&self, r: &Rat) -> Self {
        if r.is_zero() {
            return Self::zero();
        }
        SPoly { terms: self.terms.iter().map(|(e, c)| (e.clone(), c * r)).collect() }
    }
    fn as_rat(&self) -> Option<Rat> {
        if self.terms.is_empty() {
            return Some(Rat::zero());
        }
        if self.terms.len() == 1 {
            if let Some(c) = self.terms.get(&Vec::new()) {
                return Some(c.clone());
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::{rat, rat_int};

    #[test]
    fn dirichlet_basic() {
        // int_{Sigma^1} s0 ds = 1/2
        let p = SPoly::var(0);
        let v = p.integrate_simplex(0, 2).as_rat().unwrap();
        assert_eq!(v, rat(1, 2));
        // int_{Sigma^2} s0 s1 ds = 1!1!/(2+2)! = 1/24
        let q = SPoly::var(0).mul_ref(&SPoly::var(1));
        assert_eq!(q.integrate_simplex(0, 3).as_rat().unwrap(), rat(1, 24));
        // volume of Sigma^2 is 1/2
        assert_eq!(SPoly::one().integrate_simplex(0, 3).as_rat().unwrap(), rat(1, 2));
    }

    #[test]
    fn dirichlet_vanishing_on_simplex() {
        // (s0 + s1 - 1) vanishes on Sigma^1, so its integral against anything
        // polynomial must vanish.
        let rel = SPoly::var(0).add_ref(&SPoly::var(1)).sub_ref(&SPoly::one());
        let g = SPoly::var(0).pow(2).add_ref(&SPoly::var(1));
        let prod = rel.mul_ref(&g);
        assert_eq!(prod.integrate_simplex(0, 2).as_rat().unwrap(), rat_int(0));
    }

    #[test]
    fn partial_integration_keeps_outer_vars() {
        // int over (s1, s2) in Sigma^1 of s0^2 * s1 = s0^2 / 2
        let p = SPoly::var(0).pow(2).mul_ref(&SPoly::var(1));
        let out = p.integrate_simplex(1, 2);
        assert_eq!(out, SPoly::var(0).pow(2).mul_rat(&rat(1, 2)));
    }
}
