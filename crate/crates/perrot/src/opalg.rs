//! The algebra of normal-ordered polyhomogeneous differential operators on the
//! punctured cotangent bundle, acting on sections of the pulled-back exterior
//! bundle.
//!
//! A term is `f(x,xi) * psi^mu psibar_nu * d^alpha/dx^alpha d^beta/dxi_beta`
//! with all coefficient functions and endomorphism letters left of all
//! derivatives. Composition normal-orders via the Leibniz rule.
//!
//! Two filtrations live here:
//! - bimodule order: `d/dx -> 3`, `d/dxi -> -1`, degree-p functions `-> 2p`,
//!   `psi`/`psibar -> 0`; governs membership in the trace bimodule.
//! - Perrot order: `deg f + |alpha| - |beta| + |nu|`; negative order forces a
//!   vanishing supertrace.

use std::collections::BTreeMap;
use std::fmt;

use crate::coeff::{binomial, Coeff, Rat};
use crate::endo::{word_mul, Word};
use crate::error::{EngineError, Result};
use crate::exactnum::SeriesElem;
use crate::phfun::{Beta, PhFun, MAX_N};

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct OpKey {
    pub word: Word,
    pub alpha: Beta,
    pub beta: Beta,
}

impl OpKey {
    pub fn scalar() -> Self {
        OpKey { word: (0, 0), alpha: [0; MAX_N], beta: [0; MAX_N] }
    }
}

fn abs(b: &Beta) -> i64 {
    b.iter().map(|&v| v as i64).sum()
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PDOp<C: Coeff> {
    n: usize,
    terms: BTreeMap<OpKey, PhFun<C>>,
}

impl<C: Coeff> PDOp<C> {
    pub fn zero(n: usize) -> Self {
        PDOp { n, terms: BTreeMap::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_phfun(PhFun::one(n))
    }

    pub fn from_phfun(f: PhFun<C>) -> Self {
        let n = f.n();
        let mut op = Self::zero(n);
        op.accumulate(OpKey::scalar(), f);
        op
    }

    pub fn term(n: usize, key: OpKey, f: PhFun<C>) -> Self {
        let mut op = Self::zero(n);
        op.accumulate(key, f);
        op
    }

    /// `d/dx^i` (0-based).
    pub fn dx(n: usize, i: usize) -> Self {
        assert!(i < n);
        let mut alpha = [0u8; MAX_N];
        alpha[i] = 1;
        Self::term(n, OpKey { word: (0, 0), alpha, beta: [0; MAX_N] }, PhFun::one(n))
    }

    /// `d/dxi_j` (0-based).
    pub fn dxi(n: usize, j: usize) -> Self {
        assert!(j < n);
        let mut beta = [0u8; MAX_N];
        beta[j] = 1;
        Self::term(n, OpKey { word: (0, 0), alpha: [0; MAX_N], beta }, PhFun::one(n))
    }

    pub fn psi(n: usize, i: usize) -> Self {
        assert!(i < n);
        Self::term(n, OpKey { word: (1 << i, 0), alpha: [0; MAX_N], beta: [0; MAX_N] }, PhFun::one(n))
    }

    pub fn psibar(n: usize, j: usize) -> Self {
        assert!(j < n);
        Self::term(n, OpKey { word: (0, 1 << j), alpha: [0; MAX_N], beta: [0; MAX_N] }, PhFun::one(n))
    }

    /// The coordinate Laplacian `sum_i d^2/dx^i dxi_i`.
    pub fn laplacian(n: usize) -> Self {
        let mut op = Self::zero(n);
        for i in 0..n {
            let mut alpha = [0u8; MAX_N];
            let mut beta = [0u8; MAX_N];
            alpha[i] = 1;
            beta[i] = 1;
            op.accumulate(OpKey { word: (0, 0), alpha, beta }, PhFun::one(n));
        }
        op
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&OpKey, &PhFun<C>)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    fn accumulate(&mut self, key: OpKey, f: PhFun<C>) {
        if f.is_zero() {
            return;
        }
        match self.terms.get_mut(&key) {
            Some(existing) => {
                *existing = existing.add(&f);
                if existing.is_zero() {
                    self.terms.remove(&key);
                }
            }
            None => {
                self.terms.insert(key, f);
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let mut out = self.clone();
        for (k, f) in &other.terms {
            out.accumulate(k.clone(), f.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        PDOp { n: self.n, terms: self.terms.iter().map(|(k, f)| (k.clone(), f.neg())).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &C) -> Self {
        let mut out = Self::zero(self.n);
        for (k, f) in &self.terms {
            out.accumulate(k.clone(), f.scale(c));
        }
        out
    }

    pub fn scale_rat(&self, r: &Rat) -> Self {
        let mut out = Self::zero(self.n);
        for (k, f) in &self.terms {
            out.accumulate(k.clone(), f.scale_rat(r));
        }
        out
    }

    pub fn mul_phfun_left(&self, f: &PhFun<C>) -> Self {
        let mut out = Self::zero(self.n);
        for (k, g) in &self.terms {
            out.accumulate(k.clone(), f.mul(g));
        }
        out
    }

    pub fn map_coeffs<D: Coeff>(&self, f: impl Fn(&C) -> D) -> PDOp<D> {
        let mut out = PDOp::zero(self.n);
        for (k, g) in &self.terms {
            out.accumulate(k.clone(), g.map_coeffs(&f));
        }
        out
    }

    /// Exact normal-ordered product.
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Self::zero(n);
        for (ka, fa) in &self.terms {
            for (kb, fb) in &other.terms {
                // Move d^alpha d^beta of the left factor past the right
                // coefficient by the Leibniz rule.
                let words = word_mul(ka.word, kb.word);
                if words.is_empty() {
                    continue;
                }
                for_each_sub(&ka.alpha, n, &mut |ap| {
                    for_each_sub(&ka.beta, n, &mut |bp| {
                        let g = fb.derivative_multi(ap, bp);
                        if g.is_zero() {
                            return;
                        }
                        let mut w = Rat::from_integer(1.into());
                        for i in 0..n {
                            w *= binomial(ka.alpha[i] as u64, ap[i] as u64);
                            w *= binomial(ka.beta[i] as u64, bp[i] as u64);
                        }
                        let coeff = fa.mul(&g);
                        let mut alpha = kb.alpha;
                        let mut beta = kb.beta;
                        for i in 0..n {
                            alpha[i] += ka.alpha[i] - ap[i];
                            beta[i] += ka.beta[i] - bp[i];
                        }
                        for &(word, sign) in &words {
                            let signed =
                                coeff.scale_rat(&(&w * Rat::from_integer(sign.into())));
                            out.accumulate(OpKey { word, alpha, beta }, signed);
                        }
                    });
                });
            }
        }
        out
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self.compose(other).sub(&other.compose(self))
    }

    /// `[Delta, self]`.
    pub fn ad_laplacian(&self) -> Self {
        let delta = Self::laplacian(self.n);
        delta.compose(self).sub(&self.compose(&delta))
    }

    /// Max over terms of `2 deg(f) + 3|alpha| - |beta|`; the endomorphism
    /// letters contribute nothing.
    pub fn bimodule_order(&self) -> Result<i64> {
        self.order_by(|deg, key| 2 * deg + 3 * abs(&key.alpha) - abs(&key.beta))
    }

    /// Max over terms of `deg(f) + |alpha| - |beta| + |nu|`.
    pub fn perrot_order(&self) -> Result<i64> {
        self.order_by(|deg, key| {
            deg + abs(&key.alpha) - abs(&key.beta) + key.word.1.count_ones() as i64
        })
    }

    /// Max over terms of `|alpha| + |beta|`, the total derivative count.
    /// Grows by at most 1 under `ad_Delta` and is additive under composition,
    /// which makes it a second, often sharper, certificate for the truncation
    /// audit: a matched block `alpha = beta` needs `2|alpha|` derivatives.
    pub fn derivative_weight(&self) -> i64 {
        self.terms
            .keys()
            .map(|key| abs(&key.alpha) + abs(&key.beta))
            .max()
            .unwrap_or(0)
    }

    fn order_by(&self, f: impl Fn(i64, &OpKey) -> i64) -> Result<i64> {
        let mut best: Option<i64> = None;
        for (key, coeff) in &self.terms {
            for deg in coeff.degrees() {
                let v = f(deg, key);
                best = Some(best.map_or(v, |b| b.max(v)));
            }
        }
        best.ok_or(EngineError::ZeroOperatorOrder)
    }

    /// Decomposition into eigencomponents of `ad_E`; a term sits in degree
    /// `deg(f) - |beta|`.
    pub fn euler_decompose(&self) -> BTreeMap<i64, Self> {
        let mut out: BTreeMap<i64, Self> = BTreeMap::new();
        for (key, coeff) in &self.terms {
            for deg in coeff.degrees() {
                let comp = coeff.homogeneous_component(deg);
                if comp.is_zero() {
                    continue;
                }
                let d = deg - abs(&key.beta);
                out.entry(d).or_insert_with(|| Self::zero(self.n)).accumulate(key.clone(), comp);
            }
        }
        out.retain(|_, op| !op.is_zero());
        out
    }

    /// The derivation `delta = ad_{log q}` for the flat Euclidean metric:
    /// zero on coefficients, `psi`, `psibar` and `d/dx`, and
    /// `delta(d/dxi_j) = -xi_j q^{-2}`, extended by the Leibniz rule.
    pub fn delta_derivation(&self) -> Self {
        let n = self.n;
        let mut out = Self::zero(n);
        for (key, coeff) in &self.terms {
            // Walk the ordered product of dxi factors; replace one at a time.
            for j in 0..n {
                for r in 0..key.beta[j] {
                    // prefix: beta_0..beta_{j-1} full, beta_j := r
                    let mut prefix = [0u8; MAX_N];
                    let mut suffix = [0u8; MAX_N];
                    for i in 0..n {
                        if i < j {
                            prefix[i] = key.beta[i];
                        } else if i > j {
                            suffix[i] = key.beta[i];
                        }
                    }
                    prefix[j] = r;
                    suffix[j] = key.beta[j] - 1 - r;
                    let left = Self::term(
                        n,
                        OpKey { word: key.word, alpha: key.alpha, beta: prefix },
                        coeff.clone(),
                    );
                    let image = PhFun::<C>::xi(n, j)
                        .mul(&PhFun::q_inv_pow(n, 2))
                        .neg();
                    let mid = Self::from_phfun(image);
                    let right = Self::term(
                        n,
                        OpKey { word: (0, 0), alpha: [0; MAX_N], beta: suffix },
                        PhFun::one(n),
                    );
                    out = out.add(&left.compose(&mid).compose(&right));
                }
            }
        }
        out
    }

    /// Endomorphism content reduced by `str_Lambda`: keeps the coefficient of
    /// the full word `psi^{1..n} psibar_{1..n}` as a scalar operator.
    pub fn supertrace_reduce(&self) -> Self {
        let full: u8 = (1 << self.n) - 1;
        let mut out = Self::zero(self.n);
        for (key, coeff) in &self.terms {
            if key.word == (full, full) {
                out.accumulate(
                    OpKey { word: (0, 0), alpha: key.alpha, beta: key.beta },
                    coeff.clone(),
                );
            }
        }
        out
    }

    pub fn is_scalar_endo(&self) -> bool {
        self.terms.keys().all(|k| k.word == (0, 0))
    }

    /// Apply the operator to an exterior-form-valued section.
    pub fn apply(&self, section: &Section<C>) -> Section<C> {
        assert_eq!(self.n, section.n);
        let mut out = Section::zero(self.n);
        for (key, coeff) in &self.terms {
            for (&basis, g) in &section.comps {
                let Some((basis2, sign)) = apply_word(key.word, basis) else { continue };
                let dg = g.derivative_multi(&key.alpha, &key.beta);
                if dg.is_zero() {
                    continue;
                }
                let v = coeff.mul(&dg).scale_rat(&Rat::from_integer(sign.into()));
                out.accumulate(basis2, v);
            }
        }
        out
    }
}

/// Apply a normal-ordered word to the basis form `dx^I` (mask): contractions
/// act first, rightmost (highest index) first.
pub fn apply_word(w: Word, basis: u8) -> Option<(u8, i64)> {
    let mut b = basis;
    let mut sign = 1i64;
    for j in (0..8u8).rev() {
        if w.1 & (1 << j) == 0 {
            continue;
        }
        if b & (1 << j) == 0 {
            return None;
        }
        if (b & ((1 << j) - 1)).count_ones() % 2 == 1 {
            sign = -sign;
        }
        b &= !(1 << j);
    }
    for i in (0..8u8).rev() {
        if w.0 & (1 << i) == 0 {
            continue;
        }
        if b & (1 << i) != 0 {
            return None;
        }
        if (b & ((1 << i) - 1)).count_ones() % 2 == 1 {
            sign = -sign;
        }
        b |= 1 << i;
    }
    Some((b, sign))
}

/// Exterior-form-valued function on the punctured cotangent bundle, the test
/// bed for functional-extensionality checks of the operator algebra.
#[derive(Clone, PartialEq, Debug)]
pub struct Section<C: Coeff> {
    n: usize,
    comps: BTreeMap<u8, PhFun<C>>,
}

impl<C: Coeff> Section<C> {
    pub fn zero(n: usize) -> Self {
        Section { n, comps: BTreeMap::new() }
    }

    pub fn scalar(f: PhFun<C>) -> Self {
        let n = f.n();
        let mut s = Self::zero(n);
        s.accumulate(0, f);
        s
    }

    pub fn form(n: usize, mask: u8, f: PhFun<C>) -> Self {
        let mut s = Self::zero(n);
        s.accumulate(mask, f);
        s
    }

    fn accumulate(&mut self, mask: u8, f: PhFun<C>) {
        if f.is_zero() {
            return;
        }
        match self.comps.get_mut(&mask) {
            Some(existing) => {
                *existing = existing.add(&f);
                if existing.is_zero() {
                    self.comps.remove(&mask);
                }
            }
            None => {
                self.comps.insert(mask, f);
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&m, f) in &other.comps {
            out.accumulate(m, f.clone());
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.comps.is_empty()
    }
}

fn for_each_sub(limit: &Beta, n: usize, f: &mut impl FnMut(&Beta)) {
    let mut current = [0u8; MAX_N];
    fn rec(limit: &Beta, n: usize, var: usize, current: &mut Beta, f: &mut impl FnMut(&Beta)) {
        if var == n {
            f(current);
            return;
        }
        for v in 0..=limit[var] {
            current[var] = v;
            rec(limit, n, var + 1, current, f);
        }
        current[var] = 0;
    }
    rec(limit, n, 0, &mut current, f);
}

impl<C: Coeff> SeriesElem for PDOp<C> {
    fn zero_elem() -> Self {
        PDOp::zero(1)
    }
    fn is_zero_elem(&self) -> bool {
        self.is_zero()
    }
    fn add_elem(&self, other: &Self) -> Self {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        self.add(other)
    }
    fn neg_elem(&self) -> Self {
        self.neg()
    }
    fn mul_elem(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return PDOp::zero(self.n.max(other.n));
        }
        self.compose(other)
    }
}

impl<C: Coeff> fmt::Display for PDOp<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (key, coeff) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({})", coeff)?;
            for i in 0..self.n {
                if key.word.0 & (1 << i) != 0 {
                    write!(f, "*psi{}", i + 1)?;
                }
            }
            for j in 0..self.n {
                if key.word.1 & (1 << j) != 0 {
                    write!(f, "*psibar{}", j + 1)?;
                }
            }
            for i in 0..self.n {
                match key.alpha[i] {
                    0 => {}
                    1 => write!(f, "*dx{}", i + 1)?,
                    a => write!(f, "*dx{}^{}", i + 1, a)?,
                }
            }
            for j in 0..self.n {
                match key.beta[j] {
                    0 => {}
                    1 => write!(f, "*dxi{}", j + 1)?,
                    b => write!(f, "*dxi{}^{}", j + 1, b)?,
                }
            }
        }
        Ok(())
    }
}
