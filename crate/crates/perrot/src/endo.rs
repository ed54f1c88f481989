//! Endomorphisms of the exterior-algebra fiber: normal-ordered words in
//! `psi^i` (exterior multiplication by `dx^i`) and `psibar_j` (contraction by
//! `d/dx^j`), with the relations
//! `{psi^i, psibar_j} = delta^i_j`, `{psi^i, psi^j} = 0`,
//! `{psibar_i, psibar_j} = 0`.
//!
//! Normal order: all `psi` factors left of all `psibar` factors, indices
//! ascending in each group. Words are stored as a pair of bitmasks.

use std::collections::BTreeMap;
use std::fmt;

use crate::coeff::{Coeff, Rat};

/// `(psi mask, psibar mask)` of a normal-ordered word.
pub type Word = (u8, u8);

pub fn word_parity(w: Word) -> u8 {
    ((w.0.count_ones() + w.1.count_ones()) % 2) as u8
}

/// Sign of concatenating the ascending word for `left` with the ascending word
/// for `right` and resorting ascending; `None` when an index repeats.
pub fn merge_sign(left: u8, right: u8) -> Option<(u8, i64)> {
    if left & right != 0 {
        return None;
    }
    let mut inversions = 0u32;
    for r in 0..8u8 {
        if right & (1 << r) != 0 {
            inversions += (left >> (r + 1)).count_ones();
        }
    }
    Some((left | right, if inversions % 2 == 0 { 1 } else { -1 }))
}

/// Normal ordering of `psibar_B . psi^C`: a list of `(word, sign)` with the
/// word already in normal order. Recursive on the highest `psibar` index, so
/// re-appending it to the `psibar` tail never produces a sign.
fn bar_psi_product(bar: u8, psi: u8) -> Vec<(Word, i64)> {
    if bar == 0 {
        return vec![((psi, 0), 1)];
    }
    let b = 7 - bar.leading_zeros() as u8; // highest index in bar
    let rest = bar & !(1 << b);
    let mut out = Vec::new();
    // psibar_b psi^C = (-1)^{pos(b in C)} psi^{C \ b} + (-1)^{|C|} psi^C psibar_b
    if psi & (1 << b) != 0 {
        let pos = (psi & ((1 << b) - 1)).count_ones();
        let sign = if pos % 2 == 0 { 1 } else { -1 };
        for ((p, q), s) in bar_psi_product(rest, psi & !(1 << b)) {
            out.push(((p, q), s * sign));
        }
    }
    let pass_sign = if psi.count_ones() % 2 == 0 { 1 } else { -1 };
    for ((p, q), s) in bar_psi_product(rest, psi) {
        // q collects indices from rest only, all smaller than b.
        out.push(((p, q | (1 << b)), s * pass_sign));
    }
    out
}

/// Product of two normal-ordered words as a normal-ordered combination.
pub fn word_mul(a: Word, b: Word) -> Vec<(Word, i64)> {
    let (psi_a, bar_a) = a;
    let (psi_b, bar_b) = b;
    let mut out = Vec::new();
    for ((psi_m, bar_m), s0) in bar_psi_product(bar_a, psi_b) {
        let Some((psi, s1)) = merge_sign(psi_a, psi_m) else { continue };
        let Some((bar, s2)) = merge_sign(bar_m, bar_b) else { continue };
        out.push(((psi, bar), s0 * s1 * s2));
    }
    out
}

/// Finite sum of normal-ordered words with scalar coefficients.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct EndS<C: Coeff> {
    n: usize,
    terms: BTreeMap<Word, C>,
}

impl<C: Coeff> EndS<C> {
    pub fn zero(n: usize) -> Self {
        EndS { n, terms: BTreeMap::new() }
    }

    pub fn one(n: usize) -> Self {
        Self::word(n, (0, 0))
    }

    pub fn word(n: usize, w: Word) -> Self {
        let mut e = Self::zero(n);
        e.accumulate(w, C::one());
        e
    }

    pub fn psi(n: usize, i: usize) -> Self {
        assert!(i < n);
        Self::word(n, (1 << i, 0))
    }

    pub fn psibar(n: usize, j: usize) -> Self {
        assert!(j < n);
        Self::word(n, (0, 1 << j))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn accumulate(&mut self, w: Word, c: C) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(w).or_insert_with(C::zero);
        *entry = entry.add_ref(&c);
        if entry.is_zero() {
            self.terms.remove(&w);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.accumulate(*w, c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        EndS { n: self.n, terms: self.terms.iter().map(|(w, c)| (*w, c.neg_ref())).collect() }
    }

    pub fn scale_rat(&self, r: &Rat) -> Self {
        let mut out = Self::zero(self.n);
        for (w, c) in &self.terms {
            out.accumulate(*w, c.mul_rat(r));
        }
        out
    }

    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let mut out = Self::zero(self.n);
        for (wa, ca) in &self.terms {
            for (wb, cb) in &other.terms {
                let c = ca.mul_ref(cb);
                if c.is_zero() {
                    continue;
                }
                for (w, s) in word_mul(*wa, *wb) {
                    out.accumulate(w, c.mul_rat(&Rat::from_integer(s.into())));
                }
            }
        }
        out
    }

    /// `str_Lambda`: 1 on the full word `psi^{1..n} psibar_{1..n}`, 0 on every
    /// other normal-ordered word.
    pub fn supertrace(&self) -> C {
        let full: u8 = (1 << self.n) - 1;
        self.terms.get(&(full, full)).cloned().unwrap_or_else(C::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &C)> {
        self.terms.iter()
    }
}

fn word_symbols(w: Word, n: usize) -> String {
    let mut s = String::new();
    for i in 0..n {
        if w.0 & (1 << i) != 0 {
            s.push_str(&format!("psi{}", i + 1));
            s.push('*');
        }
    }
    for j in 0..n {
        if w.1 & (1 << j) != 0 {
            s.push_str(&format!("psibar{}", j + 1));
            s.push('*');
        }
    }
    s.pop();
    s
}

impl<C: Coeff> fmt::Display for EndS<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (w, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if *w == (0, 0) {
                write!(f, "{}", c)?;
            } else {
                write!(f, "{}*{}", c, word_symbols(*w, self.n))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::rat_int;

    type E = EndS<Rat>;

    /// Matrix of a word on the basis `{dx^I}`, `I` a subset of `{1..n}` with
    /// ascending factors. Independent oracle for the word algebra.
    fn word_matrix(w: Word, n: usize) -> Vec<Vec<i64>> {
        let dim = 1usize << n;
        let mut m = vec![vec![0i64; dim]; dim];
        for basis in 0..dim {
            // apply psibar factors from the rightmost (highest index acts last
            // in the word, so apply ascending order from the right: the word is
            // psibar_{j1} ... psibar_{jk} with j ascending; the rightmost acts
            // first on the argument).
            let mut state: Option<(usize, i64)> = Some((basis, 1));
            for j in (0..n).rev() {
                if w.1 & (1 << j) == 0 {
                    continue;
                }
                state = state.and_then(|(b, s)| {
                    if b & (1 << j) == 0 {
                        None
                    } else {
                        let before = (b & ((1 << j) - 1)).count_ones();
                        let sign = if before % 2 == 0 { 1 } else { -1 };
                        Some((b & !(1 << j), s * sign))
                    }
                });
            }
            for i in (0..n).rev() {
                if w.0 & (1 << i) == 0 {
                    continue;
                }
                state = state.and_then(|(b, s)| {
                    if b & (1 << i) != 0 {
                        None
                    } else {
                        let before = (b & ((1 << i) - 1)).count_ones();
                        let sign = if before % 2 == 0 { 1 } else { -1 };
                        Some((b | (1 << i), s * sign))
                    }
                });
            }
            if let Some((out, s)) = state {
                m[out][basis] += s;
            }
        }
        m
    }

    fn ends_matrix(e: &E) -> Vec<Vec<Rat>> {
        let dim = 1usize << e.n();
        let mut m = vec![vec![Rat::from_integer(0.into()); dim]; dim];
        for (w, c) in e.terms() {
            let wm = word_matrix(*w, e.n());
            for r in 0..dim {
                for col in 0..dim {
                    if wm[r][col] != 0 {
                        m[r][col] += c * Rat::from_integer(wm[r][col].into());
                    }
                }
            }
        }
        m
    }

    fn mat_mul(a: &[Vec<Rat>], b: &[Vec<Rat>]) -> Vec<Vec<Rat>> {
        let dim = a.len();
        let mut m = vec![vec![Rat::from_integer(0.into()); dim]; dim];
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    m[i][j] += &a[i][k] * &b[k][j];
                }
            }
        }
        m
    }

    #[test]
    fn exterior_square_vanishes() {
        let p = E::psi(1, 0);
        assert!(p.compose(&p).is_zero());
        let p = E::psi(3, 2);
        assert!(p.compose(&p).is_zero());
    }

    #[test]
    fn anticommutator_relation() {
        // psibar_1 psi^1 = 1 - psi^1 psibar_1
        let prod = E::psibar(1, 0).compose(&E::psi(1, 0));
        let expected = E::one(1).add(&E::word(1, (1, 1)).neg());
        assert_eq!(prod, expected);
    }

    #[test]
    fn matrix_of_psi_psibar_at_n1() {
        // psi^1 psibar_1 on {1, dx^1} is diag(0, 1).
        let m = word_matrix((1, 1), 1);
        assert_eq!(m, vec![vec![0, 0], vec![0, 1]]);
    }

    #[test]
    fn composition_matches_matrices_exhaustively() {
        for n in 1..=3usize {
            let dim = 1u8 << n;
            let words: Vec<Word> = (0..dim)
                .flat_map(|p| (0..dim).map(move |b| (p, b)))
                .collect();
            for &wa in &words {
                for &wb in &words {
                    let ea = E::word(n, wa);
                    let eb = E::word(n, wb);
                    let algebra = ends_matrix(&ea.compose(&eb));
                    let matrices = mat_mul(&ends_matrix(&ea), &ends_matrix(&eb));
                    assert_eq!(algebra, matrices, "n={} wa={:?} wb={:?}", n, wa, wb);
                }
            }
        }
    }

    #[test]
    fn associativity_on_words() {
        for n in 1..=2usize {
            let dim = 1u8 << n;
            let words: Vec<Word> = (0..dim)
                .flat_map(|p| (0..dim).map(move |b| (p, b)))
                .collect();
            for &wa in &words {
                for &wb in &words {
                    for &wc in &words {
                        let a = E::word(n, wa);
                        let b = E::word(n, wb);
                        let c = E::word(n, wc);
                        assert_eq!(a.compose(&b).compose(&c), a.compose(&b.compose(&c)));
                    }
                }
            }
        }
        // Randomized triples at n = 3.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let w = |rng: &mut rand_chacha::ChaCha8Rng| -> E {
                let mut e = E::zero(3);
                for _ in 0..2 {
                    e = e.add(&E::word(3, (rng.gen_range(0..8), rng.gen_range(0..8)))
                        .scale_rat(&rat_int(rng.gen_range(-3i64..4))));
                }
                e
            };
            let (a, b, c) = (w(&mut rng), w(&mut rng), w(&mut rng));
            assert_eq!(a.compose(&b).compose(&c), a.compose(&b.compose(&c)));
        }
    }

    #[test]
    fn supertrace_table() {
        assert_eq!(E::word(1, (1, 1)).supertrace(), rat_int(1));
        assert_eq!(E::one(1).supertrace(), rat_int(0));
        assert_eq!(E::psi(1, 0).supertrace(), rat_int(0));
        assert_eq!(E::word(2, (3, 3)).supertrace(), rat_int(1));
        assert_eq!(E::word(2, (3, 1)).supertrace(), rat_int(0));
    }

    #[test]
    fn supertrace_vanishes_on_supercommutators() {
        for n in 1..=3usize {
            let dim = 1u8 << n;
            let words: Vec<Word> = (0..dim)
                .flat_map(|p| (0..dim).map(move |b| (p, b)))
                .collect();
            for &wa in &words {
                for &wb in &words {
                    let a = E::word(n, wa);
                    let b = E::word(n, wb);
                    let ab = a.compose(&b);
                    let ba = b.compose(&a);
                    let sign = if word_parity(wa) == 1 && word_parity(wb) == 1 { 1 } else { -1 };
                    // str(ab - (-1)^{|a||b|} ba) = 0
                    let comm = ab.add(&ba.scale_rat(&rat_int(sign)));
                    assert_eq!(comm.supertrace(), rat_int(0), "n={} wa={:?} wb={:?}", n, wa, wb);
                }
            }
        }
    }
}
