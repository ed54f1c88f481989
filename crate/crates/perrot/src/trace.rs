//! The contraction `<D exp(eps Delta)>`, the F-valued trace, and the
//! supertrace.
//!
//! The contraction replaces a derivative block `d^alpha_x d^beta_xi` by the
//! value of `eps^{-n} d^alpha d^beta exp(-x.xi/eps)` at the origin: zero
//! unless `alpha = beta`, in which case it contributes
//! `prod_i (-1)^{alpha_i} alpha_i! * eps^{-|alpha|-n}`. The trace integrates
//! the surviving coefficient over the cosphere bundle, coefficient by
//! coefficient in `eps`; the supertrace first reduces endomorphism words by
//! `str_Lambda` and then reads the `eps^0` coefficient.

use crate::coeff::{factorial, Coeff, Rat};
use crate::error::{EngineError, Result};
use crate::exactnum::{EpsSeries, PiScalar};
use crate::formal::{audit_bound, FbElem};
use crate::opalg::{OpKey, PDOp};
use crate::phfun::{Beta, MAX_N};

/// `<D exp(eps Delta)>` for a single operator: a series of multiplication
/// operators (coefficient functions times endomorphism words).
pub fn contract<C: Coeff>(op: &PDOp<C>, n_trunc: i64) -> EpsSeries<PDOp<C>> {
    let n = op.n();
    let mut out = EpsSeries::zero(n_trunc);
    for (key, coeff) in op.terms() {
        if key.alpha != key.beta {
            continue;
        }
        let mut value = Rat::from_integer(1.into());
        let mut total: i64 = 0;
        for i in 0..n {
            let a = key.alpha[i] as u64;
            value *= factorial(a);
            if a % 2 == 1 {
                value = -value;
            }
            total += a as i64;
        }
        let term = PDOp::term(
            n,
            OpKey { word: key.word, alpha: [0; MAX_N], beta: [0; MAX_N] },
            coeff.scale_rat(&value),
        );
        out.add_term(-total - n as i64, term);
    }
    out
}

/// The contraction of the commutator `[coordinate, d^alpha d^beta exp(eps Delta)]`,
/// written in the all-derivative form
/// `[d^a d^b e, x^i] = a_i d^{a-e_i} d^b e + eps d^a d^{b+e_i} e` (and the
/// `xi_j` analogue). Feeds the commutator-vanishing checks.
pub enum Coordinate {
    X(usize),
    Xi(usize),
}

pub fn coordinate_commutator_contraction(
    n: usize,
    alpha: &Beta,
    beta: &Beta,
    coord: Coordinate,
    n_trunc: i64,
) -> EpsSeries<PDOp<Rat>> {
    let mut combo: EpsSeries<PDOp<Rat>> = EpsSeries::zero(n_trunc);
    match coord {
        Coordinate::X(i) => {
            if alpha[i] > 0 {
                let mut a = *alpha;
                a[i] -= 1;
                let t = PDOp::term(
                    n,
                    OpKey { word: (0, 0), alpha: a, beta: *beta },
                    crate::phfun::PhFun::constant(n, Rat::from_integer((alpha[i] as i64).into())),
                );
                combo.add_term(0, t);
            }
            let mut b = *beta;
            b[i] += 1;
            combo.add_term(
                1,
                PDOp::term(n, OpKey { word: (0, 0), alpha: *alpha, beta: b }, crate::phfun::PhFun::one(n)),
            );
        }
        Coordinate::Xi(j) => {
            if beta[j] > 0 {
                let mut b = *beta;
                b[j] -= 1;
                let t = PDOp::term(
                    n,
                    OpKey { word: (0, 0), alpha: *alpha, beta: b },
                    crate::phfun::PhFun::constant(n, Rat::from_integer((beta[j] as i64).into())),
                );
                combo.add_term(0, t);
            }
            let mut a = *alpha;
            a[j] += 1;
            combo.add_term(
                1,
                PDOp::term(n, OpKey { word: (0, 0), alpha: a, beta: *beta }, crate::phfun::PhFun::one(n)),
            );
        }
    }
    let mut out = EpsSeries::zero(n_trunc);
    for (k, op) in combo.iter_terms() {
        let c = contract(op, n_trunc);
        out = out.add(&c.shift(k).with_window(n_trunc)).unwrap();
    }
    out
}

/// `Tr_F(X) = sum_k eps^k fint <D_k exp(eps Delta)>` for an element with
/// marker normalized to the plain heat factor. Endomorphism content is
/// rejected; spinor traces go through [`supertrace_f`].
pub fn trace_f<C: Coeff>(x: &FbElem<C>) -> Result<EpsSeries<PiScalar<C>>> {
    if *x.marker() != C::one() && !x.is_zero() {
        return Err(EngineError::MarkerNormalization(format!(
            "trace requires the plain heat marker, found {}",
            x.marker()
        )));
    }
    let n = x.n();
    let window = x.payload().exact_up_to();
    // eps^j of the trace is exact when every payload index that can reach it
    // is inside the certified window; either certificate may provide this.
    let trace_window = div_floor(window - x.cert() - 4 * n as i64, 2)
        .max(div_floor(window.saturating_sub(x.dcert()) - 2 * n as i64, 2));
    let mut out: EpsSeries<PiScalar<C>> = EpsSeries::zero(trace_window);
    for (k, op) in x.payload().iter_terms() {
        if !op.is_scalar_endo() {
            return Err(EngineError::NonScalarEndo);
        }
        let contracted = contract(op, x.payload().exact_up_to());
        for (shift, value) in contracted.iter_terms() {
            let mut integral = PiScalar::zero();
            for (key, f) in value.terms() {
                debug_assert_eq!(key.word, (0, 0));
                integral = integral.add(&f.sphere_integral());
            }
            if !integral.is_zero() {
                out.add_term(k + shift, integral);
            }
        }
    }
    Ok(out)
}

/// `STr_F`: reduce endomorphism words by `str_Lambda`, then the scalar trace.
pub fn supertrace_f<C: Coeff>(x: &FbElem<C>) -> Result<EpsSeries<PiScalar<C>>> {
    let reduced = FbElem::new(
        x.n(),
        x.payload().map(|op| op.supertrace_reduce()),
        x.marker().clone(),
        x.cert(),
        x.dcert(),
    )?;
    trace_f(&reduced)
}

/// The Perrot supertrace: the `eps^0` coefficient of `STr_F`, with the
/// truncation audit enforced by the certified window.
pub fn supertrace<C: Coeff>(x: &FbElem<C>) -> Result<PiScalar<C>> {
    let s = supertrace_f(x)?;
    s.coefficient(0)
}

/// The scalar Perrot trace: `eps^0` coefficient of `Tr_F`.
pub fn perrot_trace<C: Coeff>(x: &FbElem<C>) -> Result<PiScalar<C>> {
    let s = trace_f(x)?;
    s.coefficient(0)
}

/// Required truncation order for reading `eps^j` of the trace of `x`.
pub fn required_n_trunc<C: Coeff>(x: &FbElem<C>, j: i64) -> i64 {
    audit_bound(x.cert(), x.dcert(), x.n(), j)
}

fn div_floor(a: i64, b: i64) -> i64 {
    let q = a / b;
    if a % b != 0 && (a < 0) != (b < 0) {
        q - 1
    } else {
        q
    }
}
