//! Formal series of operators and the trace bimodule: elements
//! `payload * exp(c eps Delta)` with validated order certificates,
//! conjugation by heat elements, the Duhamel perturbation series, and
//! `exp(s D^2)`.
//!
//! Two structural certificates ride along with every element and drive the
//! truncation audit for trace evaluation:
//!
//! - `cert`: `bimodule_order(D_k) <= k + cert`. A term surviving the
//!   contraction and the sphere integral has coefficient degree `-n` and a
//!   matched block `alpha = beta`, so `-2n + 2|alpha| <= k + cert`, hence
//!   only `k <= cert + 4n + 2j` reaches `eps^j` of the trace.
//! - `dcert`: `derivative_weight(D_k) <= k + dcert`. A matched block needs
//!   `2|alpha| <= k + dcert`, hence only `k <= dcert + 2n + 2j` reaches
//!   `eps^j`.
//!
//! Either bound is sound; the audit takes the smaller requirement.

use crate::coeff::{factorial, Coeff, Rat};
use crate::error::{EngineError, Result};
use crate::exactnum::EpsSeries;
use crate::geometry::Dirac;
use crate::opalg::PDOp;
use crate::spoly::SPoly;

pub type OpSeries<C> = EpsSeries<PDOp<C>>;

/// Sentinel for "no useful derivative certificate".
pub const DCERT_UNBOUNDED: i64 = i64::MAX / 8;

/// `payload * exp(marker * eps Delta)` with structural order certificates.
#[derive(Clone, Debug)]
pub struct FbElem<C: Coeff> {
    n: usize,
    payload: OpSeries<C>,
    marker: C,
    cert: i64,
    dcert: i64,
}

impl<C: Coeff> FbElem<C> {
    /// Wrap a payload series with claimed certificates, validating them on
    /// the computed coefficients.
    pub fn new(n: usize, payload: OpSeries<C>, marker: C, cert: i64, dcert: i64) -> Result<Self> {
        for (k, op) in payload.iter_terms() {
            let order = op.bimodule_order()?;
            if order > k + cert {
                return Err(EngineError::BimoduleMembership(format!(
                    "coefficient at eps^{} has bimodule order {} > {} + {}",
                    k, order, k, cert
                )));
            }
            if dcert < DCERT_UNBOUNDED {
                let w = op.derivative_weight();
                if w > k + dcert {
                    return Err(EngineError::BimoduleMembership(format!(
                        "coefficient at eps^{} has derivative weight {} > {} + {}",
                        k, w, k, dcert
                    )));
                }
            }
        }
        Ok(FbElem { n, payload, marker, cert, dcert })
    }

    /// The plain heat element `exp(c eps Delta)`.
    pub fn heat(n: usize, c: C, n_trunc: i64) -> Self {
        FbElem {
            n,
            payload: EpsSeries::single(0, PDOp::identity(n), n_trunc),
            marker: c,
            cert: 0,
            dcert: 0,
        }
    }

    /// Lift a plain operator (no heat factor).
    pub fn from_op(op: PDOp<C>, n_trunc: i64) -> Self {
        let n = op.n();
        let cert = op.bimodule_order().unwrap_or(0);
        let dcert = op.derivative_weight();
        FbElem {
            n,
            payload: EpsSeries::single(0, op, n_trunc),
            marker: C::zero(),
            cert,
            dcert,
        }
    }

    pub fn from_op_series(series: OpSeries<C>, n: usize) -> Self {
        let cert = series
            .iter_terms()
            .map(|(k, op)| op.bimodule_order().unwrap_or(i64::MIN) - k)
            .max()
            .unwrap_or(0);
        let dcert = series
            .iter_terms()
            .map(|(k, op)| op.derivative_weight() - k)
            .max()
            .unwrap_or(0)
            .max(0);
        FbElem { n, payload: series, marker: C::zero(), cert, dcert }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn payload(&self) -> &OpSeries<C> {
        &self.payload
    }

    pub fn marker(&self) -> &C {
        &self.marker
    }

    pub fn cert(&self) -> i64 {
        self.cert
    }

    pub fn dcert(&self) -> i64 {
        self.dcert
    }

    pub fn is_zero(&self) -> bool {
        self.payload.is_zero()
    }

    /// Replace the marker by 1 without touching payload or certificates;
    /// legitimate exactly when the marker is known to equal 1 on the domain
    /// of interest (the simplex constraint in the cocycle assembly).
    pub fn with_unit_marker(&self) -> Self {
        FbElem {
            n: self.n,
            payload: self.payload.clone(),
            marker: C::one(),
            cert: self.cert,
            dcert: self.dcert,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.is_zero() {
            return Ok(other.clone());
        }
        if other.is_zero() {
            return Ok(self.clone());
        }
        if self.marker != other.marker {
            return Err(EngineError::MarkerNormalization(
                "cannot add elements with different heat markers".into(),
            ));
        }
        Ok(FbElem {
            n: self.n,
            payload: self.payload.add(&other.payload)?,
            marker: self.marker.clone(),
            cert: self.cert.max(other.cert),
            dcert: self.dcert.max(other.dcert),
        })
    }

    pub fn neg(&self) -> Self {
        FbElem {
            n: self.n,
            payload: self.payload.neg(),
            marker: self.marker.clone(),
            cert: self.cert,
            dcert: self.dcert,
        }
    }

    pub fn scale(&self, c: &C) -> Self {
        FbElem {
            n: self.n,
            payload: self.payload.map(|op| op.scale(c)),
            marker: self.marker.clone(),
            cert: self.cert,
            dcert: self.dcert,
        }
    }

    /// Apply the derivation `delta = ad_{log q}` to the whole element:
    /// `delta(P e^{cA}) = delta(P) e^{cA} + P delta(e^{cA})` with
    /// `delta(e^{cA}) = c eps int_0^1 Ad_{e^{s c A}}(delta(Delta)) ds * e^{cA}`.
    ///
    /// Both certificates survive: `delta` lowers the bimodule order of each
    /// payload term and never adds derivatives, and the dressed
    /// `delta(Delta)` series has order and weight at most `k` at `eps^k`.
    pub fn delta_derivation(&self) -> Result<Self> {
        let n = self.n;
        let n_trunc = self.payload.exact_up_to();
        let delta_p = self.payload.map(|op| op.delta_derivation());

        let mut total = delta_p;
        if !self.marker.is_zero() {
            // delta(Delta) = - sum_i xi_i q^{-2} d/dx^i
            let mut dd = PDOp::zero(n);
            for i in 0..n {
                let c = crate::phfun::PhFun::<C>::xi(n, i)
                    .mul(&crate::phfun::PhFun::q_inv_pow(n, 2))
                    .neg();
                dd = dd.add(&PDOp::dx(n, i).mul_phfun_left(&c));
            }
            // int_0^1 Ad_{e^{s c eps Delta}}(dd) ds
            //   = sum_k (c eps)^k / (k! (k+1)) ad_Delta^k(dd)
            let mut dressed = EpsSeries::zero(n_trunc);
            let mut current = dd;
            let mut k: i64 = 0;
            loop {
                if k > n_trunc || current.is_zero() {
                    break;
                }
                let w = C::from_rat(
                    Rat::from_integer(1.into())
                        / (factorial(k as u64) * Rat::from_integer((k + 1).into())),
                );
                let mut factor = w;
                for _ in 0..k {
                    factor = factor.mul_ref(&self.marker);
                }
                dressed.add_term(k, current.scale(&factor));
                current = current.ad_laplacian();
                k += 1;
            }
            // multiply by c eps and postcompose onto the payload
            let dressed = dressed.shift(1).map(|op| op.scale(&self.marker)).with_window(n_trunc);
            let correction = self.payload.mul(&dressed)?.with_window(n_trunc);
            total = total.add(&correction)?;
        }
        FbElem::new(n, total, self.marker.clone(), self.cert, self.dcert)
    }
}

/// `Ad_{exp(s c eps Delta)}(T) = sum_k (s c)^k eps^k ad_Delta^k(T) / k!`,
/// with the order bound `bimodule_order(ad^k) <= k + bimodule_order(T)`
/// asserted at every stage.
pub fn ad_exp_conjugate<C: Coeff>(
    t: &PDOp<C>,
    s: &Rat,
    c: &C,
    n_trunc: i64,
) -> Result<OpSeries<C>> {
    let base = match t.bimodule_order() {
        Ok(o) => o,
        Err(_) => return Ok(EpsSeries::zero(n_trunc)),
    };
    let mut out = EpsSeries::zero(n_trunc);
    let mut current = t.clone();
    let mut k: i64 = 0;
    loop {
        if current.is_zero() || k > n_trunc {
            break;
        }
        let order = current.bimodule_order()?;
        if order > k + base {
            return Err(EngineError::OrderBoundViolation { k, got: order, bound: k + base });
        }
        let mut weight = C::one();
        for _ in 0..k {
            weight = weight.mul_ref(c);
        }
        let mut s_pow = Rat::from_integer(1.into());
        for _ in 0..k {
            s_pow *= s;
        }
        let scalar = weight.mul_rat(&(s_pow / factorial(k as u64)));
        out.add_term(k, current.scale(&scalar));
        current = current.ad_laplacian();
        k += 1;
    }
    Ok(out)
}

/// Product in the bimodule: the left marker moves right through the right
/// payload by conjugation, markers merge additively, certificates add.
pub fn fb_mul<C: Coeff>(x: &FbElem<C>, y: &FbElem<C>) -> Result<FbElem<C>> {
    if x.n() != y.n() {
        return Err(EngineError::DimensionMismatch(x.n(), y.n()));
    }
    let n_trunc = x.payload.exact_up_to().min(y.payload.exact_up_to());
    if x.is_zero() || y.is_zero() {
        return Ok(FbElem {
            n: x.n,
            payload: EpsSeries::zero(n_trunc),
            marker: x.marker.add_ref(&y.marker),
            cert: 0,
            dcert: 0,
        });
    }
    let one = Rat::from_integer(1.into());
    let mut conjugated: OpSeries<C> = EpsSeries::zero(y.payload.exact_up_to());
    for (k, op) in y.payload.iter_terms() {
        let dressed = if x.marker.is_zero() {
            EpsSeries::single(0, op.clone(), y.payload.exact_up_to())
        } else {
            ad_exp_conjugate(op, &one, &x.marker, y.payload.exact_up_to())?
        };
        conjugated = conjugated.add(&dressed.shift(k).with_window(y.payload.exact_up_to()))?;
    }
    let payload = x.payload.mul(&conjugated)?;
    FbElem::new(
        x.n,
        payload,
        x.marker.add_ref(&y.marker),
        x.cert + y.cert,
        x.dcert.saturating_add(y.dcert).min(DCERT_UNBOUNDED),
    )
}

/// Right multiplication by a plain operator.
pub fn fb_mul_op<C: Coeff>(x: &FbElem<C>, op: &PDOp<C>) -> Result<FbElem<C>> {
    let y = FbElem::from_op(op.clone(), x.payload.exact_up_to());
    fb_mul(x, &y)
}

/// Left multiplication by a plain operator.
pub fn op_mul_fb<C: Coeff>(op: &PDOp<C>, x: &FbElem<C>) -> Result<FbElem<C>> {
    let y = FbElem::from_op(op.clone(), x.payload.exact_up_to());
    fb_mul(&y, x)
}

/// `exp(c eps Delta + P)` by the iterated Duhamel formula, with simplex
/// integrals of the polynomial integrands evaluated exactly by the Dirichlet
/// monomial formula.
///
/// Requires `val(P) >= 1` in `eps` (each insertion raises the valuation, so
/// each coefficient of the result is a finite sum) and
/// `bimodule_order(P_k) <= k` per coefficient (so the result carries
/// bimodule certificate 0). The derivative certificate of the result is 0
/// when every `P_k` has weight `<= k`, unbounded otherwise.
pub fn exp_perturbed_spoly(
    n: usize,
    marker: &SPoly,
    pert: &OpSeries<SPoly>,
    outer_vars: usize,
    n_trunc: i64,
) -> Result<FbElem<SPoly>> {
    if pert.is_zero() {
        return Ok(FbElem::heat(n, marker.clone(), n_trunc));
    }
    let val = pert.valuation().unwrap();
    if val < 1 {
        return Err(EngineError::AdicConvergence(format!(
            "perturbation has eps valuation {} < 1",
            val
        )));
    }
    let mut dcert = 0i64;
    for (k, op) in pert.iter_terms() {
        let order = op.bimodule_order()?;
        if order > k {
            return Err(EngineError::BimoduleMembership(format!(
                "perturbation coefficient at eps^{} has bimodule order {}",
                k, order
            )));
        }
        if op.derivative_weight() > k {
            dcert = DCERT_UNBOUNDED;
        }
    }

    let one = Rat::from_integer(1.into());
    let mut payload: OpSeries<SPoly> = EpsSeries::single(0, PDOp::identity(n), n_trunc);
    let max_insertions = (n_trunc / val).max(0);
    for p in 1..=max_insertions {
        // Insertion i (1-based) is dressed by Ad with the partial sum
        // u_0 + ... + u_{i-1} of fresh simplex coordinates u_0..u_p.
        let mut term: OpSeries<SPoly> = EpsSeries::single(0, PDOp::identity(n), n_trunc);
        let mut partial = SPoly::zero();
        for i in 0..p {
            partial = partial.add_ref(&SPoly::var(outer_vars + i as usize));
            let dress_factor = partial.mul_ref(marker);
            let mut dressed: OpSeries<SPoly> = EpsSeries::zero(n_trunc);
            for (k, op) in pert.iter_terms() {
                let conj = ad_exp_conjugate(op, &one, &dress_factor, n_trunc)?;
                dressed = dressed.add(&conj.shift(k).with_window(n_trunc))?;
            }
            term = term.mul(&dressed)?.with_window(n_trunc);
            if term.is_zero() {
                break;
            }
        }
        // Integrate the fresh u variables over Sigma^p.
        let integrated = term.map(|op| {
            op.map_coeffs(|c: &SPoly| c.integrate_simplex(outer_vars, p as usize + 1))
        });
        payload = payload.add(&integrated)?;
    }
    FbElem::new(n, payload, marker.clone(), 0, dcert)
}

/// Rational-coefficient wrapper around the Duhamel expansion.
pub fn exp_perturbed(
    n: usize,
    marker: &Rat,
    pert: &OpSeries<Rat>,
    n_trunc: i64,
) -> Result<FbElem<Rat>> {
    let lifted = pert.map(|op| op.map_coeffs(|c: &Rat| SPoly::constant(c.clone())));
    let out = exp_perturbed_spoly(n, &SPoly::constant(marker.clone()), &lifted, 0, n_trunc)?;
    let payload = out.payload().map(|op| {
        op.map_coeffs(|c: &SPoly| c.as_rat().expect("no free simplex variables survive"))
    });
    FbElem::new(n, payload, marker.clone(), out.cert(), out.dcert())
}

/// `exp(s D^2)` for the Dirac operator of a torsion-free connection:
/// base marker `s eps Delta`, perturbation `s (D^2 - eps Delta)`.
pub fn exp_dirac_squared(dirac: &Dirac, s: &Rat, n_trunc: i64) -> Result<FbElem<Rat>> {
    let mut pert: OpSeries<Rat> = EpsSeries::zero(n_trunc);
    for (k, op) in dirac.d_squared_minus_eps_delta() {
        pert.add_term(k, op.scale_rat(s));
    }
    exp_perturbed(dirac.n, s, &pert, n_trunc)
}

/// `exp(s D^2)` with a symbolic scale (a simplex coordinate).
pub fn exp_dirac_squared_spoly(
    dirac: &Dirac,
    s: &SPoly,
    outer_vars: usize,
    n_trunc: i64,
) -> Result<FbElem<SPoly>> {
    let mut pert: OpSeries<SPoly> = EpsSeries::zero(n_trunc);
    for (k, op) in dirac.d_squared_minus_eps_delta() {
        let lifted = op.map_coeffs(|c: &Rat| SPoly::constant(c.clone()).mul_ref(s));
        pert.add_term(k, lifted);
    }
    exp_perturbed_spoly(dirac.n, s, &pert, outer_vars, n_trunc)
}

/// Plain Taylor expansion `sum_k s^k (D^2)^k / k!` of the heat element, as an
/// independent oracle: no marker, no Duhamel, no conjugation.
pub fn exp_dirac_squared_taylor(dirac: &Dirac, s: &Rat, n_trunc: i64) -> OpSeries<Rat> {
    let mut d2: OpSeries<Rat> = EpsSeries::zero(n_trunc);
    for (k, op) in dirac.d_squared_minus_eps_delta() {
        d2.add_term(k, op.clone());
    }
    d2.add_term(1, PDOp::laplacian(dirac.n));

    let mut acc: OpSeries<Rat> = EpsSeries::single(0, PDOp::identity(dirac.n), n_trunc);
    let mut power: OpSeries<Rat> = EpsSeries::single(0, PDOp::identity(dirac.n), n_trunc);
    let mut k: u64 = 1;
    loop {
        power = power.mul(&d2).unwrap().with_window(n_trunc);
        if power.is_zero() || k as i64 > n_trunc {
            break;
        }
        let mut s_pow = Rat::from_integer(1.into());
        for _ in 0..k {
            s_pow *= s;
        }
        let coeff = s_pow / factorial(k);
        acc = acc.add(&power.map(|op| op.scale_rat(&coeff))).unwrap();
        k += 1;
    }
    acc
}

/// Expand an `FbElem` into a plain operator series by multiplying out the
/// heat marker `exp(c eps Delta)` (used by oracles and cross-checks).
pub fn expand_marker<C: Coeff>(x: &FbElem<C>) -> Result<OpSeries<C>> {
    let n_trunc = x.payload().exact_up_to();
    let mut heat: OpSeries<C> = EpsSeries::zero(n_trunc);
    let delta = PDOp::laplacian(x.n());
    let mut power = PDOp::identity(x.n());
    let mut k: i64 = 0;
    loop {
        if k > n_trunc {
            break;
        }
        let mut weight = C::one();
        for _ in 0..k {
            weight = weight.mul_ref(x.marker());
        }
        let scalar = weight.mul_rat(&(Rat::from_integer(1.into()) / factorial(k as u64)));
        heat.add_term(k, power.scale(&scalar));
        power = power.compose(&delta);
        k += 1;
    }
    x.payload().mul(&heat)
}

/// Largest payload index that can contribute to the `eps^j` coefficient of
/// the trace, from the better of the two certificates.
pub fn audit_bound(cert: i64, dcert: i64, n: usize, j: i64) -> i64 {
    let via_cert = cert + 4 * n as i64 + 2 * j;
    let via_dcert = dcert.saturating_add(2 * n as i64 + 2 * j);
    via_cert.min(via_dcert)
}

/// Truncation audit for reading the `eps^j` trace coefficient: the payload
/// window must reach every index that can contribute.
pub fn audit_for_trace<C: Coeff>(x: &FbElem<C>, j: i64) -> Result<()> {
    let required = audit_bound(x.cert(), x.dcert(), x.n(), j);
    let have = x.payload().exact_up_to();
    if have < required {
        return Err(EngineError::TruncationAudit { required, have });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::{rat, rat_int};
    use crate::geometry::{build_dirac, ConnectionData};
    use crate::opalg::PDOp;
    use crate::phfun::{PhFun, TrigKind};
    use crate::testutil::{random_connection, random_op};
    use rand::SeedableRng;

    type Op = PDOp<Rat>;
    type F = PhFun<Rat>;

    fn one_rat() -> Rat {
        rat_int(1)
    }

    #[test]
    fn conjugation_of_xi() {
        // Ad_{exp(eps Delta)}(xi_1) = xi_1 + eps d/dx^1 at n=1 (ad^2 = 0).
        let t = Op::from_phfun(F::xi(1, 0));
        let s = ad_exp_conjugate(&t, &one_rat(), &one_rat(), 6).unwrap();
        assert_eq!(s.coefficient(0).unwrap(), t);
        assert_eq!(s.coefficient(1).unwrap(), Op::dx(1, 0));
        assert!(s.coefficient(2).unwrap().is_zero());
    }

    #[test]
    fn conjugation_of_sin() {
        // Ad_{exp(eps Delta)}(sin x) = sum_k eps^k sin^{(k)}(x) dxi^k / k!
        let t = Op::from_phfun(F::trig(1, 0, 1, TrigKind::Sin));
        let s = ad_exp_conjugate(&t, &one_rat(), &one_rat(), 4).unwrap();
        let cos = F::trig(1, 0, 1, TrigKind::Cos);
        let sin = F::trig(1, 0, 1, TrigKind::Sin);
        assert_eq!(s.coefficient(1).unwrap(), Op::dxi(1, 0).mul_phfun_left(&cos));
        let expected2 = Op::dxi(1, 0)
            .compose(&Op::dxi(1, 0))
            .mul_phfun_left(&sin.scale_rat(&rat(-1, 2)));
        assert_eq!(s.coefficient(2).unwrap(), expected2);
    }

    #[test]
    fn conjugation_of_identity() {
        let t = Op::identity(2);
        let s = ad_exp_conjugate(&t, &one_rat(), &one_rat(), 5).unwrap();
        assert_eq!(s.coefficient(0).unwrap(), t);
        assert!(s.coefficient(1).unwrap().is_zero());
    }

    #[test]
    fn conjugation_is_multiplicative() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(61);
        for _ in 0..6 {
            let n = 1;
            let a = random_op(&mut rng, n);
            let b = random_op(&mut rng, n);
            let lhs = {
                let ab = a.compose(&b);
                ad_exp_conjugate(&ab, &one_rat(), &one_rat(), 4).unwrap()
            };
            let rhs = {
                let ca = ad_exp_conjugate(&a, &one_rat(), &one_rat(), 4).unwrap();
                let cb = ad_exp_conjugate(&b, &one_rat(), &one_rat(), 4).unwrap();
                ca.mul(&cb).unwrap()
            };
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn heat_times_xi() {
        // exp(eps Delta) xi_1 = (xi_1 + eps dx) exp(eps Delta)
        let heat = FbElem::heat(1, one_rat(), 6);
        let z = fb_mul_op(&heat, &Op::from_phfun(F::xi(1, 0))).unwrap();
        assert_eq!(z.marker(), &one_rat());
        assert_eq!(z.payload().coefficient(0).unwrap(), Op::from_phfun(F::xi(1, 0)));
        assert_eq!(z.payload().coefficient(1).unwrap(), Op::dx(1, 0));
    }

    #[test]
    fn constants_merge_markers() {
        // (2 exp(eps Delta / 2)) * (3 exp(eps Delta / 2)) = 6 exp(eps Delta)
        let a = FbElem::heat(1, rat(1, 2), 5).scale(&rat_int(2));
        let b = FbElem::heat(1, rat(1, 2), 5).scale(&rat_int(3));
        let z = fb_mul(&a, &b).unwrap();
        assert_eq!(z.marker(), &one_rat());
        assert_eq!(z.payload().coefficient(0).unwrap(), Op::identity(1).scale_rat(&rat_int(6)));
        assert!(z.payload().coefficient(1).unwrap().is_zero());
    }

    #[test]
    fn unit_is_neutral() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(67);
        let x = FbElem::heat(2, one_rat(), 4);
        let x = fb_mul_op(&x, &random_op(&mut rng, 2)).unwrap();
        let id = FbElem::from_op(Op::identity(2), 4);
        let z = fb_mul(&x, &id).unwrap();
        assert_eq!(z.payload(), x.payload());
        assert_eq!(z.marker(), x.marker());
    }

    #[test]
    fn fb_mul_associative() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(71);
        for _ in 0..4 {
            let n = 1;
            let a = fb_mul_op(&FbElem::heat(n, rat(1, 3), 4), &random_op(&mut rng, n)).unwrap();
            let b = fb_mul_op(&FbElem::heat(n, rat(1, 4), 4), &random_op(&mut rng, n)).unwrap();
            let c = fb_mul_op(&FbElem::heat(n, rat(5, 12), 4), &random_op(&mut rng, n)).unwrap();
            let lhs = fb_mul(&fb_mul(&a, &b).unwrap(), &c).unwrap();
            let rhs = fb_mul(&a, &fb_mul(&b, &c).unwrap()).unwrap();
            assert_eq!(lhs.marker(), rhs.marker());
            assert_eq!(lhs.payload(), rhs.payload());
        }
    }

    #[test]
    fn empty_perturbation_is_plain_heat() {
        let z = exp_perturbed(1, &one_rat(), &EpsSeries::zero(5), 5).unwrap();
        assert_eq!(z.marker(), &one_rat());
        assert_eq!(z.payload().coefficient(0).unwrap(), Op::identity(1));
        assert!(z.payload().coefficient(1).unwrap().is_zero());
    }

    #[test]
    fn flat_dirac_heat_is_plain() {
        let conn = ConnectionData::flat(1);
        let d = build_dirac(&conn);
        let z = exp_dirac_squared(&d, &one_rat(), 5).unwrap();
        assert_eq!(z.marker(), &one_rat());
        assert_eq!(z.payload().coefficient(0).unwrap(), Op::identity(1));
        for k in 1..=5 {
            assert!(z.payload().coefficient(k).unwrap().is_zero(), "eps^{}", k);
        }
    }

    #[test]
    fn dirac_heat_leading_coefficient_is_one() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(73);
        let conn = random_connection(&mut rng, 2);
        let d = build_dirac(&conn);
        let z = exp_dirac_squared(&d, &one_rat(), 4).unwrap();
        assert_eq!(z.payload().coefficient(0).unwrap(), Op::identity(2));
        assert_eq!(z.cert(), 0);
    }

    #[test]
    fn duhamel_matches_taylor_oracle() {
        // exp(s D^2) from the Duhamel machinery equals the plain Taylor series
        // once the marker is expanded.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(79);
        for n in 1..=2usize {
            let conn = random_connection(&mut rng, n);
            let d = build_dirac(&conn);
            for s in [one_rat(), rat(1, 2), rat(2, 3)] {
                let z = exp_dirac_squared(&d, &s, 4).unwrap();
                let expanded = {
                    // payload * exp(s eps Delta)
                    let mut heat: OpSeries<Rat> = EpsSeries::zero(4);
                    let delta = Op::laplacian(n);
                    let mut power = Op::identity(n);
                    for k in 0..=4i64 {
                        let mut s_pow = one_rat();
                        for _ in 0..k {
                            s_pow *= &s;
                        }
                        heat.add_term(k, power.scale_rat(&(s_pow / factorial(k as u64))));
                        power = power.compose(&delta);
                    }
                    z.payload().mul(&heat).unwrap()
                };
                let taylor = exp_dirac_squared_taylor(&d, &s, 4);
                assert_eq!(expanded, taylor, "n={} s={}", n, s);
            }
        }
    }

    #[test]
    fn duhamel_identity() {
        // exp(A') - exp(A) = int_0^1 exp(s A') (A' - A) exp((1-s) A) ds
        // with A = eps Delta and A' = eps Delta', for a perturbed Laplacian.
        // Checked termwise in eps by expanding all markers.
        let n = 1;
        let n_trunc = 4;
        let a_coeff = F::trig(1, 0, 1, TrigKind::Cos);
        let pert_op = Op::dxi(1, 0).mul_phfun_left(&a_coeff); // a_1 d/dxi_1
        let mut pert: OpSeries<Rat> = EpsSeries::zero(n_trunc);
        pert.add_term(1, pert_op.clone());

        let lhs = {
            let ep = exp_perturbed(n, &one_rat(), &pert, n_trunc).unwrap();
            let expanded = expand_marker(&ep).unwrap();
            let plain = expand_marker(&FbElem::heat(n, one_rat(), n_trunc)).unwrap();
            expanded.sub(&plain).unwrap()
        };

        // Right-hand side via one symbolic Duhamel slot: a single fresh
        // simplex pair (s, 1-s) on Sigma^1.
        let rhs = {
            let lift =
                |op: &Op| -> PDOp<SPoly> { op.map_coeffs(|c: &Rat| SPoly::constant(c.clone())) };
            let s0 = SPoly::var(0);
            let s1 = SPoly::var(1);
            // exp(s0 A') as plain series: Taylor of (eps Delta + eps pert) * s0
            let mut aprime: OpSeries<SPoly> = EpsSeries::zero(n_trunc);
            aprime.add_term(1, lift(&Op::laplacian(n)));
            aprime.add_term(1, lift(&pert_op));
            let mut left: OpSeries<SPoly> = EpsSeries::single(0, lift(&Op::identity(n)), n_trunc);
            let mut pw: OpSeries<SPoly> = EpsSeries::single(0, lift(&Op::identity(n)), n_trunc);
            for k in 1..=n_trunc {
                pw = pw.mul(&aprime).unwrap().with_window(n_trunc);
                let w = s0.pow(k as u32).mul_rat(&(one_rat() / factorial(k as u64)));
                left = left.add(&pw.map(|op| op.scale(&w))).unwrap();
            }
            // exp(s1 A) plain series
            let mut right: OpSeries<SPoly> = EpsSeries::single(0, lift(&Op::identity(n)), n_trunc);
            let delta = lift(&Op::laplacian(n));
            let mut power = lift(&Op::identity(n));
            for k in 1..=n_trunc {
                power = power.compose(&delta);
                let w = s1.pow(k as u32).mul_rat(&(one_rat() / factorial(k as u64)));
                right.add_term(k, power.scale(&w));
            }
            let mid: OpSeries<SPoly> = EpsSeries::single(1, lift(&pert_op), n_trunc);
            let integrand = left.mul(&mid).unwrap().mul(&right).unwrap().with_window(n_trunc);
            integrand.map(|op| op.map_coeffs(|c: &SPoly| c.integrate_simplex(0, 2).as_rat().unwrap()))
        };

        assert_eq!(lhs, rhs);
    }

    #[test]
    fn coordinate_change_laplacian_is_in_the_bimodule() {
        // Delta' = Delta + a_i d/dxi_i + b_jkl xi_j d2/dxi_k dxi_l passes the
        // membership certificate.
        let n = 2;
        let mut diff = Op::dxi(n, 0).mul_phfun_left(&F::trig(n, 0, 1, TrigKind::Sin));
        let b = F::trig(n, 1, 2, TrigKind::Cos).mul(&F::xi(n, 0));
        diff = diff.add(&Op::dxi(n, 1).compose(&Op::dxi(n, 1)).mul_phfun_left(&b));
        let mut pert: OpSeries<Rat> = EpsSeries::zero(4);
        pert.add_term(1, diff);
        let z = exp_perturbed(n, &one_rat(), &pert, 4).unwrap();
        assert_eq!(z.cert(), 0);
    }

    #[test]
    fn adic_nonconvergence_rejected() {
        // A valuation-0 perturbation is rejected.
        let n = 1;
        let pert: OpSeries<Rat> = EpsSeries::single(0, Op::from_phfun(F::q_inv_pow(1, 1)), 4);
        let r = exp_perturbed(n, &one_rat(), &pert, 4);
        assert!(matches!(r, Err(EngineError::AdicConvergence(_))));
    }

    #[test]
    fn delta_of_heat_element_certificate() {
        let x = FbElem::heat(1, one_rat(), 5);
        let d = x.delta_derivation().unwrap();
        // delta(exp(eps Delta)) = -eps xi q^{-2} dx exp(eps Delta) + higher.
        let expected1 = Op::dx(1, 0)
            .mul_phfun_left(&F::xi(1, 0).mul(&F::q_inv_pow(1, 2)))
            .neg();
        assert_eq!(d.payload().coefficient(1).unwrap(), expected1);
        assert!(d.payload().coefficient(0).unwrap().is_zero());
    }

    #[test]
    fn audit_bounds() {
        // f exp(eps Delta) g carries dcert 0, so eps^{-n} needs no window at
        // all and eps^0 needs 2n.
        let n = 2;
        let f = F::q_inv_pow(n, 2);
        let x = op_mul_fb(
            &Op::from_phfun(f.clone()),
            &fb_mul_op(&FbElem::heat(n, one_rat(), 6), &Op::from_phfun(f)).unwrap(),
        )
        .unwrap();
        assert_eq!(x.dcert(), 0);
        assert_eq!(audit_bound(x.cert(), x.dcert(), n, 0), 4);
        assert!(audit_for_trace(&x, 0).is_ok());
    }
}
