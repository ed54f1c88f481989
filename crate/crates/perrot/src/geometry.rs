//! Connection data on the flat torus and the operators it induces: horizontal
//! lifts, curvature, `gamma(R)`, the induced connection Laplacian `nabla^2`,
//! and the Dirac operator `D = eps D_horiz + D_vert`.
//!
//! Christoffel symbols are trig polynomials in the base coordinates, symmetric
//! in the lower indices (torsion-free), so every induced operator stays inside
//! the polyhomogeneous grammar.

use std::collections::BTreeMap;

use crate::coeff::{rat, Rat};
use crate::error::{EngineError, Result};
use crate::opalg::PDOp;
use crate::phfun::{PhFun, MAX_N};

/// Torsion-free Christoffel symbols `Gamma^k_{ij}` (all indices 0-based),
/// as x-only trig polynomials.
#[derive(Clone, Debug, PartialEq)]
pub struct ConnectionData {
    n: usize,
    gamma: BTreeMap<(usize, usize, usize), PhFun<Rat>>,
}

impl ConnectionData {
    pub fn flat(n: usize) -> Self {
        ConnectionData { n, gamma: BTreeMap::new() }
    }

    /// Build from explicit components; missing mirror components `(k, j, i)`
    /// are completed by symmetry, conflicting ones are rejected.
    pub fn new(n: usize, components: Vec<((usize, usize, usize), PhFun<Rat>)>) -> Result<Self> {
        if n < 1 || n > MAX_N {
            return Err(EngineError::UnsupportedDimension(n));
        }
        let mut gamma: BTreeMap<(usize, usize, usize), PhFun<Rat>> = BTreeMap::new();
        for ((k, i, j), f) in components {
            if k >= n || i >= n || j >= n {
                return Err(EngineError::Domain(format!(
                    "Christoffel index ({},{},{}) out of range for n={}",
                    k + 1,
                    i + 1,
                    j + 1,
                    n
                )));
            }
            let x_only = f
                .terms()
                .all(|(key, _)| key.beta.iter().all(|&b| b == 0) && key.qpow == 0);
            if !x_only {
                return Err(EngineError::Domain(
                    "Christoffel symbols must be x-only trig polynomials".into(),
                ));
            }
            let entry = gamma.entry((k, i, j)).or_insert_with(|| PhFun::zero(n));
            *entry = entry.add(&f);
        }
        // Symmetrize: copy to the mirror slot or check consistency.
        let keys: Vec<_> = gamma.keys().cloned().collect();
        for (k, i, j) in keys {
            if i == j {
                continue;
            }
            let f = gamma.get(&(k, i, j)).cloned().unwrap_or_else(|| PhFun::zero(n));
            match gamma.get(&(k, j, i)) {
                None => {
                    gamma.insert((k, j, i), f);
                }
                Some(g) => {
                    if *g != f {
                        return Err(EngineError::TorsionError { k, i, j });
                    }
                }
            }
        }
        gamma.retain(|_, f| !f.is_zero());
        Ok(ConnectionData { n, gamma })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_flat_data(&self) -> bool {
        self.gamma.is_empty()
    }

    pub fn christoffel(&self, k: usize, i: usize, j: usize) -> PhFun<Rat> {
        self.gamma.get(&(k, i, j)).cloned().unwrap_or_else(|| PhFun::zero(self.n))
    }

    pub fn components(&self) -> impl Iterator<Item = (&(usize, usize, usize), &PhFun<Rat>)> {
        self.gamma.iter()
    }

    /// `R^k_{ijl} = d_i Gamma^k_{jl} - d_j Gamma^k_{il}
    ///  + Gamma^k_{im} Gamma^m_{jl} - Gamma^k_{jm} Gamma^m_{il}`.
    pub fn curvature(&self) -> CurvatureData {
        let n = self.n;
        let mut comps = BTreeMap::new();
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for l in 0..n {
                        let mut r = self
                            .christoffel(k, j, l)
                            .derivative_x(i)
                            .sub(&self.christoffel(k, i, l).derivative_x(j));
                        for m in 0..n {
                            r = r.add(&self.christoffel(k, i, m).mul(&self.christoffel(m, j, l)));
                            r = r.sub(&self.christoffel(k, j, m).mul(&self.christoffel(m, i, l)));
                        }
                        if !r.is_zero() {
                            comps.insert((k, i, j, l), r);
                        }
                    }
                }
            }
        }
        CurvatureData { n, comps }
    }

    /// Horizontal lift of `d/dx^i` acting on functions:
    /// `d/dx^i + Gamma^k_{ij} xi_k d/dxi_j`.
    pub fn horizontal_lift(&self, i: usize) -> PDOp<Rat> {
        let n = self.n;
        let mut op = PDOp::dx(n, i);
        for k in 0..n {
            for j in 0..n {
                let g = self.christoffel(k, i, j);
                if g.is_zero() {
                    continue;
                }
                op = op.add(&PDOp::dxi(n, j).mul_phfun_left(&g.mul(&PhFun::xi(n, k))));
            }
        }
        op
    }

    /// Covariant derivative `nabla_{(d/dx^i)^H}` on sections: the horizontal
    /// lift plus the endomorphism term `- Gamma^k_{il} psi^l psibar_k`.
    pub fn covariant_horizontal(&self, i: usize) -> PDOp<Rat> {
        let n = self.n;
        let mut op = self.horizontal_lift(i);
        for k in 0..n {
            for l in 0..n {
                let g = self.christoffel(k, i, l);
                if g.is_zero() {
                    continue;
                }
                let word = PDOp::psi(n, l).compose(&PDOp::psibar(n, k));
                op = op.sub(&word.mul_phfun_left(&g));
            }
        }
        op
    }
}

/// Curvature components `R^k_{ijl}`, antisymmetric in `(i, j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureData {
    n: usize,
    comps: BTreeMap<(usize, usize, usize, usize), PhFun<Rat>>,
}

impl CurvatureData {
    pub fn zero(n: usize) -> Self {
        CurvatureData { n, comps: BTreeMap::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn component(&self, k: usize, i: usize, j: usize, l: usize) -> PhFun<Rat> {
        self.comps.get(&(k, i, j, l)).cloned().unwrap_or_else(|| PhFun::zero(self.n))
    }

    pub fn components(&self) -> impl Iterator<Item = (&(usize, usize, usize, usize), &PhFun<Rat>)> {
        self.comps.iter()
    }

    /// `gamma(R) = 1/2 psi^i psi^j R^k_{ijl} xi_k d/dxi_l`, the first-order
    /// operator appearing in the square of the Dirac operator.
    pub fn gamma_r(&self) -> PDOp<Rat> {
        let n = self.n;
        let mut op = PDOp::zero(n);
        for (&(k, i, j, l), r) in &self.comps {
            if i == j {
                continue;
            }
            let word = PDOp::psi(n, i).compose(&PDOp::psi(n, j));
            let coeff = r.mul(&PhFun::xi(n, k)).scale_rat(&rat(1, 2));
            op = op.add(&word.compose(&PDOp::dxi(n, l)).mul_phfun_left(&coeff));
        }
        op
    }
}

/// The operators built from a torsion-free connection.
pub struct Dirac {
    pub n: usize,
    /// `psi^i d/dx^i + Gamma^k_{ij} psi^i xi_k d/dxi_j` (torsion-free form).
    pub d_horiz: PDOp<Rat>,
    /// `psibar_j d/dxi_j`.
    pub d_vert: PDOp<Rat>,
    /// `nabla^2 = nabla_{d/dxi_i} nabla_{(d/dx^i)^H}`.
    pub nabla2: PDOp<Rat>,
    /// `gamma(R)`.
    pub gamma_r: PDOp<Rat>,
}

impl Dirac {
    /// `D^2 - eps Delta = eps (nabla^2 - Delta) + eps^2 gamma(R)`, the
    /// perturbation that dresses the plain heat element.
    pub fn d_squared_minus_eps_delta(&self) -> Vec<(i64, PDOp<Rat>)> {
        let mut out = Vec::new();
        let r1 = self.nabla2.sub(&PDOp::laplacian(self.n));
        if !r1.is_zero() {
            out.push((1, r1));
        }
        if !self.gamma_r.is_zero() {
            out.push((2, self.gamma_r.clone()));
        }
        out
    }

    /// `D = eps D_horiz + D_vert` as a list of `(eps power, operator)`.
    pub fn dirac_series(&self) -> Vec<(i64, PDOp<Rat>)> {
        vec![(0, self.d_vert.clone()), (1, self.d_horiz.clone())]
    }

    /// `delta(D)`: the image of the Dirac operator under `ad_{log q}`.
    pub fn delta_d(&self) -> Vec<(i64, PDOp<Rat>)> {
        let mut out = Vec::new();
        let v = self.d_vert.delta_derivation();
        if !v.is_zero() {
            out.push((0, v));
        }
        let h = self.d_horiz.delta_derivation();
        if !h.is_zero() {
            out.push((1, h));
        }
        out
    }
}

pub fn build_dirac(conn: &ConnectionData) -> Dirac {
    let n = conn.n();
    let mut d_horiz = PDOp::zero(n);
    for i in 0..n {
        d_horiz = d_horiz.add(&PDOp::psi(n, i).compose(&conn.covariant_horizontal(i)));
    }
    let mut d_vert = PDOp::zero(n);
    for j in 0..n {
        d_vert = d_vert.add(&PDOp::psibar(n, j).compose(&PDOp::dxi(n, j)));
    }
    let mut nabla2 = PDOp::zero(n);
    for i in 0..n {
        nabla2 = nabla2.add(&PDOp::dxi(n, i).compose(&conn.covariant_horizontal(i)));
    }
    let gamma_r = conn.curvature().gamma_r();
    Dirac { n, d_horiz, d_vert, nabla2, gamma_r }
}
