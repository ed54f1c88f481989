//! Shared random generators for tests.

use rand::Rng;

use crate::coeff::{rat, Rat};
use crate::geometry::ConnectionData;
use crate::opalg::{OpKey, PDOp};
use crate::phfun::{PhFun, TrigKind, MAX_N};

pub fn random_connection(rng: &mut impl Rng, n: usize) -> ConnectionData {
    let mut comps = Vec::new();
    for _ in 0..rng.gen_range(1..=n) {
        let k = rng.gen_range(0..n);
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        let kind = if rng.gen_bool(0.5) { TrigKind::Sin } else { TrigKind::Cos };
        let f = PhFun::trig(n, rng.gen_range(0..n), rng.gen_range(1..3), kind)
            .scale_rat(&rat(rng.gen_range(-2i64..3).max(1), rng.gen_range(1i64..3)));
        comps.push(((k, i, j), f.clone()));
        if i != j {
            comps.push(((k, j, i), f));
        }
    }
    ConnectionData::new(n, comps).unwrap()
}

pub fn random_phfun(rng: &mut impl Rng, n: usize) -> PhFun<Rat> {
    let mut f = PhFun::zero(n);
    let terms = rng.gen_range(1..4);
    for _ in 0..terms {
        let mut term = PhFun::constant(
            n,
            rat(rng.gen_range(-4i64..5).max(1), rng.gen_range(1i64..4)),
        );
        if rng.gen_bool(0.7) {
            let var = rng.gen_range(0..n);
            let freq = rng.gen_range(1..3);
            let kind = if rng.gen_bool(0.5) { TrigKind::Sin } else { TrigKind::Cos };
            term = term.mul(&PhFun::trig(n, var, freq, kind));
        }
        for j in 0..n {
            for _ in 0..rng.gen_range(0..3) {
                term = term.mul(&PhFun::xi(n, j));
            }
        }
        let q = rng.gen_range(0..4);
        term = term.mul(&PhFun::q_inv_pow(n, q));
        f = f.add(&term);
    }
    f
}

/// Random degree-0 homogeneous function (a function on the cosphere bundle).
pub fn random_sphere_fun(rng: &mut impl Rng, n: usize) -> PhFun<Rat> {
    let mut f = PhFun::zero(n);
    for _ in 0..rng.gen_range(1..3) {
        let mut term = PhFun::constant(
            n,
            rat(rng.gen_range(-3i64..4).max(1), rng.gen_range(1i64..3)),
        );
        if rng.gen_bool(0.8) {
            let var = rng.gen_range(0..n);
            let freq = rng.gen_range(1..3);
            let kind = if rng.gen_bool(0.5) { TrigKind::Sin } else { TrigKind::Cos };
            term = term.mul(&PhFun::trig(n, var, freq, kind));
        }
        let deg = rng.gen_range(0..3);
        for _ in 0..deg {
            let j = rng.gen_range(0..n);
            term = term.mul(&PhFun::xi(n, j));
        }
        term = term.mul(&PhFun::q_inv_pow(n, deg as u16));
        f = f.add(&term);
    }
    f.add(&PhFun::one(n))
}

pub fn random_op(rng: &mut impl Rng, n: usize) -> PDOp<Rat> {
    let mut op = PDOp::zero(n);
    for _ in 0..rng.gen_range(1..3) {
        let mut alpha = [0u8; MAX_N];
        let mut beta = [0u8; MAX_N];
        for i in 0..n {
            alpha[i] = rng.gen_range(0..2);
            beta[i] = rng.gen_range(0..3);
        }
        let word = (rng.gen_range(0..(1u8 << n)), rng.gen_range(0..(1u8 << n)));
        let f = random_phfun(rng, n);
        op = op.add(&PDOp::term(n, OpKey { word, alpha, beta }, f));
    }
    op
}
