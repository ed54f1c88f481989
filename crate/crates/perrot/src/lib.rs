//! Exact symbolic calculus for polyhomogeneous differential operators on the
//! punctured cotangent bundle of a flat torus, after Perrot.
//!
//! The engine builds the formal heat element `exp(eps Delta)`, the trace and
//! supertrace carried by the associated bimodule, the non-elliptic Dirac
//! operator of a torsion-free connection, and the JLO-type cyclic cocycle with
//! a `delta = ad_{log q}` insertion, and verifies in exact arithmetic that the
//! cocycle equals the Todd-class de Rham cocycle.
//!
//! Everything is computed over `Q[pi^(1/2)]`; there is no floating point in
//! the result pipeline.

pub mod coeff;
pub mod config;
pub mod endo;
pub mod error;
pub mod exactnum;
pub mod expr;
pub mod formal;
pub mod geometry;
pub mod jlo;
pub mod opalg;
pub mod phfun;
pub mod report;
pub mod spoly;
pub mod suites;
pub mod symbols;
pub mod trace;

#[cfg(test)]
pub mod testutil;

pub use coeff::{Coeff, Rat};
pub use error::{EngineError, Result};
pub use exactnum::{EpsSeries, ExactScalar, PiScalar};
pub use phfun::PhFun;
