//! Error type shared across the engine.

use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum EngineError {
    #[error("mismatched truncation orders: {0} vs {1}")]
    TruncationMismatch(i64, i64),
    #[error("coefficient of eps^{k} is outside the certified range (exact up to eps^{upto})")]
    OutOfCertifiedRange { k: i64, upto: i64 },
    #[error("order of the zero operator is undefined")]
    ZeroOperatorOrder,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("dimension {0} unsupported (this engine handles n = 1, 2, 3)")]
    UnsupportedDimension(usize),
    #[error("connection is not torsion-free: Gamma^{k}_({i},{j}) != Gamma^{k}_({j},{i})")]
    TorsionError { k: usize, i: usize, j: usize },
    #[error("bimodule order bound violated while conjugating: order {got} > {bound} at eps^{k}")]
    OrderBoundViolation { k: i64, got: i64, bound: i64 },
    #[error("perturbation series does not converge adically: {0}")]
    AdicConvergence(String),
    #[error("element is not a member of the trace bimodule: {0}")]
    BimoduleMembership(String),
    #[error("truncation audit failed: need N_trunc >= {required}, have {have}")]
    TruncationAudit { required: i64, have: i64 },
    #[error("trace of an element with endomorphism content; use the supertrace")]
    NonScalarEndo,
    #[error("operator marker is not the plain heat element: {0}")]
    MarkerNormalization(String),
    #[error("{0}")]
    Domain(String),
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("invalid config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, EngineError>;
