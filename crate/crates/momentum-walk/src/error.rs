//! Error taxonomy shared by every layer of the simulator.
//!
//! Numerical guards (leakage, norm drift, truncation) are reported as errors
//! rather than silently absorbed: a walk that reaches the edge of its grid is
//! a mis-sized run, not a result.

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum WalkError {
    /// The momentum window cannot hold the requested construction.
    #[error("momentum grid too small: {0}")]
    GridTooSmall(String),

    /// Population reached the outermost bins of the momentum window.
    #[error(
        "grid leakage at step {step}: edge population {edge_population:.3e} exceeds {limit:.0e} \
         (enlarge the grid half-width)"
    )]
    GridLeakage {
        step: usize,
        edge_population: f64,
        limit: f64,
    },

    /// State norm drifted beyond tolerance after an operation.
    #[error("state norm drifted to {norm:.15} (tolerance {tol:.0e})")]
    NormViolation { norm: f64, tol: f64 },

    /// Two states do not share a grid/quasimomentum and cannot be compared.
    #[error("states are incompatible: {0}")]
    StateMismatch(String),

    /// Two distributions are defined on different grids.
    #[error("distributions are defined on different grids ({0} vs {1} bins)")]
    GridMismatch(usize, usize),

    /// A parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A coin matrix failed the unitarity check.
    #[error("non-unitary coin matrix (max |M\u{2020}M - I| entry = {deviation:.3e})")]
    NonUnitaryCoin { deviation: f64 },

    /// The Bessel series was truncated before reaching completeness.
    #[error(
        "Bessel truncation order {order} insufficient for kick strength {k} \
         (completeness deficit {deficit:.3e})"
    )]
    TruncationInsufficient { order: usize, k: f64, deficit: f64 },

    /// The mirrored-pulse reversal identity needs opposite kick strengths.
    #[error(
        "composed reversal requires opposite kick strengths (k2 = -k1); got k1={k1}, k2={k2}; \
         use adjoint mode instead"
    )]
    ComposedReversalUnsupported { k1: f64, k2: f64 },

    /// A script failed to parse.
    #[error("{0}")]
    Parse(#[from] crate::dsl::ParseError),

    /// A parsed script failed validation or hit a runtime guard.
    #[error("script error at statement {statement}: {message}")]
    Script { statement: usize, message: String },
}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, WalkError>;
