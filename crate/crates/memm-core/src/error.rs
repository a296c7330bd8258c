//! Error type shared across the solver modules.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, MemmError>;

#[derive(Debug, Error)]
pub enum MemmError {
    /// A model definition or run configuration is structurally invalid.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Model validation found assumption violations.
    #[error("model validation failed with {count} violation(s); first: {first}")]
    ValidationFailed { count: usize, first: String },

    /// An integrand or coefficient evaluated to a non-finite value.
    #[error("non-finite evaluation: {context} at {location}")]
    NonFinite { context: String, location: String },

    /// A scalar root finder ran out of iterations.
    #[error("root finder did not converge within {iterations} iterations; bracket [{lo}, {hi}], |f|={residual:.3e}")]
    RootNoConvergence {
        iterations: usize,
        lo: f64,
        hi: f64,
        residual: f64,
    },

    /// Picard iteration ran out of sweeps.
    #[error("fixed point iteration did not converge: last sup-delta {last_delta:.3e} > tol {tol:.3e} after {sweeps} sweeps")]
    PicardNoConvergence {
        sweeps: usize,
        last_delta: f64,
        tol: f64,
    },

    /// The truncation bound is binding at the converged surface.
    #[error("truncation bound C={c_trunc} is active at the fixed point (node t={t}, y={y})")]
    TruncationActive { c_trunc: f64, t: f64, y: f64 },

    /// Too many domain-boundary clamp events.
    #[error("domain clamping fraction {fraction:.4} exceeds limit {limit:.4} ({events}/{total} evaluations)")]
    ExcessiveClamping {
        fraction: f64,
        limit: f64,
        events: u64,
        total: u64,
    },

    /// Internal invariants broken by inconsistent solver state.
    #[error("internal state corrupted: {0}")]
    Corruption(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("model file parse error: {0}")]
    Parse(String),
}
