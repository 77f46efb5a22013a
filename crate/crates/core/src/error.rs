//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("state {x} is outside the open interval ({lo}, {hi})")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },

    #[error("derivative order {0} is not supported (maximum 2)")]
    UnsupportedOrder(u8),

    #[error("rate must be positive, got {0}")]
    NonPositiveRate(f64),

    #[error("tail truncation did not converge while integrating {what} ({detail})")]
    TailDivergence { what: String, detail: String },

    #[error(
        "quadrature failed on [{lo:.6e}, {hi:.6e}]: error estimate {err:.3e} exceeds tolerance"
    )]
    QuadratureFailure { lo: f64, hi: f64, err: f64 },

    #[error("could not bracket {target}: {detail}")]
    BracketingFailure { target: String, detail: String },

    #[error("no preimage of {value:.6e} under {map} within the search range")]
    InversionFailure { map: &'static str, value: f64 },

    #[error("fixed-point residual has no sign change on ({lo:.6e}, {hi:.6e}]; trace: {trace}")]
    NoSignChange { lo: f64, hi: f64, trace: String },

    #[error("solved thresholds failed validation: {0}")]
    ThresholdValidation(String),

    #[error("value function pasting failed: {0}")]
    PastingFailure(String),

    #[error("resolvent equation requires q > s > 0, got q={q}, s={s}")]
    InvalidRates { q: f64, s: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite state on simulated path {path} at t={t}")]
    NonFinitePath { path: u64, t: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
