use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    /// A scalar argument lies outside the admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two grid objects disagree on dimension, resolution or box size.
    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: String, found: String },

    /// Inconsistent or incomplete problem description.
    #[error("configuration error: {0}")]
    Config(String),

    /// A computed quantity was NaN or infinite.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// The inner Krylov solve of an implicit step stalled.
    #[error("linear solve did not converge at step {step}: relative residual {residual:e}")]
    LinearSolve { step: usize, residual: f64 },

    /// Smallness of the singular coefficients is not met.
    #[error("smallness gate refused: {detail} (sum {sum:.6} > threshold {threshold:.6})")]
    GateRefused { sum: f64, threshold: f64, detail: String },

    /// The assembled operator pair failed its coercivity certificate.
    #[error("coercivity not certified: estimate {estimate:.6} below required {required:.6}")]
    Coercivity { estimate: f64, required: f64 },

    /// The diffusion matrix is too large or not elliptic enough.
    #[error("ellipticity fails: margin {margin:.6} with |a| = {size:.6} for δ = {delta}")]
    Ellipticity { margin: f64, size: f64, delta: f64 },

    #[error("malformed field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(i) => Err(Error::NonFinite(format!("{what} at index {i}"))),
    }
}
