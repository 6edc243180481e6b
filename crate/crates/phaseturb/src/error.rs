//! Error type shared by every module.

use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Grid construction with invalid length or size.
    #[error("invalid grid: {0}")]
    Grid(String),

    /// Two fields that must share a grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Inverse transform of coefficients that do not describe a real function.
    #[error("reality constraint violated: max |f_n - conj(f_-n)| = {violation:.3e} exceeds {tolerance:.3e}")]
    Reality { violation: f64, tolerance: f64 },

    /// A field does not have the parity an operation requires.
    #[error("parity violation in {context}: relative defect {defect:.3e}")]
    Parity { context: String, defect: f64 },

    /// A time integration left the bounded regime.
    #[error("blow-up at t = {t}: {quantity} = {value:.3e}")]
    BlowUp {
        t: f64,
        quantity: String,
        value: f64,
    },

    /// The quotient 1/(1 + ε⁴α²s) is numerically singular.
    #[error("near-singular denominator: min |1 + eps^4 alpha^2 s| = {0:.3e}")]
    Denominator(f64),

    /// The amplitude came too close to zero for a global phase to exist.
    #[error("phase slip: min |u| = {0:.3e} is not above 0.1")]
    PhaseSlip(f64),

    /// Phase/amplitude extraction divides by α and α².
    #[error("alpha too small for phase/amplitude extraction: |alpha| = {0:.3e}")]
    AlphaDegenerate(f64),

    /// A proven symbol inequality failed at the listed wavenumbers.
    #[error("symbol bound `{name}` violated at k = {k:?}")]
    BoundViolation { name: String, k: Vec<f64> },

    /// A proven coercivity inequality failed.
    #[error("coercivity violated: {0}")]
    Coercivity(String),

    /// A grid is too coarse for the requested object.
    #[error("insufficient resolution: {0}")]
    Resolution(String),

    /// A truncated sum could not reach its tail criterion.
    #[error("truncation insufficient: {0}")]
    Truncation(String),

    /// An exponential fit did not explain the data.
    #[error("fit quality too low: R^2 = {r2:.6} for {context}")]
    FitQuality { context: String, r2: f64 },

    /// A parameter is outside the domain of an operation.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A configuration file entry is malformed. `line` is 0 when the key is
    /// missing altogether.
    #[error("config {}: key `{key}`: {message}", line_label(*.line))]
    Config {
        line: usize,
        key: String,
        message: String,
    },

    /// A serialized artefact could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Result alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

fn line_label(line: usize) -> String {
    if line == 0 {
        "file".to_string()
    } else {
        format!("line {line}")
    }
}
