//! Error type shared across the library.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported operator dimension {0} (expected 2, 4 or 8)")]
    UnsupportedDim(usize),

    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),

    #[error("tensor product dimension {0} exceeds the supported maximum of 8")]
    TensorTooLarge(usize),

    #[error("matrix is not Hermitian: anti-Hermitian part has norm {0:.3e}")]
    NotHermitian(f64),

    #[error("state/matrix is not normalized: {0}")]
    NotNormalized(String),

    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    #[error("OU step dt = {dt} violates dt <= tau_e/10 = {limit}")]
    OuStepTooLarge { dt: f64, limit: f64 },

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("path is not closed: {0}")]
    PathNotClosed(String),

    #[error("pole jump at theta = {theta} rad is not at a pole (theta mod 2pi must be pi)")]
    JumpOffPole { theta: f64 },

    #[error("time {t} outside the path interval [0, {total}]")]
    TimeOutOfRange { t: f64, total: f64 },

    #[error("infeasible synthesis: {0}")]
    InfeasibleSynthesis(String),

    #[error("invalid propagation grid: {0}")]
    InvalidGrid(String),

    #[error("Lindblad trace drift {drift:.3e} exceeds 1e-6 at t = {t} us; reduce the step size")]
    TraceDrift { t: f64, drift: f64 },

    #[error("Magnus window [{start}, {end}] is not aligned with the dressing period {tau}")]
    WindowMisaligned { start: f64, end: f64, tau: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("two-qubit block structure violated: {0}")]
    BlockStructure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
