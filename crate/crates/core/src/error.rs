//! Error type shared by every numerical module in the crate.

use thiserror::Error;

/// Errors surfaced by grid construction, solvers and estimators.
///
/// Configuration mistakes (bad grid sizes, out-of-range parameters) are kept
/// distinct from runtime solver failures so the CLI can map them to different
/// exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid construction parameter or configuration value.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// Two objects built on different grids were combined.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A field contained NaN or infinite entries where finite data is required.
    #[error("non-finite data: {0}")]
    NonFinite(String),

    /// The assembled operator is numerically singular relative to its norm.
    #[error("spectral guard tripped: |lambda_min| = {lambda_min:.3e} < {threshold:.3e} * ||A|| = {op_norm:.3e}")]
    SpectralGuard {
        lambda_min: f64,
        op_norm: f64,
        threshold: f64,
    },

    /// Every candidate Fourier offset left a near-zero Faddeev symbol on the lattice.
    #[error("offset collision: smallest symbol magnitude {min_symbol:.3e} after trying {tried} offsets")]
    OffsetCollision { min_symbol: f64, tried: usize },

    /// An iterative solver failed to reach its tolerance.
    #[error("solver failure: {0}")]
    SolverFailure(String),

    /// A boundary trace could not be represented in the requested basis.
    #[error("ill-represented trace: projection residual {residual:.3e} exceeds {limit:.3e}; raise m_max")]
    IllRepresentedTrace { residual: f64, limit: f64 },

    /// A requested frequency lies outside the admissible wedge region.
    #[error("wedge violation: {0}")]
    WedgeViolation(String),

    /// Underlying I/O failure when reading or writing artifacts.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed JSON in a config or sidecar file.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True when the error stems from user-supplied configuration rather than
    /// a runtime numerical failure.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::InvalidParam(_) | Error::Json(_))
    }
}
