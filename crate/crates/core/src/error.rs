use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("plane does not meet the ball of radius {radius}")]
    PlaneMissesBall { radius: f64 },

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("no plane available at scale {scale}")]
    MissingPlane { scale: usize },

    #[error("Newton inversion did not converge after {iterations} iterations (best residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("one-sided flatness check failed: max defect {max_defect:.6} exceeds eps {eps}")]
    FlatnessAbort {
        max_defect: f64,
        eps: f64,
        report: Box<crate::ccbp::OneSidedReport>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::PlaneMissesBall { .. } => "plane_misses_ball",
            Error::Degenerate(_) => "degenerate",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Input(_) => "input",
            Error::MissingPlane { .. } => "missing_plane",
            Error::NonConvergence { .. } => "non_convergence",
            Error::FlatnessAbort { .. } => "flatness_abort",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}
