use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("link index {index} out of range 1..={links}")]
    LinkIndexOutOfRange { index: usize, links: usize },

    #[error("mass matrix is not positive definite")]
    SingularMassMatrix,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("no joint residual exceeds the detection threshold {threshold}")]
    NoResidualAboveThreshold { threshold: f64 },

    #[error("contact force is collinear with link {link} (|sin| = {sine:.3e} below tolerance {tol:.1e})")]
    DegenerateGeometry { link: usize, sine: f64, tol: f64 },

    #[error("degenerate calibration data: {0}")]
    DegenerateData(&'static str),

    #[error("series length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid value for `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("integration produced a non-finite state at t = {t:.6} s")]
    IntegrationBlowUp { t: f64 },

    #[error("trace has no samples in the contact window")]
    EmptyContactWindow,

    #[error("static equilibrium solve did not converge (residual {residual:.3e})")]
    EquilibriumNotFound { residual: f64 },

    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
