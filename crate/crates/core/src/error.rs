use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures raised by the estimation and sensitivity machinery.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{name} is not symmetric (relative asymmetry {asymmetry:e})")]
    Asymmetric { name: &'static str, asymmetry: f64 },

    #[error("{name} is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite {
        name: &'static str,
        min_eigenvalue: f64,
    },

    #[error("{name} is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite {
        name: &'static str,
        min_eigenvalue: f64,
    },

    #[error("G does not have full column rank (singular value ratio {ratio:e})")]
    RankDeficient { ratio: f64 },

    #[error("G'WG is numerically singular (condition number {condition:e})")]
    SingularBread { condition: f64 },

    #[error("S is numerically singular (condition number {condition:e})")]
    SingularS { condition: f64 },

    #[error("moment-dropping measures need more moments than parameters (J = {moments}, P = {params})")]
    NotOveridentified { moments: usize, params: usize },

    #[error("moment index {index} out of range for {moments} moments")]
    MomentIndex { index: usize, moments: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("moment {index} has zero variance")]
    DegenerateMoment { index: usize },

    #[error("minimizer did not improve on the starting criterion ({start:e} -> {best:e})")]
    NoImprovement { start: f64, best: f64 },

    #[error("preference-shock covariance is not positive definite (sigma_w2 = {sigma_w2}, sigma_hw = {sigma_hw})")]
    OmegaNotPd { sigma_w2: f64, sigma_hw: f64 },

    #[error("table shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by malformed input rather than by the numerics.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Invalid(_) | Error::MissingColumn(_) | Error::Csv(_) | Error::Io { .. }
        )
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
