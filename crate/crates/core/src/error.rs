use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rejection sampler stalled: acceptance rate {rate:.2e} over a {window}-proposal window")]
    RejectionStall { rate: f64, window: usize },

    #[error("density of `{family}` is not available in closed form")]
    DensityUnavailable { family: String },

    #[error("backend `{backend}` is not legal for family `{family}`")]
    BackendUnsupported { backend: String, family: String },

    #[error("effective sample size {ess:.1} below the threshold {threshold:.1} (budget {budget})")]
    LowEss { ess: f64, threshold: f64, budget: usize },

    #[error("quadrature did not converge: estimated error {error:.2e}")]
    QuadratureDiverged { error: f64 },

    #[error("covariance is singular: eigenvalue {index} is {eigenvalue:.3e}")]
    SingularCovariance { eigenvalue: f64, index: usize },

    #[error("body is not in isotropic position (anisotropy {anisotropy:.3e}); whiten it first")]
    NotIsotropic { anisotropy: f64 },

    #[error("zero hits while estimating {what}; choose a larger region")]
    ZeroHits { what: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Name of the module an error originates from, used by the experiment runner.
    pub fn module(&self) -> &'static str {
        match self {
            Error::RejectionStall { .. } | Error::DensityUnavailable { .. } => "measures",
            Error::SingularCovariance { .. } => "reduction",
            Error::BackendUnsupported { .. }
            | Error::LowEss { .. }
            | Error::QuadratureDiverged { .. } => "localization",
            Error::NotIsotropic { .. } | Error::ZeroHits { .. } | Error::InvalidArgument(_) => {
                "analysis"
            }
            Error::Config(_) | Error::Io(_) | Error::Json(_) | Error::Csv(_) => "cli",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
