use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("position too close to the geocenter ({radius_m:.1} m) for a geodetic conversion")]
    NearGeocenter { radius_m: f64 },

    #[error("no visibility window satisfies the elevation constraint")]
    NoVisibilityWindow,

    #[error("malformed record at line {line}: {message}")]
    MalformedRecord { line: usize, message: String },

    #[error("non-uniform sampling at row {index}")]
    NonUniformSampling { index: usize },

    #[error("insufficient data: need {needed} samples, have {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("unsupported power-law exponent mu = {0}")]
    UnsupportedExponent(f64),

    #[error("singular geometry: normal matrix condition number {condition:.3e}")]
    SingularGeometry { condition: f64 },

    #[error("estimator did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("covariance block has a negative eigenvalue ({0:.3e})")]
    NegativeVariance(f64),

    #[error("control bin {0} is missing or has too few samples")]
    UnusableBin(String),

    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),

    #[error("trial {index}: {source}")]
    Trial {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
