use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rejected parameters: {0}")]
    RejectedParameters(String),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("interval starting at {start} has insufficient lags for order {order}")]
    InsufficientLags { start: usize, order: usize },

    #[error("ill-posed design: {0}")]
    IllPosedDesign(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("minimum length {min_length} infeasible on domain [{lo}, {hi}]")]
    InfeasibleLength { min_length: usize, lo: usize, hi: usize },

    #[error("covariance error: {0}")]
    Covariance(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: usize, message: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),
}

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Whether the failure stems from user input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Stage { source, .. } => source.is_input_error(),
            Error::IllPosedDesign(_) | Error::Covariance(_) | Error::RejectedParameters(_) => false,
            _ => true,
        }
    }

    /// Process exit code: 2 for input errors, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        if self.is_input_error() {
            2
        } else {
            3
        }
    }
}
