use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Cholesky factorization failed even after the largest jitter was added.
    #[error("matrix is not positive definite (final jitter {jitter:e})")]
    NotPositiveDefinite { jitter: f64 },

    #[error("posterior variance {value:e} is negative beyond tolerance {tolerance:e}")]
    NegativeVariance { value: f64, tolerance: f64 },

    #[error("x = {x} outside basis domain [{lower}, {upper})")]
    Domain { x: f64, lower: f64, upper: f64 },

    #[error("adaptive quadrature did not converge on [{lower}, {upper}]")]
    Quadrature { lower: f64, upper: f64 },

    #[error("ill-conditioned basis (condition number {condition:e}): {detail}")]
    IllConditionedBasis { condition: f64, detail: String },

    #[error("need at least {required} trajectories, got {got}")]
    InsufficientTrajectories { required: usize, got: usize },

    #[error("training failed for every start: {0}")]
    TrainingFailed(String),

    #[error("parse error in {file} at row {row}: {message}")]
    Parse { file: String, row: usize, message: String },

    #[error("schema error in {file}: {message}")]
    Schema { file: String, message: String },

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("trajectory {id}: {source}")]
    Trajectory {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("prediction step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn in_trajectory(self, id: &str) -> Self {
        Error::Trajectory {
            id: id.to_string(),
            source: Box::new(self),
        }
    }

    pub fn at_step(self, step: usize) -> Self {
        Error::Step {
            step,
            source: Box::new(self),
        }
    }

    /// Short machine-readable tag, used by the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::NotPositiveDefinite { .. } => "numerical-indefiniteness",
            Error::NegativeVariance { .. } => "numerical-indefiniteness",
            Error::Domain { .. } => "domain",
            Error::Quadrature { .. } => "quadrature",
            Error::IllConditionedBasis { .. } => "ill-conditioned-basis",
            Error::InsufficientTrajectories { .. } => "insufficient-trajectories",
            Error::TrainingFailed(_) => "training-failed",
            Error::Parse { .. } => "parse",
            Error::Schema { .. } => "schema",
            Error::InvalidSpec(_) => "invalid-spec",
            Error::Trajectory { source, .. } | Error::Step { source, .. } => source.kind(),
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
