use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("moment diverges: {0}")]
    MomentDivergence(String),

    #[error("rejection sampler acceptance rate {rate:.3e} is below 1e-6")]
    SamplerInefficiency { rate: f64 },

    #[error("unsupported dimension {dim}: {reason}")]
    UnsupportedDimension { dim: usize, reason: String },

    #[error("resource limit exceeded: {what} needs {size}, limit is {limit}")]
    ResourceLimit { what: String, size: f64, limit: f64 },

    #[error("budget N = {given} is infeasible, need N >= {minimum}")]
    BudgetInfeasible { given: usize, minimum: usize },

    #[error("measure has unbounded support; project it onto a ball with `tail::project_to_ball` first")]
    UnboundedSupport,

    #[error("transport solver failed: {0}")]
    SolverFailure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
