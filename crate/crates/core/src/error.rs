use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid action index {action} (environment has {n_actions} actions)")]
    InvalidAction { action: usize, n_actions: usize },

    #[error("policy library is empty")]
    EmptyLibrary,

    #[error("no policy values supplied")]
    EmptyValues,

    #[error("layout error at row {row}, column {col}: {reason}")]
    Layout { row: usize, col: usize, reason: String },

    #[error("layout error: {0}")]
    LayoutDocument(String),

    #[error("transition kernel row (state {state}, action {action}) is not a distribution: {reason}")]
    NonStochasticKernel {
        state: usize,
        action: usize,
        reason: String,
    },

    #[error("malformed MDP description: {0}")]
    MalformedMdp(String),

    #[error("dual iterate exceeded cap {cap} at iteration {iteration}; source set is probably infeasible")]
    ProbablyInfeasible { cap: f64, iteration: usize },

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("dynamic programming did not converge within {iterations} sweeps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("schema error in {path}: {reason}")]
    Schema { path: PathBuf, reason: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("plot error: {0}")]
    Plot(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
