use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("perception incomplete: no {0} detection")]
    PerceptionIncomplete(&'static str),
    #[error("detection unusable: {0}")]
    DetectionUnusable(String),
    #[error("quadratic program infeasible")]
    QpInfeasible,
    #[error("grasp outside capture tolerance: {position_error:.4} m, {angle_error:.4} rad")]
    GraspFailure { position_error: f64, angle_error: f64 },
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("config error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
