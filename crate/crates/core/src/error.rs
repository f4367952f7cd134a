use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at byte {offset} in `{src}`: {message}")]
    Parse {
        src: String,
        offset: usize,
        message: String,
    },

    #[error("cannot evaluate `{expr}` at (x={x}, t={t}): {reason}")]
    Eval {
        expr: String,
        x: f64,
        t: f64,
        reason: String,
    },

    #[error("`{expr}` is not differentiable: {reason}")]
    NotDifferentiable { expr: String, reason: String },

    #[error("invalid plant: {0}")]
    InvalidPlant(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("coefficients are not declared analytic in t; refusing to solve kernels")]
    NotAnalytic,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("series terms were not retained on this kernel field")]
    MissingSeriesTerms,

    #[error("snapshots were not retained on this trace")]
    MissingSnapshots,

    #[error("singular linear system at row {row} (t={time})")]
    SingularSystem { row: usize, time: f64 },

    #[error("state blew up at t={time}: sup |u| = {sup:e}")]
    BlowUp { time: f64, sup: f64 },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("malformed kernel file: {0}")]
    KernelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
