use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input value {0}")]
    NonFinite(f64),
    #[error("invalid bit width {0} (expected 2..=32)")]
    InvalidBits(u32),
    #[error("invalid quantization grid: {0}")]
    InvalidGrid(String),
    #[error("coordinate {index} (value {value}) lies outside the grid hull")]
    OutsideHull { index: usize, value: f64 },
    #[error("model equals snapshot; use flag-bit message")]
    UseFlagMessage,
    #[error("zero vector has no sparsity budget")]
    ZeroVector,
    #[error("variance-optimality precondition violated: phi {phi} > budget max {max}")]
    BudgetTooLarge { phi: f64, max: f64 },
    #[error("invalid sparsification plan: {0}")]
    InvalidPlan(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("codec error: {0}")]
    Codec(String),
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid label {label} at sample {index}: {msg}")]
    InvalidLabel { index: usize, label: f64, msg: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("simulation error: {0}")]
    Simulation(String),
    #[error("iterate became non-finite at epoch {epoch}, step {t}")]
    Diverged { epoch: usize, t: usize },
    #[error("all runs diverged for learning rates {0:?}")]
    AllDiverged(Vec<f64>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
