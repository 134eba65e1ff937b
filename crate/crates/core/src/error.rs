use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("non-finite value {value} at {context}")]
    NonFinite { context: String, value: f64 },

    #[error("off-support evaluation at {at:?}: density {density:e} below floor")]
    OffSupport { at: Vec<f64>, density: f64 },

    #[error("density is not differentiable at {0:?}")]
    NonDifferentiable(Vec<f64>),

    #[error("unknown objective `{name}`; valid options: {valid}")]
    UnknownObjective { name: String, valid: String },

    #[error("objective `{0}` does not satisfy the family conditions")]
    NotFamilyMember(String),

    #[error("LP scale guard exceeded: {points} support points (limit {limit})")]
    ScaleGuard { points: usize, limit: usize },

    #[error("internal solver error: {0}")]
    Solver(String),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("non-finite loss at iteration {iteration}, step {step}: {what}")]
    Diverged {
        iteration: usize,
        step: usize,
        what: String,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
