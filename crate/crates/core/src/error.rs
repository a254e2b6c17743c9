use thiserror::Error;

/// Errors produced by the tensor algebra, the Hankel transform and the solver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TidtError {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("index {index:?} out of range for shape {shape:?}")]
    IndexOutOfRange { index: Vec<usize>, shape: Vec<usize> },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("SVD did not converge on face slice {face}")]
    SvdNonConvergence { face: usize },

    #[error("imaginary residue {residue:e} after inverse transform exceeds {limit:e}")]
    ImaginaryResidue { residue: f64, limit: f64 },

    #[error("non-finite value encountered at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("Hankel tensor has t-SVD rank 0, incoherence is undefined")]
    ZeroRank,

    #[error("metric scope selects no entries")]
    EmptyScope,
}

pub type Result<T> = std::result::Result<T, TidtError>;
