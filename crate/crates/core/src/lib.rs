//! Recovery of multidimensional time series with non-random missing entries
//! by low-rank completion of a temporal Hankel tensor.
//!
//! The crate is layered bottom-up:
//!
//! - [`tensor`] and [`transform`]: dense tensors and the invertible
//!   trailing-mode transforms (DFT, DCT, random orthogonal).
//! - [`talgebra`]: t-product, t-SVD, ranks, tensor nuclear norm and t-SVT.
//! - [`hankel`]: the temporal isometric delay-embedding and its inverse.
//! - [`sampling`]: observation masks and recovery diagnostics.
//! - [`solver`]: the ADMM solver.
//! - [`experiments`]: synthetic data, phase-transition sweeps and benchmarks.

pub mod error;
pub mod experiments;
pub mod hankel;
pub mod sampling;
pub mod solver;
pub mod talgebra;
pub mod tensor;
pub mod transform;

pub use error::{Result, TidtError};
pub use hankel::{HankelConfig, Padding};
pub use sampling::{MaskPattern, PatternKind, SamplingMask, TheoryDiagnostics};
pub use solver::{admm_solve, RecoveryReport, SolverConfig};
pub use tensor::{ComplexTensor, DenseTensor, Tensor};
pub use transform::{TransformKind, TransformSpec};
