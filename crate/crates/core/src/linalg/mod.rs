//! Spatial sparse linear algebra, time-blocked vectors and eigenvalue tools.

mod block;
mod cholesky;
mod eigen;
mod sparse;

pub use block::{BlockVector, SaddleVector};
pub(crate) use block::dot;
pub use cholesky::{cholesky_solve, CholeskyFactor};
pub use eigen::{
    dense_generalized_eig_extremal, dense_generalized_eigenvalues, lanczos_extremal, lanczos_from,
    weighted_norm, LanczosOptions, LanczosResult, DEFAULT_DENSE_LIMIT,
};
pub use sparse::{CsrMatrix, SpatialMatrix};
