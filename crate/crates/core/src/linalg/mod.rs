//! Dense and sparse numerical primitives shared by every other module.
//!
//! Dense factorizations (SVD-backed pseudoinverse and null-space extraction)
//! are delegated to `nalgebra`; the iterative sparse least-squares solver and
//! the assignment solver are implemented here directly.

mod dense;
mod factor;
mod hungarian;
mod lsmr;
mod sparse;

pub use dense::DenseMatrix;
pub use factor::{null_space_basis, pinv, singular_values, DEFAULT_RANK_TOL};
pub use hungarian::hungarian;
pub use lsmr::{lsmr_solve, LsmrOptions, LsmrSolution};
pub use sparse::{CsrMatrix, SparseSystem};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("cost matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("LSMR did not converge after {iterations} iterations (residual {residual_norm:.3e})")]
    DidNotConverge {
        /// Best iterate reached when the iteration limit was hit.
        best: Vec<f64>,
        residual_norm: f64,
        iterations: usize,
    },
}
