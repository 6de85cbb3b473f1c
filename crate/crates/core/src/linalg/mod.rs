//! Dense kernels operating on [`DenseMatrix`].

pub mod blas;
pub mod bounds;
pub mod cholesky;
pub mod eig;
pub mod matrix;
pub mod qr;

#[cfg(test)]
pub(crate) mod testutil;

pub use blas::{count_flops, gemm, gram, matmul, matmul_op, orthogonality_defect, FlopCounter, Op};
pub use bounds::{estimate_bounds, two_norm_estimate, Bounds};
pub use cholesky::{cholesky, solve_right_cholesky};
pub use eig::{sym_eig, SymEig};
pub use matrix::DenseMatrix;
pub use qr::{
    householder_qr, householder_qr_blocked, stacked_qr, stacked_qr_dense, structured_qr,
    StackedQrKernel, StructuredQrResult, DEFAULT_NB,
};
