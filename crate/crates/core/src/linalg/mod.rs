//! Dense linear algebra kernels: the coefficient matrix with its norm caches,
//! submatrix operators, Householder orthonormalization and one-sided Jacobi SVD.

mod dense;
mod operator;
mod qr;
mod svd;

pub mod vecops;

pub use dense::DenseMatrix;
pub use operator::{ColBlock, LinearOperator, RowBlock};
pub use qr::orthonormalize_columns;
pub use svd::{jacobi_svd, singular_values, Svd, SVD_MAX_DIM, ZERO_SIGMA_RTOL};
