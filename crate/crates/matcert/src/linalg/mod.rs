//! Dense complex linear algebra on small Hermitian matrices.

mod eig;
mod hermitian;
mod io;
mod matrix;
mod ops;

pub(crate) use eig::tridiagonal_eig;
pub use hermitian::{Hermitian, PositiveDefinite, Spectral, Tolerances};
pub use io::MatrixFile;
pub use matrix::Matrix;
pub use ops::{
    entropy_bits, expectation, identity_expectation, kron, matrix_function, operator_norm, pairing,
    partial_trace, sylvester_solve, vec_embed,
};
