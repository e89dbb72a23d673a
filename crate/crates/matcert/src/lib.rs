//! Certified second-order identities for matrix means and quantum entropies.
//!
//! The crate computes explicit positive semidefinite curvature terms (the
//! geometric-mean `Cross` term, the dyadic Lieb-concavity construction, the
//! relative-entropy `Γ` limit and the conditional-mutual-information remainder
//! decomposition) and checks each one against finite differences or direct
//! entropic evaluation.
//!
//! Everything is generic over the real scalar type ([`Real`], implemented for
//! `f32` and `f64`); the `*64` aliases below fix `f64`, which the tolerances
//! are calibrated for.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometric_mean;
pub mod lieb_concavity;
pub mod linalg;
pub mod power_perturbation;
pub mod quadrature;
pub mod random;
pub mod real;
pub mod relative_entropy;
pub mod report;
pub mod ssa;
pub mod suite;

pub use error::{Error, Result};
pub use real::Real;

pub type Matrix64 = linalg::Matrix<f64>;
pub type Hermitian64 = linalg::Hermitian<f64>;
pub type PositiveDefinite64 = linalg::PositiveDefinite<f64>;
