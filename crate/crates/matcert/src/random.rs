//! Seeded random instances.
//!
//! Recipe: a Gaussian Hermitian `G` has independent standard normal real and
//! imaginary parts above the diagonal (scaled by `1/√2`) and standard normal
//! diagonal entries. Positive definite matrices are `exp(spread·G)` rescaled,
//! which guarantees full rank; density matrices are normalised to unit trace.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::linalg::{Hermitian, Matrix, PositiveDefinite};
use crate::real::Real;

/// Deterministic generator used for every seeded instance.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Gaussian Hermitian matrix.
pub fn gaussian_hermitian<T: Real>(rng: &mut ChaCha8Rng, n: usize) -> Hermitian<T> {
    let mut m = Matrix::<T>::zeros(n, n);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..n {
        m[(i, i)] = Complex::new(T::lit(normal(rng)), T::zero());
        for j in i + 1..n {
            let z = Complex::new(T::lit(normal(rng) * r), T::lit(normal(rng) * r));
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    Hermitian::symmetrized(m)
}

/// Complex Gaussian matrix (not Hermitian), e.g. for the `K` of trace functionals.
pub fn gaussian_matrix<T: Real>(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<T> {
    Matrix::from_fn(rows, cols, |_, _| Complex::new(T::lit(normal(rng)), T::lit(normal(rng))))
}

/// `exp(spread·G)` rescaled so the average eigenvalue is one.
pub fn positive_definite<T: Real>(rng: &mut ChaCha8Rng, n: usize, spread: T) -> Result<PositiveDefinite<T>> {
    let g = gaussian_hermitian::<T>(rng, n);
    let e = g.eig()?.apply(|x| (spread * x).exp())?;
    let tr = e.trace();
    PositiveDefinite::new(e.scale(T::count(n) / tr))
}

/// `exp(G)/Tr exp(G)`: full-rank density matrix.
pub fn density<T: Real>(rng: &mut ChaCha8Rng, n: usize) -> Result<PositiveDefinite<T>> {
    let g = gaussian_hermitian::<T>(rng, n);
    let e = g.eig()?.apply(|x| x.exp())?;
    let tr = e.trace();
    PositiveDefinite::new(e.scale(T::one() / tr))
}

/// Gaussian Hermitian direction scaled to operator norm about `scale`.
pub fn direction<T: Real>(rng: &mut ChaCha8Rng, n: usize, scale: T) -> Hermitian<T> {
    let g = gaussian_hermitian::<T>(rng, n);
    let norm = g.norm();
    if norm == T::zero() {
        return g;
    }
    g.scale(scale / norm)
}
