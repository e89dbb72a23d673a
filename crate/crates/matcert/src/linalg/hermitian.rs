use num_complex::Complex;

use super::eig::jacobi_hermitian;
use super::matrix::Matrix;
use super::ops::operator_norm;
use crate::error::{invalid, Error, Result};
use crate::real::Real;

/// Construction tolerances for the checked matrix types.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances<T> {
    /// Allowed `‖M − M*‖ / (1 + ‖M‖)` before a matrix is rejected as non-Hermitian.
    pub hermiticity: T,
    /// Smallest admissible eigenvalue relative to the largest one.
    pub pd_floor: T,
    /// Allowed negative dip (relative) when certifying positive semidefiniteness.
    pub psd_slack: T,
}

impl<T: Real> Default for Tolerances<T> {
    fn default() -> Self {
        Tolerances { hermiticity: T::lit(1e-10), pd_floor: T::lit(1e-12), psd_slack: T::lit(1e-10) }
    }
}

/// Eigenvalues (ascending) and orthonormal eigenvectors (columns).
#[derive(Clone, Debug, PartialEq)]
pub struct Spectral<T> {
    pub values: Vec<T>,
    pub vectors: Matrix<T>,
}

impl<T: Real> Spectral<T> {
    /// `U f(Λ) U*`, failing if `f` is not finite at some eigenvalue.
    pub fn apply(&self, f: impl Fn(T) -> T) -> Result<Hermitian<T>> {
        let fv = self.map_values(f)?;
        Ok(Hermitian::symmetrized(Matrix::from_real_diag(&fv).conjugate_by(&self.vectors)))
    }

    pub fn map_values(&self, f: impl Fn(T) -> T) -> Result<Vec<T>> {
        self.values
            .iter()
            .map(|&x| {
                let y = f(x);
                if y.is_finite() {
                    Ok(y)
                } else {
                    Err(Error::Domain { eigenvalue: x.to_f64_lossy() })
                }
            })
            .collect()
    }

    pub fn reconstruct(&self) -> Matrix<T> {
        Matrix::from_real_diag(&self.values).conjugate_by(&self.vectors)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn min(&self) -> T {
        self.values[0]
    }

    pub fn max(&self) -> T {
        self.values[self.values.len() - 1]
    }
}

/// Square matrix certified Hermitian; stores the symmetrised value.
#[derive(Clone, Debug, PartialEq)]
pub struct Hermitian<T> {
    m: Matrix<T>,
}

impl<T: Real> Hermitian<T> {
    pub fn new(m: Matrix<T>) -> Result<Self> {
        Self::with_tolerance(m, T::lit(1e-10))
    }

    pub fn with_tolerance(m: Matrix<T>, tol: T) -> Result<Self> {
        if !m.is_square() {
            return invalid(format!("Hermitian matrix must be square, got {}x{}", m.rows(), m.cols()));
        }
        if !m.is_finite() {
            return invalid("matrix has non-finite entries");
        }
        let skew = operator_norm(&(&m - &m.adjoint()))?;
        let size = operator_norm(&m)?;
        if skew > tol * (T::one() + size) {
            return invalid(format!("matrix is not Hermitian: ‖M − M*‖ = {skew}"));
        }
        Ok(Self::symmetrized(m))
    }

    /// Symmetrises without checking. Internal results that are Hermitian up to round-off use this.
    pub fn symmetrized(m: Matrix<T>) -> Self {
        Hermitian { m: m.hermitian_part() }
    }

    pub fn zeros(n: usize) -> Self {
        Hermitian { m: Matrix::zeros(n, n) }
    }

    pub fn identity(n: usize) -> Self {
        Hermitian { m: Matrix::identity(n) }
    }

    pub fn from_real_diag(d: &[T]) -> Self {
        Hermitian { m: Matrix::from_real_diag(d) }
    }

    pub fn dim(&self) -> usize {
        self.m.rows()
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.m
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.m
    }

    pub fn eig(&self) -> Result<Spectral<T>> {
        let (values, vectors) = jacobi_hermitian(&self.m)?;
        Ok(Spectral { values, vectors })
    }

    pub fn norm(&self) -> T {
        operator_norm(&self.m).expect("finite by construction")
    }

    pub fn min_eigenvalue(&self) -> Result<T> {
        Ok(self.eig()?.min())
    }

    /// True when the smallest eigenvalue is at least `−slack·max(‖M‖, scale)`.
    pub fn is_psd(&self, slack: T, scale: T) -> Result<bool> {
        let spec = self.eig()?;
        let size = spec.values.iter().fold(T::zero(), |m, x| m.max(x.abs())).max(scale);
        Ok(spec.min() >= -slack * size)
    }

    pub fn scale(&self, s: T) -> Self {
        Hermitian { m: self.m.scale(s) }
    }

    pub fn add(&self, o: &Self) -> Self {
        Hermitian { m: &self.m + &o.m }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Hermitian { m: &self.m - &o.m }
    }

    /// `t·self + (1−t)·other`.
    pub fn lerp(&self, other: &Self, t: T) -> Self {
        Hermitian { m: self.m.scale(t) + other.m.scale(T::one() - t) }
    }

    /// Entrywise conjugate, which equals the transpose for Hermitian input.
    pub fn transpose(&self) -> Self {
        Hermitian { m: self.m.transpose() }
    }

    pub fn trace(&self) -> T {
        self.m.trace().re
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex<T> {
        self.m[(i, j)]
    }
}

/// Hermitian matrix whose spectrum is certified strictly positive. Carries its
/// eigendecomposition so matrix functions do not refactor.
#[derive(Clone, Debug, PartialEq)]
pub struct PositiveDefinite<T> {
    h: Hermitian<T>,
    spec: Spectral<T>,
}

impl<T: Real> PositiveDefinite<T> {
    pub fn new(h: Hermitian<T>) -> Result<Self> {
        Self::with_floor(h, T::lit(1e-12))
    }

    pub fn with_floor(h: Hermitian<T>, floor: T) -> Result<Self> {
        let spec = h.eig()?;
        let (lo, hi) = (spec.min(), spec.max());
        if !(lo > T::zero()) || lo < floor * hi {
            return invalid(format!("matrix is not positive definite: eigenvalues span [{lo}, {hi}]"));
        }
        Ok(PositiveDefinite { h, spec })
    }

    pub fn from_matrix(m: Matrix<T>) -> Result<Self> {
        Self::new(Hermitian::new(m)?)
    }

    pub fn identity(n: usize) -> Self {
        PositiveDefinite {
            h: Hermitian::identity(n),
            spec: Spectral { values: vec![T::one(); n], vectors: Matrix::identity(n) },
        }
    }

    pub fn hermitian(&self) -> &Hermitian<T> {
        &self.h
    }

    pub fn matrix(&self) -> &Matrix<T> {
        self.h.matrix()
    }

    pub fn spectral(&self) -> &Spectral<T> {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn min_eigenvalue(&self) -> T {
        self.spec.min()
    }

    pub fn max_eigenvalue(&self) -> T {
        self.spec.max()
    }

    /// `self^q` for any real `q`.
    pub fn power(&self, q: T) -> Hermitian<T> {
        if q == T::zero() {
            return Hermitian::identity(self.dim());
        }
        if q == T::one() {
            return self.h.clone();
        }
        self.spec.apply(|x| x.powf(q)).expect("positive spectrum")
    }

    /// `self^q` certified positive definite.
    pub fn power_pd(&self, q: T) -> Self {
        let values: Vec<T> = self.spec.values.iter().map(|x| x.powf(q)).collect();
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
        let vectors = Matrix::from_fn(self.dim(), self.dim(), |i, j| self.spec.vectors[(i, order[j])]);
        let spec = Spectral { values: order.iter().map(|&i| values[i]).collect(), vectors };
        let h = Hermitian::symmetrized(spec.reconstruct());
        PositiveDefinite { h, spec }
    }

    pub fn ln(&self) -> Hermitian<T> {
        self.spec.apply(|x| x.ln()).expect("positive spectrum")
    }

    pub fn log2(&self) -> Hermitian<T> {
        self.spec.apply(|x| x.log2()).expect("positive spectrum")
    }

    pub fn sqrt(&self) -> Hermitian<T> {
        self.spec.apply(|x| x.sqrt()).expect("positive spectrum")
    }

    pub fn inv_sqrt(&self) -> Hermitian<T> {
        self.spec.apply(|x| T::one() / x.sqrt()).expect("positive spectrum")
    }

    pub fn inverse(&self) -> Hermitian<T> {
        self.spec.apply(|x| T::one() / x).expect("positive spectrum")
    }

    /// Convex combination `t·self + (1−t)·other` (PD for t in [0, 1]).
    pub fn lerp(&self, other: &Self, t: T) -> Result<Self> {
        Self::new(self.h.lerp(&other.h, t))
    }

    pub fn transpose(&self) -> Self {
        let vectors = self.spec.vectors.conj();
        PositiveDefinite {
            h: self.h.transpose(),
            spec: Spectral { values: self.spec.values.clone(), vectors },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_hermitian() {
        let m = Matrix::from_real(2, 2, &[1.0, 2.0, 0.0, 1.0]).unwrap();
        assert!(Hermitian::new(m).is_err());
    }

    #[test]
    fn rejects_singular_as_pd() {
        let h = Hermitian::from_real_diag(&[1.0, 0.0]);
        assert!(PositiveDefinite::new(h).is_err());
        let h = Hermitian::from_real_diag(&[1.0, 1e-14]);
        assert!(PositiveDefinite::new(h).is_err());
    }

    #[test]
    fn eigenvalues_ascending() {
        let s = Hermitian::from_real_diag(&[3.0, 1.0]).eig().unwrap();
        assert_eq!(s.values, vec![1.0, 3.0]);
        let x = Hermitian::new(Matrix::<f64>::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap()).unwrap();
        let s = x.eig().unwrap();
        assert!((s.values[0] + 1.0).abs() < 1e-15 && (s.values[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn power_composition_on_diagonal() {
        let a = PositiveDefinite::new(Hermitian::<f64>::from_real_diag(&[4.0, 9.0])).unwrap();
        let r = a.sqrt();
        assert!((r.entry(0, 0).re - 2.0).abs() < 1e-15);
        assert!((r.entry(1, 1).re - 3.0).abs() < 1e-15);
    }

    #[test]
    fn log2_of_identity_vanishes() {
        let l = PositiveDefinite::<f64>::identity(3).log2();
        assert_eq!(l.matrix().max_abs(), 0.0);
    }

    #[test]
    fn domain_error_names_eigenvalue() {
        let s = Hermitian::from_real_diag(&[-1.0, 2.0]).eig().unwrap();
        match s.apply(|x: f64| x.ln()) {
            Err(Error::Domain { eigenvalue }) => assert_eq!(eigenvalue, -1.0),
            other => panic!("expected domain error, got {other:?}"),
        }
    }
}
