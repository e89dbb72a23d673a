use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex;

use crate::error::{invalid, Result};
use crate::real::Real;

/// Dense complex matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![Complex::new(T::zero(), T::zero()); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Builds a matrix from row-major entries; rejects empty shapes and length mismatches.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return invalid("matrix must have at least one row and one column");
        }
        if data.len() != rows * cols {
            return invalid(format!("expected {} entries, got {}", rows * cols, data.len()));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_real(rows: usize, cols: usize, entries: &[T]) -> Result<Self> {
        Self::from_vec(rows, cols, entries.iter().map(|&x| Complex::new(x, T::zero())).collect())
    }

    pub fn from_real_diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = Complex::new(x, T::zero());
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn map(&self, f: impl Fn(Complex<T>) -> Complex<T>) -> Self {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&z| f(z)).collect() }
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_complex(&self, s: Complex<T>) -> Self {
        self.map(|z| z * s)
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.rows.min(self.cols)).fold(Complex::new(T::zero(), T::zero()), |acc, i| acc + self[(i, i)])
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }

    /// Entrywise product.
    pub fn hadamard(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "hadamard shape mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        }
    }

    /// Entrywise multiplication by a real weight table `w(i, j)`.
    pub fn weighted(&self, w: impl Fn(usize, usize) -> T) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * w(i, j))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        let n = other.cols;
        for i in 0..self.rows {
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                let b_row = &other.data[k * n..(k + 1) * n];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o = *o + a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a * b)
            })
            .collect()
    }

    /// `U · self · U*`.
    pub fn conjugate_by(&self, u: &Self) -> Self {
        u.matmul(self).matmul(&u.adjoint())
    }

    /// `U* · self · U`, i.e. the matrix expressed in the basis given by the columns of `U`.
    pub fn in_basis(&self, u: &Self) -> Self {
        u.adjoint().matmul(self).matmul(u)
    }

    /// `(self + self*)/2`.
    pub fn hermitian_part(&self) -> Self {
        let half = T::lit(0.5);
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)].conj()) * half)
    }

    /// Left multiplication by `diag(d)` and right multiplication by `diag(e)`.
    pub fn diag_sandwich(&self, d: &[T], e: &[T]) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * (d[i] * e[j]))
    }

    pub fn diagonal(&self) -> Vec<Complex<T>> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    /// Largest entrywise distance to another matrix of the same shape.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        self.data.iter().zip(&other.data).fold(T::zero(), |m, (a, b)| m.max((a - b).norm()))
    }

    /// Converts between scalar precisions.
    pub fn cast<U: Real>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .map(|z| Complex::new(U::lit(z.re.to_f64_lossy()), U::lit(z.im.to_f64_lossy())))
                .collect(),
        }
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = Complex<T>;
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.cols + j]
    }
}

fn zip_with<T: Real>(a: &Matrix<T>, b: &Matrix<T>, f: impl Fn(Complex<T>, Complex<T>) -> Complex<T>) -> Matrix<T> {
    assert_eq!((a.rows, a.cols), (b.rows, b.cols), "elementwise shape mismatch");
    Matrix { rows: a.rows, cols: a.cols, data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect() }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl<T: Real> $tr<&Matrix<T>> for &Matrix<T> {
            type Output = Matrix<T>;
            fn $method(self, rhs: &Matrix<T>) -> Matrix<T> {
                $body(self, rhs)
            }
        }
        impl<T: Real> $tr<Matrix<T>> for Matrix<T> {
            type Output = Matrix<T>;
            fn $method(self, rhs: Matrix<T>) -> Matrix<T> {
                $body(&self, &rhs)
            }
        }
        impl<T: Real> $tr<&Matrix<T>> for Matrix<T> {
            type Output = Matrix<T>;
            fn $method(self, rhs: &Matrix<T>) -> Matrix<T> {
                $body(&self, rhs)
            }
        }
        impl<T: Real> $tr<Matrix<T>> for &Matrix<T> {
            type Output = Matrix<T>;
            fn $method(self, rhs: Matrix<T>) -> Matrix<T> {
                $body(self, &rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| zip_with(a, b, |x, y| x + y));
binop!(Sub, sub, |a, b| zip_with(a, b, |x, y| x - y));
binop!(Mul, mul, |a: &Matrix<T>, b: &Matrix<T>| a.matmul(b));

impl<T: Real> Neg for Matrix<T> {
    type Output = Matrix<T>;
    fn neg(self) -> Matrix<T> {
        self.map(|z| -z)
    }
}

impl<T: Real> Neg for &Matrix<T> {
    type Output = Matrix<T>;
    fn neg(self) -> Matrix<T> {
        self.map(|z| -z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn adjoint_conjugates_and_transposes() {
        let m = Matrix::from_vec(2, 2, vec![c(1., 2.), c(3., 0.), c(0., -1.), c(4., 4.)]).unwrap();
        let a = m.adjoint();
        assert_eq!(a[(0, 1)], c(0., 1.));
        assert_eq!(a[(1, 0)], c(3., 0.));
        assert_eq!(a[(1, 1)], c(4., -4.));
    }

    #[test]
    fn matmul_matches_hand_product() {
        let a = Matrix::from_real(2, 3, &[1., 2., 3., 4., 5., 6.]).unwrap();
        let b = Matrix::from_real(3, 1, &[1., 0., -1.]).unwrap();
        let p = &a * &b;
        assert_eq!(p[(0, 0)], c(-2., 0.));
        assert_eq!(p[(1, 0)], c(-2., 0.));
    }

    #[test]
    fn rejects_empty_and_mismatched_shapes() {
        assert!(Matrix::<f64>::from_vec(0, 1, vec![]).is_err());
        assert!(Matrix::<f64>::from_real(2, 2, &[1.0]).is_err());
    }

    #[test]
    fn trace_of_identity() {
        assert_eq!(Matrix::<f32>::identity(3).trace().re, 3.0);
    }
}
