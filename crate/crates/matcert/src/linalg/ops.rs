use num_complex::Complex;

use super::eig::jacobi_hermitian;
use super::hermitian::{Hermitian, PositiveDefinite};
use super::matrix::Matrix;
use crate::error::{invalid, Result};
use crate::real::Real;

/// Largest singular value.
pub fn operator_norm<T: Real>(m: &Matrix<T>) -> Result<T> {
    if !m.is_finite() {
        return invalid("operator norm of a matrix with non-finite entries");
    }
    let exact_hermitian = m.is_square() && *m == m.adjoint();
    let (vals, _) = if exact_hermitian { jacobi_hermitian(m)? } else { jacobi_hermitian(&m.adjoint().matmul(m))? };
    let top = vals.iter().fold(T::zero(), |a, x| a.max(x.abs()));
    Ok(if exact_hermitian { top } else { top.sqrt() })
}

/// Kronecker product: entry `(i1·r2 + i2, j1·c2 + j2)` is `a[i1, j1]·b[i2, j2]`.
pub fn kron<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    let (r2, c2) = (b.rows(), b.cols());
    Matrix::from_fn(a.rows() * r2, a.cols() * c2, |i, j| a[(i / r2, j / c2)] * b[(i % r2, j % c2)])
}

/// Row-major vectorisation: `v[i·M + j] = K[i, j]`.
pub fn vec_embed<T: Real>(k: &Matrix<T>) -> Vec<Complex<T>> {
    k.data().to_vec()
}

/// The operator paired with `vec_embed`: `Tr(K* A K B) = ⟨vec K, pairing(A, B) vec K⟩`.
///
/// Under row-major vectorisation the second factor enters transposed.
pub fn pairing<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    kron(a, &b.transpose())
}

/// `⟨v, M v⟩` with the first argument conjugated.
pub fn expectation<T: Real>(v: &[Complex<T>], m: &Matrix<T>) -> Complex<T> {
    m.matvec(v).iter().zip(v).fold(Complex::new(T::zero(), T::zero()), |acc, (mv, x)| acc + x.conj() * mv)
}

/// `⟨vec I, M vec I⟩ = Σ_{i,j} M[(i,i),(j,j)]` for `M` acting on an `n²`-dimensional space.
pub fn identity_expectation<T: Real>(m: &Matrix<T>, n: usize) -> Complex<T> {
    let mut acc = Complex::new(T::zero(), T::zero());
    for i in 0..n {
        for j in 0..n {
            acc = acc + m[(i * n + i, j * n + j)];
        }
    }
    acc
}

/// Unique Hermitian `X` with `Y X + X Y = Ω`, solved in `Y`'s eigenbasis.
pub fn sylvester_solve<T: Real>(y: &PositiveDefinite<T>, omega: &Hermitian<T>) -> Result<Hermitian<T>> {
    if y.dim() != omega.dim() {
        return invalid(format!("Sylvester dimension mismatch: {} vs {}", y.dim(), omega.dim()));
    }
    let spec = y.spectral();
    let d = &spec.values;
    let w = omega.matrix().in_basis(&spec.vectors);
    let x = w.weighted(|k, l| T::one() / (d[k] + d[l]));
    Ok(Hermitian::symmetrized(x.conjugate_by(&spec.vectors)))
}

/// Traces out the factors listed in `traced` from a matrix on `⊗ dims`.
pub fn partial_trace<T: Real>(m: &Matrix<T>, dims: &[usize], traced: &[usize]) -> Result<Matrix<T>> {
    let total: usize = dims.iter().product();
    if !m.is_square() || m.rows() != total {
        return invalid(format!("partial trace: matrix of size {}x{} does not match dims {:?}", m.rows(), m.cols(), dims));
    }
    if let Some(&bad) = traced.iter().find(|&&f| f >= dims.len()) {
        return invalid(format!("partial trace: factor {bad} out of range"));
    }
    let keep: Vec<usize> = (0..dims.len()).filter(|f| !traced.contains(f)).collect();
    let kept_dims: Vec<usize> = keep.iter().map(|&f| dims[f]).collect();
    let out_dim: usize = kept_dims.iter().product();
    let strides: Vec<usize> = (0..dims.len()).map(|f| dims[f + 1..].iter().product()).collect();

    let split = |idx: usize| -> Vec<usize> { (0..dims.len()).map(|f| (idx / strides[f]) % dims[f]).collect() };
    let mut out = Matrix::zeros(out_dim, out_dim);
    for i in 0..total {
        let mi = split(i);
        for j in 0..total {
            let mj = split(j);
            if traced.iter().any(|&f| mi[f] != mj[f]) {
                continue;
            }
            let (mut oi, mut oj) = (0, 0);
            for (&f, &d) in keep.iter().zip(&kept_dims) {
                oi = oi * d + mi[f];
                oj = oj * d + mj[f];
            }
            out[(oi, oj)] = out[(oi, oj)] + m[(i, j)];
        }
    }
    Ok(out)
}

/// `U f(Λ) U*` for a Hermitian input.
pub fn matrix_function<T: Real>(m: &Hermitian<T>, f: impl Fn(T) -> T) -> Result<Hermitian<T>> {
    m.eig()?.apply(f)
}

/// Von Neumann entropy `−Tr ρ log₂ ρ` in bits; zero eigenvalues contribute zero.
pub fn entropy_bits<T: Real>(rho: &Hermitian<T>) -> Result<T> {
    let spec = rho.eig()?;
    Ok(spec.values.iter().filter(|&&x| x > T::zero()).map(|&x| -x * x.log2()).sum())
}
