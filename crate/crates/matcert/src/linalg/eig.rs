//! Hermitian eigensolvers.
//!
//! Complex Hermitian matrices go through cyclic Jacobi rotations, which are
//! slow for large n but accurate and fully deterministic for the sizes used
//! here (n <= ~100). Real symmetric tridiagonal matrices (Golub-Welsch) use
//! implicit QL.

use num_complex::Complex;

use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::real::Real;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues in ascending order and the matching unitary eigenvector matrix.
///
/// Each eigenvector column is rotated so that its first non-negligible
/// component is real and positive.
pub(crate) fn jacobi_hermitian<T: Real>(a: &Matrix<T>) -> Result<(Vec<T>, Matrix<T>)> {
    let n = a.rows();
    let mut m = a.hermitian_part();
    let mut v = Matrix::<T>::identity(n);
    let zero = T::zero();
    let hundred = T::lit(100.0);

    let mut converged = n <= 1;
    for sweep in 0..MAX_SWEEPS {
        let mut off = zero;
        for p in 0..n {
            for q in p + 1..n {
                off = off + m[(p, q)].norm();
            }
        }
        if off == zero {
            converged = true;
            break;
        }
        let thresh = if sweep < 3 { T::lit(0.2) * off / T::count(n * n) } else { zero };
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)].norm();
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let g = hundred * apq;
                if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    m[(p, q)] = Complex::new(zero, zero);
                    m[(q, p)] = Complex::new(zero, zero);
                    continue;
                }
                if apq <= thresh || apq == zero {
                    continue;
                }
                rotate(&mut m, &mut v, p, q, apq);
            }
        }
    }
    if !converged {
        let mut off = zero;
        for p in 0..n {
            for q in p + 1..n {
                off = off.max(m[(p, q)].norm());
            }
        }
        return Err(Error::NumericalFailure(format!(
            "Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps (largest off-diagonal {})",
            off
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.partial_cmp(&m[(j, j)].re).unwrap_or(std::cmp::Ordering::Equal));
    let values: Vec<T> = order.iter().map(|&i| m[(i, i)].re).collect();
    let mut vecs = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    fix_phases(&mut vecs);
    Ok((values, vecs))
}

// Zeroes the (p, q) entry. Phase-align the pair first so the 2x2 block is
// real symmetric, then apply the classical real rotation.
fn rotate<T: Real>(m: &mut Matrix<T>, v: &mut Matrix<T>, p: usize, q: usize, apq: T) {
    let n = m.rows();
    let one = T::one();
    let e = m[(p, q)] / apq;
    let eb = e.conj();
    let theta = (m[(q, q)].re - m[(p, p)].re) / (T::lit(2.0) * apq);
    let t = if theta.abs() > T::lit(1e150).min(T::max_value().sqrt()) {
        one / (T::lit(2.0) * theta)
    } else {
        theta.signum() / (theta.abs() + (theta * theta + one).sqrt())
    };
    let t = if theta == T::zero() { one } else { t };
    let c = one / (t * t + one).sqrt();
    let s = t * c;

    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = m[(k, p)];
        let akq = m[(k, q)];
        let new_p = akp * c - eb * akq * s;
        let new_q = akp * s + eb * akq * c;
        m[(k, p)] = new_p;
        m[(k, q)] = new_q;
        m[(p, k)] = new_p.conj();
        m[(q, k)] = new_q.conj();
    }
    let app = m[(p, p)].re - t * apq;
    let aqq = m[(q, q)].re + t * apq;
    m[(p, p)] = Complex::new(app, T::zero());
    m[(q, q)] = Complex::new(aqq, T::zero());
    m[(p, q)] = Complex::new(T::zero(), T::zero());
    m[(q, p)] = Complex::new(T::zero(), T::zero());

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * c - eb * vkq * s;
        v[(k, q)] = vkp * s + eb * vkq * c;
    }
}

fn fix_phases<T: Real>(v: &mut Matrix<T>) {
    let n = v.rows();
    let cutoff = T::epsilon().sqrt();
    for j in 0..n {
        let lead = (0..n).map(|i| v[(i, j)]).find(|z| z.norm() > cutoff);
        if let Some(z) = lead {
            let phase = z.conj() / z.norm();
            for i in 0..n {
                v[(i, j)] = v[(i, j)] * phase;
            }
        }
    }
}

/// Eigen-decomposition of the real symmetric tridiagonal matrix with diagonal
/// `diag` and sub-diagonal `off` (length n-1). Returns ascending eigenvalues and
/// the first component of each normalised eigenvector.
pub(crate) fn tridiagonal_eig<T: Real>(diag: &[T], off: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e: Vec<T> = off.to_vec();
    e.push(T::zero());
    // Only the first row of the eigenvector matrix is needed.
    let mut z: Vec<T> = (0..n).map(|i| if i == 0 { T::one() } else { T::zero() }).collect();
    let two = T::lit(2.0);

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= T::epsilon() * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::NumericalFailure("tridiagonal QL did not converge".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            g = d[m] - d[l] + e[l] / (g + r.abs() * g.signum());
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut early = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] = d[i + 1] - p;
                    e[m] = T::zero();
                    early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if early {
                continue;
            }
            d[l] = d[l] - p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap_or(std::cmp::Ordering::Equal));
    Ok((order.iter().map(|&i| d[i]).collect(), order.iter().map(|&i| z[i]).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_matches_known_spectrum() {
        // Path graph Laplacian-like matrix: eigenvalues 2 - 2cos(k pi/(n+1)).
        let n = 7;
        let (vals, first) = tridiagonal_eig(&vec![2.0f64; n], &vec![-1.0; n - 1]).unwrap();
        for (k, v) in vals.iter().enumerate() {
            let want = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v - want).abs() < 1e-13);
        }
        let norm: f64 = first.iter().map(|x| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-13);
    }

    #[test]
    fn jacobi_two_by_two_complex() {
        let i = Complex::new(0.0f64, 1.0);
        let one = Complex::new(1.0f64, 0.0);
        let a = Matrix::from_vec(2, 2, vec![one * 2.0, i, -i, one * 2.0]).unwrap();
        let (vals, v) = jacobi_hermitian(&a).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
        let rec = Matrix::from_real_diag(&vals).conjugate_by(&v);
        assert!(rec.max_abs_diff(&a) < 1e-14);
    }
}
