//! Perturbation expansion of matrix powers:
//! `(L + εF)^q = L^q + ε·first_order − ε²·second_order + O(ε³)`.
//!
//! The production paths are eigenbasis formulas (divided differences) and a
//! Löwner integral for the PSD second-order term. The [`recursion`] module
//! rebuilds the same first-order terms from chains of Sylvester equations and
//! serves as an independent oracle.

use crate::error::{invalid, Result};
use crate::linalg::{Hermitian, Matrix, PositiveDefinite};
use crate::quadrature::{integrate_loewner, QuadratureRule};
use crate::real::Real;

/// Default Gauss-Jacobi node count for Löwner integrals.
pub const DEFAULT_LOEWNER_NODES: usize = 100;

/// Divided differences switch to the derivative when eigenvalues are this close (relative).
pub const CLUSTER_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct PowerExpansion<T> {
    pub base_power: Hermitian<T>,
    pub first_order: Hermitian<T>,
    pub second_order: Hermitian<T>,
}

fn clustered<T: Real>(a: T, b: T) -> bool {
    (a - b).abs() < T::lit(CLUSTER_TOL) * (a + b)
}

/// First divided difference of `x ↦ x^q` at eigenvalues `a`, `b`.
pub fn power_divided_difference<T: Real>(a: T, b: T, q: T) -> T {
    if clustered(a, b) {
        let m = (a + b) / T::lit(2.0);
        q * m.powf(q - T::one())
    } else {
        (a.powf(q) - b.powf(q)) / (a - b)
    }
}

/// First divided difference of `ln`.
pub fn log_divided_difference<T: Real>(a: T, b: T) -> T {
    if clustered(a, b) {
        T::lit(2.0) / (a + b)
    } else {
        (a.ln() - b.ln()) / (a - b)
    }
}

/// `d/dε (L + εF)^q` at zero, for `q ∈ [0, 1]`.
pub fn first_order<T: Real>(l: &PositiveDefinite<T>, f: &Hermitian<T>, q: T) -> Result<Hermitian<T>> {
    check_dims(l, f)?;
    if q == T::zero() {
        return Ok(Hermitian::zeros(l.dim()));
    }
    if q == T::one() {
        return Ok(f.clone());
    }
    let d = &l.spectral().values;
    Ok(in_eigenbasis(l, f, |k, m| power_divided_difference(d[k], d[m], q)))
}

/// [`first_order`] for `L = diag(vals)`, with `F` already in that basis.
pub fn first_order_in_eigenbasis<T: Real>(vals: &[T], f: &Matrix<T>, q: T) -> Matrix<T> {
    if q == T::zero() {
        return Matrix::zeros(vals.len(), vals.len());
    }
    if q == T::one() {
        return f.clone();
    }
    f.weighted(|i, j| power_divided_difference(vals[i], vals[j], q))
}

/// `d/dε ln(L + εF)` at zero, the limit of `2^m V_{2^{-m}}`.
pub fn log_derivative<T: Real>(l: &PositiveDefinite<T>, f: &Hermitian<T>) -> Result<Hermitian<T>> {
    check_dims(l, f)?;
    let d = &l.spectral().values;
    Ok(in_eigenbasis(l, f, |k, m| log_divided_difference(d[k], d[m])))
}

/// `(sin πq/π) ∫₀^∞ t^q (t+L)^{-1} F (t+L)^{-1} F (t+L)^{-1} dt`, which is PSD
/// and equals minus the ε² coefficient. Zero at `q ∈ {0, 1}` (the power is affine there).
pub fn second_order<T: Real>(l: &PositiveDefinite<T>, f: &Hermitian<T>, q: T, nodes: usize) -> Result<Hermitian<T>> {
    check_dims(l, f)?;
    if !(q >= T::zero() && q <= T::one()) {
        return invalid(format!("exponent {q} outside [0, 1]"));
    }
    if near_endpoint(q) {
        return Ok(Hermitian::zeros(l.dim()));
    }
    let spec = l.spectral();
    let d = &spec.values;
    let n = d.len();
    let fh = f.matrix().in_basis(&spec.vectors);
    let rule = QuadratureRule::loewner(q, nodes, (spec.min() * spec.max()).sqrt())?;
    let k = integrate_loewner(&rule, |t| {
        let r: Vec<T> = d.iter().map(|&x| T::one() / (t + x)).collect();
        let left = fh.diag_sandwich(&r, &r);
        Ok(left.matmul(&fh).diag_sandwich(&vec![T::one(); n], &r))
    })?;
    Ok(Hermitian::symmetrized(k.matrix().conjugate_by(&spec.vectors)))
}

/// `L^q` from the Löwner integral `(sin πq/π) ∫₀^∞ t^q (1/t − (t+L)^{-1}) dt`.
pub fn loewner_power<T: Real>(l: &PositiveDefinite<T>, q: T, nodes: usize) -> Result<PositiveDefinite<T>> {
    if !(q > T::zero() && q < T::one()) {
        return invalid(format!("Löwner representation needs q in (0, 1), got {q}"));
    }
    let spec = l.spectral();
    let d = &spec.values;
    let rule = QuadratureRule::loewner(q, nodes, (spec.min() * spec.max()).sqrt())?;
    let diag = integrate_loewner(&rule, |t| {
        Ok(Matrix::from_real_diag(&d.iter().map(|&x| x / (t * (t + x))).collect::<Vec<_>>()))
    })?;
    PositiveDefinite::new(Hermitian::symmetrized(diag.matrix().conjugate_by(&spec.vectors)))
}

/// All three expansion terms at once.
pub fn expansion<T: Real>(l: &PositiveDefinite<T>, f: &Hermitian<T>, q: T, nodes: usize) -> Result<PowerExpansion<T>> {
    Ok(PowerExpansion {
        base_power: l.power(q),
        first_order: first_order(l, f, q)?,
        second_order: second_order(l, f, q, nodes)?,
    })
}

/// Exponents this close to 0 or 1 take the analytic branch.
pub fn near_endpoint<T: Real>(q: T) -> bool {
    let tiny = T::lit(1e-8);
    q.abs() < tiny || (T::one() - q).abs() < tiny
}

fn check_dims<T: Real>(l: &PositiveDefinite<T>, f: &Hermitian<T>) -> Result<()> {
    if l.dim() != f.dim() {
        return invalid(format!("dimension mismatch: L is {}, F is {}", l.dim(), f.dim()));
    }
    Ok(())
}

fn in_eigenbasis<T: Real>(l: &PositiveDefinite<T>, f: &Hermitian<T>, w: impl Fn(usize, usize) -> T) -> Hermitian<T> {
    let u = &l.spectral().vectors;
    Hermitian::symmetrized(f.matrix().in_basis(u).weighted(w).conjugate_by(u))
}

/// Sylvester-chain constructions of the first-order terms.
pub mod recursion {
    use super::*;
    use crate::linalg::sylvester_solve;

    /// `V_{2^{-j}}` for `j = 1..=m`: `V_{1/2}` solves `L^{1/2}V + VL^{1/2} = F`
    /// and each further level solves `L^{2^{-j}}V + VL^{2^{-j}} = V_{2^{-(j-1)}}`.
    pub fn dyadic_chain<T: Real>(l: &PositiveDefinite<T>, f: &Hermitian<T>, m: u32) -> Result<Vec<Hermitian<T>>> {
        let mut out = Vec::with_capacity(m as usize);
        let mut prev = f.clone();
        for j in 1..=m {
            let root = l.power_pd(T::lit(0.5f64.powi(j as i32)));
            let v = sylvester_solve(&root, &prev)?;
            out.push(v.clone());
            prev = v;
        }
        Ok(out)
    }

    /// First-order term of `(L+εF)^{k/2^m}` assembled as the product of `k`
    /// copies of `(L+εF)^{1/2^m}`: `Σ_j L^{j/2^m} V_{1/2^m} L^{(k−1−j)/2^m}`.
    pub fn dyadic_first_order<T: Real>(l: &PositiveDefinite<T>, f: &Hermitian<T>, k: u64, m: u32) -> Result<Hermitian<T>> {
        if m == 0 {
            return match k {
                0 => Ok(Hermitian::zeros(l.dim())),
                1 => Ok(f.clone()),
                _ => invalid("exponent above one"),
            };
        }
        let chain = dyadic_chain(l, f, m)?;
        let v = chain.last().expect("m ≥ 1").matrix().clone();
        let step = T::lit(0.5f64.powi(m as i32));
        let root = l.power(step);
        let mut acc = Matrix::zeros(l.dim(), l.dim());
        let mut left = Matrix::identity(l.dim());
        for j in 0..k {
            let right_exp = T::lit((k - 1 - j) as f64) * step;
            let right = l.power(right_exp);
            acc = acc + left.matmul(&v).matmul(right.matrix());
            left = left.matmul(root.matrix());
        }
        Ok(Hermitian::symmetrized(acc))
    }

    /// `2^m V_{2^{-m}}`, which tends to the logarithmic derivative.
    pub fn log_derivative_estimate<T: Real>(l: &PositiveDefinite<T>, f: &Hermitian<T>, m: u32) -> Result<Hermitian<T>> {
        let chain = dyadic_chain(l, f, m)?;
        Ok(chain.last().expect("m ≥ 1").scale(T::lit(2f64.powi(m as i32))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(x: f64) -> PositiveDefinite<f64> {
        PositiveDefinite::new(Hermitian::from_real_diag(&[x])).unwrap()
    }

    fn one() -> Hermitian<f64> {
        Hermitian::from_real_diag(&[1.0])
    }

    #[test]
    fn first_order_endpoints() {
        let l = PositiveDefinite::new(Hermitian::from_real_diag(&[1.0, 3.0])).unwrap();
        let f = Hermitian::from_real_diag(&[2.0, -1.0]);
        assert_eq!(first_order(&l, &f, 1.0).unwrap(), f);
        assert_eq!(first_order(&l, &f, 0.0).unwrap().matrix().max_abs(), 0.0);
    }

    #[test]
    fn scalar_square_root_derivative() {
        let v = first_order(&scalar(4.0), &one(), 0.5).unwrap();
        assert!((v.entry(0, 0).re - 0.25).abs() < 1e-15);
    }

    #[test]
    fn scalar_log_derivative() {
        let v = log_derivative(&scalar(2.0), &one()).unwrap();
        assert!((v.entry(0, 0).re - 0.5).abs() < 1e-15);
        let f = Hermitian::from_real_diag(&[1.0, -2.0]);
        assert_eq!(log_derivative(&PositiveDefinite::identity(2), &f).unwrap(), f);
    }

    #[test]
    fn scalar_second_order() {
        let k = second_order(&scalar(1.0), &one(), 0.5, DEFAULT_LOEWNER_NODES).unwrap();
        assert!((k.entry(0, 0).re - 0.125).abs() < 1e-13);
        assert_eq!(second_order(&scalar(1.0), &one(), 1.0, 10).unwrap().matrix().max_abs(), 0.0);
        assert_eq!(second_order(&scalar(1.0), &one(), 0.0, 10).unwrap().matrix().max_abs(), 0.0);
    }

    #[test]
    fn loewner_square_root_of_diagonal() {
        let l = PositiveDefinite::new(Hermitian::from_real_diag(&[1.0, 4.0])).unwrap();
        let r = loewner_power(&l, 0.5, DEFAULT_LOEWNER_NODES).unwrap();
        assert!(r.matrix().max_abs_diff(&Matrix::from_real_diag(&[1.0, 2.0])) < 1e-12);
        let i = loewner_power(&PositiveDefinite::<f64>::identity(3), 0.3, 40).unwrap();
        assert!(i.matrix().max_abs_diff(&Matrix::identity(3)) < 1e-13);
    }

    #[test]
    fn chain_for_scalar_telescopes() {
        // 2^m V_{2^{-m}} for L = 2, F = 1 approaches ln'(2) = 1/2.
        let est = recursion::log_derivative_estimate(&scalar(2.0), &one(), 30).unwrap();
        assert!((est.entry(0, 0).re - 0.5).abs() < 1e-8);
    }
}
