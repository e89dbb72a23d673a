//! Matrix geometric mean and its curvature term `Cross_{A,B}(X, Z)`.
//!
//! With `M = (A+B)/2`, `Ψ = M^{-1/2}((A−B)/2)M^{-1/2}`,
//! `E₂ = M^{-1/2}((X−Z)/2)M^{-1/2}`, `E₁ = −M^{-1/2}((X+Z)/2)M^{-1/2}` and
//! `P = E₂ + ΨE₁`, the mean `H(ε) = M₀(A+εX, B+εZ)` satisfies
//! `½H''(0) = −Cross` where
//!
//! ```text
//! Cross = (1/π) M^{1/2} [ ∫₀^∞ s^{1/2}(1+s)^{-1} Ψ̃ Ω Ψ̃ Ω* Ψ̃ ds
//!                        + Ψ (∫₀^∞ s^{1/2}(1+s)^{-3} Ψ̃ P P* Ψ̃ ds) Ψ ] M^{1/2},
//! Ψ̃(s) = (I − Ψ²/(1+s))^{-1},   Ω(s) = x^{1/2} P + x^{3/2} Ψ P Ψ,   x = 1/(1+s).
//! ```
//!
//! Both integrands are PSD, so `Cross ⪰ 0`, and it vanishes iff `P = 0`.
//! In `Ψ`'s eigenbasis the integrals reduce to second divided differences of
//! `φ(a) = 1 − √(1 − a²)`, which gives an exact closed form used as an
//! independent evaluation path.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{operator_norm, Hermitian, Matrix, PositiveDefinite};
use crate::quadrature::{integrate_half_line_sqrt, QuadratureRule, DEFAULT_HALF_LINE_NODES};
use crate::real::Real;
use crate::report::VerificationReport;

#[derive(Clone, Debug)]
pub struct MeanPair<T> {
    pub a: PositiveDefinite<T>,
    pub b: PositiveDefinite<T>,
}

impl<T: Real> MeanPair<T> {
    pub fn new(a: PositiveDefinite<T>, b: PositiveDefinite<T>) -> Result<Self> {
        if a.dim() != b.dim() {
            return invalid(format!("mean pair dimension mismatch: {} vs {}", a.dim(), b.dim()));
        }
        Ok(MeanPair { a, b })
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }
}

#[derive(Clone, Debug)]
pub struct DirectionPair<T> {
    pub x: Hermitian<T>,
    pub z: Hermitian<T>,
}

impl<T: Real> DirectionPair<T> {
    pub fn new(x: Hermitian<T>, z: Hermitian<T>) -> Result<Self> {
        if x.dim() != z.dim() {
            return invalid(format!("direction pair dimension mismatch: {} vs {}", x.dim(), z.dim()));
        }
        Ok(DirectionPair { x, z })
    }

    pub fn zero(n: usize) -> Self {
        DirectionPair { x: Hermitian::zeros(n), z: Hermitian::zeros(n) }
    }
}

#[derive(Clone, Debug)]
pub struct CrossIngredients<T> {
    pub psi: Hermitian<T>,
    pub e1: Hermitian<T>,
    pub e2: Hermitian<T>,
    /// `(A+B)/2`.
    pub mean: PositiveDefinite<T>,
}

impl<T: Real> CrossIngredients<T> {
    /// `E₂ + ΨE₁`; `Cross` vanishes exactly when this does.
    pub fn defect(&self) -> Matrix<T> {
        self.e2.matrix() + self.psi.matrix() * self.e1.matrix()
    }
}

/// How the two `s`-integrals are evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum CrossMethod {
    /// `tan²` substitution plus Gauss-Legendre with the given node count.
    Quadrature { nodes: usize },
    /// Exact eigenbasis formula via second divided differences.
    ClosedForm,
}

impl Default for CrossMethod {
    fn default() -> Self {
        CrossMethod::Quadrature { nodes: DEFAULT_HALF_LINE_NODES }
    }
}

/// `B^{1/2} (B^{-1/2} A B^{-1/2})^{1/2} B^{1/2}`.
pub fn geometric_mean<T: Real>(pair: &MeanPair<T>) -> Result<PositiveDefinite<T>> {
    let bh = pair.b.sqrt();
    let bih = pair.b.inv_sqrt();
    let inner = PositiveDefinite::new(Hermitian::symmetrized(pair.a.matrix().conjugate_by(bih.matrix())))?;
    let mid = inner.sqrt();
    PositiveDefinite::new(Hermitian::symmetrized(mid.matrix().conjugate_by(bh.matrix())))
}

pub fn cross_ingredients<T: Real>(pair: &MeanPair<T>, dirs: &DirectionPair<T>) -> Result<CrossIngredients<T>> {
    if dirs.x.dim() != pair.dim() {
        return invalid("directions do not match the mean pair dimension");
    }
    let half = T::lit(0.5);
    let mean = PositiveDefinite::new(pair.a.hermitian().add(pair.b.hermitian()).scale(half))?;
    let mih = mean.inv_sqrt();
    let sandwich = |m: Matrix<T>| Hermitian::symmetrized(m.conjugate_by(mih.matrix()));
    let psi = sandwich((pair.a.matrix() - pair.b.matrix()).scale(half));
    let e2 = sandwich((dirs.x.matrix() - dirs.z.matrix()).scale(half));
    let e1 = sandwich((dirs.x.matrix() + dirs.z.matrix()).scale(-half));
    let norm = operator_norm(psi.matrix())?;
    if norm >= T::one() {
        return Err(Error::Internal(format!("‖Ψ‖ = {norm} ≥ 1; inputs are not positive definite")));
    }
    Ok(CrossIngredients { psi, e1, e2, mean })
}

/// `Cross_{A,B}(X, Z)`.
pub fn cross<T: Real>(pair: &MeanPair<T>, dirs: &DirectionPair<T>, method: CrossMethod) -> Result<Hermitian<T>> {
    let n = pair.dim();
    if dirs.x.matrix().max_abs() == T::zero() && dirs.z.matrix().max_abs() == T::zero() {
        return Ok(Hermitian::zeros(n));
    }
    let ing = cross_ingredients(pair, dirs)?;
    let spec = ing.psi.eig()?;
    let p_hat = ing.defect().in_basis(&spec.vectors);
    let c = cross_kernel(&spec.values, &p_hat, method)?;
    let mh = ing.mean.sqrt();
    Ok(Hermitian::symmetrized(c.conjugate_by(&spec.vectors).conjugate_by(mh.matrix())))
}

/// `Cross` for commuting `A = diag(a)`, `B = diag(b)` expressed in their common
/// eigenbasis, with `X`, `Z` given in that same basis. Returns the result in
/// that basis.
pub fn cross_commuting<T: Real>(a: &[T], b: &[T], x: &Matrix<T>, z: &Matrix<T>, method: CrossMethod) -> Result<Matrix<T>> {
    let n = a.len();
    if b.len() != n || x.rows() != n || z.rows() != n {
        return invalid("commuting cross: dimension mismatch");
    }
    let half = T::lit(0.5);
    let m: Vec<T> = a.iter().zip(b).map(|(&ai, &bi)| (ai + bi) * half).collect();
    if m.iter().any(|&v| !(v > T::zero())) || a.iter().chain(b).any(|&v| !(v > T::zero())) {
        return invalid("commuting cross: spectra must be positive");
    }
    let psi: Vec<T> = a.iter().zip(b).map(|(&ai, &bi)| (ai - bi) / (ai + bi)).collect();
    let mih: Vec<T> = m.iter().map(|v| T::one() / v.sqrt()).collect();
    let mh: Vec<T> = m.iter().map(|v| v.sqrt()).collect();
    // P = E₂ + ΨE₁ with Ψ diagonal.
    let p = Matrix::from_fn(n, n, |i, j| {
        let e2 = (x[(i, j)] - z[(i, j)]) * half;
        let e1 = -(x[(i, j)] + z[(i, j)]) * half;
        (e2 + e1 * psi[i]) * (mih[i] * mih[j])
    });
    let c = cross_kernel(&psi, &p, method)?;
    Ok(c.diag_sandwich(&mh, &mh).hermitian_part())
}

/// Second divided difference of `φ(a) = 1 − √(1 − a²)` at `(a, b, c)`, written
/// without subtractive cancellation; symmetric in its arguments.
pub fn phi_second_divided_difference<T: Real>(a: T, b: T, c: T) -> T {
    let one = T::one();
    let sa = (one - a * a).sqrt();
    let sb = (one - b * b).sqrt();
    let sc = (one - c * c).sqrt();
    ((a + b) * (a + c) / (sa + sc) + sa + sb) / ((sa + sb) * (sc + sb))
}

/// The bracketed integral term of `Cross` (times `1/π`) in `Ψ`'s eigenbasis,
/// where `Ψ = diag(psi)` and `p` is `E₂ + ΨE₁` in that basis.
pub fn cross_kernel<T: Real>(psi: &[T], p: &Matrix<T>, method: CrossMethod) -> Result<Matrix<T>> {
    let n = psi.len();
    if psi.iter().any(|v| !(v.abs() < T::one())) {
        return Err(Error::Internal("Ψ eigenvalue outside (−1, 1)".into()));
    }
    match method {
        CrossMethod::ClosedForm => Ok(closed_form_kernel(psi, p)),
        CrossMethod::Quadrature { nodes } => {
            let rule = QuadratureRule::half_line_sqrt(nodes)?;
            let ppt = p.matmul(&p.adjoint());
            let inv_pi = T::one() / T::PI();
            let integral = integrate_half_line_sqrt(&rule, |s| {
                let x = T::one() / (T::one() + s);
                let xh = x.sqrt();
                let d: Vec<T> = psi.iter().map(|&v| T::one() / (T::one() - x * v * v)).collect();
                // Ω with Ψ̃ applied on both sides, and Ω* with Ψ̃ on its right.
                let omega = Matrix::from_fn(n, n, |i, j| p[(i, j)] * (xh + x * xh * psi[i] * psi[j]));
                let left = omega.diag_sandwich(&d, &d);
                let right = omega.adjoint().diag_sandwich(&vec![T::one(); n], &d);
                let first = left.matmul(&right);
                let w1 = s * x;
                let w2 = s * x * x * x;
                Ok(Matrix::from_fn(n, n, |i, j| {
                    first[(i, j)] * w1 + ppt[(i, j)] * (w2 * psi[i] * d[i] * d[j] * psi[j])
                }))
            })?;
            Ok(integral.matrix().scale(inv_pi))
        }
    }
}

fn closed_form_kernel<T: Real>(psi: &[T], p: &Matrix<T>) -> Matrix<T> {
    let n = psi.len();
    let roots: Vec<T> = psi.iter().map(|&v| (T::one() - v * v).sqrt()).collect();
    // φ[a,b,c] = ((a+b)(a+c)·R(a,c) + s_a + s_b)·R(a,b)·R(c,b) with R(x,y) = 1/(s_x + s_y).
    let recip: Vec<T> = (0..n * n).map(|ij| T::one() / (roots[ij / n] + roots[ij % n])).collect();
    let mut c = Matrix::zeros(n, n);
    for i in 0..n {
        let ri = &recip[i * n..(i + 1) * n];
        for j in i..n {
            let rj = &recip[j * n..(j + 1) * n];
            let pij = (psi[i] + psi[j]) * ri[j];
            let (mut re, mut im) = (T::zero(), T::zero());
            for k in 0..n {
                let w = ((psi[i] + psi[k]) * pij + roots[i] + roots[k]) * ri[k] * rj[k];
                let (a, b) = (p[(i, k)], p[(j, k)]);
                re = re + (a.re * b.re + a.im * b.im) * w;
                im = im + (a.im * b.re - a.re * b.im) * w;
            }
            let acc = Complex::new(re, im);
            c[(i, j)] = acc;
            c[(j, i)] = acc.conj();
        }
    }
    c
}

/// Default finite-difference step `1e-3·min(1, λmin(A), λmin(B))/(1 + ‖X‖ + ‖Z‖)`.
pub fn default_fd_step<T: Real>(pair: &MeanPair<T>, dirs: &DirectionPair<T>) -> T {
    let lam = T::one().min(pair.a.min_eigenvalue()).min(pair.b.min_eigenvalue());
    T::lit(1e-3) * lam / (T::one() + dirs.x.norm() + dirs.z.norm())
}

fn mean_along<T: Real>(pair: &MeanPair<T>, dirs: &DirectionPair<T>, eps: T) -> Result<Matrix<T>> {
    let shift = |m: &PositiveDefinite<T>, d: &Hermitian<T>| -> Result<PositiveDefinite<T>> {
        PositiveDefinite::new(m.hermitian().add(&d.scale(eps))).map_err(|_| {
            Error::InvalidInput(format!("perturbed matrix not positive definite at step {eps}; use a smaller step"))
        })
    };
    let p = MeanPair::new(shift(&pair.a, &dirs.x)?, shift(&pair.b, &dirs.z)?)?;
    Ok(geometric_mean(&p)?.matrix().clone())
}

/// Central second difference of `ε ↦ M₀(A+εX, B+εZ)` at zero.
pub fn mean_second_derivative_fd<T: Real>(pair: &MeanPair<T>, dirs: &DirectionPair<T>, step: T) -> Result<Hermitian<T>> {
    if !(step > T::zero()) {
        return invalid("finite-difference step must be positive");
    }
    let plus = mean_along(pair, dirs, step)?;
    let minus = mean_along(pair, dirs, -step)?;
    let mid = geometric_mean(pair)?;
    let two = T::lit(2.0);
    Ok(Hermitian::symmetrized((plus + minus - mid.matrix().scale(two)).scale(T::one() / (step * step))))
}

/// Checks `H''(t) = −2·Cross` along `t ↦ M₀(tA₁+(1−t)A₂, tB₁+(1−t)B₂)`, that
/// `−H''(t)` is PSD, and the midpoint inequality `H(t) ⪰ ½(H(t+h) + H(t−h))`.
pub fn joint_concavity_check(
    a1: &PositiveDefinite<f64>,
    a2: &PositiveDefinite<f64>,
    b1: &PositiveDefinite<f64>,
    b2: &PositiveDefinite<f64>,
    t: f64,
    method: CrossMethod,
    tol: f64,
) -> Result<VerificationReport> {
    if !(t > 0.0 && t < 1.0) {
        return invalid("joint concavity check needs t in (0, 1)");
    }
    let pair = MeanPair::new(a1.lerp(a2, t)?, b1.lerp(b2, t)?)?;
    let dirs = DirectionPair::new(a1.hermitian().sub(a2.hermitian()), b1.hermitian().sub(b2.hermitian()))?;
    let c = cross(&pair, &dirs, method)?;
    let h2 = c.scale(-2.0);
    let step = default_fd_step(&pair, &dirs).max(1e-4).min(t.min(1.0 - t) / 2.0);
    let fd = mean_second_derivative_fd(&pair, &dirs, step)?;
    let scale = 1.0 + h2.norm();
    let discrepancy = operator_norm(&(fd.matrix() - h2.matrix()))? / scale;
    let neg_psd = h2.scale(-1.0).is_psd(1e-10, 0.0)?;
    let mid = geometric_mean(&pair)?;
    let avg = (mean_along(&pair, &dirs, step)? + mean_along(&pair, &dirs, -step)?).scale(0.5);
    let gap = Hermitian::symmetrized(mid.matrix() - &avg);
    let midpoint_ok = gap.min_eigenvalue()? >= -1e-12 * scale;
    Ok(VerificationReport::new("joint_concavity", "geometric-mean/joint-concavity", discrepancy, tol)
        .with("t", t)
        .with("step", step)
        .with("cross_norm", c.norm())
        .require("second_derivative_nsd", neg_psd)
        .require("midpoint_inequality", midpoint_ok))
}
