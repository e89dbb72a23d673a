//! Fixed-order Gauss rules for the three integral shapes used by the crate:
//! half-line integrals with an `s^{-1/2}` singularity, Löwner-type integrals
//! `∫ t^q g(t) dt`, and a triangular double integral collapsed to one dimension.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{tridiagonal_eig, Hermitian, Matrix};
use crate::real::Real;

/// Default node count for half-line rules.
pub const DEFAULT_HALF_LINE_NODES: usize = 200;
/// Default node count per subinterval of the unit interval.
pub const DEFAULT_UNIT_NODES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    /// `Σ w f(s) ≈ ∫₀^∞ s^{-1/2} f(s) ds`.
    HalfLineSqrtSingularity,
    /// `Σ w g(t) ≈ (sin πq/π) ∫₀^∞ t^q g(t) dt`.
    HalfLinePower,
    /// `Σ w f(x) ≈ ∫₀¹ f(x) dx`.
    UnitInterval,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule<T> {
    pub kind: RuleKind,
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

/// Gauss-Legendre nodes and weights on [-1, 1], ascending.
pub fn gauss_legendre<T: Real>(n: usize) -> Result<(Vec<T>, Vec<T>)> {
    if n == 0 {
        return invalid("quadrature needs at least one node");
    }
    let one = T::one();
    let two = T::lit(2.0);
    let mut x = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (T::PI() * (T::count(i) + T::lit(0.75)) / (T::count(n) + T::lit(0.5))).cos();
        let mut dp = one;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z = z - dz;
            if dz.abs() <= T::epsilon() * T::lit(4.0) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d.is_finite() {
            dp = d;
        }
        let wi = two / ((one - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[m - 1] = T::zero();
    }
    Ok((x, w))
}

fn legendre_with_derivative<T: Real>(n: usize, z: T) -> (T, T) {
    let one = T::one();
    let (mut p0, mut p1) = (one, z);
    for k in 2..=n {
        let kf = T::count(k);
        let p2 = ((T::lit(2.0) * kf - one) * z * p1 - (kf - one) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (one, T::zero());
    }
    let nf = T::count(n);
    (p1, nf * (z * p1 - p0) / (z * z - one))
}

/// Gauss rule on (0, 1) for the weight `u^{q-1}(1-u)^{-q}`, normalised to unit
/// total mass. Built with Golub-Welsch from the Jacobi recurrence with
/// `α = −q`, `β = q − 1` (so `α + β = −1`).
fn gauss_jacobi_loewner<T: Real>(n: usize, q: T) -> Result<(Vec<T>, Vec<T>)> {
    let (alpha, beta) = (-q, q - T::one());
    let s = alpha + beta;
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    for k in 0..n {
        let kf = T::count(k);
        let a = if k == 0 {
            (beta - alpha) / (s + two)
        } else {
            (beta * beta - alpha * alpha) / ((two * kf + s) * (two * kf + s + two))
        };
        diag.push(a);
        if k + 1 < n {
            let j = T::count(k + 1);
            let b2 = if k == 0 {
                // (j+s)/(2j+s-1) = 1 identically at j = 1
                four * (j + alpha) * (j + beta) / ((two * j + s).powi(2) * (two * j + s + T::one()))
            } else {
                four * j * (j + alpha) * (j + beta) * (j + s)
                    / ((two * j + s).powi(2) * (two * j + s + T::one()) * (two * j + s - T::one()))
            };
            off.push(b2.sqrt());
        }
    }
    let (x, z0) = tridiagonal_eig(&diag, &off)?;
    let nodes = x.iter().map(|&xi| (xi + T::one()) / two).collect();
    let weights = z0.iter().map(|&z| z * z).collect();
    Ok((nodes, weights))
}

impl<T: Real> QuadratureRule<T> {
    /// Rule for `∫₀^∞ s^{-1/2} f(s) ds`: substitute `s = tan²θ`, which turns
    /// `s^{-1/2} ds` into `2 sec²θ dθ`, then Gauss-Legendre on (0, π/2).
    /// Nodes are reported in `s`; weights absorb the Jacobian.
    pub fn half_line_sqrt(n: usize) -> Result<Self> {
        let (x, w) = gauss_legendre::<T>(n)?;
        let quarter_pi = T::FRAC_PI_4();
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for (xi, wi) in x.iter().zip(&w) {
            let theta = (*xi + T::one()) * quarter_pi;
            let s = theta.tan().powi(2);
            nodes.push(s);
            weights.push(*wi * quarter_pi * T::lit(2.0) * (T::one() + s));
        }
        Ok(QuadratureRule { kind: RuleKind::HalfLineSqrtSingularity, nodes, weights })
    }

    /// Rule for `(sin πq/π) ∫₀^∞ t^q g(t) dt` with `g(t) = O(1/t)` at zero and
    /// `O(t^{-2})` at infinity. Substitutes `t = c·u/(1−u)`, which leaves the
    /// smooth factor `c^{q+1} u g(t)/(1−u)²` against the weight
    /// `u^{q−1}(1−u)^{−q}`; that weight is handled exactly by Gauss-Jacobi, so
    /// the endpoint singularities cost nothing. `scale` should sit inside the
    /// spectrum of the resolvents involved (the geometric mean of its extremes).
    pub fn loewner(q: T, n: usize, scale: T) -> Result<Self> {
        if !(q > T::zero() && q < T::one()) {
            return invalid(format!("Löwner quadrature needs q in (0, 1), got {q}"));
        }
        if !(scale > T::zero()) || !scale.is_finite() {
            return invalid("Löwner quadrature scale must be positive");
        }
        if n == 0 {
            return invalid("quadrature needs at least one node");
        }
        let (u, z) = gauss_jacobi_loewner(n, q)?;
        let cq1 = scale.powf(q + T::one());
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for (ui, zi) in u.iter().zip(&z) {
            let one_minus = T::one() - *ui;
            nodes.push(scale * *ui / one_minus);
            weights.push(*zi * cq1 * *ui / (one_minus * one_minus));
        }
        Ok(QuadratureRule { kind: RuleKind::HalfLinePower, nodes, weights })
    }

    /// Gauss-Legendre on (a, b).
    pub fn interval(n: usize, a: T, b: T) -> Result<Self> {
        let (x, w) = gauss_legendre::<T>(n)?;
        let half = (b - a) / T::lit(2.0);
        let mid = (a + b) / T::lit(2.0);
        Ok(QuadratureRule {
            kind: RuleKind::UnitInterval,
            nodes: x.iter().map(|&xi| mid + half * xi).collect(),
            weights: w.iter().map(|&wi| wi * half).collect(),
        })
    }

    pub fn unit_interval(n: usize) -> Result<Self> {
        Self::interval(n, T::zero(), T::one())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate_scalar(&self, mut f: impl FnMut(T) -> T) -> T {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Weighted sum of matrix samples in node order; fails on a non-finite sample.
    pub fn integrate_matrix(&self, mut f: impl FnMut(T) -> Result<Matrix<T>>) -> Result<Matrix<T>> {
        let mut acc: Option<Matrix<T>> = None;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            let sample = f(x)?;
            if !sample.is_finite() {
                return Err(Error::NumericalFailure(format!("non-finite integrand at node {x}")));
            }
            let term = sample.scale(w);
            acc = Some(match acc {
                None => term,
                Some(a) => a + term,
            });
        }
        acc.ok_or_else(|| Error::Internal("empty quadrature rule".into()))
    }
}

/// `∫₀^∞ s^{-1/2} f(s) ds` where `f` is the smooth, decaying factor.
pub fn integrate_half_line_sqrt<T: Real>(
    rule: &QuadratureRule<T>,
    f: impl FnMut(T) -> Result<Matrix<T>>,
) -> Result<Hermitian<T>> {
    if rule.kind != RuleKind::HalfLineSqrtSingularity {
        return invalid("rule is not a half-line sqrt rule");
    }
    Ok(Hermitian::symmetrized(rule.integrate_matrix(f)?))
}

/// `(sin πq/π) ∫₀^∞ t^q g(t) dt` with a rule from [`QuadratureRule::loewner`].
pub fn integrate_loewner<T: Real>(
    rule: &QuadratureRule<T>,
    g: impl FnMut(T) -> Result<Matrix<T>>,
) -> Result<Hermitian<T>> {
    if rule.kind != RuleKind::HalfLinePower {
        return invalid("rule is not a Löwner rule");
    }
    Ok(Hermitian::symmetrized(rule.integrate_matrix(g)?))
}

/// Nodes and weights for `∫₀¹ g(σ) w_t(σ) dσ` with `w_t(σ) = σ(1−t)/t` on
/// (0, t] and `1 − σ` on (t, 1), which equals `∫₀¹ ∫_{tλ}^{λ} g(σ) dσ dλ`.
/// Each piece gets its own `nodes`-point Gauss-Legendre rule so the kink at
/// `t` is harmless.
pub fn triangular_rule<T: Real>(t: T, nodes: usize) -> Result<(Vec<T>, Vec<T>)> {
    if !(t > T::zero() && t < T::one()) {
        return invalid(format!("triangular weight needs t in (0, 1), got {t}"));
    }
    let left = QuadratureRule::interval(nodes, T::zero(), t)?;
    let right = QuadratureRule::interval(nodes, t, T::one())?;
    let mut xs = Vec::with_capacity(2 * nodes);
    let mut ws = Vec::with_capacity(2 * nodes);
    for (&s, &w) in left.nodes.iter().zip(&left.weights) {
        xs.push(s);
        ws.push(w * s * (T::one() - t) / t);
    }
    for (&s, &w) in right.nodes.iter().zip(&right.weights) {
        xs.push(s);
        ws.push(w * (T::one() - s));
    }
    Ok((xs, ws))
}

/// `∫₀¹ ∫_{tλ}^{λ} g(σ) dσ dλ` via [`triangular_rule`].
pub fn triangular_weight<T: Real>(t: T, nodes: usize, mut g: impl FnMut(T) -> Result<T>) -> Result<T> {
    let (xs, ws) = triangular_rule(t, nodes)?;
    let mut acc = T::zero();
    for (&s, &w) in xs.iter().zip(&ws) {
        acc = acc + w * g(s)?;
    }
    Ok(acc)
}
