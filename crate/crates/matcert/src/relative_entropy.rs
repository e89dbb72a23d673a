//! Joint convexity of `S(A|B) = Tr[A log₂A] − Tr[A log₂B]` through the `Γ_k` construction.
//!
//! Along a segment `A(t) = tA₁ + (1−t)A₂`, `B(t) = tB₁ + (1−t)B₂`, put
//! `Ψ = A(t₀)`, `Φ = B(t₀)ᵀ`, `V = A₁ − A₂`, `W = (B₁ − B₂)ᵀ` (the transposes
//! come from the vectorisation pairing). With `δ_l = 2^{-(l−1)}`,
//!
//! ```text
//! Source_l = Cross_{Ψ^{1−δ_l}⊗Φ^{δ_l}, Ψ⊗I}(V_{1−δ_l,Ψ}⊗Φ^{δ_l} + Ψ^{1−δ_l}⊗W_{δ_l,Φ}, V⊗I)
//! Γ_k      = Source_k + D_{−2^{-k}}(Source_{k−1}) + … + D_{−2^{-k}}(⋯(D_{−1/4}(Source_1)))
//! ```
//!
//! and `2^kΓ_k → Γ(t₀)` at rate `2^{-k}`, with `2(log₂e)⟨V_I, Γ V_I⟩ = S''(t₀)`.
//! The curvature is therefore a nonnegative quadratic form, which gives joint
//! convexity.
//!
//! `Ψ⊗Φ` diagonalises every operator involved, so the sequence is built in
//! that product eigenbasis with the commuting form of `Cross`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometric_mean::{cross_commuting, CrossMethod};
use crate::linalg::{expectation, identity_expectation, kron, operator_norm, pairing, vec_embed, Hermitian, Matrix, PositiveDefinite};
use crate::power_perturbation::first_order_in_eigenbasis;
use crate::quadrature::{triangular_weight, DEFAULT_UNIT_NODES};
use crate::real::Real;
use crate::report::VerificationReport;

/// `Tr[A log₂A] − Tr[A log₂B]`.
pub fn relent<T: Real>(a: &PositiveDefinite<T>, b: &PositiveDefinite<T>) -> Result<T> {
    if a.dim() != b.dim() {
        return invalid("relative entropy operands differ in dimension");
    }
    let diff = a.log2().sub(&b.log2());
    Ok(a.matrix().matmul(diff.matrix()).trace().re)
}

/// `A log₂A ⊗ I − A ⊗ (log₂B)ᵀ`, whose `V_I` expectation is `S(A|B)`.
pub fn f_operator<T: Real>(a: &PositiveDefinite<T>, b: &PositiveDefinite<T>) -> Result<Hermitian<T>> {
    if a.dim() != b.dim() {
        return invalid("relative entropy operands differ in dimension");
    }
    let n = a.dim();
    let alog = a.matrix().matmul(a.log2().matrix());
    let f = Hermitian::symmetrized(kron(&alog, &Matrix::identity(n)) - pairing(a.matrix(), b.log2().matrix()));
    let paired = identity_expectation(f.matrix(), n).re;
    let direct = relent(a, b)?;
    if (paired - direct).abs() > T::lit(1e-10) * (T::one() + direct.abs()) {
        return Err(Error::Internal(format!("pairing gives {paired}, direct evaluation {direct}")));
    }
    Ok(f)
}

/// `F_k = A^{1−δ_k} ⊗ (B^{δ_k})ᵀ` with `δ_k = 2^{-k}`, taken literally, so `F₀ = I ⊗ Bᵀ`.
/// The second factor is paired like in [`f_operator`].
pub fn f_k_family<T: Real>(a: &PositiveDefinite<T>, b: &PositiveDefinite<T>, k: u32) -> Result<PositiveDefinite<T>> {
    if a.dim() != b.dim() {
        return invalid("operands differ in dimension");
    }
    let delta = T::lit(0.5f64.powi(k as i32));
    PositiveDefinite::new(Hermitian::symmetrized(pairing(
        a.power(T::one() - delta).matrix(),
        b.power(delta).matrix(),
    )))
}

#[derive(Clone, Debug)]
pub struct SegmentInstance<T> {
    pub a1: PositiveDefinite<T>,
    pub a2: PositiveDefinite<T>,
    pub b1: PositiveDefinite<T>,
    pub b2: PositiveDefinite<T>,
    pub t0: T,
}

impl<T: Real> SegmentInstance<T> {
    /// Interpolants of PD endpoints stay PD, so only the endpoints are checked.
    pub fn new(a1: PositiveDefinite<T>, a2: PositiveDefinite<T>, b1: PositiveDefinite<T>, b2: PositiveDefinite<T>, t0: T) -> Result<Self> {
        let n = a1.dim();
        if a2.dim() != n || b1.dim() != n || b2.dim() != n {
            return invalid("segment endpoints differ in dimension");
        }
        if !(t0 >= T::zero() && t0 <= T::one()) {
            return invalid(format!("t0 = {t0} outside [0, 1]"));
        }
        Ok(SegmentInstance { a1, a2, b1, b2, t0 })
    }

    pub fn dim(&self) -> usize {
        self.a1.dim()
    }

    pub fn at(&self, t: T) -> Self {
        SegmentInstance { t0: t, ..self.clone() }
    }

    pub fn endpoints(&self, t: T) -> Result<(PositiveDefinite<T>, PositiveDefinite<T>)> {
        Ok((self.a1.lerp(&self.a2, t)?, self.b1.lerp(&self.b2, t)?))
    }

    /// `t ↦ S(A(t) | B(t))`.
    pub fn relent_at(&self, t: T) -> Result<T> {
        let (a, b) = self.endpoints(t)?;
        relent(&a, &b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelentConfig {
    /// `None` picks 14 for dimension ≤ 2 and 10 otherwise.
    pub k_max: Option<u32>,
    pub cross: CrossMethod,
    /// Use `2·2^kΓ_k − 2^{k−1}Γ_{k−1}` instead of `2^kΓ_k` as the limit.
    pub extrapolate: bool,
    /// Nodes per subinterval of the triangular double integral.
    pub unit_nodes: usize,
    pub fd_step: f64,
}

impl Default for RelentConfig {
    fn default() -> Self {
        RelentConfig {
            k_max: None,
            cross: CrossMethod::ClosedForm,
            extrapolate: true,
            unit_nodes: DEFAULT_UNIT_NODES,
            fd_step: 1e-3,
        }
    }
}

impl RelentConfig {
    pub fn k_max_for(&self, dim: usize) -> u32 {
        self.k_max.unwrap_or(if dim <= 2 { 14 } else { 10 })
    }
}

/// `Ψ`, `Φ` spectra and `V`, `W` in their eigenbases at one point of a segment.
struct ProductBasis<T: Real> {
    psi: Vec<T>,
    phi: Vec<T>,
    v_hat: Matrix<T>,
    w_hat: Matrix<T>,
    basis: Matrix<T>,
}

impl<T: Real> ProductBasis<T> {
    fn new(seg: &SegmentInstance<T>) -> Result<Self> {
        let (psi, b) = seg.endpoints(seg.t0)?;
        let phi = b.transpose();
        let v = seg.a1.hermitian().sub(seg.a2.hermitian());
        let w = seg.b1.hermitian().sub(seg.b2.hermitian()).transpose();
        let (sp, sf) = (psi.spectral(), phi.spectral());
        Ok(ProductBasis {
            psi: sp.values.clone(),
            phi: sf.values.clone(),
            v_hat: v.matrix().in_basis(&sp.vectors),
            w_hat: w.matrix().in_basis(&sf.vectors),
            basis: kron(&sp.vectors, &sf.vectors),
        })
    }

    fn outer(&self, f: impl Fn(T, T) -> T) -> Vec<T> {
        self.psi.iter().flat_map(|&a| self.phi.iter().map(move |&b| (a, b))).map(|(a, b)| f(a, b)).collect()
    }

    fn source(&self, l: u32, method: CrossMethod) -> Result<Matrix<T>> {
        let delta = T::lit(0.5f64.powi(l as i32 - 1));
        let qe = T::one() - delta;
        let a = self.outer(|x, y| x.powf(qe) * y.powf(delta));
        let b = self.outer(|x, _| x);
        let x = kron(
            &first_order_in_eigenbasis(&self.psi, &self.v_hat, qe),
            &Matrix::from_real_diag(&self.phi.iter().map(|y| y.powf(delta)).collect::<Vec<_>>()),
        ) + kron(
            &Matrix::from_real_diag(&self.psi.iter().map(|x| x.powf(qe)).collect::<Vec<_>>()),
            &first_order_in_eigenbasis(&self.phi, &self.w_hat, delta),
        );
        let z = kron(&self.v_hat, &Matrix::identity(self.phi.len()));
        cross_commuting(&a, &b, &x, &z, method)
    }

    /// `D_δ` with `K_δ = Ψ^δ ⊗ Φ^{−δ}`.
    fn d_delta(&self, delta: T, f: &Matrix<T>) -> Matrix<T> {
        let kappa = self.outer(|x, y| x.powf(delta) * y.powf(-delta));
        f.weighted(|i, j| T::one() / (kappa[i] + kappa[j]))
    }

    /// `2^lΓ_l` for `l = 1..=k_max`, in the product basis.
    fn rescaled_sequence(&self, k_max: u32, method: CrossMethod) -> Result<Vec<Matrix<T>>> {
        let mut out = Vec::with_capacity(k_max as usize);
        let mut gamma: Option<Matrix<T>> = None;
        for l in 1..=k_max {
            let s = self.source(l, method)?;
            let g = match gamma {
                None => s,
                Some(prev) => s + self.d_delta(-T::lit(0.5f64.powi(l as i32)), &prev),
            };
            out.push(g.scale(T::lit(2f64.powi(l as i32))));
            gamma = Some(g);
        }
        Ok(out)
    }

    fn v_identity_hat(&self) -> Vec<Complex<T>> {
        let n = self.psi.len();
        let vi = vec_embed(&Matrix::<T>::identity(n));
        let ua = self.basis.adjoint();
        ua.matvec(&vi)
    }
}

/// `Γ_k` at `seg.t0`, in the standard basis.
pub fn gamma_k<T: Real>(seg: &SegmentInstance<T>, k: u32, method: CrossMethod) -> Result<Hermitian<T>> {
    if k == 0 {
        return invalid("Γ_k needs k ≥ 1");
    }
    let pb = ProductBasis::new(seg)?;
    let seq = pb.rescaled_sequence(k, method)?;
    let last = seq.last().expect("k ≥ 1").scale(T::lit(0.5f64.powi(k as i32)));
    Ok(Hermitian::symmetrized(last.conjugate_by(&pb.basis)))
}

/// `Source_l` at `seg.t0`, in the standard basis.
pub fn source<T: Real>(seg: &SegmentInstance<T>, l: u32, method: CrossMethod) -> Result<Hermitian<T>> {
    if l == 0 {
        return invalid("Source_l needs l ≥ 1");
    }
    let pb = ProductBasis::new(seg)?;
    Ok(Hermitian::symmetrized(pb.source(l, method)?.conjugate_by(&pb.basis)))
}

#[derive(Clone, Debug)]
pub struct GammaSequence<T> {
    /// `2^kΓ_k` for `k = 1..=k_max`.
    pub rescaled: Vec<Hermitian<T>>,
    /// `‖2^kΓ_k − 2^{k−1}Γ_{k−1}‖` for `k = 2..=k_max`.
    pub increments: Vec<T>,
    /// `2·2^{k_max}Γ_{k_max} − 2^{k_max−1}Γ_{k_max−1}`.
    pub extrapolated: Hermitian<T>,
}

impl<T: Real> GammaSequence<T> {
    pub fn limit(&self) -> &Hermitian<T> {
        self.rescaled.last().expect("non-empty sequence")
    }

    /// Successive increment ratios.
    pub fn ratios(&self) -> Vec<T> {
        self.increments.windows(2).map(|w| if w[0] == T::zero() { T::zero() } else { w[1] / w[0] }).collect()
    }

    /// Least-squares slope of `log₂(increment)` against `k` over `k ≥ from`.
    pub fn decay_slope(&self, from: u32) -> Option<T> {
        let pts: Vec<(T, T)> = self
            .increments
            .iter()
            .enumerate()
            .map(|(i, &v)| (T::count(i + 2), v))
            .filter(|&(k, v)| k >= T::lit(from as f64) && v > T::zero())
            .map(|(k, v)| (k, v.log2()))
            .collect();
        fit_slope(&pts)
    }
}

pub(crate) fn fit_slope<T: Real>(pts: &[(T, T)]) -> Option<T> {
    if pts.len() < 2 {
        return None;
    }
    let n = T::count(pts.len());
    let mx = pts.iter().map(|p| p.0).sum::<T>() / n;
    let my = pts.iter().map(|p| p.1).sum::<T>() / n;
    let sxy: T = pts.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
    let sxx: T = pts.iter().map(|&(x, _)| (x - mx) * (x - mx)).sum();
    Some(sxy / sxx)
}

/// The rescaled sequence up to `k_max` with its increment table. Fails if the
/// increments stop decreasing while still above roundoff.
pub fn gamma_limit<T: Real>(seg: &SegmentInstance<T>, k_max: u32, method: CrossMethod) -> Result<GammaSequence<T>> {
    if k_max < 3 {
        return invalid("gamma_limit needs k_max ≥ 3");
    }
    let pb = ProductBasis::new(seg)?;
    let seq = pb.rescaled_sequence(k_max, method)?;
    let mut increments = Vec::with_capacity(seq.len() - 1);
    for w in seq.windows(2) {
        increments.push(operator_norm(&(&w[1] - &w[0]))?);
    }
    let size = T::one() + operator_norm(seq.last().expect("k_max ≥ 3"))?;
    let floor = T::lit(1e-12) * size;
    // The first increment may exceed half the previous one; from k = 3 on they must shrink.
    for (i, w) in increments.windows(2).enumerate().skip(1) {
        if w[0] > floor && w[1] >= w[0] {
            return Err(Error::NumericalFailure(format!(
                "Γ increments stopped decreasing at k = {}: {} then {}",
                i + 3,
                w[0],
                w[1]
            )));
        }
    }
    let n = seq.len();
    let extrapolated = seq[n - 1].scale(T::lit(2.0)) - &seq[n - 2];
    let to_std = |m: &Matrix<T>| Hermitian::symmetrized(m.conjugate_by(&pb.basis));
    Ok(GammaSequence {
        rescaled: seq.iter().map(to_std).collect(),
        increments,
        extrapolated: to_std(&extrapolated),
    })
}

/// Curvature from the last level and from the extrapolated limit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvatureEstimate<T> {
    pub plain: T,
    pub extrapolated: T,
}

/// `2(log₂e)⟨V_I, 2^kΓ_k V_I⟩` at `k = k_max` and its Richardson extrapolation.
pub fn curvature_estimates<T: Real>(seg: &SegmentInstance<T>, t: T, k_max: u32, method: CrossMethod) -> Result<CurvatureEstimate<T>> {
    if k_max < 2 {
        return invalid("k_max must be at least 2");
    }
    let pb = ProductBasis::new(&seg.at(t))?;
    let seq = pb.rescaled_sequence(k_max, method)?;
    let v = pb.v_identity_hat();
    let factor = T::lit(2.0) * T::LOG2_E();
    let pair = |m: &Matrix<T>| factor * expectation(&v, m).re;
    let last = pair(&seq[seq.len() - 1]);
    let prev = pair(&seq[seq.len() - 2]);
    Ok(CurvatureEstimate { plain: last, extrapolated: T::lit(2.0) * last - prev })
}

/// `2(log₂e)⟨V_I, Γ(t) V_I⟩`, the second derivative of `t ↦ S(A(t)|B(t))`.
pub fn relent_curvature<T: Real>(seg: &SegmentInstance<T>, t: T, config: &RelentConfig) -> Result<T> {
    let est = curvature_estimates(seg, t, config.k_max_for(seg.dim()), config.cross)?;
    Ok(if config.extrapolate { est.extrapolated } else { est.plain })
}

/// Central second difference of `t ↦ S(A(t)|B(t))`, one-sided near the ends.
pub fn relent_curvature_fd(seg: &SegmentInstance<f64>, t: f64, h: f64) -> Result<f64> {
    let h = h.min(t.max(1.0 - t) / 2.0);
    let c = if t - h < 0.0 {
        h
    } else if t + h > 1.0 {
        1.0 - h
    } else {
        t
    };
    Ok((seg.relent_at(c + h)? - 2.0 * seg.relent_at(c)? + seg.relent_at(c - h)?) / (h * h))
}

/// Curvatures below this are compared in absolute terms against the finite difference.
pub const FD_FLOOR: f64 = 1e-4;

/// Checks, at `seg.t0`: the curvature matches a finite difference on a
/// σ-grid, the mixing identity
/// `S(t) = t·S(1) + (1−t)·S(0) − t·∫₀¹∫_{tλ}^{λ} S''(σ) dσ dλ`
/// holds, and the integral term is nonnegative.
pub fn convexity_certificate(seg: &SegmentInstance<f64>, config: &RelentConfig, tol: f64) -> Result<VerificationReport> {
    let t = seg.t0;
    if !(t > 0.0 && t < 1.0) {
        return invalid("certificate needs t0 in (0, 1)");
    }
    let mut worst_fd = 0.0f64;
    for i in 1..10 {
        let s = i as f64 / 10.0;
        let g = relent_curvature(seg, s, config)?;
        let fd = relent_curvature_fd(seg, s, config.fd_step)?;
        // Relative to the FD value; below the floor the comparison is absolute,
        // since the difference quotient carries roundoff of order 1e-16/h².
        worst_fd = worst_fd.max((g - fd).abs() / fd.abs().max(FD_FLOOR));
    }
    let integral = triangular_weight(t, config.unit_nodes, |s| relent_curvature(seg, s, config))?;
    let (s0, s1, st) = (seg.relent_at(0.0)?, seg.relent_at(1.0)?, seg.relent_at(t)?);
    let mixing = (st - (t * s1 + (1.0 - t) * s0 - t * integral)).abs() / (1.0 + st.abs());
    Ok(VerificationReport::new("convexity_certificate", "relative-entropy/joint-convexity", worst_fd, tol)
        .with("t", t)
        .with("k_max", config.k_max_for(seg.dim()))
        .with("extrapolate", config.extrapolate)
        .with("relent_t", st)
        .with("integral_term", integral)
        .with("mixing_gap", mixing)
        .require("mixing_identity", mixing <= tol)
        .require("integral_nonnegative", integral >= -1e-10))
}
