//! Strong subadditivity with an explicit remainder.
//!
//! A twirl `{U_k}` on the `A` factor (all sign flips times all permutations,
//! `J = 2^{d_A}·d_A!` unitaries) averages any matrix to `(Tr/N)·I`. With
//! `σ = ρ_AB ⊗ ρ_C` and partial averages `ρ̄_K = (1/K)Σ_{k≤K} U_kρU_k*`
//! (likewise `σ̄_K`), the chain `F_K = S(ρ̄_K | σ̄_K)` runs from
//! `F_1 = S(ρ | ρ_AB⊗ρ_C)` to `F_J = S(ρ_BC | ρ_B⊗ρ_C)`, and
//! `F_1 − F_J = I(A:C|B)`.
//!
//! Each step `K` is the mixing identity along the segment from `ρ̄_{K−1}` to
//! `U_KρU_K*` at `t = 1/K`:
//! `F_K = (1/K)F_1 + (1 − 1/K)F_{K−1} − (1/K)·I_K`, where
//! `I_K = ∫₀¹∫_{λ/K}^{λ} S''(σ) dσ dλ ≥ 0` and `S''` comes from the relative
//! entropy `Γ` limit. Unrolling gives `I(A:C|B) = (1/J) Σ_{K=2}^{J} I_K`.

use itertools::Itertools;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometric_mean::CrossMethod;
use crate::linalg::{entropy_bits, kron, partial_trace, Hermitian, Matrix, MatrixFile, PositiveDefinite};
use crate::quadrature::triangular_rule;
use crate::real::Real;
use crate::relative_entropy::{curvature_estimates, relent, SegmentInstance};

pub const SCHEMA: &str = "ssa-report/1";

/// Largest `d_A` for which the twirl family is enumerated.
pub const MAX_TWIRL_DIM: usize = 5;

/// Recorded in reports so the `F_K` chain can be reproduced.
pub const TWIRL_ORDERING: &str =
    "permutations lexicographic (outer), sign patterns binary with the first basis index as most significant bit (inner); U = P·diag(signs)";

#[derive(Clone, Debug)]
pub struct TripartiteState<T> {
    rho: PositiveDefinite<T>,
    dims: [usize; 3],
}

impl<T: Real> TripartiteState<T> {
    pub fn new(rho: PositiveDefinite<T>, dims: [usize; 3]) -> Result<Self> {
        if dims.contains(&0) || dims.iter().product::<usize>() != rho.dim() {
            return invalid(format!("dims {dims:?} do not match a state of dimension {}", rho.dim()));
        }
        let tr = rho.hermitian().trace();
        if (tr - T::one()).abs() > T::lit(1e-12) {
            return invalid(format!("state trace is {tr}, expected 1"));
        }
        Ok(TripartiteState { rho, dims })
    }

    /// `ρ_A ⊗ ρ_B ⊗ ρ_C`.
    pub fn product(a: &PositiveDefinite<T>, b: &PositiveDefinite<T>, c: &PositiveDefinite<T>) -> Result<Self> {
        let m = kron(&kron(a.matrix(), b.matrix()), c.matrix());
        Self::new(PositiveDefinite::new(Hermitian::symmetrized(m))?, [a.dim(), b.dim(), c.dim()])
    }

    pub fn rho(&self) -> &PositiveDefinite<T> {
        &self.rho
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// Reduced state on the factors in `keep` (indices 0, 1, 2 for A, B, C).
    pub fn marginal(&self, keep: &[usize]) -> Result<PositiveDefinite<T>> {
        let traced: Vec<usize> = (0..3).filter(|f| !keep.contains(f)).collect();
        let m = partial_trace(self.rho.matrix(), &self.dims, &traced)?;
        PositiveDefinite::new(Hermitian::symmetrized(m))
    }

    /// `ρ_AB ⊗ ρ_C`.
    pub fn reference(&self) -> Result<PositiveDefinite<T>> {
        let m = kron(self.marginal(&[0, 1])?.matrix(), self.marginal(&[2])?.matrix());
        PositiveDefinite::new(Hermitian::symmetrized(m))
    }

    pub fn to_file(&self) -> MatrixFile {
        MatrixFile::from_matrix(&self.dims, self.rho.matrix())
    }

    pub fn from_file(file: &MatrixFile) -> Result<Self> {
        let dims: [usize; 3] = file
            .dims
            .as_slice()
            .try_into()
            .map_err(|_| Error::InvalidInput(format!("a tripartite state needs three dims, got {:?}", file.dims)))?;
        let m = file.to_matrix::<T>()?;
        let h = Hermitian::new(m)?;
        let rho = PositiveDefinite::new(h).map_err(|e| Error::InvalidInput(format!("state is not full rank: {e}")))?;
        Self::new(rho, dims)
    }
}

#[derive(Clone, Debug)]
pub struct TwirlFamily<T> {
    n: usize,
    unitaries: Vec<Matrix<T>>,
}

/// All `D_P·K_T` on dimension `n`: `N!` permutation matrices times `2^N` sign patterns.
pub fn twirl_family<T: Real>(n: usize) -> Result<TwirlFamily<T>> {
    if n == 0 || n > MAX_TWIRL_DIM {
        return invalid(format!("twirl dimension must be in 1..={MAX_TWIRL_DIM}, got {n}"));
    }
    let mut unitaries = Vec::new();
    for perm in (0..n).permutations(n) {
        for bits in 0..1usize << n {
            let sign = |i: usize| if (bits >> (n - 1 - i)) & 1 == 1 { -T::one() } else { T::one() };
            // (P·diag(s))[i][perm[i]] = s[perm[i]].
            unitaries.push(Matrix::from_fn(n, n, |i, j| {
                if perm[i] == j {
                    Complex::new(sign(j), T::zero())
                } else {
                    Complex::new(T::zero(), T::zero())
                }
            }));
        }
    }
    Ok(TwirlFamily { n, unitaries })
}

impl<T: Real> TwirlFamily<T> {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.unitaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unitaries.is_empty()
    }

    pub fn unitaries(&self) -> &[Matrix<T>] {
        &self.unitaries
    }

    /// `(1/J) Σ U_k M U_k*`.
    pub fn average(&self, m: &Matrix<T>) -> Result<Matrix<T>> {
        if m.rows() != self.n || !m.is_square() {
            return invalid("probe dimension does not match the twirl");
        }
        let mut acc = Matrix::zeros(self.n, self.n);
        for u in &self.unitaries {
            acc = acc + m.conjugate_by(u);
        }
        Ok(acc.scale(T::one() / T::count(self.len())))
    }

    /// `‖average(M) − (Tr M/N)·I‖_max / max(‖M‖_max, 1)`.
    pub fn averaging_defect(&self, m: &Matrix<T>) -> Result<T> {
        let avg = self.average(m)?;
        let target = Matrix::identity(self.n).scale_complex(m.trace() / T::count(self.n));
        Ok(avg.max_abs_diff(&target) / m.max_abs().max(T::one()))
    }

    /// Largest `‖U*U − I‖_max` over the family.
    pub fn unitarity_defect(&self) -> T {
        self.unitaries
            .iter()
            .map(|u| u.adjoint().matmul(u).max_abs_diff(&Matrix::identity(self.n)))
            .fold(T::zero(), T::max)
    }

    /// `U_k ⊗ I_rest`, acting on the first factor.
    fn lifted(&self, rest: usize) -> Vec<Matrix<T>> {
        let id = Matrix::identity(rest);
        self.unitaries.iter().map(|u| kron(u, &id)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entropies<T> {
    pub abc: T,
    pub ab: T,
    pub bc: T,
    pub b: T,
}

impl<T: Real> Entropies<T> {
    /// `S_AB + S_BC − S_ABC − S_B`.
    pub fn cmi(&self) -> T {
        self.ab + self.bc - self.abc - self.b
    }
}

pub fn entropies<T: Real>(state: &TripartiteState<T>) -> Result<Entropies<T>> {
    let s = |keep: &[usize]| -> Result<T> {
        let m = partial_trace(state.rho.matrix(), &state.dims, &(0..3).filter(|f| !keep.contains(f)).collect::<Vec<_>>())?;
        entropy_bits(&Hermitian::symmetrized(m))
    };
    Ok(Entropies { abc: entropy_bits(state.rho.hermitian())?, ab: s(&[0, 1])?, bc: s(&[1, 2])?, b: s(&[1])? })
}

/// Conditional mutual information `I(A:C|B)` in bits.
pub fn cmi<T: Real>(state: &TripartiteState<T>) -> Result<T> {
    Ok(entropies(state)?.cmi())
}

/// Partial averages of `ρ` and `ρ_AB⊗ρ_C` over the first `K` twirl unitaries, for every `K`.
struct TwirlChain<T> {
    rotated_rho: Vec<Matrix<T>>,
    rotated_ref: Vec<Matrix<T>>,
}

impl<T: Real> TwirlChain<T> {
    fn new(state: &TripartiteState<T>) -> Result<(Self, usize)> {
        let fam = twirl_family::<T>(state.dims[0])?;
        let rest = state.dims[1] * state.dims[2];
        let reference = state.reference()?;
        let mut rotated_rho = Vec::with_capacity(fam.len());
        let mut rotated_ref = Vec::with_capacity(fam.len());
        for u in fam.lifted(rest) {
            rotated_rho.push(state.rho.matrix().conjugate_by(&u));
            rotated_ref.push(reference.matrix().conjugate_by(&u));
        }
        let j = fam.len();
        Ok((TwirlChain { rotated_rho, rotated_ref }, j))
    }

    fn average(list: &[Matrix<T>], k: usize) -> Result<PositiveDefinite<T>> {
        let mut acc = list[0].clone();
        for m in &list[1..k] {
            acc = acc + m;
        }
        PositiveDefinite::new(Hermitian::symmetrized(acc.scale(T::one() / T::count(k))))
    }

    fn pd(m: &Matrix<T>) -> Result<PositiveDefinite<T>> {
        PositiveDefinite::new(Hermitian::symmetrized(m.clone()))
    }

    /// Segment for step `K`: from `(ρ̄_{K−1}, σ̄_{K−1})` (t = 0) to `(U_KρU_K*, U_KσU_K*)` (t = 1).
    fn segment(&self, k: usize) -> Result<SegmentInstance<T>> {
        SegmentInstance::new(
            Self::pd(&self.rotated_rho[k - 1])?,
            Self::average(&self.rotated_rho, k - 1)?,
            Self::pd(&self.rotated_ref[k - 1])?,
            Self::average(&self.rotated_ref, k - 1)?,
            T::one() / T::count(k),
        )
    }
}

/// `F_K = S(ρ̄_K | σ̄_K)` for `K ∈ [1, J]`.
pub fn f_chain<T: Real>(state: &TripartiteState<T>, k: usize) -> Result<T> {
    let (chain, j) = TwirlChain::new(state)?;
    if k == 0 || k > j {
        return invalid(format!("K must lie in [1, {j}], got {k}"));
    }
    relent(&TwirlChain::average(&chain.rotated_rho, k)?, &TwirlChain::average(&chain.rotated_ref, k)?)
}

/// `S(ρ_BC | ρ_B ⊗ ρ_C)`, the value `F_J` must reach.
pub fn endpoint_relent<T: Real>(state: &TripartiteState<T>) -> Result<T> {
    let bc = state.marginal(&[1, 2])?;
    let b_c = PositiveDefinite::new(Hermitian::symmetrized(kron(state.marginal(&[1])?.matrix(), state.marginal(&[2])?.matrix())))?;
    relent(&bc, &b_c)
}

/// Weight multiplying `I_K` for `2 ≤ K < J`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrefactorConvention {
    /// `1/J`, from unrolling the mixing-identity recursion.
    #[default]
    Unrolled,
    /// `1/(K+1)`.
    KPlusOne,
}

impl PrefactorConvention {
    pub fn weight(&self, k: usize, j: usize) -> f64 {
        match self {
            PrefactorConvention::Unrolled => 1.0 / j as f64,
            PrefactorConvention::KPlusOne => 1.0 / (k as f64 + 1.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsaConfig {
    /// Depth of the `Γ` sequence at each σ-node.
    pub k_max: u32,
    /// Nodes per σ-integral, split evenly between the two pieces of the triangular weight.
    pub nodes: usize,
    pub extrapolate: bool,
    pub cross: CrossMethod,
    pub prefactor: PrefactorConvention,
    /// The reconstruction tolerance is `tol_relative·max(cmi, 0.01)`.
    pub tol_relative: f64,
}

impl Default for SsaConfig {
    fn default() -> Self {
        SsaConfig {
            k_max: 10,
            nodes: 40,
            extrapolate: true,
            cross: CrossMethod::ClosedForm,
            prefactor: PrefactorConvention::Unrolled,
            tol_relative: 1e-3,
        }
    }
}

impl SsaConfig {
    /// Same settings with quadrature nodes and `k_max` doubled.
    pub fn doubled(&self) -> Self {
        SsaConfig { k_max: 2 * self.k_max, nodes: 2 * self.nodes, ..*self }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermDiagnostics {
    pub k: usize,
    /// `∫₀¹∫_{λ/K}^{λ} S''`, as used.
    pub integral: f64,
    /// The same integral from the last `Γ` level without extrapolation.
    pub integral_plain: f64,
    pub prefactor: f64,
    pub term: f64,
    pub min_integrand: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub schema: String,
    pub dims: [usize; 3],
    pub cmi_entropic: f64,
    pub boundary_term: f64,
    /// `Δ_2, …, Δ_{J−1}`.
    pub delta_terms: Vec<f64>,
    pub reconstruction_gap: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub endpoint_gap: f64,
    pub twirl_ordering: String,
    pub diagnostics: Vec<TermDiagnostics>,
    pub config: SsaConfig,
    pub seed: Option<u64>,
}

impl DecompositionReport {
    pub fn total(&self) -> f64 {
        self.boundary_term + self.delta_terms.iter().sum::<f64>()
    }

    pub fn relative_gap(&self) -> f64 {
        self.reconstruction_gap / self.cmi_entropic.abs().max(1e-12)
    }
}

/// Term slack below zero before a term counts as negative.
pub const NEGATIVITY_SLACK: f64 = 1e-8;

/// Computes every `Δ_K` and the boundary term. Fails if any term is negative
/// beyond [`NEGATIVITY_SLACK`]; the returned report carries `pass = false`
/// when only the reconstruction tolerance is missed.
pub fn delta_terms(state: &TripartiteState<f64>, config: &SsaConfig) -> Result<DecompositionReport> {
    if state.dims[0] > 3 || state.dims[1] * state.dims[2] > 9 {
        return invalid(format!("decomposition supports d_A ≤ 3 and d_B·d_C ≤ 9, got {:?}", state.dims));
    }
    if config.nodes < 2 || !config.nodes.is_multiple_of(2) {
        return invalid("nodes per σ-integral must be a positive even number");
    }
    if config.k_max < 2 {
        return invalid("k_max must be at least 2");
    }
    let (chain, j) = TwirlChain::new(state)?;
    let cmi_entropic = cmi(state)?;
    let endpoint_gap = (relent(
        &TwirlChain::average(&chain.rotated_rho, j)?,
        &TwirlChain::average(&chain.rotated_ref, j)?,
    )? - endpoint_relent(state)?)
        .abs();

    let mut diagnostics = Vec::with_capacity(j - 1);
    for k in 2..=j {
        let seg = chain.segment(k)?;
        let (xs, ws) = triangular_rule(1.0 / k as f64, config.nodes / 2)?;
        let (mut used, mut plain, mut min_integrand) = (0.0, 0.0, f64::INFINITY);
        for (&s, &w) in xs.iter().zip(&ws) {
            let est = curvature_estimates(&seg, s, config.k_max, config.cross)?;
            let g = if config.extrapolate { est.extrapolated } else { est.plain };
            used += w * g;
            plain += w * est.plain;
            min_integrand = min_integrand.min(g);
        }
        let prefactor = if k == j { 1.0 / j as f64 } else { config.prefactor.weight(k, j) };
        let term = prefactor * used;
        if term < -NEGATIVITY_SLACK {
            return Err(Error::NumericalFailure(format!("term K = {k} is negative: {term}")));
        }
        diagnostics.push(TermDiagnostics { k, integral: used, integral_plain: plain, prefactor, term, min_integrand });
    }
    let boundary_term = diagnostics.last().expect("J ≥ 2").term;
    let delta_terms: Vec<f64> = diagnostics[..diagnostics.len() - 1].iter().map(|d| d.term).collect();
    let total = boundary_term + delta_terms.iter().sum::<f64>();
    let reconstruction_gap = (cmi_entropic - total).abs();
    let tolerance = config.tol_relative * cmi_entropic.max(0.01);
    Ok(DecompositionReport {
        schema: SCHEMA.to_string(),
        dims: state.dims,
        cmi_entropic,
        boundary_term,
        delta_terms,
        reconstruction_gap,
        tolerance,
        pass: reconstruction_gap <= tolerance,
        endpoint_gap,
        twirl_ordering: TWIRL_ORDERING.to_string(),
        diagnostics,
        config: *config,
        seed: None,
    })
}

/// [`delta_terms`], turning a missed reconstruction tolerance into an error
/// that lists the per-term diagnostics.
pub fn decompose(state: &TripartiteState<f64>, config: &SsaConfig) -> Result<DecompositionReport> {
    let report = delta_terms(state, config)?;
    if !report.pass {
        let detail = serde_json::to_string(&report.diagnostics).unwrap_or_default();
        return Err(Error::Verification(format!(
            "reconstruction gap {:.3e} exceeds {:.3e}; terms: {detail}",
            report.reconstruction_gap, report.tolerance
        )));
    }
    Ok(report)
}
