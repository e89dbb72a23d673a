//! Dyadic construction of the second derivative of
//! `G_{q,r}(ε) = (Ψ + εV)^q ⊗ (Φ + εW)^r` for `q, r ≥ 0`, `q + r = p ≤ 1`.
//!
//! Write `q = p·x` with `x = l/2^k` dyadic. Then `G'' = −2·Q_x` with
//!
//! ```text
//! Q_x = D_{+δ}(Q_{x + 2^{-k}}) + D_{−δ}(Q_{x − 2^{-k}}) + Source_x,   δ = p·2^{-k},
//! Q_1 = Source_1 = K_{p,Ψ,V} ⊗ I,   Q_0 = Source_0 = I ⊗ K_{p,Φ,W},
//! ```
//!
//! where `D_δ(F)` solves `K_δ D + D K_δ = F` for `K_δ = Ψ^δ ⊗ Φ^{−δ}` and
//! `Source_x` is a geometric-mean `Cross` term. Every piece is PSD, which
//! certifies `G'' ⪯ 0` and hence Lieb's concavity theorem.
//!
//! All matrices involved are diagonal or dense in the product eigenbasis of
//! `Ψ ⊗ Φ`, so the engine works there and converts back at the end.

use std::collections::BTreeMap;

use num_rational::Rational64;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometric_mean::{cross, cross_commuting, CrossMethod, DirectionPair, MeanPair};
use crate::linalg::{expectation, kron, operator_norm, pairing, vec_embed, Hermitian, Matrix, PositiveDefinite};
use crate::power_perturbation::{
    first_order, first_order_in_eigenbasis, second_order, DEFAULT_LOEWNER_NODES,
};
use crate::quadrature::{triangular_weight, DEFAULT_UNIT_NODES};
use crate::real::Real;
use crate::report::VerificationReport;

/// Reduced dyadic fraction `numerator / 2^level` in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicExponent {
    numerator: u64,
    level: u32,
}

impl DyadicExponent {
    pub const ZERO: DyadicExponent = DyadicExponent { numerator: 0, level: 0 };
    pub const ONE: DyadicExponent = DyadicExponent { numerator: 1, level: 0 };

    /// Accepts only reduced forms: odd numerator at level ≥ 1, or 0/1 at level 0.
    pub fn new(numerator: u64, level: u32) -> Result<Self> {
        if level > 60 {
            return invalid("dyadic level above 60");
        }
        if level == 0 {
            if numerator > 1 {
                return invalid("dyadic exponent above one");
            }
        } else if numerator.is_multiple_of(2) || numerator >= 1u64 << level {
            return invalid(format!("{numerator}/2^{level} is not a reduced dyadic in (0, 1)"));
        }
        Ok(DyadicExponent { numerator, level })
    }

    /// Reduces `numerator / 2^level`.
    pub fn reduced(mut numerator: u64, mut level: u32) -> Result<Self> {
        while level > 0 && numerator.is_multiple_of(2) {
            numerator /= 2;
            level -= 1;
        }
        Self::new(numerator, level)
    }

    pub fn from_ratio(r: Rational64) -> Result<Self> {
        let (n, d) = (*r.numer(), *r.denom());
        if n < 0 || d <= 0 || (d as u64).count_ones() != 1 {
            return invalid(format!("{r} is not a dyadic fraction in [0, 1]"));
        }
        Self::reduced(n as u64, (d as u64).trailing_zeros())
    }

    pub fn numerator(&self) -> u64 {
        self.numerator
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn ratio(&self) -> Rational64 {
        Rational64::new(self.numerator as i64, 1i64 << self.level)
    }

    pub fn value<T: Real>(&self) -> T {
        T::lit(self.numerator as f64 / (1u64 << self.level) as f64)
    }

    /// Truncated binary expansion of `x ∈ [0, 1]` to `level` bits.
    pub fn truncate<T: Real>(x: T, level: u32) -> Result<Self> {
        if !(x >= T::zero() && x <= T::one()) {
            return invalid(format!("{x} outside [0, 1]"));
        }
        let scaled = (x * T::lit((1u64 << level) as f64)).floor().to_u64().unwrap_or(0);
        Self::reduced(scaled.min(1u64 << level), level)
    }

    fn neighbours(&self) -> (DyadicExponent, DyadicExponent) {
        let up = Self::reduced(self.numerator + 1, self.level).expect("interior dyadic");
        let down = Self::reduced(self.numerator - 1, self.level).expect("interior dyadic");
        (up, down)
    }
}

impl std::str::FromStr for DyadicExponent {
    type Err = Error;

    /// Parses `l/2^k` written as a fraction such as `3/8`, or `0` / `1`.
    fn from_str(s: &str) -> Result<Self> {
        let r: Rational64 = s
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("cannot parse {s:?} as a fraction")))?;
        Self::from_ratio(r)
    }
}

impl std::fmt::Display for DyadicExponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.numerator, 1u64 << self.level)
    }
}

/// How the magnitude of the `D` subscript depends on the level of the node
/// being expanded. The level-`k` rule is the one certified by finite
/// differences; the other is kept for comparison.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaConvention {
    /// `δ = p·2^{-k}` when expanding a node of level `k`.
    #[default]
    LevelK,
    /// `δ = p·2^{-(k-1)}`.
    LevelKMinus1,
}

impl DeltaConvention {
    pub fn magnitude<T: Real>(&self, p: T, level: u32) -> T {
        let exp = match self {
            DeltaConvention::LevelK => level as i32,
            DeltaConvention::LevelKMinus1 => level as i32 - 1,
        };
        p * T::lit(0.5f64.powi(exp))
    }
}

/// One signed step `(level m, sign c)` of a path; the step changes the exponent by `c·2^{-m}`.
pub type PathStep = (u32, i8);

/// Steps ordered by strictly increasing level; the step at the smallest level
/// is applied innermost (closest to the source).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SignedPath {
    pub steps: Vec<PathStep>,
}

impl SignedPath {
    pub fn displacement(&self) -> Rational64 {
        self.steps
            .iter()
            .fold(Rational64::zero(), |acc, &(m, c)| acc + Rational64::new(c as i64, 1i64 << m))
    }
}

/// All signed paths `k₀ < m₁ < … < m_l ≤ k` with `Σ c_j 2^{-m_j} = from − to`,
/// found by exhaustive search with exact rational sums.
pub fn enumerate_paths(from: DyadicExponent, to: DyadicExponent) -> Vec<SignedPath> {
    let target = from.ratio() - to.ratio();
    let lo = from.level;
    let hi = to.level.max(from.level);
    let mut out = Vec::new();
    let mut current = Vec::new();
    search_paths(lo + 1, hi, target, &mut current, &mut out);
    out.sort();
    out
}

fn search_paths(level: u32, hi: u32, remaining: Rational64, current: &mut Vec<PathStep>, out: &mut Vec<SignedPath>) {
    if remaining.is_zero() {
        out.push(SignedPath { steps: current.clone() });
        return;
    }
    if level > hi {
        return;
    }
    // Whatever is left must be reachable with steps at levels ≥ `level`.
    let reach = Rational64::new(1, 1i64 << (level - 1)) - Rational64::new(1, 1i64 << hi);
    if remaining.abs() > reach {
        return;
    }
    for c in [-1i8, 1] {
        current.push((level, c));
        search_paths(level + 1, hi, remaining - Rational64::new(c as i64, 1i64 << level), current, out);
        current.pop();
    }
    search_paths(level + 1, hi, remaining, current, out);
}

/// Exponents `q₀` whose sources feed `Q_q`: reduced dyadics of level `k₀ ≤ k`
/// with `|q₀ − q| < 2^{-k₀}`, including the endpoints 0 and 1.
pub fn admissible_sources(q: DyadicExponent) -> Vec<DyadicExponent> {
    let mut out = Vec::new();
    for k0 in 0..=q.level {
        let width = Rational64::new(1, 1i64 << k0);
        let candidates: Vec<u64> = if k0 == 0 { vec![0, 1] } else { (1..(1u64 << k0)).step_by(2).collect() };
        for l0 in candidates {
            let q0 = DyadicExponent::new(l0, k0).expect("reduced by construction");
            if (q0.ratio() - q.ratio()).abs() < width {
                out.push(q0);
            }
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct ConcavityInstance<T> {
    pub psi: PositiveDefinite<T>,
    pub phi: PositiveDefinite<T>,
    pub v: Hermitian<T>,
    pub w: Hermitian<T>,
    pub p: T,
}

impl<T: Real> ConcavityInstance<T> {
    pub fn new(psi: PositiveDefinite<T>, phi: PositiveDefinite<T>, v: Hermitian<T>, w: Hermitian<T>, p: T) -> Result<Self> {
        if psi.dim() != v.dim() || phi.dim() != w.dim() {
            return invalid("instance dimension mismatch");
        }
        if !(p > T::zero() && p <= T::one()) {
            return invalid(format!("p = {p} outside (0, 1]"));
        }
        Ok(ConcavityInstance { psi, phi, v, w, p })
    }

    pub fn tensor_dim(&self) -> usize {
        self.psi.dim() * self.phi.dim()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiebConfig {
    pub cross: CrossMethod,
    pub loewner_nodes: usize,
    pub max_level: u32,
    /// Binary truncation level for exponents whose fraction `q/p` is not dyadic.
    pub truncation_level: u32,
    pub convention: DeltaConvention,
    /// Nodes per subinterval for the triangular double integral.
    pub unit_nodes: usize,
}

impl Default for LiebConfig {
    fn default() -> Self {
        LiebConfig {
            cross: CrossMethod::default(),
            loewner_nodes: DEFAULT_LOEWNER_NODES,
            max_level: 8,
            truncation_level: 12,
            convention: DeltaConvention::LevelK,
            unit_nodes: DEFAULT_UNIT_NODES,
        }
    }
}

/// `(Ψ + εV)^q ⊗ (Φ + εW)^r`, evaluated literally.
pub fn build_g<T: Real>(inst: &ConcavityInstance<T>, q: T, r: T, eps: T) -> Result<Hermitian<T>> {
    if q < T::zero() || r < T::zero() || q + r > T::one() + T::lit(1e-12) {
        return invalid("exponents need q, r ≥ 0 and q + r ≤ 1");
    }
    let shifted = |m: &PositiveDefinite<T>, d: &Hermitian<T>| {
        PositiveDefinite::new(m.hermitian().add(&d.scale(eps)))
            .map_err(|_| Error::InvalidInput(format!("perturbed operand not positive definite at ε = {eps}")))
    };
    let a = shifted(&inst.psi, &inst.v)?;
    let b = shifted(&inst.phi, &inst.w)?;
    Ok(Hermitian::symmetrized(kron(a.power(q).matrix(), b.power(r).matrix())))
}

/// `K_δ = Ψ^δ ⊗ Φ^{−δ}`.
pub fn k_delta<T: Real>(inst: &ConcavityInstance<T>, delta: T) -> Result<PositiveDefinite<T>> {
    PositiveDefinite::new(Hermitian::symmetrized(kron(inst.psi.power(delta).matrix(), inst.phi.power(-delta).matrix())))
}

/// Working state for one instance: eigenbases and memoised `Q` values.
pub struct LiebEngine<T: Real> {
    inst: ConcavityInstance<T>,
    config: LiebConfig,
    psi_vals: Vec<T>,
    phi_vals: Vec<T>,
    v_hat: Matrix<T>,
    w_hat: Matrix<T>,
    basis: Matrix<T>,
    sources: BTreeMap<DyadicExponent, Matrix<T>>,
    memo: BTreeMap<DyadicExponent, Matrix<T>>,
}

impl<T: Real> LiebEngine<T> {
    pub fn new(inst: &ConcavityInstance<T>, config: LiebConfig) -> Self {
        let sp = inst.psi.spectral();
        let sf = inst.phi.spectral();
        LiebEngine {
            psi_vals: sp.values.clone(),
            phi_vals: sf.values.clone(),
            v_hat: inst.v.matrix().in_basis(&sp.vectors),
            w_hat: inst.w.matrix().in_basis(&sf.vectors),
            basis: kron(&sp.vectors, &sf.vectors),
            inst: inst.clone(),
            config,
            sources: BTreeMap::new(),
            memo: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &LiebConfig {
        &self.config
    }

    /// Converts a product-eigenbasis matrix to the standard basis.
    pub fn to_standard(&self, m: &Matrix<T>) -> Hermitian<T> {
        Hermitian::symmetrized(m.conjugate_by(&self.basis))
    }

    pub fn to_basis(&self, m: &Matrix<T>) -> Matrix<T> {
        m.in_basis(&self.basis)
    }

    fn kron_diag(&self, qe: T, re: T) -> Vec<T> {
        let mut out = Vec::with_capacity(self.psi_vals.len() * self.phi_vals.len());
        for &a in &self.psi_vals {
            for &b in &self.phi_vals {
                out.push(a.powf(qe) * b.powf(re));
            }
        }
        out
    }

    /// `X` of the source at exponent pair `(qe, re)`: `V_{qe}⊗Φ^{re} + Ψ^{qe}⊗W_{re}` in the product basis.
    fn direction_hat(&self, qe: T, re: T) -> Matrix<T> {
        let pq: Vec<T> = self.psi_vals.iter().map(|x| x.powf(qe)).collect();
        let fr: Vec<T> = self.phi_vals.iter().map(|x| x.powf(re)).collect();
        let a = kron(&first_order_in_eigenbasis(&self.psi_vals, &self.v_hat, qe), &Matrix::from_real_diag(&fr));
        let b = kron(&Matrix::from_real_diag(&pq), &first_order_in_eigenbasis(&self.phi_vals, &self.w_hat, re));
        a + b
    }

    /// `Source_x` in the product basis.
    pub fn source(&mut self, x: DyadicExponent) -> Result<Matrix<T>> {
        if let Some(s) = self.sources.get(&x) {
            return Ok(s.clone());
        }
        let p = self.inst.p;
        let n = self.psi_vals.len();
        let m = self.phi_vals.len();
        let s = if x == DyadicExponent::ONE || x == DyadicExponent::ZERO {
            if (p - T::one()).abs() < T::lit(1e-8) {
                Matrix::zeros(n * m, n * m)
            } else if x == DyadicExponent::ONE {
                let psi_diag = PositiveDefinite::new(Hermitian::from_real_diag(&self.psi_vals))?;
                let k = second_order(&psi_diag, &Hermitian::symmetrized(self.v_hat.clone()), p, self.config.loewner_nodes)?;
                kron(k.matrix(), &Matrix::identity(m))
            } else {
                let phi_diag = PositiveDefinite::new(Hermitian::from_real_diag(&self.phi_vals))?;
                let k = second_order(&phi_diag, &Hermitian::symmetrized(self.w_hat.clone()), p, self.config.loewner_nodes)?;
                kron(&Matrix::identity(n), k.matrix())
            }
        } else {
            let step = T::lit(0.5f64.powi(x.level as i32));
            let frac: T = x.value();
            let qm = p * (frac - step);
            let qp = p * (frac + step);
            let (rm, rp) = (p - qm, p - qp);
            let a = self.kron_diag(qm, rm);
            let b = self.kron_diag(qp, rp);
            let xd = self.direction_hat(qm, rm);
            let zd = self.direction_hat(qp, rp);
            cross_commuting(&a, &b, &xd, &zd, self.config.cross)?
        };
        self.sources.insert(x, s.clone());
        Ok(s)
    }

    /// `D_δ(F)` in the product basis.
    pub fn d_delta(&self, delta: T, f: &Matrix<T>) -> Matrix<T> {
        let kappa: Vec<T> = self
            .psi_vals
            .iter()
            .flat_map(|&a| self.phi_vals.iter().map(move |&b| a.powf(delta) * b.powf(-delta)))
            .collect();
        f.weighted(|i, j| T::one() / (kappa[i] + kappa[j]))
    }

    /// `Q_x` in the product basis, memoised on the exact exponent.
    pub fn q(&mut self, x: DyadicExponent) -> Result<Matrix<T>> {
        if x.level > self.config.max_level {
            return invalid(format!("exponent level {} exceeds max_level {}", x.level, self.config.max_level));
        }
        self.q_inner(x)
    }

    fn q_inner(&mut self, x: DyadicExponent) -> Result<Matrix<T>> {
        if let Some(v) = self.memo.get(&x) {
            return Ok(v.clone());
        }
        let value = if x.level == 0 {
            self.source(x)?
        } else {
            let delta = self.config.convention.magnitude(self.inst.p, x.level);
            let (up, down) = x.neighbours();
            let qu = self.q_inner(up)?;
            let qd = self.q_inner(down)?;
            self.d_delta(delta, &qu) + self.d_delta(-delta, &qd) + self.source(x)?
        };
        self.memo.insert(x, value.clone());
        Ok(value)
    }

    /// `Y_{x, x₀}`: the contribution of `Source_{x₀}` to `Q_x`, summed over signed paths.
    pub fn y_term(&mut self, x: DyadicExponent, x0: DyadicExponent) -> Result<Matrix<T>> {
        let src = self.source(x0)?;
        let mut acc = Matrix::zeros(src.rows(), src.cols());
        for path in enumerate_paths(x0, x) {
            let mut cur = src.clone();
            for &(m, c) in &path.steps {
                let delta = self.config.convention.magnitude(self.inst.p, m) * T::lit(c as f64);
                cur = self.d_delta(delta, &cur);
            }
            acc = acc + cur;
        }
        Ok(acc)
    }

    /// `Σ_{x₀} Y_{x, x₀}`, which rearranges `Q_x`.
    pub fn y_sum(&mut self, x: DyadicExponent) -> Result<Matrix<T>> {
        let mut acc: Option<Matrix<T>> = None;
        for x0 in admissible_sources(x) {
            let y = self.y_term(x, x0)?;
            acc = Some(match acc {
                None => y,
                Some(a) => a + y,
            });
        }
        acc.ok_or_else(|| Error::Internal("no admissible sources".into()))
    }
}

/// `Source_x` in the standard basis, built with the product-basis engine.
pub fn source<T: Real>(inst: &ConcavityInstance<T>, x: DyadicExponent, config: LiebConfig) -> Result<Hermitian<T>> {
    let mut eng = LiebEngine::new(inst, config);
    let s = eng.source(x)?;
    Ok(eng.to_standard(&s))
}

/// `Source_x` assembled from full tensor-space matrices and the general `Cross`;
/// used to cross-check the product-basis path.
pub fn source_literal<T: Real>(inst: &ConcavityInstance<T>, x: DyadicExponent, config: LiebConfig) -> Result<Hermitian<T>> {
    let p = inst.p;
    let (n, m) = (inst.psi.dim(), inst.phi.dim());
    if x.level == 0 {
        if (p - T::one()).abs() < T::lit(1e-8) {
            return Ok(Hermitian::zeros(n * m));
        }
        return Ok(if x == DyadicExponent::ONE {
            let k = second_order(&inst.psi, &inst.v, p, config.loewner_nodes)?;
            Hermitian::symmetrized(kron(k.matrix(), &Matrix::identity(m)))
        } else {
            let k = second_order(&inst.phi, &inst.w, p, config.loewner_nodes)?;
            Hermitian::symmetrized(kron(&Matrix::identity(n), k.matrix()))
        });
    }
    let step = T::lit(0.5f64.powi(x.level as i32));
    let frac: T = x.value();
    let (qm, qp) = (p * (frac - step), p * (frac + step));
    let (rm, rp) = (p - qm, p - qp);
    let side = |qe: T, re: T| -> Result<(PositiveDefinite<T>, Hermitian<T>)> {
        let a = PositiveDefinite::new(Hermitian::symmetrized(kron(inst.psi.power(qe).matrix(), inst.phi.power(re).matrix())))?;
        let x = kron(first_order(&inst.psi, &inst.v, qe)?.matrix(), inst.phi.power(re).matrix())
            + kron(inst.psi.power(qe).matrix(), first_order(&inst.phi, &inst.w, re)?.matrix());
        Ok((a, Hermitian::symmetrized(x)))
    };
    let (a, xd) = side(qm, rm)?;
    let (b, zd) = side(qp, rp)?;
    cross(&MeanPair::new(a, b)?, &DirectionPair::new(xd, zd)?, config.cross)
}

/// `D_δ(F)` in the standard basis.
pub fn d_delta<T: Real>(inst: &ConcavityInstance<T>, delta: T, f: &Hermitian<T>) -> Result<Hermitian<T>> {
    if f.dim() != inst.tensor_dim() {
        return invalid("D_δ operand has the wrong dimension");
    }
    let eng = LiebEngine::new(inst, LiebConfig::default());
    let d = eng.d_delta(delta, &eng.to_basis(f.matrix()));
    Ok(eng.to_standard(&d))
}

/// `Q_x` in the standard basis.
pub fn q_recursion<T: Real>(inst: &ConcavityInstance<T>, x: DyadicExponent, config: LiebConfig) -> Result<Hermitian<T>> {
    let mut eng = LiebEngine::new(inst, config);
    let q = eng.q(x)?;
    Ok(eng.to_standard(&q))
}

/// Result of [`second_derivative`].
#[derive(Clone, Debug)]
pub struct SecondDerivative<T> {
    /// `G''_{q,r}(0)`.
    pub value: Hermitian<T>,
    /// Exponent fraction `q/p`, or its level-`n` truncation when it is not dyadic.
    pub fraction: DyadicExponent,
    /// `‖(−2·Q) − (−2·ΣY)‖` (dyadic case) in the standard basis.
    pub assembly_gap: Option<T>,
    /// `‖value_n − value_{n−1}‖` when `q/p` had to be truncated.
    pub truncation_increment: Option<T>,
}

/// `G''_{q,r}(0)` from the dyadic construction. Dyadic `q/p` is evaluated
/// exactly (and via both the recursion and the path sum when
/// `with_paths` is set); otherwise the result is interpolated linearly
/// between the two dyadic neighbours at `config.truncation_level` bits and
/// the increment against one level coarser is reported.
pub fn second_derivative<T: Real>(
    inst: &ConcavityInstance<T>,
    q: T,
    r: T,
    config: LiebConfig,
    with_paths: bool,
) -> Result<SecondDerivative<T>> {
    let p = q + r;
    if q < T::zero() || r < T::zero() || (p - inst.p).abs() > T::lit(1e-12) {
        return invalid(format!("need q, r ≥ 0 with q + r = p = {}", inst.p));
    }
    let frac = q / p;
    let exact = (1..=config.max_level.max(1))
        .map(|k| T::lit((1u64 << k) as f64) * frac)
        .position(|s| (s - s.round()).abs() < T::lit(1e-12))
        .map(|k| DyadicExponent::reduced((frac * T::lit((1u64 << (k + 1)) as f64)).round().to_u64().unwrap_or(0), k as u32 + 1));
    let exact = match exact {
        Some(d) => Some(d?),
        None if frac == T::zero() || frac == T::one() => Some(DyadicExponent::truncate(frac, 0)?),
        None => None,
    };
    let mut eng = LiebEngine::new(inst, config);
    match exact {
        Some(x) => {
            let qm = eng.q(x)?;
            let value = eng.to_standard(&qm.scale(T::lit(-2.0)));
            let assembly_gap = if with_paths {
                let ys = eng.y_sum(x)?;
                Some(operator_norm(&(qm - ys).scale(T::lit(2.0)))?)
            } else {
                None
            };
            Ok(SecondDerivative { value, fraction: x, assembly_gap, truncation_increment: None })
        }
        None => {
            let n = config.truncation_level.max(2);
            let mut eng_cfg = config;
            eng_cfg.max_level = eng_cfg.max_level.max(n);
            let mut eng = LiebEngine::new(inst, eng_cfg);
            // G'' is smooth in the fraction, so interpolating between the two
            // level-`n` neighbours leaves an O(4^-n) error.
            let mut at_level = |level: u32| -> Result<(Matrix<T>, DyadicExponent)> {
                let scaled = frac * T::lit((1u64 << level) as f64);
                let lo = scaled.floor();
                let w = scaled - lo;
                let lo = lo.to_u64().unwrap_or(0);
                let below = DyadicExponent::reduced(lo, level)?;
                let above = DyadicExponent::reduced(lo + 1, level)?;
                let v = eng.q(below)?.scale(T::one() - w) + eng.q(above)?.scale(w);
                Ok((v.scale(T::lit(-2.0)), below))
            };
            let (vn, xn) = at_level(n)?;
            let (vp, _) = at_level(n - 1)?;
            let inc = operator_norm(&(&vn - &vp))?;
            Ok(SecondDerivative {
                value: eng.to_standard(&vn),
                fraction: xn,
                assembly_gap: None,
                truncation_increment: Some(inc),
            })
        }
    }
}

/// Central second difference of `ε ↦ G_{q,r}(ε)` at zero.
pub fn second_derivative_fd<T: Real>(inst: &ConcavityInstance<T>, q: T, r: T, h: T) -> Result<Hermitian<T>> {
    let plus = build_g(inst, q, r, h)?;
    let minus = build_g(inst, q, r, -h)?;
    let mid = build_g(inst, q, r, T::zero())?;
    Ok(Hermitian::symmetrized(
        (plus.matrix() + minus.matrix() - mid.matrix().scale(T::lit(2.0))).scale(T::one() / (h * h)),
    ))
}

/// Data of `h(t) = Tr(K* (tA₁+(1−t)A₂)^q K (tB₁+(1−t)B₂)^r)`.
#[derive(Clone, Debug)]
pub struct TraceFunctional<T> {
    pub a1: PositiveDefinite<T>,
    pub a2: PositiveDefinite<T>,
    pub b1: PositiveDefinite<T>,
    pub b2: PositiveDefinite<T>,
    /// `N × M` with `N = dim A`, `M = dim B`.
    pub k: Matrix<T>,
    pub q: T,
    pub r: T,
}

impl<T: Real> TraceFunctional<T> {
    pub fn new(
        a1: PositiveDefinite<T>,
        a2: PositiveDefinite<T>,
        b1: PositiveDefinite<T>,
        b2: PositiveDefinite<T>,
        k: Matrix<T>,
        q: T,
        r: T,
    ) -> Result<Self> {
        if a1.dim() != a2.dim() || b1.dim() != b2.dim() || k.rows() != a1.dim() || k.cols() != b1.dim() {
            return invalid("trace functional dimension mismatch");
        }
        if q < T::zero() || r < T::zero() || q + r > T::one() || q + r == T::zero() {
            return invalid("exponents need q, r ≥ 0 and 0 < q + r ≤ 1");
        }
        Ok(TraceFunctional { a1, a2, b1, b2, k, q, r })
    }

    pub fn h(&self, t: T) -> Result<T> {
        let a = self.a1.lerp(&self.a2, t)?;
        let b = self.b1.lerp(&self.b2, t)?;
        let m = self.k.adjoint().matmul(a.power(self.q).matrix()).matmul(&self.k).matmul(b.power(self.r).matrix());
        Ok(m.trace().re)
    }

    /// The concavity instance at `t`: `Ψ = A(t)`, `Φ = B(t)ᵀ`, `V = A₁ − A₂`, `W = (B₁ − B₂)ᵀ`.
    /// The transposes come from the vectorisation pairing.
    pub fn instance(&self, t: T) -> Result<ConcavityInstance<T>> {
        let psi = self.a1.lerp(&self.a2, t)?;
        let phi = self.b1.lerp(&self.b2, t)?.transpose();
        let v = self.a1.hermitian().sub(self.a2.hermitian());
        let w = self.b1.hermitian().sub(self.b2.hermitian()).transpose();
        ConcavityInstance::new(psi, phi, v, w, self.q + self.r)
    }

    /// `h''(t) = ⟨vec K, G''(0) vec K⟩` from the dyadic construction.
    pub fn h_second(&self, t: T, config: LiebConfig) -> Result<T> {
        let inst = self.instance(t)?;
        let g2 = second_derivative(&inst, self.q, self.r, config, false)?;
        Ok(expectation(&vec_embed(&self.k), g2.value.matrix()).re)
    }

    /// Consistency check of the pairing used by [`Self::h_second`]: `h(t)` recomputed as `⟨vec K, (A^q ⊗ (B^r)ᵀ) vec K⟩`.
    pub fn h_paired(&self, t: T) -> Result<T> {
        let a = self.a1.lerp(&self.a2, t)?;
        let b = self.b1.lerp(&self.b2, t)?;
        Ok(expectation(&vec_embed(&self.k), &pairing(a.power(self.q).matrix(), b.power(self.r).matrix())).re)
    }
}

/// Certificate for `h` at `t`: `h''(t) ≤ 0`, agreement with a finite
/// difference of `h`, and the reconstruction
/// `h(t) = (1−t)h(0) + t·h(1) − t∫₀¹∫_{tλ}^{λ} h''(σ) dσ dλ`.
pub fn lieb_certificate(tf: &TraceFunctional<f64>, t: f64, config: LiebConfig, tol: f64) -> Result<VerificationReport> {
    if !(t > 0.0 && t < 1.0) {
        return invalid("certificate needs t in (0, 1)");
    }
    let h2 = tf.h_second(t, config)?;
    let step = 1e-3f64.min(t / 2.0).min((1.0 - t) / 2.0);
    let fd = (tf.h(t + step)? - 2.0 * tf.h(t)? + tf.h(t - step)?) / (step * step);
    let scale = 1.0 + h2.abs();
    let fd_gap = (fd - h2).abs() / scale;
    let integral = triangular_weight(t, config.unit_nodes, |s| tf.h_second(s, config))?;
    let (h0, h1, ht) = (tf.h(0.0)?, tf.h(1.0)?, tf.h(t)?);
    let recon = (ht - (1.0 - t) * h0 - t * h1 + t * integral).abs();
    Ok(VerificationReport::new("lieb_certificate", "lieb/second-derivative", fd_gap, tol)
        .with("t", t)
        .with("h", ht)
        .with("h_second", h2)
        .with("h_second_fd", fd)
        .with("double_integral", integral)
        .with("reconstruction_gap", recon)
        .require("h_second_nonpositive", h2 <= 1e-10 * scale)
        .require("reconstruction_within_tol", recon <= 1e-6 * (1.0 + ht.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(n: u64, k: u32) -> DyadicExponent {
        DyadicExponent::new(n, k).unwrap()
    }

    #[test]
    fn dyadic_validation() {
        assert!(DyadicExponent::new(2, 2).is_err());
        assert!(DyadicExponent::new(5, 2).is_err());
        assert!(DyadicExponent::new(2, 0).is_err());
        assert_eq!(DyadicExponent::reduced(4, 3).unwrap(), d(1, 1));
        assert_eq!(DyadicExponent::reduced(8, 3).unwrap(), DyadicExponent::ONE);
        assert_eq!(DyadicExponent::from_ratio(Rational64::new(3, 8)).unwrap(), d(3, 3));
        assert!(DyadicExponent::from_ratio(Rational64::new(1, 3)).is_err());
    }

    #[test]
    fn parses_fractions() {
        assert_eq!("3/8".parse::<DyadicExponent>().unwrap(), d(3, 3));
        assert_eq!("2/4".parse::<DyadicExponent>().unwrap(), d(1, 1));
        assert_eq!("1".parse::<DyadicExponent>().unwrap(), DyadicExponent::ONE);
        assert!("1/3".parse::<DyadicExponent>().is_err());
        assert!("x".parse::<DyadicExponent>().is_err());
    }

    #[test]
    fn five_eighths_has_two_paths() {
        let paths = enumerate_paths(d(1, 1), d(5, 3));
        let want = vec![SignedPath { steps: vec![(2, -1), (3, 1)] }, SignedPath { steps: vec![(3, -1)] }];
        assert_eq!(paths, want);
        for p in &paths {
            assert_eq!(p.displacement(), Rational64::new(-1, 8));
        }
    }

    #[test]
    fn identical_endpoints_give_empty_path() {
        let paths = enumerate_paths(d(3, 3), d(3, 3));
        assert_eq!(paths, vec![SignedPath { steps: vec![] }]);
    }

    #[test]
    fn admissible_sources_of_five_eighths() {
        let got = admissible_sources(d(5, 3));
        assert_eq!(got, vec![DyadicExponent::ZERO, DyadicExponent::ONE, d(1, 1), d(3, 2), d(5, 3)]);
    }

    #[test]
    fn convention_magnitudes() {
        assert_eq!(DeltaConvention::LevelK.magnitude(1.0f64, 3), 0.125);
        assert_eq!(DeltaConvention::LevelKMinus1.magnitude(1.0f64, 3), 0.25);
    }

    #[test]
    fn truncation_of_one_third() {
        let x = DyadicExponent::truncate(1.0f64 / 3.0, 4).unwrap();
        assert_eq!(x, d(5, 4));
    }
}
