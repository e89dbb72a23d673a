//! Seeded instances and per-seed checks shared by the command-line front end.
//!
//! Every instance is drawn from [`crate::random`] with a ChaCha8 stream seeded
//! by the record's seed, so a record can be recomputed in isolation.

use serde_json::json;

use crate::error::{invalid, Result};
use crate::geometric_mean::{cross, mean_second_derivative_fd, CrossMethod, DirectionPair, MeanPair};
use crate::lieb_concavity::{second_derivative, second_derivative_fd, ConcavityInstance, DyadicExponent, LiebConfig};
use crate::linalg::{operator_norm, Hermitian, PositiveDefinite};
use crate::power_perturbation::{first_order, loewner_power, recursion, second_order, DEFAULT_LOEWNER_NODES};
use crate::random;
use crate::relative_entropy::{convexity_certificate, RelentConfig, SegmentInstance};
use crate::report::VerificationReport;
use crate::ssa::{delta_terms, SsaConfig, TripartiteState, NEGATIVITY_SLACK};

/// Finite-difference step for the `Cross` identity.
pub const CROSS_FD_STEP: f64 = 1e-3;

/// `(A, B, X, Z)`: `A`, `B` are `exp(0.5·G/√n)` normalised to mean eigenvalue
/// one and `X`, `Z` are Gaussian Hermitian with unit operator norm. The mild
/// spread keeps the `1e-3` second difference well inside its truncation regime.
pub fn cross_instance(seed: u64, dim: usize) -> Result<(MeanPair<f64>, DirectionPair<f64>)> {
    let mut rng = random::rng(seed);
    let spread = 0.5 / (dim as f64).sqrt();
    let a = random::positive_definite(&mut rng, dim, spread)?;
    let b = random::positive_definite(&mut rng, dim, spread)?;
    let x = random::direction(&mut rng, dim, 1.0);
    let z = random::direction(&mut rng, dim, 1.0);
    Ok((MeanPair::new(a, b)?, DirectionPair::new(x, z)?))
}

/// `‖FD − (−2·Cross)‖/(1 + ‖Cross‖)` with the given step (usually
/// [`CROSS_FD_STEP`]), plus PSD of `Cross`.
pub fn verify_cross(seed: u64, dim: usize, method: CrossMethod, step: f64, tol: f64) -> Result<VerificationReport> {
    if !(step > 0.0 && step < 0.1) {
        return invalid(format!("finite-difference step must lie in (0, 0.1), got {step}"));
    }
    let (pair, dirs) = cross_instance(seed, dim)?;
    let c = cross(&pair, &dirs, method)?;
    let fd = mean_second_derivative_fd(&pair, &dirs, step)?;
    let disc = operator_norm(&(fd.matrix() + &c.matrix().scale(2.0)))? / (1.0 + c.norm());
    let min_eig = c.min_eigenvalue()?;
    let scale = 1.0 + c.norm();
    Ok(VerificationReport::new("cross_identity", "geometric-mean/second-derivative", disc, tol)
        .seed(seed)
        .with("dim", dim)
        .with("cross_norm", c.norm())
        .with("cross_min_eigenvalue", min_eig)
        .require("cross_psd", min_eig >= -1e-10 * scale)
        .config(json!({ "method": method, "fd_step": step })))
}

/// `L = exp(G/√n)` normalised to mean eigenvalue one, `F` Gaussian Hermitian
/// with unit norm. The spread keeps `λmin(L)` well above the largest order-fit step.
pub fn power_instance(seed: u64, dim: usize) -> Result<(PositiveDefinite<f64>, Hermitian<f64>)> {
    let mut rng = random::rng(seed);
    let l = random::positive_definite(&mut rng, dim, 1.0 / (dim as f64).sqrt())?;
    let f = random::direction(&mut rng, dim, 1.0);
    Ok((l, f))
}

/// Steps used for the order fit of the power expansion remainder.
pub const POWER_STEPS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// Least-squares slope of `log r(ε)` against `log ε` for the remainder
/// `r(ε) = ‖(L+εF)^q − L^q − ε·first + ε²·second‖`.
pub fn power_remainder_slope(l: &PositiveDefinite<f64>, f: &Hermitian<f64>, q: f64) -> Result<f64> {
    let first = first_order(l, f, q)?;
    let second = second_order(l, f, q, DEFAULT_LOEWNER_NODES)?;
    let base = l.power(q);
    let mut pts = Vec::new();
    for &eps in &POWER_STEPS {
        let shifted = PositiveDefinite::new(l.hermitian().add(&f.scale(eps)))?;
        let approx = base.matrix() + &first.matrix().scale(eps) - second.matrix().scale(eps * eps);
        let r = operator_norm(&(shifted.power(q).matrix() - &approx))?;
        pts.push((eps.ln(), r.max(f64::MIN_POSITIVE).ln()));
    }
    Ok(crate::relative_entropy::fit_slope(&pts).expect("three points"))
}

/// Order fit, Sylvester-chain recursion against divided differences, and
/// the Löwner integral against the eigenbasis power, at the dyadic exponent `q`.
pub fn verify_power(seed: u64, dim: usize, q: DyadicExponent) -> Result<Vec<VerificationReport>> {
    let (l, f) = power_instance(seed, dim)?;
    let qv: f64 = q.value();
    let slope = power_remainder_slope(&l, &f, qv)?;
    let rec = recursion::dyadic_first_order(&l, &f, q.numerator(), q.level())?;
    let closed = first_order(&l, &f, qv)?;
    let rec_gap = operator_norm(&(rec.matrix() - closed.matrix()))? / (1.0 + closed.norm());
    let cfg = json!({ "q": q.to_string(), "steps": POWER_STEPS, "loewner_nodes": DEFAULT_LOEWNER_NODES });
    let mut out = vec![
        VerificationReport::new("power_remainder_order", "power-expansion/third-order-remainder", 3.0 - slope, 0.3)
            .seed(seed)
            .with("dim", dim)
            .with("slope", slope)
            .config(cfg.clone()),
        VerificationReport::new("power_recursion", "power-expansion/sylvester-chain", rec_gap, 1e-8)
            .seed(seed)
            .with("dim", dim)
            .config(cfg.clone()),
    ];
    if qv > 0.0 && qv < 1.0 {
        let lw = loewner_power(&l, qv, DEFAULT_LOEWNER_NODES)?;
        let gap = operator_norm(&(lw.matrix() - l.power(qv).matrix()))? / (1.0 + l.max_eigenvalue().powf(qv));
        out.push(
            VerificationReport::new("power_loewner", "power-expansion/loewner-representation", gap, 1e-9)
                .seed(seed)
                .with("dim", dim)
                .config(cfg),
        );
    }
    Ok(out)
}

/// `Ψ`, `Φ` as for [`power_instance`] (spread 0.5), `V`, `W` unit-norm Gaussian Hermitian.
pub fn lieb_instance(seed: u64, n: usize, m: usize, p: f64) -> Result<ConcavityInstance<f64>> {
    let mut rng = random::rng(seed);
    let psi = random::positive_definite(&mut rng, n, 0.5)?;
    let phi = random::positive_definite(&mut rng, m, 0.5)?;
    let v = random::direction(&mut rng, n, 1.0);
    let w = random::direction(&mut rng, m, 1.0);
    ConcavityInstance::new(psi, phi, v, w, p)
}

/// Step for the Lieb finite-difference oracle.
pub const LIEB_FD_STEP: f64 = 1e-3;

/// Dyadic second derivative against a finite difference (relative), the
/// path-sum assembly against the recursion, and negative semidefiniteness.
pub fn verify_lieb(seed: u64, n: usize, m: usize, q: f64, r: f64, config: LiebConfig, tol: f64) -> Result<VerificationReport> {
    let inst = lieb_instance(seed, n, m, q + r)?;
    let sd = second_derivative(&inst, q, r, config, true)?;
    let fd = second_derivative_fd(&inst, q, r, LIEB_FD_STEP)?;
    let disc = operator_norm(&(sd.value.matrix() - fd.matrix()))? / fd.norm().max(1e-12);
    let max_eig = sd.value.eig()?.max();
    let mut rep = VerificationReport::new("lieb_second_derivative", "lieb/second-derivative", disc, tol)
        .seed(seed)
        .with("dims", json!([n, m]))
        .with("q", q)
        .with("r", r)
        .with("fraction", sd.fraction.to_string())
        .with("max_eigenvalue", max_eig)
        .require("negative_semidefinite", max_eig <= 1e-10 * (1.0 + sd.value.norm()))
        .config(json!({ "lieb": config, "fd_step": LIEB_FD_STEP }));
    if let Some(gap) = sd.assembly_gap {
        rep = rep.with("assembly_gap", gap).require("assembly_within_1e-9", gap <= 1e-9 * (1.0 + sd.value.norm()));
    }
    if let Some(inc) = sd.truncation_increment {
        rep = rep.with("truncation_increment", inc);
    }
    Ok(rep)
}

/// Four random density matrices of dimension `dim`.
pub fn segment_instance(seed: u64, dim: usize, t0: f64) -> Result<SegmentInstance<f64>> {
    let mut rng = random::rng(seed);
    let a1 = random::density(&mut rng, dim)?;
    let a2 = random::density(&mut rng, dim)?;
    let b1 = random::density(&mut rng, dim)?;
    let b2 = random::density(&mut rng, dim)?;
    SegmentInstance::new(a1, a2, b1, b2, t0)
}

pub fn verify_relent(seed: u64, dim: usize, t0: f64, config: &RelentConfig, tol: f64) -> Result<VerificationReport> {
    let seg = segment_instance(seed, dim, t0)?;
    Ok(convexity_certificate(&seg, config, tol)?
        .seed(seed)
        .with("dim", dim)
        .config(json!({ "relent": config })))
}

/// Full-rank random state `exp(G)/Tr exp(G)` on `d_A·d_B·d_C`.
pub fn random_state(seed: u64, dims: [usize; 3]) -> Result<TripartiteState<f64>> {
    let mut rng = random::rng(seed);
    let rho = random::density(&mut rng, dims.iter().product())?;
    TripartiteState::new(rho, dims)
}

/// Relative reconstruction gap of the decomposition, plus the endpoint identity and term signs.
pub fn verify_ssa(seed: u64, dims: [usize; 3], config: &SsaConfig, tol: f64) -> Result<VerificationReport> {
    let state = random_state(seed, dims)?;
    let rep = delta_terms(&state, config)?;
    let min_term = rep.delta_terms.iter().copied().fold(rep.boundary_term, f64::min);
    Ok(VerificationReport::new("ssa_decomposition", "ssa/cmi-remainder-decomposition", rep.relative_gap(), tol)
        .seed(seed)
        .with("dims", json!(dims))
        .with("cmi", rep.cmi_entropic)
        .with("boundary_term", rep.boundary_term)
        .with("delta_terms", json!(rep.delta_terms))
        .with("endpoint_gap", rep.endpoint_gap)
        .require("endpoint_identity", rep.endpoint_gap <= 1e-9)
        .require("terms_nonnegative", min_term >= -NEGATIVITY_SLACK)
        .config(json!({ "ssa": config })))
}
