//! Acceptance suite: one pass/fail line per criterion, nonzero exit on any failure.
//!
//! Run with `cargo test -p matcert --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use matcert::geometric_mean::{cross, cross_ingredients, CrossMethod, DirectionPair, MeanPair};
use matcert::lieb_concavity::{
    d_delta, k_delta, lieb_certificate, DeltaConvention, DyadicExponent, LiebConfig, LiebEngine, TraceFunctional,
};
use matcert::linalg::{operator_norm, Hermitian, Matrix};
use matcert::power_perturbation::DEFAULT_LOEWNER_NODES;
use matcert::random;
use matcert::relative_entropy::{gamma_limit, RelentConfig};
use matcert::ssa::{twirl_family, SsaConfig};
use matcert::suite;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|&(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn cross_identity() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut failures = 0;
    for seed in 0..500u64 {
        let dim = 1 + (seed % 6) as usize;
        let rep = suite::verify_cross(seed, dim, CrossMethod::default(), suite::CROSS_FD_STEP, 1e-5).unwrap();
        worst = worst.max(rep.discrepancy);
        failures += usize::from(!rep.pass);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures == 0 && secs <= 120.0,
        format!("500 instances, worst ‖FD + 2·Cross‖/(1+‖Cross‖) = {worst:.2e} (tol 1e-5), {failures} failures, {secs:.1}s (limit 120s)"),
    )
}

/// Directions with `E₂ + ΨE₁ = 0`: `S` in the commutant of `Ψ`, then
/// `M^{-1/2} X M^{-1/2} = (S + ΨS)/2` and `M^{-1/2} Z M^{-1/2} = (S − ΨS)/2`.
fn flat_directions(pair: &MeanPair<f64>, seed: u64) -> DirectionPair<f64> {
    let n = pair.dim();
    let ing = cross_ingredients(pair, &DirectionPair::zero(n)).unwrap();
    let spec = ing.psi.eig().unwrap();
    let mut rng = random::rng(seed ^ 0xf1a7);
    let weights: Vec<f64> = random::gaussian_hermitian::<f64>(&mut rng, n).eig().unwrap().values;
    let s = Matrix::from_real_diag(&weights).conjugate_by(&spec.vectors);
    let psi_s = ing.psi.matrix().matmul(&s);
    let mh = ing.mean.sqrt();
    let lift = |m: Matrix<f64>| Hermitian::symmetrized(m.scale(0.5).conjugate_by(mh.matrix()));
    DirectionPair::new(lift(&s + &psi_s), lift(&s - &psi_s)).unwrap()
}

fn cross_positivity() -> Outcome {
    let mut worst_psd = 0.0f64;
    let mut converse_failures = 0;
    let mut flat_worst = 0.0f64;
    for seed in 0..500u64 {
        let dim = 1 + (seed % 6) as usize;
        let (pair, dirs) = suite::cross_instance(seed, dim).unwrap();
        let c = cross(&pair, &dirs, CrossMethod::ClosedForm).unwrap();
        let scale = c.norm().max(f64::MIN_POSITIVE);
        worst_psd = worst_psd.max(-c.min_eigenvalue().unwrap() / scale);
        let defect = operator_norm(&cross_ingredients(&pair, &dirs).unwrap().defect()).unwrap();
        if defect >= 0.1 && c.norm() <= 0.0 {
            converse_failures += 1;
        }
        if seed < 100 {
            let flat = flat_directions(&pair, seed);
            let scale = 1.0 + flat.x.norm().powi(2) + flat.z.norm().powi(2);
            for method in [CrossMethod::ClosedForm, CrossMethod::default()] {
                flat_worst = flat_worst.max(cross(&pair, &flat, method).unwrap().norm() / scale);
            }
        }
    }
    outcome(
        worst_psd <= 1e-10 && flat_worst <= 1e-9 && converse_failures == 0,
        format!(
            "worst −λmin/‖Cross‖ = {worst_psd:.2e} (tol 1e-10); flat directions ‖Cross‖/scale ≤ {flat_worst:.2e} (tol 1e-9, 100 instances); {converse_failures} vanishing Cross with ‖E₂+ΨE₁‖ ≥ 0.1"
        ),
    )
}

fn power_expansion() -> Outcome {
    let mut worst_slope = f64::INFINITY;
    let mut worst_rec = 0.0f64;
    let mut worst_loewner = 0.0f64;
    for seed in 0..300u64 {
        let dim = 1 + (seed % 5) as usize;
        let (l, f) = suite::power_instance(seed, dim).unwrap();
        let q = (1 + seed % 9) as f64 / 10.0;
        worst_slope = worst_slope.min(suite::power_remainder_slope(&l, &f, q).unwrap());
        let dyadic = DyadicExponent::new(2 * (seed % 8) + 1, 4).unwrap();
        for rep in suite::verify_power(seed, dim, dyadic).unwrap() {
            match rep.check.as_str() {
                "power_recursion" => worst_rec = worst_rec.max(rep.discrepancy),
                "power_loewner" => worst_loewner = worst_loewner.max(rep.discrepancy),
                _ => worst_slope = worst_slope.min(3.0 - rep.discrepancy),
            }
        }
    }
    outcome(
        worst_slope >= 2.7 && worst_rec <= 1e-8 && worst_loewner <= 1e-9,
        format!(
            "300 instances: min remainder slope {worst_slope:.3} (≥ 2.7), recursion gap {worst_rec:.2e} (≤ 1e-8), Löwner gap {worst_loewner:.2e} (≤ 1e-9, {DEFAULT_LOEWNER_NODES} nodes)"
        ),
    )
}

/// Exponents `(q, r)` with `q/p = j/2^k`, `k ≤ 4`.
fn lieb_exponents(i: u64) -> (f64, f64, u32) {
    let p = [0.5, 0.75, 1.0][(i / 2 % 3) as usize];
    let level = 1 + (i / 3 % 4) as u32;
    let j = (2 * i + 1) % (1 << level);
    let q = p * j as f64 / (1u64 << level) as f64;
    (q, p - q, level)
}

fn lieb_construction() -> Outcome {
    let start = Instant::now();
    let config = LiebConfig::default();
    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut alt_failures = 0;
    let mut alt_tested = 0;
    for seed in 0..200u64 {
        let (n, m) = (1 + (seed % 3) as usize, 1 + (seed / 3 % 3) as usize);
        let (q, r, level) = lieb_exponents(seed);
        let rep = suite::verify_lieb(seed, n, m, q, r, config, 1e-4).unwrap();
        worst = worst.max(rep.discrepancy);
        failures += usize::from(!rep.pass);
        if level >= 2 {
            let alt = LiebConfig { convention: DeltaConvention::LevelKMinus1, ..config };
            alt_tested += 1;
            alt_failures += usize::from(!suite::verify_lieb(seed, n, m, q, r, alt, 1e-4).unwrap().pass);
        }
    }
    let chosen_passes = failures == 0;
    let alternative_passes = alt_failures == 0;

    // Concavity of h on a grid, and the reconstruction certificate.
    let mut worst_chord = 0.0f64;
    let mut worst_curv = f64::NEG_INFINITY;
    let mut cert_failures = 0;
    let mut worst_recon = 0.0f64;
    for seed in 0..12u64 {
        let mut rng = random::rng(1000 + seed);
        let (n, m) = (1 + (seed % 3) as usize, 1 + (seed / 3 % 3) as usize);
        let a1 = random::positive_definite(&mut rng, n, 0.5).unwrap();
        let a2 = random::positive_definite(&mut rng, n, 0.5).unwrap();
        let b1 = random::positive_definite(&mut rng, m, 0.5).unwrap();
        let b2 = random::positive_definite(&mut rng, m, 0.5).unwrap();
        let k = random::gaussian_matrix(&mut rng, n, m);
        let (q, r, _) = lieb_exponents(seed + 7);
        let tf = TraceFunctional::new(a1, a2, b1, b2, k, q, r).unwrap();
        let (h0, h1) = (tf.h(0.0).unwrap(), tf.h(1.0).unwrap());
        for i in 1..20 {
            let t = i as f64 / 20.0;
            let ht = tf.h(t).unwrap();
            worst_chord = worst_chord.max(((1.0 - t) * h0 + t * h1 - ht) / (1.0 + ht.abs()));
            let h2 = tf.h_second(t, config).unwrap();
            worst_curv = worst_curv.max(h2 / (1.0 + h2.abs()));
        }
        if seed < 6 {
            let cert = lieb_certificate(&tf, 0.3 + 0.05 * seed as f64, config, 1e-4).unwrap();
            cert_failures += usize::from(!cert.pass);
            worst_recon = worst_recon.max(cert.computed["reconstruction_gap"].as_f64().unwrap());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = chosen_passes
        && !alternative_passes
        && worst_chord <= 1e-10
        && worst_curv <= 1e-10
        && cert_failures == 0
        && worst_recon <= 1e-6
        && secs <= 600.0;
    outcome(
        pass,
        format!(
            "200 instances: worst relative FD gap {worst:.2e} (tol 1e-4), {failures} failures with δ = p·2^-k; alternative δ = p·2^(1-k) fails {alt_failures}/{alt_tested} (recorded convention: {}); chord defect {worst_chord:.1e}, max h'' {worst_curv:.1e}, reconstruction {worst_recon:.1e} (≤ 1e-6), {cert_failures} certificate failures; {secs:.1}s",
            if chosen_passes && !alternative_passes { "level_k" } else { "ambiguous" }
        ),
    )
}

fn source_decay() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..20u64 {
        let inst = suite::lieb_instance(seed, 2, 2, [0.5, 0.75, 1.0][(seed % 3) as usize]).unwrap();
        let mut eng = LiebEngine::new(&inst, LiebConfig::default());
        let mut pts = Vec::new();
        for level in 1..=5u32 {
            let mut top = 0.0f64;
            for j in (1..1u64 << level).step_by(2) {
                let s = eng.source(DyadicExponent::new(j, level).unwrap()).unwrap();
                top = top.max(operator_norm(&s).unwrap());
            }
            pts.push((level as f64, top.log2()));
        }
        worst = worst.max(fit_slope(&pts));
    }
    outcome(worst <= -1.7, format!("20 dim-2 instances, levels 1-5: steepest-decay fit worst slope {worst:.3} (≤ -1.7)"))
}

fn half_property() -> Outcome {
    let deltas = [1e-1, 1e-2, 1e-3, 1e-4];
    let mut worst_spread = 0.0f64;
    let mut worst_c = 0.0f64;
    let mut worst_residual = 0.0f64;
    for seed in 0..20u64 {
        let inst = suite::lieb_instance(seed, 2, 2, 0.75).unwrap();
        let f = random::gaussian_hermitian::<f64>(&mut random::rng(seed + 500), 4);
        for sign in [1.0, -1.0] {
            let mut cs = Vec::new();
            for &d in &deltas {
                let delta = sign * d;
                let out = d_delta(&inst, delta, &f).unwrap();
                cs.push(operator_norm(&(out.matrix() - &f.matrix().scale(0.5))).unwrap() / (f.norm() * d));
                // Independent check: D_δ(F) solves K_δ X + X K_δ = F.
                let k = k_delta(&inst, delta).unwrap();
                let res = k.matrix().matmul(out.matrix()) + out.matrix().matmul(k.matrix()) - f.matrix().clone();
                worst_residual = worst_residual.max(operator_norm(&res).unwrap() / f.norm());
            }
            let (lo, hi) = cs.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &c| (lo.min(c), hi.max(c)));
            worst_c = worst_c.max(hi);
            worst_spread = worst_spread.max(hi / lo);
        }
    }
    outcome(
        worst_c.is_finite() && worst_spread <= 1.5 && worst_residual <= 1e-12,
        format!(
            "20 instances, δ ∈ ±{{1e-1..1e-4}}: fitted C ≤ {worst_c:.3}, max/min C across δ {worst_spread:.3} (≤ 1.5), Sylvester residual {worst_residual:.1e}"
        ),
    )
}

fn relent_convexity() -> Outcome {
    let start = Instant::now();
    let mut worst_ratio = 0.0f64;
    for seed in 0..20u64 {
        let seg = suite::segment_instance(seed, 2, 0.5).unwrap();
        for s in [0.2, 0.5, 0.8] {
            let seq = gamma_limit(&seg.at(s), 14, CrossMethod::ClosedForm).unwrap();
            // ratios()[i] = inc(k)/inc(k−1) with k = i + 3.
            for (i, r) in seq.ratios().into_iter().enumerate() {
                if i + 3 >= 5 {
                    worst_ratio = worst_ratio.max(r);
                }
            }
        }
    }
    let config = RelentConfig::default();
    let mut worst_fd = 0.0f64;
    let mut worst_mix = 0.0f64;
    let mut failures = 0;
    for seed in 0..100u64 {
        let dim = 2 + (seed % 2) as usize;
        let rep = suite::verify_relent(seed, dim, 0.1 + 0.8 * ((seed * 37 % 100) as f64 / 100.0), &config, 1e-4).unwrap();
        worst_fd = worst_fd.max(rep.discrepancy);
        worst_mix = worst_mix.max(rep.computed["mixing_gap"].as_f64().unwrap());
        failures += usize::from(!rep.pass);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst_ratio <= 0.6 && failures == 0 && secs <= 600.0,
        format!(
            "increment ratio ≤ {worst_ratio:.3} for k = 5..14 (≤ 0.6); 100 certificates: FD gap {worst_fd:.2e}, mixing gap {worst_mix:.2e} (≤ 1e-4), {failures} failures; {secs:.1}s"
        ),
    )
}

fn ssa_decomposition() -> Outcome {
    let start = Instant::now();
    let base = SsaConfig::default();
    let doubled = base.doubled();
    let mut worst_gap = 0.0f64;
    let mut worst_shrink = f64::INFINITY;
    let mut failures = 0;
    for seed in 0..20u64 {
        let rep = suite::verify_ssa(seed, [2, 2, 2], &base, 1e-3).unwrap();
        let fine = suite::verify_ssa(seed, [2, 2, 2], &doubled, 1e-3).unwrap();
        worst_gap = worst_gap.max(rep.discrepancy);
        worst_shrink = worst_shrink.min(rep.discrepancy / fine.discrepancy);
        failures += usize::from(!rep.pass) + usize::from(!fine.pass);
    }
    let mut worst_twirl = 0.0f64;
    for n in 2..=3 {
        let fam = twirl_family::<f64>(n).unwrap();
        let mut rng = random::rng(77 + n as u64);
        for _ in 0..50 {
            let probe = random::gaussian_matrix::<f64>(&mut rng, n, n);
            worst_twirl = worst_twirl.max(fam.averaging_defect(&probe).unwrap());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures == 0 && worst_shrink >= 4.0 && worst_twirl <= 1e-12 && secs <= 1800.0,
        format!(
            "20 states: worst relative gap {worst_gap:.2e} (≤ 1e-3), smallest shrink with doubled nodes and k_max {worst_shrink:.1}x (≥ 4), {failures} record failures (endpoint ≤ 1e-9, terms ≥ -1e-8); twirl defect {worst_twirl:.1e} (≤ 1e-12); {secs:.1}s"
        ),
    )
}

fn determinism() -> Outcome {
    let run = || {
        let mut out = Vec::new();
        for seed in 0..3u64 {
            out.push(suite::verify_cross(seed, 3, CrossMethod::default(), suite::CROSS_FD_STEP, 1e-5).unwrap());
            out.extend(suite::verify_power(seed, 3, DyadicExponent::new(3, 3).unwrap()).unwrap());
            out.push(suite::verify_lieb(seed, 2, 2, 0.375, 0.375, LiebConfig::default(), 1e-4).unwrap());
            out.push(suite::verify_relent(seed, 2, 0.4, &RelentConfig::default(), 1e-4).unwrap());
        }
        out.push(suite::verify_ssa(0, [2, 2, 2], &SsaConfig::default(), 1e-3).unwrap());
        serde_json::to_string(&out).unwrap()
    };
    let (first, second) = (run(), run());
    outcome(first == second, format!("two runs of every suite produce {} identical report bytes", first.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("cross identity", cross_identity),
        ("cross positivity and vanishing", cross_positivity),
        ("power expansion", power_expansion),
        ("lieb construction", lieb_construction),
        ("source decay", source_decay),
        ("half property", half_property),
        ("relative-entropy convexity", relent_convexity),
        ("ssa decomposition", ssa_decomposition),
        ("determinism", determinism),
    ];
    let mut all = true;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        all &= o.pass;
        println!("{} criterion {} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
