use std::path::Path;
use std::time::Instant;

use matcert::geometric_mean::CrossMethod;
use matcert::lieb_concavity::{DeltaConvention, DyadicExponent, LiebConfig};
use matcert::linalg::MatrixFile;
use matcert::relative_entropy::RelentConfig;
use matcert::report::VerificationReport;
use matcert::ssa::{delta_terms, PrefactorConvention, SsaConfig, TripartiteState};
use matcert::suite;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::args::*;
use crate::output::{emit, ordered_map, with_timing, RunError};

/// Settings that may come from `--config`; command-line flags win.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    tol: Option<f64>,
    threads: Option<usize>,
    cross: Option<CrossMethod>,
    lieb: Option<LiebConfig>,
    relent: Option<RelentConfig>,
    ssa: Option<SsaConfig>,
}

struct Context {
    file: FileConfig,
    tol: Option<f64>,
    threads: usize,
    omit_timing: bool,
}

fn load_config(path: Option<&Path>) -> Result<FileConfig, RunError> {
    let Some(path) = path else { return Ok(FileConfig::default()) };
    let text = std::fs::read_to_string(path).map_err(|e| RunError::usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| RunError::usage(format!("bad config file {}: {e}", path.display())))
}

/// Returns whether every check passed.
pub fn run(cli: &Cli) -> Result<bool, RunError> {
    let file = load_config(cli.global.config.as_deref())?;
    let tol = cli.global.tol.or(file.tol);
    if let Some(t) = tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(RunError::usage("--tol must be a positive number"));
        }
    }
    let threads = cli.global.threads.or(file.threads).unwrap_or(1);
    if threads == 0 {
        return Err(RunError::usage("--threads must be at least 1"));
    }
    let ctx = Context { file, tol, threads, omit_timing: cli.global.omit_timing };
    let report = cli.global.report.as_deref();
    match &cli.command {
        Command::Gen(a) => gen(a).map(|_| true),
        Command::VerifyCross(a) => verify_cross(a, &ctx, report),
        Command::VerifyPower(a) => verify_power(a, &ctx, report),
        Command::VerifyLieb(a) => verify_lieb(a, &ctx, report),
        Command::VerifyRelent(a) => verify_relent(a, &ctx, report),
        Command::VerifySsa(a) => verify_ssa(a, &ctx, report),
        Command::Decompose(a) => decompose(a, &ctx, report),
    }
}

fn seeds(range: &SeedRange) -> Result<Vec<u64>, RunError> {
    if range.seeds == 0 {
        return Err(RunError::usage("--seeds must be at least 1"));
    }
    Ok((range.seed_start..range.seed_start + range.seeds).collect())
}

fn check_dim(name: &str, value: usize, max: usize) -> Result<(), RunError> {
    if value == 0 || value > max {
        return Err(RunError::usage(format!("{name} must be in 1..={max}, got {value}")));
    }
    Ok(())
}

fn failure_record(check: &str, seed: u64, err: matcert::Error) -> VerificationReport {
    VerificationReport::new(check, "error", f64::NAN, 0.0).seed(seed).with("error", err.to_string())
}

/// Runs one check per seed, prints a pass/fail line per record and emits the report.
fn run_suite(
    command: &str,
    check: &str,
    config: Value,
    seeds: &[u64],
    ctx: &Context,
    report: Option<&Path>,
    job: impl Fn(u64) -> matcert::Result<Vec<VerificationReport>> + Sync,
) -> Result<bool, RunError> {
    let start = Instant::now();
    let results = ordered_map(seeds, ctx.threads, |&seed| (seed, job(seed)));
    let total = start.elapsed().as_secs_f64();
    let mut records = Vec::new();
    let mut per_record = Vec::new();
    for ((seed, result), secs) in results {
        let recs = match result {
            Ok(v) => v,
            Err(e @ (matcert::Error::InvalidInput(_) | matcert::Error::Domain { .. })) => return Err(e.into()),
            Err(e) => vec![failure_record(check, seed, e)],
        };
        for r in recs {
            per_record.push(secs);
            records.push(r);
        }
    }
    for r in &records {
        eprintln!(
            "{} {} seed={} discrepancy={:.3e} tol={:.1e}",
            if r.pass { "PASS" } else { "FAIL" },
            r.check,
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
            r.discrepancy,
            r.tolerance
        );
    }
    let passed = records.iter().filter(|r| r.pass).count();
    let all = passed == records.len();
    let mut body = Map::new();
    body.insert("schema".into(), json!("matcert-run/1"));
    body.insert("command".into(), json!(command));
    body.insert("config".into(), config);
    body.insert("records".into(), serde_json::to_value(&records).expect("records serialise"));
    body.insert("summary".into(), json!({ "records": records.len(), "passed": passed, "pass": all }));
    emit(report, &with_timing(body, ctx.omit_timing, total, &per_record))?;
    Ok(all)
}

fn gen(a: &GenArgs) -> Result<(), RunError> {
    let value = match a.kind {
        InstanceKind::State => {
            let [da, db, dc]: [usize; 3] =
                a.dims.as_slice().try_into().map_err(|_| RunError::usage("--kind state needs three dims"))?;
            for (n, d) in [("d_A", da), ("d_B", db), ("d_C", dc)] {
                check_dim(n, d, 4)?;
            }
            if da * db * dc > 64 {
                return Err(RunError::usage("state dimension above 64 is not supported"));
            }
            let st = suite::random_state(a.seed, [da, db, dc])?;
            serde_json::to_value(st.to_file()).expect("matrix file serialises")
        }
        InstanceKind::MeanPair => {
            let n = single_dim(&a.dims)?;
            check_dim("dim", n, 16)?;
            let (pair, dirs) = suite::cross_instance(a.seed, n)?;
            json!({
                "kind": "mean-pair",
                "seed": a.seed,
                "a": MatrixFile::from_matrix(&[n], pair.a.matrix()),
                "b": MatrixFile::from_matrix(&[n], pair.b.matrix()),
                "x": MatrixFile::from_matrix(&[n], dirs.x.matrix()),
                "z": MatrixFile::from_matrix(&[n], dirs.z.matrix()),
            })
        }
        InstanceKind::Segment => {
            let n = single_dim(&a.dims)?;
            check_dim("dim", n, 8)?;
            if !(0.0..=1.0).contains(&a.t0) {
                return Err(RunError::usage("--t0 must lie in [0, 1]"));
            }
            let seg = suite::segment_instance(a.seed, n, a.t0)?;
            json!({
                "kind": "segment",
                "seed": a.seed,
                "t0": a.t0,
                "a1": MatrixFile::from_matrix(&[n], seg.a1.matrix()),
                "a2": MatrixFile::from_matrix(&[n], seg.a2.matrix()),
                "b1": MatrixFile::from_matrix(&[n], seg.b1.matrix()),
                "b2": MatrixFile::from_matrix(&[n], seg.b2.matrix()),
            })
        }
    };
    emit(a.out.as_deref(), &value)
}

fn single_dim(dims: &[usize]) -> Result<usize, RunError> {
    match dims {
        [n] => Ok(*n),
        _ => Err(RunError::usage("this kind takes a single --dims value")),
    }
}

fn verify_cross(a: &CrossArgs, ctx: &Context, report: Option<&Path>) -> Result<bool, RunError> {
    check_dim("--dim", a.dim, 16)?;
    let mut method = ctx.file.cross.unwrap_or_default();
    match (a.method, a.nodes) {
        (Some(CrossMethodArg::ClosedForm), _) => method = CrossMethod::ClosedForm,
        (Some(CrossMethodArg::Quadrature), nodes) => {
            method = CrossMethod::Quadrature { nodes: nodes.unwrap_or(matcert::quadrature::DEFAULT_HALF_LINE_NODES) }
        }
        (None, Some(nodes)) => method = CrossMethod::Quadrature { nodes },
        (None, None) => {}
    }
    let tol = ctx.tol.unwrap_or(1e-5);
    let config = json!({ "dim": a.dim, "method": method, "step": a.step, "tol": tol, "seeds": a.seeds.seeds, "seed_start": a.seeds.seed_start });
    run_suite("verify-cross", "cross_identity", config, &seeds(&a.seeds)?, ctx, report, |seed| {
        Ok(vec![suite::verify_cross(seed, a.dim, method, a.step, tol)?])
    })
}

fn verify_power(a: &PowerArgs, ctx: &Context, report: Option<&Path>) -> Result<bool, RunError> {
    check_dim("--dim", a.dim, 16)?;
    let q: DyadicExponent = a.q.parse()?;
    let config = json!({ "dim": a.dim, "q": q.to_string(), "seeds": a.seeds.seeds, "seed_start": a.seeds.seed_start });
    run_suite("verify-power", "power_expansion", config, &seeds(&a.seeds)?, ctx, report, |seed| {
        suite::verify_power(seed, a.dim, q)
    })
}

fn verify_lieb(a: &LiebArgs, ctx: &Context, report: Option<&Path>) -> Result<bool, RunError> {
    let (n, m) = (a.dims[0], a.dims[1]);
    check_dim("first dim", n, 4)?;
    check_dim("second dim", m, 4)?;
    if !(a.q >= 0.0 && a.r >= 0.0 && a.q + a.r > 0.0 && a.q + a.r <= 1.0) {
        return Err(RunError::usage("need q, r ≥ 0 with 0 < q + r ≤ 1"));
    }
    let mut config = ctx.file.lieb.unwrap_or_default();
    if let Some(c) = a.convention {
        config.convention = match c {
            ConventionArg::LevelK => DeltaConvention::LevelK,
            ConventionArg::LevelKMinus1 => DeltaConvention::LevelKMinus1,
        };
    }
    if let Some(l) = a.max_level {
        config.max_level = l;
    }
    let tol = ctx.tol.unwrap_or(1e-4);
    let echo = json!({ "dims": [n, m], "q": a.q, "r": a.r, "lieb": config, "tol": tol, "seeds": a.seeds.seeds, "seed_start": a.seeds.seed_start });
    run_suite("verify-lieb", "lieb_second_derivative", echo, &seeds(&a.seeds)?, ctx, report, |seed| {
        Ok(vec![suite::verify_lieb(seed, n, m, a.q, a.r, config, tol)?])
    })
}

fn verify_relent(a: &RelentArgs, ctx: &Context, report: Option<&Path>) -> Result<bool, RunError> {
    check_dim("--dim", a.dim, 4)?;
    if !(a.t > 0.0 && a.t < 1.0) {
        return Err(RunError::usage("--t must lie in (0, 1)"));
    }
    let mut config = ctx.file.relent.unwrap_or_default();
    if a.kmax.is_some() {
        config.k_max = a.kmax;
    }
    if a.no_extrapolate {
        config.extrapolate = false;
    }
    if config.k_max_for(a.dim) < 3 {
        return Err(RunError::usage("--kmax must be at least 3"));
    }
    let tol = ctx.tol.unwrap_or(1e-4);
    let echo = json!({ "dim": a.dim, "t": a.t, "relent": config, "tol": tol, "seeds": a.seeds.seeds, "seed_start": a.seeds.seed_start });
    run_suite("verify-relent", "convexity_certificate", echo, &seeds(&a.seeds)?, ctx, report, |seed| {
        Ok(vec![suite::verify_relent(seed, a.dim, a.t, &config, tol)?])
    })
}

fn ssa_config(settings: &SsaSettings, ctx: &Context) -> Result<SsaConfig, RunError> {
    let mut config = ctx.file.ssa.unwrap_or_default();
    if let Some(n) = settings.nodes {
        config.nodes = n;
    }
    if let Some(k) = settings.kmax {
        config.k_max = k;
    }
    if let Some(p) = settings.prefactor {
        config.prefactor = match p {
            PrefactorArg::Unrolled => PrefactorConvention::Unrolled,
            PrefactorArg::KPlusOne => PrefactorConvention::KPlusOne,
        };
    }
    if settings.no_extrapolate {
        config.extrapolate = false;
    }
    if let Some(t) = ctx.tol {
        config.tol_relative = t;
    }
    if config.nodes < 2 || !config.nodes.is_multiple_of(2) {
        return Err(RunError::usage("--nodes must be a positive even number"));
    }
    if config.k_max < 2 {
        return Err(RunError::usage("--kmax must be at least 2"));
    }
    Ok(config)
}

fn state_dims(dims: &[usize]) -> Result<[usize; 3], RunError> {
    let d: [usize; 3] = dims.try_into().map_err(|_| RunError::usage("--dims takes three values"))?;
    check_dim("d_A", d[0], 3)?;
    if d[1] == 0 || d[2] == 0 || d[1] * d[2] > 9 {
        return Err(RunError::usage("d_B·d_C must be in 1..=9"));
    }
    Ok(d)
}

fn verify_ssa(a: &SsaArgs, ctx: &Context, report: Option<&Path>) -> Result<bool, RunError> {
    let dims = state_dims(&a.dims)?;
    let config = ssa_config(&a.settings, ctx)?;
    let tol = config.tol_relative;
    let echo = json!({ "dims": dims, "ssa": config, "seeds": a.seeds.seeds, "seed_start": a.seeds.seed_start });
    run_suite("verify-ssa", "ssa_decomposition", echo, &seeds(&a.seeds)?, ctx, report, |seed| {
        Ok(vec![suite::verify_ssa(seed, dims, &config, tol)?])
    })
}

fn decompose(a: &DecomposeArgs, ctx: &Context, report: Option<&Path>) -> Result<bool, RunError> {
    let text = std::fs::read_to_string(&a.input)
        .map_err(|e| RunError::usage(format!("cannot read {}: {e}", a.input.display())))?;
    let file = MatrixFile::parse(&text)?;
    let state = TripartiteState::<f64>::from_file(&file)?;
    state_dims(&state.dims())?;
    let config = ssa_config(&a.settings, ctx)?;
    let start = Instant::now();
    let mut rep = delta_terms(&state, &config)?;
    rep.seed = a.seed;
    let secs = start.elapsed().as_secs_f64();
    eprintln!(
        "{} ssa_decomposition cmi={:.6} gap={:.3e} tol={:.3e}",
        if rep.pass { "PASS" } else { "FAIL" },
        rep.cmi_entropic,
        rep.reconstruction_gap,
        rep.tolerance
    );
    let Value::Object(body) = serde_json::to_value(&rep).expect("report serialises") else {
        unreachable!("reports serialise to objects")
    };
    emit(report, &with_timing(body, ctx.omit_timing, secs, &[secs]))?;
    Ok(rep.pass)
}
