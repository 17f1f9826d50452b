use std::path::{Path, PathBuf};

use breaklab::break_tests::{compute, decide, OnSingular, ScanOptions, Sided, SquaresScale};
use breaklab::dgp::{generate, DgpSpec};
use breaklab::estimators::{ols_fit, partial_sum_covariance, residual_partial_sums, split_fit};
use breaklab::experiments::{
    distortion_grid, run_experiment_on, ExperimentSpec, McReport, TableSource,
};
use breaklab::io::{
    path_to_csv, read_json, read_sample_csv, read_table, sample_to_csv, to_json_pretty, write_text,
};
use breaklab::limit_lab::{tabulate, FunctionalKind, TableRequest};
use breaklab::par::with_workers;
use breaklab::rng::{derive_stream, SeedSpec};
use breaklab::{BreakError, SCHEMA_VERSION};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::args::*;

pub enum Failure {
    Usage(String),
    Break(BreakError),
}

impl From<BreakError> for Failure {
    fn from(e: BreakError) -> Self {
        Failure::Break(e)
    }
}

type CmdResult = Result<(), Failure>;

pub fn dispatch(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Test(a) => test(a),
        Command::Fit(a) => fit(a),
        Command::Critvals(a) => critvals(a),
        Command::Experiment(a) => experiment(a),
        Command::Distortion(a) => distortion(a),
    }
}

fn provenance(command: &str, args: &impl Serialize, config: Option<&Value>) -> Value {
    let mut p = json!({
        "tool": "breaklab",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "args": args,
    });
    if let Some(c) = config {
        p["config"] = c.clone();
    }
    p
}

fn emit(out: Option<&Path>, text: &str) -> CmdResult {
    match out {
        Some(path) => {
            write_text(path, text)?;
            log::info!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

fn load_object(path: Option<&Path>) -> Result<Map<String, Value>, Failure> {
    let Some(path) = path else {
        return Ok(Map::new());
    };
    match read_json::<Value>(path)? {
        Value::Object(m) => Ok(m),
        _ => Err(BreakError::Parse {
            path: path.to_path_buf(),
            message: "expected a JSON object".into(),
        }
        .into()),
    }
}

fn set<T: Serialize>(obj: &mut Map<String, Value>, key: &str, value: Option<T>) {
    if let Some(v) = value {
        obj.insert(
            key.to_string(),
            serde_json::to_value(v).expect("serializable"),
        );
    }
}

fn from_config<T: serde::de::DeserializeOwned>(
    obj: Map<String, Value>,
    what: &str,
) -> Result<T, Failure> {
    serde_json::from_value(Value::Object(obj)).map_err(|e| {
        BreakError::Parse {
            path: PathBuf::from(what),
            message: e.to_string(),
        }
        .into()
    })
}

fn simulate(a: &SimulateArgs) -> CmdResult {
    let mut cfg = load_object(a.config.as_deref())?;
    set(&mut cfg, "family", a.family);
    set(&mut cfg, "T", a.t);
    set(&mut cfg, "s", a.s);
    set(&mut cfg, "beta_pre", a.beta_pre.clone());
    set(&mut cfg, "beta_post", a.beta_post.clone());
    set(
        &mut cfg,
        "sigma_eps_sq",
        a.sigma_eps.map(|sd| sd * sd).or(a.sigma_eps_sq),
    );
    set(
        &mut cfg,
        "sigma_u_sq",
        a.sigma_u.map(|sd| sd * sd).or(a.sigma_u_sq),
    );
    set(&mut cfg, "sigma_eps_u", a.sigma_eps_u);
    set(&mut cfg, "c", a.c);
    set(&mut cfg, "mu", a.mu);
    set(&mut cfg, "x0", a.x0);
    if a.no_intercept {
        cfg.insert("intercept".into(), Value::Bool(false));
    }
    for (key, flag) in [("family", "--family"), ("T", "--T")] {
        if !cfg.contains_key(key) {
            return Err(Failure::Usage(format!(
                "`{key}` is required: pass {flag} or set it in --config"
            )));
        }
    }
    cfg.entry("beta_pre").or_insert(json!([0.0]));
    let spec: DgpSpec = from_config(cfg, "simulate config")?;
    let spec = spec.normalized();
    let sample = generate(&spec, &mut derive_stream(SeedSpec::new(a.seed, a.stream)))?;
    emit(a.out.as_deref(), &sample_to_csv(&sample))?;
    if let Some(out) = &a.out {
        let prov = json!({
            "schema_version": SCHEMA_VERSION,
            "provenance": provenance("simulate", a, Some(&serde_json::to_value(&spec).unwrap())),
            "break_index": spec.break_index(),
            "rho": spec.rho(),
        });
        write_text(&sidecar(out, ".provenance.json"), &to_json_pretty(&prov))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct TestReport {
    schema_version: u32,
    stat: breaklab::StatKind,
    sup: f64,
    k_hat: usize,
    cv: Option<f64>,
    reject: Option<bool>,
    level: f64,
    nu: f64,
    sided: Sided,
    n_obs: usize,
    p: usize,
    k_min: usize,
    k_max: usize,
    skipped: Vec<usize>,
    provenance: Value,
}

fn test(a: &TestArgs) -> CmdResult {
    let sample = read_sample_csv(&a.input)?;
    let mut opts = ScanOptions::for_kind(a.stat);
    if let Some(nu) = a.nu {
        opts = opts.with_nu(nu);
    }
    if let Some(sided) = a.sided {
        opts.sided = match sided {
            SidedArg::Abs => Sided::TwoSidedAbs,
            SidedArg::Signed => Sided::Signed,
        };
    }
    if a.paper_literal {
        opts.squares_scale = SquaresScale::ResidualSd;
    }
    opts.on_singular = match a.on_singular {
        OnSingularArg::Skip => OnSingular::Skip,
        OnSingularArg::Fail => OnSingular::Fail,
    };
    if !(0.0 < a.level && a.level < 1.0) {
        return Err(BreakError::InvalidSpec {
            field: "level",
            reason: format!("must lie in (0, 1), got {}", a.level),
        }
        .into());
    }
    let mut outcome = compute(a.stat, &sample, &opts)?;
    if !outcome.skipped.is_empty() {
        log::warn!(
            "skipped {} break indices with singular regime fits: {:?}",
            outcome.skipped.len(),
            outcome.skipped
        );
    }
    if let Some(path) = &a.critvals {
        let table = read_table(path)?;
        outcome = decide(outcome, &table, a.level)?;
    }
    if let Some(path) = &a.path_out {
        write_text(path, &path_to_csv(&outcome))?;
    }
    let report = TestReport {
        schema_version: SCHEMA_VERSION,
        stat: a.stat,
        sup: outcome.sup_value,
        k_hat: outcome.argmax_k,
        cv: outcome.critical_value,
        reject: outcome.reject,
        level: a.level,
        nu: outcome.nu,
        sided: outcome.sided,
        n_obs: outcome.n_obs,
        p: outcome.p,
        k_min: outcome.k_min,
        k_max: outcome.k_max(),
        skipped: outcome.skipped.clone(),
        provenance: provenance("test", a, Some(&serde_json::to_value(opts).unwrap())),
    };
    emit(a.out.as_deref(), &to_json_pretty(&report))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn fit(a: &FitArgs) -> CmdResult {
    let sample = read_sample_csv(&a.input)?;
    let full = ols_fit(&sample)?;
    let mut doc = json!({
        "schema_version": SCHEMA_VERSION,
        "fit": full.record(None),
        "residuals": full.residuals,
        "partial_sums": rows(&residual_partial_sums(&full)),
        "c_hat": rows(&partial_sum_covariance(&full)),
    });
    if let Some(k) = a.k {
        let split = split_fit(&sample, k)?;
        doc["pre"] = serde_json::to_value(split.fit_pre.record(Some(k))).unwrap();
        doc["post"] = serde_json::to_value(split.fit_post.record(Some(k))).unwrap();
    }
    doc["provenance"] = provenance("fit", a, None);
    emit(a.out.as_deref(), &to_json_pretty(&doc))
}

fn critvals(a: &CritvalsArgs) -> CmdResult {
    let nu = a.nu.unwrap_or(if a.kind == FunctionalKind::SupQp {
        0.15
    } else {
        0.0
    });
    let mut req = TableRequest::new(a.kind, a.p, nu)
        .reps(a.reps)
        .steps(a.steps)
        .seed(a.seed);
    req.levels = a.levels.clone();
    req.c = a.c;
    if a.kind == FunctionalKind::SupAbsLurCusum {
        req.corr = Some(a.corr.unwrap_or(0.0));
    }
    check_workers(a.workers)?;
    let table = with_workers(a.workers, || tabulate(&req))?;
    emit(a.out.as_deref(), &to_json_pretty(&table))
}

fn check_workers(workers: Option<usize>) -> CmdResult {
    if workers == Some(0) {
        return Err(Failure::Usage("--workers must be at least 1".into()));
    }
    Ok(())
}

fn write_report(
    report: &McReport,
    out: Option<&Path>,
    command: &str,
    args: &impl Serialize,
) -> CmdResult {
    emit(out, &report.to_csv())?;
    match out {
        Some(out) => {
            let prov = json!({
                "schema_version": SCHEMA_VERSION,
                "provenance": provenance(command, args, Some(&serde_json::to_value(&report.provenance).unwrap())),
                "rows": report.rows,
            });
            write_text(&sidecar(out, ".provenance.json"), &to_json_pretty(&prov))?;
            if !report.paths.is_empty() {
                write_text(&sidecar(out, ".paths.csv"), &report.paths_csv())?;
            }
        }
        None if !report.paths.is_empty() => {
            log::warn!("raw paths are only written next to --out; none written");
        }
        None => {}
    }
    Ok(())
}

fn experiment(a: &ExperimentArgs) -> CmdResult {
    check_workers(a.workers)?;
    let mut cfg = load_object(Some(&a.spec))?;
    set(&mut cfg, "master_seed", a.seed);
    set(&mut cfg, "n_reps", a.reps);
    set(&mut cfg, "level", a.level);
    set(&mut cfg, "nu", a.nu);
    set(&mut cfg, "paths_sample", a.paths_sample);
    set(
        &mut cfg,
        "table_source",
        a.critvals.clone().map(TableSource::Precomputed),
    );
    let spec: ExperimentSpec = from_config(cfg, &a.spec.display().to_string())?;
    let report = run_experiment_on(&spec, a.workers)?;
    log_failures(&report);
    write_report(&report, a.out.as_deref(), "experiment", a)
}

fn log_failures(report: &McReport) {
    for r in report.rows.iter().filter(|r| r.failed > 0) {
        log::warn!(
            "{} T={} c={} corr={} {}: {} of {} replications failed",
            r.family,
            r.t,
            r.c,
            r.corr,
            r.stat,
            r.failed,
            r.n_reps
        );
    }
}

fn distortion(a: &DistortionArgs) -> CmdResult {
    check_workers(a.workers)?;
    let mut spec = ExperimentSpec::new(
        distortion_grid(&a.c_grid, &a.corr_grid, a.t),
        a.stats.clone(),
        a.reps,
    );
    spec.level = a.level;
    spec.master_seed = a.seed;
    spec.table_source = TableSource::SimulateInline {
        n_reps: a.table_reps,
        n_steps: a.table_steps,
    };
    let report = run_experiment_on(&spec, a.workers)?;
    log_failures(&report);
    for &stat in &a.stats {
        log::info!(
            "{stat} rejection rates (rows c, columns corr {:?})",
            a.corr_grid
        );
        for &c in &a.c_grid {
            let line: Vec<String> = a
                .corr_grid
                .iter()
                .map(|&corr| format!("{:.4}", report.rate(c, corr, stat).unwrap_or(f64::NAN)))
                .collect();
            log::info!("  c = {c:>8}: {}", line.join("  "));
        }
    }
    write_report(&report, a.out.as_deref(), "distortion", a)
}
