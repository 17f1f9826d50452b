//! Monte Carlo size and power studies.
//!
//! Replication r of every grid cell draws from stream `(master_seed, r)`, so
//! cells share common random numbers and the report is identical for any
//! number of worker threads. Critical values simulated inline use a seed
//! forked from the master seed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::break_tests::{compute, ScanOptions, StatKind, TestOutcome};
use crate::dgp::{generate, DgpSpec, Family, Sample};
use crate::error::{BreakError, Result};
use crate::io::read_table;
use crate::limit_lab::{tabulate, CriticalValueTable, FunctionalKind, TableRequest, DEFAULT_STEPS};
use crate::par::{map_indexed, with_workers};
use crate::rng::{derive_stream, fork_seed, InnovCov, SeedSpec, DEFAULT_SEED};
use crate::stats::{quantile_sorted, sorted};

const TABLE_SEED_TAG: u64 = 0x7AB1E;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableSource {
    /// Critical-value table files (JSON), one per (functional, p, ν).
    Precomputed(Vec<PathBuf>),
    SimulateInline {
        n_reps: usize,
        n_steps: usize,
    },
}

impl Default for TableSource {
    fn default() -> Self {
        TableSource::SimulateInline {
            n_reps: 20_000,
            n_steps: DEFAULT_STEPS,
        }
    }
}

fn default_level() -> f64 {
    0.05
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub dgp_grid: Vec<DgpSpec>,
    pub stat_kinds: Vec<StatKind>,
    /// Trimming for every statistic; `None` uses each statistic's default.
    #[serde(default)]
    pub nu: Option<f64>,
    /// Nominal significance level.
    #[serde(default = "default_level")]
    pub level: f64,
    pub n_reps: usize,
    #[serde(default)]
    pub table_source: TableSource,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    /// Number of raw statistic paths to keep per cell and statistic.
    #[serde(default)]
    pub paths_sample: usize,
}

impl ExperimentSpec {
    pub fn new(dgp_grid: Vec<DgpSpec>, stat_kinds: Vec<StatKind>, n_reps: usize) -> Self {
        Self {
            dgp_grid,
            stat_kinds,
            nu: None,
            level: default_level(),
            n_reps,
            table_source: TableSource::default(),
            master_seed: DEFAULT_SEED,
            paths_sample: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_reps < 100 {
            return Err(BreakError::spec(
                "n_reps",
                format!("need at least 100 replications, got {}", self.n_reps),
            ));
        }
        if self.dgp_grid.is_empty() {
            return Err(BreakError::spec("dgp_grid", "empty grid"));
        }
        if self.stat_kinds.is_empty() {
            return Err(BreakError::spec("stat_kinds", "no statistics requested"));
        }
        if !(0.0 < self.level && self.level < 1.0) {
            return Err(BreakError::spec(
                "level",
                format!("must lie in (0, 1), got {}", self.level),
            ));
        }
        for dgp in &self.dgp_grid {
            dgp.validate()?;
        }
        Ok(())
    }

    pub fn options(&self, kind: StatKind) -> ScanOptions {
        let opts = ScanOptions::for_kind(kind);
        match self.nu {
            Some(nu) => opts.with_nu(nu),
            None => opts,
        }
    }
}

/// Number of design columns the generator produces for `spec`.
pub fn design_dim(spec: &DgpSpec) -> usize {
    match spec.family {
        Family::LinearRegression => spec.dim(),
        Family::PredictiveLur => 1 + spec.intercept as usize,
        Family::Location | Family::Cointegration | Family::Ar1 => 1,
    }
}

/// Sup of one statistic in one replication, with the outcome kept for
/// path dumps. `None` marks a failed replication.
type RepResult = Option<(f64, Option<TestOutcome>)>;

type TableKey = (FunctionalKind, usize, u64);

fn key(kind: FunctionalKind, p: usize, nu: f64) -> TableKey {
    // ν is keyed at 1e-9 resolution so 0.15 from JSON and code agree
    (kind, p, (nu * 1e9).round() as u64)
}

/// Critical-value tables indexed by (functional, p, ν).
#[derive(Clone, Debug, Default)]
pub struct TableSet {
    tables: BTreeMap<TableKey, CriticalValueTable>,
}

impl TableSet {
    pub fn insert(&mut self, table: CriticalValueTable) {
        self.tables
            .insert(key(table.kind, table.p, table.nu), table);
    }

    pub fn get(&self, kind: FunctionalKind, p: usize, nu: f64) -> Option<&CriticalValueTable> {
        self.tables.get(&key(kind, p, nu))
    }

    pub fn critical_value(
        &self,
        stat: StatKind,
        design_p: usize,
        nu: f64,
        level: f64,
    ) -> Result<f64> {
        let (kind, p) = stat.limit_functional(design_p);
        self.get(kind, p, nu)
            .and_then(|t| t.quantile(1.0 - level))
            .ok_or_else(|| BreakError::MissingCriticalValue {
                what: format!(
                    "{stat} needs {kind} (p = {p}, nu = {nu}) at quantile {}",
                    1.0 - level
                ),
            })
    }

    pub fn iter(&self) -> impl Iterator<Item = &CriticalValueTable> {
        self.tables.values()
    }
}

/// Loads or simulates every table the experiment needs.
pub fn resolve_tables(spec: &ExperimentSpec) -> Result<TableSet> {
    let mut set = TableSet::default();
    match &spec.table_source {
        TableSource::Precomputed(paths) => {
            for path in paths {
                set.insert(read_table(path)?);
            }
        }
        TableSource::SimulateInline { n_reps, n_steps } => {
            let mut needed: Vec<TableKey> = Vec::new();
            let mut requests = Vec::new();
            for dgp in &spec.dgp_grid {
                for &stat in &spec.stat_kinds {
                    let nu = spec.options(stat).nu;
                    let (kind, p) = stat.limit_functional(design_dim(dgp));
                    let k = key(kind, p, nu);
                    if !needed.contains(&k) {
                        needed.push(k);
                        let mut levels = vec![0.90, 0.95, 0.99];
                        if !levels
                            .iter()
                            .any(|l: &f64| (l - (1.0 - spec.level)).abs() < 1e-9)
                        {
                            levels.push(1.0 - spec.level);
                        }
                        let mut req = TableRequest::new(kind, p, nu)
                            .reps(*n_reps)
                            .steps(*n_steps)
                            .seed(fork_seed(spec.master_seed, TABLE_SEED_TAG));
                        req.levels = levels;
                        requests.push(req);
                    }
                }
            }
            for req in &requests {
                set.insert(tabulate(req)?);
            }
        }
    }
    Ok(set)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub family: Family,
    #[serde(rename = "T")]
    pub t: usize,
    pub s: f64,
    pub c: f64,
    pub corr: f64,
    pub stat: StatKind,
    pub nu: f64,
    pub level: f64,
    pub critical_value: f64,
    pub n_reps: usize,
    pub failed: usize,
    pub reject_rate: f64,
    pub mc_stderr: f64,
    pub mean_sup: f64,
    pub sup_q50: f64,
    pub sup_q95: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathDump {
    pub cell: usize,
    pub rep: usize,
    pub stat: StatKind,
    pub k_min: usize,
    pub path: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub rows: Vec<McRow>,
    pub provenance: ExperimentSpec,
    #[serde(default)]
    pub paths: Vec<PathDump>,
}

pub const REPORT_HEADER: &str =
    "family,T,s,c,corr,stat,nu,level,n_reps,failed,reject_rate,mc_se,sup_q50,sup_q95";

impl McReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.family,
                r.t,
                r.s,
                r.c,
                r.corr,
                r.stat,
                r.nu,
                r.level,
                r.n_reps,
                r.failed,
                r.reject_rate,
                r.mc_stderr,
                r.sup_q50,
                r.sup_q95
            );
        }
        out
    }

    pub fn paths_csv(&self) -> String {
        let mut out = String::from("cell,rep,stat,k,value\n");
        for d in &self.paths {
            for (i, v) in d.path.iter().enumerate() {
                let _ = writeln!(out, "{},{},{},{},{}", d.cell, d.rep, d.stat, d.k_min + i, v);
            }
        }
        out
    }

    /// Rejection rate of `stat` in the first cell with persistence `c` and
    /// innovation correlation `corr`.
    pub fn rate(&self, c: f64, corr: f64, stat: StatKind) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.stat == stat && (r.c - c).abs() < 1e-12 && (r.corr - corr).abs() < 1e-12)
            .map(|r| r.reject_rate)
    }
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<McReport> {
    spec.validate()?;
    let tables = resolve_tables(spec)?;
    run_experiment_with(spec, &tables, |sample, kind, opts| {
        compute(kind, sample, opts)
    })
}

/// [`run_experiment`] on a dedicated pool of `workers` threads.
pub fn run_experiment_on(spec: &ExperimentSpec, workers: Option<usize>) -> Result<McReport> {
    with_workers(workers, || run_experiment(spec))
}

/// The engine with a pluggable statistic. `eval` must be a pure function
/// of its inputs for the report to be reproducible.
pub fn run_experiment_with<F>(spec: &ExperimentSpec, tables: &TableSet, eval: F) -> Result<McReport>
where
    F: Fn(&Sample, StatKind, &ScanOptions) -> Result<TestOutcome> + Sync + Send,
{
    spec.validate()?;
    let mut rows = Vec::new();
    let mut paths = Vec::new();
    for (cell, dgp) in spec.dgp_grid.iter().enumerate() {
        let opts: Vec<ScanOptions> = spec.stat_kinds.iter().map(|&k| spec.options(k)).collect();
        let cvs = spec
            .stat_kinds
            .iter()
            .zip(&opts)
            .map(|(&k, o)| tables.critical_value(k, design_dim(dgp), o.nu, spec.level))
            .collect::<Result<Vec<f64>>>()?;

        let keep = spec.paths_sample as u64;
        let results: Vec<Vec<RepResult>> = map_indexed(spec.n_reps as u64, |r| {
            let mut stream = derive_stream(SeedSpec::new(spec.master_seed, r));
            let sample = match generate(dgp, &mut stream) {
                Ok(s) => s,
                Err(_) => return vec![None; spec.stat_kinds.len()],
            };
            spec.stat_kinds
                .iter()
                .zip(&opts)
                .map(|(&kind, o)| match eval(&sample, kind, o) {
                    Ok(out) if !out.sup_value.is_nan() => {
                        let sup = out.sup_value;
                        Some((sup, (r < keep).then_some(out)))
                    }
                    _ => None,
                })
                .collect()
        });

        for (j, &stat) in spec.stat_kinds.iter().enumerate() {
            let mut sups = Vec::with_capacity(spec.n_reps);
            for (r, rep) in results.iter().enumerate() {
                if let Some((sup, dump)) = &rep[j] {
                    sups.push(*sup);
                    if let Some(out) = dump {
                        paths.push(PathDump {
                            cell,
                            rep: r,
                            stat,
                            k_min: out.k_min,
                            path: out.path.clone(),
                        });
                    }
                }
            }
            rows.push(summarize(spec, dgp, stat, opts[j].nu, cvs[j], &sups));
        }
    }
    Ok(McReport {
        rows,
        provenance: spec.clone(),
        paths,
    })
}

fn summarize(
    spec: &ExperimentSpec,
    dgp: &DgpSpec,
    stat: StatKind,
    nu: f64,
    cv: f64,
    sups: &[f64],
) -> McRow {
    let ok = sups.len();
    let (rate, se, mean_sup, q50, q95) = if ok == 0 {
        (f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN)
    } else {
        let rejections = sups.iter().filter(|&&s| s > cv).count();
        let rate = rejections as f64 / ok as f64;
        let finite: Vec<f64> = sups.iter().copied().filter(|v| v.is_finite()).collect();
        let mean_sup = if finite.is_empty() {
            f64::NAN
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        };
        let s = sorted(sups);
        (
            rate,
            (rate * (1.0 - rate) / ok as f64).sqrt(),
            mean_sup,
            quantile_sorted(&s, 0.5),
            quantile_sorted(&s, 0.95),
        )
    };
    McRow {
        family: dgp.family,
        t: dgp.t,
        s: dgp.s,
        c: dgp.c,
        corr: dgp.cov.corr(),
        stat,
        nu,
        level: spec.level,
        critical_value: cv,
        n_reps: spec.n_reps,
        failed: spec.n_reps - ok,
        reject_rate: rate,
        mc_stderr: se,
        mean_sup,
        sup_q50: q50,
        sup_q95: q95,
        seed: spec.master_seed,
    }
}

/// Null predictive-regression specs (β = 0, μ = 0, unit variances) over a
/// (c, corr) grid, c-major.
pub fn distortion_grid(c_grid: &[f64], corr_grid: &[f64], t: usize) -> Vec<DgpSpec> {
    c_grid
        .iter()
        .flat_map(|&c| {
            corr_grid.iter().map(move |&corr| {
                DgpSpec::null(Family::PredictiveLur, t, vec![0.0])
                    .with_c(c)
                    .with_cov(InnovCov::with_corr(corr))
            })
        })
        .collect()
}

/// Rejection rates of stationary-world tests under local-to-unity nulls.
/// One report row per (c, corr, statistic).
pub fn size_distortion_study(
    c_grid: &[f64],
    corr_grid: &[f64],
    t: usize,
    stat_kinds: &[StatKind],
    n_reps: usize,
    seed: u64,
    table_source: TableSource,
) -> Result<McReport> {
    let mut spec = ExperimentSpec::new(
        distortion_grid(c_grid, corr_grid, t),
        stat_kinds.to_vec(),
        n_reps,
    );
    spec.master_seed = seed;
    spec.table_source = table_source;
    run_experiment(&spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::break_tests::Sided;
    use crate::limit_lab::TableMeta;

    fn fixed_tables(cv: f64) -> TableSet {
        let mut set = TableSet::default();
        for (kind, p, nu) in [
            (FunctionalKind::SupAbsBB, 1, 0.0),
            (FunctionalKind::SupQp, 1, 0.15),
        ] {
            let mut levels = BTreeMap::new();
            levels.insert("0.95".to_string(), cv);
            set.insert(CriticalValueTable {
                schema_version: crate::SCHEMA_VERSION,
                kind,
                p,
                nu,
                c: None,
                corr: None,
                levels,
                meta: TableMeta {
                    n_steps: 1,
                    n_reps: 1,
                    seed: 0,
                },
            });
        }
        set
    }

    fn location_spec(n_reps: usize) -> ExperimentSpec {
        ExperimentSpec::new(
            vec![DgpSpec::null(Family::Location, 50, vec![0.0])],
            vec![StatKind::Cusum],
            n_reps,
        )
    }

    fn constant(
        sup: f64,
    ) -> impl Fn(&Sample, StatKind, &ScanOptions) -> Result<TestOutcome> + Sync + Send {
        move |s: &Sample, kind, o: &ScanOptions| {
            Ok(TestOutcome::from_path(
                kind,
                Sided::Signed,
                o.nu,
                1,
                s.len(),
                1,
                vec![sup],
                vec![],
            ))
        }
    }

    #[test]
    fn harness_always_reject_and_accept() {
        let spec = location_spec(200);
        let tables = fixed_tables(1.358);
        let all = run_experiment_with(&spec, &tables, constant(f64::INFINITY)).unwrap();
        assert_eq!(all.rows[0].reject_rate, 1.0);
        assert_eq!(all.rows[0].mc_stderr, 0.0);
        let none = run_experiment_with(&spec, &tables, constant(0.0)).unwrap();
        assert_eq!(none.rows[0].reject_rate, 0.0);
    }

    #[test]
    fn failures_are_counted_not_dropped() {
        let spec = location_spec(100);
        let tables = fixed_tables(1.358);
        let flaky = |s: &Sample, kind, o: &ScanOptions| {
            if s.y[0] > 0.0 {
                Err(BreakError::DegenerateVariance)
            } else {
                Ok(TestOutcome::from_path(
                    kind,
                    Sided::Signed,
                    o.nu,
                    1,
                    s.len(),
                    1,
                    vec![2.0],
                    vec![],
                ))
            }
        };
        let rep = run_experiment_with(&spec, &tables, flaky).unwrap();
        let row = &rep.rows[0];
        assert!(row.failed > 20 && row.failed < 80, "{}", row.failed);
        assert_eq!(row.reject_rate, 1.0);
    }

    #[test]
    fn missing_table_is_an_error() {
        let mut spec = location_spec(100);
        spec.stat_kinds = vec![StatKind::Wald];
        spec.nu = Some(0.2);
        let err = run_experiment_with(&spec, &fixed_tables(1.0), constant(0.0)).unwrap_err();
        assert!(matches!(err, BreakError::MissingCriticalValue { .. }));
    }

    #[test]
    fn worker_count_does_not_change_report() {
        let mut spec = ExperimentSpec::new(
            vec![
                DgpSpec::null(Family::Location, 60, vec![0.0]),
                DgpSpec::null(Family::PredictiveLur, 60, vec![0.0])
                    .with_cov(InnovCov::with_corr(-0.5)),
            ],
            vec![StatKind::Cusum, StatKind::Wald],
            300,
        );
        spec.table_source = TableSource::SimulateInline {
            n_reps: 1000,
            n_steps: 100,
        };
        spec.paths_sample = 2;
        let one = run_experiment_on(&spec, Some(1)).unwrap();
        let many = run_experiment_on(&spec, Some(8)).unwrap();
        assert_eq!(one.to_csv(), many.to_csv());
        assert_eq!(one.paths_csv(), many.paths_csv());
        assert_eq!(one.paths.len(), 2 * 2 * 2);
    }

    #[test]
    fn nested_trimming_orders_rejections() {
        let spec = ExperimentSpec::new(
            vec![DgpSpec::null(Family::LinearRegression, 80, vec![0.0, 1.0])],
            vec![StatKind::Wald],
            200,
        );
        let wide = ScanOptions::for_kind(StatKind::Wald).with_nu(0.1);
        let narrow = ScanOptions::for_kind(StatKind::Wald).with_nu(0.2);
        for r in 0..spec.n_reps as u64 {
            let s = generate(&spec.dgp_grid[0], &mut derive_stream(SeedSpec::new(5, r))).unwrap();
            let a = compute(StatKind::Wald, &s, &wide).unwrap().sup_value;
            let b = compute(StatKind::Wald, &s, &narrow).unwrap().sup_value;
            assert!(b <= a);
        }
    }

    #[test]
    fn distortion_report_shape() {
        let rep = size_distortion_study(
            &[0.0, -10.0],
            &[0.0, -0.5, -0.9],
            60,
            &[StatKind::Cusum, StatKind::Wald],
            100,
            1,
            TableSource::SimulateInline {
                n_reps: 1000,
                n_steps: 100,
            },
        )
        .unwrap();
        assert_eq!(rep.rows.len(), 2 * 3 * 2);
        assert!(rep.rate(-10.0, -0.5, StatKind::Wald).is_some());
        for row in &rep.rows {
            assert!((0.0..=1.0).contains(&row.reject_rate));
            let se = (row.reject_rate * (1.0 - row.reject_rate) / row.n_reps as f64).sqrt();
            assert!((row.mc_stderr - se).abs() < 1e-15);
        }
        assert!(rep.to_csv().starts_with(REPORT_HEADER));
    }

    #[test]
    fn spec_json_defaults() {
        let json = r#"{"dgp_grid":[{"family":"location","T":100,"beta_pre":[0.0],
            "sigma_eps_sq":1.0,"sigma_u_sq":1.0,"sigma_eps_u":0.0}],
            "stat_kinds":["cusum","wald"],"n_reps":500}"#;
        let spec: ExperimentSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.level, 0.05);
        assert_eq!(spec.master_seed, DEFAULT_SEED);
        assert_eq!(spec.options(StatKind::Wald).nu, 0.15);
        assert_eq!(spec.options(StatKind::Cusum).nu, 0.0);
        assert!(matches!(
            spec.table_source,
            TableSource::SimulateInline { .. }
        ));
        let pre: TableSource = serde_json::from_str(r#"{"precomputed":["a.json"]}"#).unwrap();
        assert_eq!(pre, TableSource::Precomputed(vec![PathBuf::from("a.json")]));
    }
}
