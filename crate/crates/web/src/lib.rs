//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export returns a JSON string that the page parses. The plain Rust
//! functions underneath are tested natively.

use std::cell::RefCell;
use std::collections::HashMap;

use breaklab::break_tests::{compute, ScanOptions, StatKind};
use breaklab::dgp::{generate, DgpSpec, Family};
use breaklab::limit_lab::{
    simulate_bridge, simulate_lur_cusum_limit_detail, simulate_sup_abs_bridge, tabulate,
    FunctionalKind, TableRequest,
};
use breaklab::rng::{derive_stream, InnovCov, SeedSpec};
use breaklab::stats::{quantile_sorted, sorted};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const TABLE_REPS: usize = 4000;
const TABLE_STEPS: usize = 500;

thread_local! {
    static CVS: RefCell<HashMap<(FunctionalKind, usize), f64>> = RefCell::new(HashMap::new());
}

/// 95% critical value, simulated once per page load.
fn critical_value(kind: FunctionalKind, p: usize, nu: f64) -> Result<f64, String> {
    if let Some(v) = CVS.with(|c| c.borrow().get(&(kind, p)).copied()) {
        return Ok(v);
    }
    let table = tabulate(
        &TableRequest::new(kind, p, nu)
            .reps(TABLE_REPS)
            .steps(TABLE_STEPS),
    )
    .map_err(|e| e.to_string())?;
    let v = table.quantile(0.95).ok_or("missing 0.95 quantile")?;
    CVS.with(|c| c.borrow_mut().insert((kind, p), v));
    Ok(v)
}

#[derive(Serialize)]
struct Bridges {
    n_steps: usize,
    paths: Vec<Vec<f64>>,
    sups: Vec<f64>,
}

pub fn bridge_paths_json(n_paths: usize, n_steps: usize, seed: u64) -> Result<String, String> {
    if n_paths == 0 || n_paths > 200 || !(2..=5000).contains(&n_steps) {
        return Err("need 1..=200 paths and 2..=5000 steps".into());
    }
    let paths: Vec<Vec<f64>> = (0..n_paths as u64)
        .map(|r| simulate_bridge(n_steps, &mut derive_stream(SeedSpec::new(seed, r))).values)
        .collect();
    let sups = paths
        .iter()
        .map(|p| p.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .collect();
    Ok(serde_json::to_string(&Bridges {
        n_steps,
        paths,
        sups,
    })
    .unwrap())
}

#[derive(Serialize)]
struct StatSummary {
    k_min: usize,
    path: Vec<f64>,
    sup: f64,
    k_hat: usize,
    cv: f64,
    reject: bool,
}

#[derive(Serialize)]
struct Demo {
    y: Vec<f64>,
    regressor: Option<Vec<f64>>,
    break_index: usize,
    cusum: StatSummary,
    wald: StatSummary,
}

/// Draws a sample with a single break and scans it with CUSUM and sup-Wald.
/// `family` is `location` (`shift` moves the mean) or `predictive_lur`
/// (`shift` moves the slope on the lagged persistent regressor).
pub fn cusum_demo_json(
    family: &str,
    t: usize,
    s: f64,
    shift: f64,
    c: f64,
    corr: f64,
    seed: u64,
) -> Result<String, String> {
    let family: Family = family
        .parse()
        .map_err(|e: breaklab::BreakError| e.to_string())?;
    if !matches!(family, Family::Location | Family::PredictiveLur) {
        return Err(format!(
            "the demo supports location and predictive_lur, not {family}"
        ));
    }
    if !(10..=5000).contains(&t) {
        return Err("T must lie in 10..=5000".into());
    }
    let spec = DgpSpec::null(family, t, vec![0.0])
        .with_break(s, vec![shift])
        .with_c(c)
        .with_cov(InnovCov::with_corr(corr));
    let sample =
        generate(&spec, &mut derive_stream(SeedSpec::new(seed, 0))).map_err(|e| e.to_string())?;
    let p = sample.dim();
    let summarize = |kind: StatKind| -> Result<StatSummary, String> {
        let opts = ScanOptions::for_kind(kind);
        let out = compute(kind, &sample, &opts).map_err(|e| e.to_string())?;
        let (fk, fp) = kind.limit_functional(p);
        let cv = critical_value(fk, fp, opts.nu)?;
        Ok(StatSummary {
            k_min: out.k_min,
            sup: out.sup_value,
            k_hat: out.argmax_k,
            cv,
            reject: out.sup_value > cv,
            path: out.path,
        })
    };
    let cusum = summarize(StatKind::Cusum)?;
    let wald = summarize(StatKind::Wald)?;
    let regressor =
        (family == Family::PredictiveLur).then(|| sample.x.column(p - 1).iter().copied().collect());
    Ok(serde_json::to_string(&Demo {
        break_index: spec.break_index(),
        y: sample.y,
        regressor,
        cusum,
        wald,
    })
    .unwrap())
}

#[derive(Serialize)]
struct Histogram {
    edges: Vec<f64>,
    bridge: Vec<usize>,
    lur: Vec<usize>,
    bridge_q95: f64,
    lur_q95: f64,
    /// Share of local-to-unity draws above the bridge 95% quantile.
    lur_exceed: f64,
}

/// Histograms of sup|BB| and of the CUSUM limit under a local-to-unity
/// regressor with persistence `c` and innovation correlation `corr`.
pub fn limit_histogram_json(
    c: f64,
    corr: f64,
    reps: usize,
    n_steps: usize,
    seed: u64,
) -> Result<String, String> {
    if !(100..=50_000).contains(&reps) || !(10..=5000).contains(&n_steps) {
        return Err("need 100..=50000 draws and 10..=5000 steps".into());
    }
    if !(-1.0..=1.0).contains(&corr) {
        return Err("corr must lie in [-1, 1]".into());
    }
    let bridge: Vec<f64> = (0..reps as u64)
        .map(|r| simulate_sup_abs_bridge(0.0, n_steps, &mut derive_stream(SeedSpec::new(seed, r))))
        .collect();
    let lur: Vec<f64> = (0..reps as u64)
        .map(|r| {
            simulate_lur_cusum_limit_detail(
                c,
                corr,
                0.0,
                n_steps,
                &mut derive_stream(SeedSpec::new(seed ^ 1, r)),
            )
            .sup
        })
        .collect();
    let (bs, ls) = (sorted(&bridge), sorted(&lur));
    let bridge_q95 = quantile_sorted(&bs, 0.95);
    let top = quantile_sorted(&bs, 0.999).max(quantile_sorted(&ls, 0.999));
    let bins = 40;
    let width = top / bins as f64;
    let count = |v: &[f64]| {
        let mut h = vec![0usize; bins];
        for x in v {
            h[((x / width) as usize).min(bins - 1)] += 1;
        }
        h
    };
    Ok(serde_json::to_string(&Histogram {
        edges: (0..=bins).map(|i| i as f64 * width).collect(),
        bridge: count(&bridge),
        lur: count(&lur),
        bridge_q95,
        lur_q95: quantile_sorted(&ls, 0.95),
        lur_exceed: lur.iter().filter(|&&x| x > bridge_q95).count() as f64 / reps as f64,
    })
    .unwrap())
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn bridge_paths(n_paths: usize, n_steps: usize, seed: u32) -> Result<String, JsError> {
    js(bridge_paths_json(n_paths, n_steps, seed as u64))
}

#[wasm_bindgen]
pub fn cusum_demo(
    family: &str,
    t: usize,
    s: f64,
    shift: f64,
    c: f64,
    corr: f64,
    seed: u32,
) -> Result<String, JsError> {
    js(cusum_demo_json(family, t, s, shift, c, corr, seed as u64))
}

#[wasm_bindgen]
pub fn limit_histogram(
    c: f64,
    corr: f64,
    reps: usize,
    n_steps: usize,
    seed: u32,
) -> Result<String, JsError> {
    js(limit_histogram_json(c, corr, reps, n_steps, seed as u64))
}
