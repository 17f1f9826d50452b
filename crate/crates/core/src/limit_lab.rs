//! Simulated limit processes on a uniform grid 0, 1/n, …, 1 and the
//! functionals whose quantiles serve as critical values.
//!
//! - Brownian motion W and bridge BB(s) = W(s) − sW(1)
//! - Q_p(π) = ‖BB_p(π)‖² / (π(1 − π)), the squared standardized tied-down
//!   Bessel process, and its sup over [ν, 1 − ν]
//! - Ornstein–Uhlenbeck J_c(r) = ∫₀ʳ e^{(r−s)c} dB(s) by exact recursion
//! - the CUSUM limit under a local-to-unity regressor, with its J̃(c; r)
//!   correction term
//! - the cointegrating-regression t-statistic limit
//! - ∫₀¹ ‖BB_p(r)‖² dr (Cramér–von Mises; trace of P_p)
//!
//! Stochastic integrals are left-point (Itô) sums; continuous suprema are
//! maxima over the grid points inside the trimmed interval.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{BreakError, Result};
use crate::par::map_indexed;
use crate::rng::{derive_stream, std_normal, SeedSpec, Stream};
use crate::stats::quantile_sorted;
use crate::SCHEMA_VERSION;

pub const DEFAULT_STEPS: usize = 2000;

/// Lower bound for ∫ J² and ∫ W² denominators.
const DENOM_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct PathGrid {
    pub n_steps: usize,
    /// n_steps + 1 values at 0, 1/n, …, 1.
    pub values: Vec<f64>,
}

impl PathGrid {
    pub fn dt(&self) -> f64 {
        1.0 / self.n_steps as f64
    }

    pub fn at_fraction(&self, s: f64) -> f64 {
        self.values[(s * self.n_steps as f64).round() as usize]
    }
}

/// Grid indices i with i/n in [ν, 1 − ν].
pub fn grid_range(n_steps: usize, nu: f64) -> (usize, usize) {
    let n = n_steps as f64;
    let lo = (nu * n - 1e-9).ceil().max(0.0) as usize;
    let hi = ((1.0 - nu) * n + 1e-9).floor().min(n) as usize;
    (lo, hi)
}

pub fn simulate_brownian(n_steps: usize, stream: &mut Stream) -> PathGrid {
    let sd = (1.0 / n_steps as f64).sqrt();
    let mut values = Vec::with_capacity(n_steps + 1);
    let mut w = 0.0;
    values.push(w);
    for _ in 0..n_steps {
        w += sd * std_normal(stream);
        values.push(w);
    }
    PathGrid { n_steps, values }
}

/// Pins a Brownian path: BB(i/n) = W(i/n) − (i/n) W(1).
pub fn pin(w: &PathGrid) -> PathGrid {
    let n = w.n_steps;
    let end = w.values[n];
    let mut values: Vec<f64> = w
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| v - i as f64 / n as f64 * end)
        .collect();
    values[n] = 0.0;
    PathGrid { n_steps: n, values }
}

pub fn simulate_bridge(n_steps: usize, stream: &mut Stream) -> PathGrid {
    assert!(n_steps >= 2, "need at least two grid steps");
    pin(&simulate_brownian(n_steps, stream))
}

/// sup |BB| over grid points in [ν, 1 − ν].
pub fn simulate_sup_abs_bridge(nu: f64, n_steps: usize, stream: &mut Stream) -> f64 {
    let bb = simulate_bridge(n_steps, stream);
    let (lo, hi) = grid_range(n_steps, nu);
    bb.values[lo..=hi].iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Q_p(π) on the grid for p independent bridges; NaN where π ∈ {0, 1}.
pub fn qp_path(bridges: &[PathGrid]) -> Vec<f64> {
    let n = bridges[0].n_steps;
    (0..=n)
        .map(|i| {
            let pi = i as f64 / n as f64;
            if i == 0 || i == n {
                return f64::NAN;
            }
            let ss: f64 = bridges.iter().map(|b| b.values[i] * b.values[i]).sum();
            ss / (pi * (1.0 - pi))
        })
        .collect()
}

/// One draw of sup_{π ∈ [ν, 1−ν]} Q_p(π).
pub fn simulate_qp_sup(p: usize, nu: f64, n_steps: usize, stream: &mut Stream) -> f64 {
    let bridges: Vec<PathGrid> = (0..p).map(|_| simulate_bridge(n_steps, stream)).collect();
    let q = qp_path(&bridges);
    let (lo, hi) = grid_range(n_steps, nu);
    q[lo.max(1)..=hi.min(n_steps - 1)]
        .iter()
        .fold(0.0, |m, v| m.max(*v))
}

/// Per-step OU coefficients (e^{cΔ}, Var η) with Var η = (e^{2cΔ} − 1)/(2c),
/// or Δ when c = 0.
pub fn ou_step(c: f64, dt: f64) -> (f64, f64) {
    let decay = (c * dt).exp();
    let var = if c == 0.0 {
        dt
    } else {
        (2.0 * c * dt).exp_m1() / (2.0 * c)
    };
    (decay, var)
}

/// Continues an OU path from `start` for `steps` steps of width `dt`.
/// Returns the `steps` new values (the start is not repeated).
pub fn extend_ou(start: f64, c: f64, dt: f64, steps: usize, stream: &mut Stream) -> Vec<f64> {
    let (decay, var) = ou_step(c, dt);
    let sd = var.sqrt();
    let mut j = start;
    (0..steps)
        .map(|_| {
            j = decay * j + sd * std_normal(stream);
            j
        })
        .collect()
}

/// J_c on [0, 1] with J_c(0) = 0.
pub fn simulate_ou(c: f64, n_steps: usize, stream: &mut Stream) -> PathGrid {
    let mut values = Vec::with_capacity(n_steps + 1);
    values.push(0.0);
    values.extend(extend_ou(0.0, c, 1.0 / n_steps as f64, n_steps, stream));
    PathGrid { n_steps, values }
}

/// One draw of the CUSUM limit under a local-to-unity regressor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LurCusumDraw {
    /// sup_r |[W(r) − rW(1)] − [J̃(c; r) − rJ̃(c; 1)]|
    pub sup: f64,
    /// J̃(c; 1)
    pub correction_at_one: f64,
}

/// sup over the full grid of the contaminated bridge. See
/// [`simulate_lur_cusum_limit_detail`].
pub fn simulate_lur_cusum_limit(c: f64, corr: f64, n_steps: usize, stream: &mut Stream) -> f64 {
    simulate_lur_cusum_limit_detail(c, corr, 0.0, n_steps, stream).sup
}

/// The bridge term is driven by B_ε, J_c by B_u, both standardized, with
/// corr(dB_ε, dB_u) = `corr`. The correction is
/// J̃(c; r) = (∫₀ʳ J_c dB_u / ∫₀¹ J_c² ds) · ∫₀ʳ J_c ds.
/// The sup runs over grid points in [ν, 1 − ν].
pub fn simulate_lur_cusum_limit_detail(
    c: f64,
    corr: f64,
    nu: f64,
    n_steps: usize,
    stream: &mut Stream,
) -> LurCusumDraw {
    let corr = corr.clamp(-1.0, 1.0);
    let dt = 1.0 / n_steps as f64;
    let sd = dt.sqrt();
    let d_eps: Vec<f64> = (0..n_steps).map(|_| sd * std_normal(stream)).collect();
    let orth = (1.0 - corr * corr).sqrt();
    let d_u: Vec<f64> = d_eps
        .iter()
        .map(|de| corr * de + orth * sd * std_normal(stream))
        .collect();

    let (decay, var) = ou_step(c, dt);
    let gain = (var / dt).sqrt();
    // left-point sums: integrand at i, increment over [i, i+1)
    let mut j = 0.0;
    let mut ito = vec![0.0; n_steps + 1];
    let mut area = vec![0.0; n_steps + 1];
    let mut energy = 0.0;
    for i in 0..n_steps {
        ito[i + 1] = ito[i] + j * d_u[i];
        area[i + 1] = area[i] + j * dt;
        energy += j * j * dt;
        j = decay * j + gain * d_u[i];
    }
    let energy = energy.max(DENOM_FLOOR);
    let tilde = |i: usize| ito[i] / energy * area[i];
    let tilde_one = tilde(n_steps);

    let w_end: f64 = d_eps.iter().sum();
    let (lo, hi) = grid_range(n_steps, nu);
    let mut w = 0.0;
    let mut sup: f64 = 0.0;
    for i in 0..=n_steps {
        if i > 0 {
            w += d_eps[i - 1];
        }
        if i < lo || i > hi {
            continue;
        }
        let r = i as f64 / n_steps as f64;
        let bridge = if i == n_steps { 0.0 } else { w - r * w_end };
        let value = bridge - (tilde(i) - r * tilde_one);
        sup = sup.max(value.abs());
    }
    LurCusumDraw {
        sup,
        correction_at_one: tilde_one,
    }
}

/// One draw of
/// (ρ/2)[W(1)² + 1](∫₀¹ W²)^{−1/2} + √(1 − ρ²) N(0, 1)
/// where `phi_ratio` = ρ = φ σ_ε / σ_u = σ_uε / (σ_ε σ_u), so that
/// σ_v / σ_u = √(1 − ρ²). The normal is drawn after the Wiener path.
pub fn simulate_cointegration_tstat_limit(
    phi_ratio: f64,
    n_steps: usize,
    stream: &mut Stream,
) -> f64 {
    let w = simulate_brownian(n_steps, stream);
    let dt = w.dt();
    // trapezoid; W(0) = 0
    let n = w.n_steps;
    let energy =
        (w.values[1..n].iter().map(|v| v * v).sum::<f64>() + 0.5 * w.values[n] * w.values[n]) * dt;
    let end = w.values[n];
    let z = std_normal(stream);
    let bias = 0.5 * phi_ratio * (end * end + 1.0) / energy.max(DENOM_FLOOR).sqrt();
    bias + (1.0 - phi_ratio * phi_ratio).max(0.0).sqrt() * z
}

/// ∫₀¹ ‖BB_p(r)‖² dr, the trace of P_p, by trapezoid quadrature.
pub fn simulate_cvm_trace(p: usize, n_steps: usize, stream: &mut Stream) -> f64 {
    (0..p)
        .map(|_| {
            let bb = simulate_bridge(n_steps, stream);
            bb.values.iter().map(|v| v * v).sum::<f64>() * bb.dt()
        })
        .sum()
}

/// ∫₀¹ BB(r)² dr.
pub fn simulate_cvm_p1(n_steps: usize, stream: &mut Stream) -> f64 {
    simulate_cvm_trace(1, n_steps, stream)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionalKind {
    SupAbsBB,
    SupQp,
    SupAbsLurCusum,
    CvmP1Trace,
}

impl FunctionalKind {
    pub fn name(self) -> &'static str {
        match self {
            FunctionalKind::SupAbsBB => "supabsbb",
            FunctionalKind::SupQp => "supqp",
            FunctionalKind::SupAbsLurCusum => "supabslurcusum",
            FunctionalKind::CvmP1Trace => "cvmp1trace",
        }
    }
}

impl std::str::FromStr for FunctionalKind {
    type Err = BreakError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "supabsbb" => Ok(FunctionalKind::SupAbsBB),
            "supqp" => Ok(FunctionalKind::SupQp),
            "supabslurcusum" | "lurcusum" => Ok(FunctionalKind::SupAbsLurCusum),
            "cvmp1trace" | "cvm" => Ok(FunctionalKind::CvmP1Trace),
            _ => Err(BreakError::Unknown {
                what: "functional kind",
                name: s.to_string(),
            }),
        }
    }
}

impl std::fmt::Display for FunctionalKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableMeta {
    pub n_steps: usize,
    pub n_reps: usize,
    pub seed: u64,
}

/// Simulated quantiles of a limit functional. `levels` maps quantile
/// levels (as strings, e.g. `"0.95"`) to values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalValueTable {
    pub schema_version: u32,
    pub kind: FunctionalKind,
    pub p: usize,
    pub nu: f64,
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corr: Option<f64>,
    pub levels: BTreeMap<String, f64>,
    pub meta: TableMeta,
}

impl CriticalValueTable {
    /// Value at quantile level `level`; exact match only.
    pub fn quantile(&self, level: f64) -> Option<f64> {
        self.levels.iter().find_map(|(key, v)| {
            let l: f64 = key.parse().ok()?;
            ((l - level).abs() < 1e-9).then_some(*v)
        })
    }
}

/// `0.9` → `"0.90"`, `0.975` → `"0.975"`.
pub fn level_key(level: f64) -> String {
    let s = format!("{level:.6}");
    let trimmed = s.trim_end_matches('0');
    let decimals = trimmed.split('.').nth(1).map_or(0, str::len);
    if decimals < 2 {
        format!("{level:.2}")
    } else {
        trimmed.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRequest {
    pub kind: FunctionalKind,
    pub p: usize,
    pub nu: f64,
    pub c: Option<f64>,
    pub corr: Option<f64>,
    pub levels: Vec<f64>,
    pub n_reps: usize,
    pub n_steps: usize,
    pub seed: u64,
}

impl TableRequest {
    pub fn new(kind: FunctionalKind, p: usize, nu: f64) -> Self {
        Self {
            kind,
            p,
            nu,
            c: None,
            corr: None,
            levels: vec![0.90, 0.95, 0.99],
            n_reps: 100_000,
            n_steps: DEFAULT_STEPS,
            seed: crate::rng::DEFAULT_SEED,
        }
    }

    pub fn reps(mut self, n_reps: usize) -> Self {
        self.n_reps = n_reps;
        self
    }

    pub fn steps(mut self, n_steps: usize) -> Self {
        self.n_steps = n_steps;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_reps < 1000 {
            return Err(BreakError::spec(
                "n_reps",
                format!("need at least 1000 draws, got {}", self.n_reps),
            ));
        }
        if self.n_steps < 2 {
            return Err(BreakError::spec("n_steps", "need at least 2 grid steps"));
        }
        if self.p == 0 {
            return Err(BreakError::spec("p", "dimension must be at least 1"));
        }
        if !(0.0..0.5).contains(&self.nu) {
            return Err(BreakError::spec(
                "nu",
                format!("must lie in [0, 0.5), got {}", self.nu),
            ));
        }
        if self.kind == FunctionalKind::SupQp && self.nu <= 0.0 {
            return Err(BreakError::spec("nu", "sup Q_p needs nu > 0"));
        }
        if self.kind == FunctionalKind::SupAbsLurCusum && self.c.is_none() {
            return Err(BreakError::spec(
                "c",
                "the local-to-unity functional needs c",
            ));
        }
        if self.levels.is_empty() || self.levels.iter().any(|l| !(0.0 < *l && *l < 1.0)) {
            return Err(BreakError::spec(
                "levels",
                "quantile levels must lie in (0, 1)",
            ));
        }
        Ok(())
    }

    /// One draw of the requested functional.
    pub fn draw(&self, stream: &mut Stream) -> f64 {
        match self.kind {
            FunctionalKind::SupAbsBB => simulate_sup_abs_bridge(self.nu, self.n_steps, stream),
            FunctionalKind::SupQp => simulate_qp_sup(self.p, self.nu, self.n_steps, stream),
            FunctionalKind::SupAbsLurCusum => {
                simulate_lur_cusum_limit_detail(
                    self.c.unwrap_or(0.0),
                    self.corr.unwrap_or(0.0),
                    self.nu,
                    self.n_steps,
                    stream,
                )
                .sup
            }
            FunctionalKind::CvmP1Trace => simulate_cvm_trace(self.p, self.n_steps, stream),
        }
    }

    /// All `n_reps` draws in replication order; draw r uses stream r.
    pub fn draws(&self) -> Vec<f64> {
        map_indexed(self.n_reps as u64, |r| {
            self.draw(&mut derive_stream(SeedSpec::new(self.seed, r)))
        })
    }
}

/// Empirical quantiles of `req.n_reps` independent draws.
pub fn tabulate(req: &TableRequest) -> Result<CriticalValueTable> {
    req.validate()?;
    let mut draws = req.draws();
    draws.sort_by(f64::total_cmp);
    let levels = req
        .levels
        .iter()
        .map(|&l| (level_key(l), quantile_sorted(&draws, l)))
        .collect();
    Ok(CriticalValueTable {
        schema_version: SCHEMA_VERSION,
        kind: req.kind,
        p: req.p,
        nu: req.nu,
        c: req.c,
        corr: req.corr,
        levels,
        meta: TableMeta {
            n_steps: req.n_steps,
            n_reps: req.n_reps,
            seed: req.seed,
        },
    })
}
