//! Data-generating processes for the location, regression, cointegrating,
//! predictive (local-to-unity) and AR(1) models, each with an optional
//! single break at k = ⌊Ts⌋.
//!
//! Regime convention: observation t (1-based) uses `beta_pre` when t ≤ k and
//! `beta_post` when t > k. `s = 0` and `s = 1` encode "no break".
//!
//! Persistence convention: ρ = 1 + c/T, so c < 0 is near-stationary, c = 0 is
//! a unit root and c > 0 is mildly explosive.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{BreakError, Result};
use crate::rng::{draw_gaussian_pairs, std_normal, InnovCov, Innovations, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Location,
    LinearRegression,
    Cointegration,
    PredictiveLur,
    Ar1,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Location => "location",
            Family::LinearRegression => "linear_regression",
            Family::Cointegration => "cointegration",
            Family::PredictiveLur => "predictive_lur",
            Family::Ar1 => "ar1",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = BreakError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "location" => Ok(Family::Location),
            "linear_regression" | "regression" => Ok(Family::LinearRegression),
            "cointegration" => Ok(Family::Cointegration),
            "predictive_lur" | "lur" | "predictive" => Ok(Family::PredictiveLur),
            "ar1" => Ok(Family::Ar1),
            _ => Err(BreakError::Unknown {
                what: "family",
                name: s.to_string(),
            }),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn default_true() -> bool {
    true
}

/// Full parametric description of a data-generating process.
///
/// Serialized as a flat JSON object with keys `family, T, s, beta_pre,
/// beta_post, sigma_eps_sq, sigma_u_sq, sigma_eps_u, c, mu, x0` (plus
/// `intercept` for the predictive regression). A missing `beta_post` means
/// "same as `beta_pre`", i.e. the null.
///
/// Meaning of the coefficient vectors by family:
/// - `location`: `[μ]`
/// - `linear_regression`: `[intercept, slope_1, ..]`, slopes on i.i.d. N(0,1) regressors
/// - `cointegration`: `[β]` in y_t = β x_t + u_t
/// - `predictive_lur`: `[β]` in y_t = μ + β x_{t−1} + ε_t
/// - `ar1`: `[δ]` in y_t = (ρ + δ) y_{t−1} + ε_t
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub family: Family,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(default)]
    pub s: f64,
    pub beta_pre: Vec<f64>,
    #[serde(default)]
    pub beta_post: Vec<f64>,
    #[serde(flatten)]
    pub cov: InnovCov,
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub x0: f64,
    /// Predictive regression only: include an intercept column in the design.
    #[serde(default = "default_true")]
    pub intercept: bool,
}

impl DgpSpec {
    /// A no-break spec with unit-variance, uncorrelated innovations.
    pub fn null(family: Family, t: usize, beta: Vec<f64>) -> Self {
        Self {
            family,
            t,
            s: 0.0,
            beta_post: beta.clone(),
            beta_pre: beta,
            cov: InnovCov::identity(),
            c: 0.0,
            mu: 0.0,
            x0: 0.0,
            intercept: true,
        }
    }

    pub fn with_break(mut self, s: f64, beta_post: Vec<f64>) -> Self {
        self.s = s;
        self.beta_post = beta_post;
        self
    }

    pub fn with_cov(mut self, cov: InnovCov) -> Self {
        self.cov = cov;
        self
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn dim(&self) -> usize {
        self.beta_pre.len()
    }

    /// Fills an empty `beta_post` with `beta_pre`.
    pub fn normalized(mut self) -> Self {
        if self.beta_post.is_empty() {
            self.beta_post = self.beta_pre.clone();
        }
        self
    }

    pub fn is_null(&self) -> bool {
        self.beta_post.is_empty() || self.beta_pre == self.beta_post
    }

    /// ρ = 1 + c/T.
    pub fn rho(&self) -> f64 {
        1.0 + self.c / self.t as f64
    }

    /// k = ⌊Ts⌋, clamped to [1, T−1] when 0 < s < 1.
    pub fn break_index(&self) -> usize {
        let t = self.t;
        if self.s <= 0.0 {
            return 0;
        }
        if self.s >= 1.0 {
            return t;
        }
        let k = (t as f64 * self.s + 1e-9).floor() as usize;
        k.clamp(1, t - 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t < 4 {
            return Err(BreakError::spec(
                "T",
                format!("need T >= 4, got {}", self.t),
            ));
        }
        if !(0.0..=1.0).contains(&self.s) {
            return Err(BreakError::spec(
                "s",
                format!("must lie in [0, 1], got {}", self.s),
            ));
        }
        if self.beta_pre.is_empty() {
            return Err(BreakError::spec(
                "beta_pre",
                "needs at least one coefficient",
            ));
        }
        if !self.beta_post.is_empty() && self.beta_post.len() != self.beta_pre.len() {
            return Err(BreakError::spec(
                "beta_post",
                format!(
                    "dimension {} differs from beta_pre dimension {}",
                    self.beta_post.len(),
                    self.beta_pre.len()
                ),
            ));
        }
        if self
            .beta_pre
            .iter()
            .chain(&self.beta_post)
            .chain([&self.c, &self.mu, &self.x0])
            .any(|v| !v.is_finite())
        {
            return Err(BreakError::spec(
                "beta_pre",
                "all parameters must be finite",
            ));
        }
        self.cov.validate()?;
        match self.family {
            Family::LinearRegression => {}
            Family::Location | Family::Cointegration | Family::PredictiveLur | Family::Ar1 => {
                if self.dim() != 1 {
                    return Err(BreakError::spec(
                        "beta_pre",
                        format!(
                            "{} takes exactly one coefficient, got {}",
                            self.family,
                            self.dim()
                        ),
                    ));
                }
            }
        }
        if matches!(self.family, Family::PredictiveLur | Family::Ar1) && self.rho().abs() > 1.5 {
            return Err(BreakError::spec(
                "c",
                format!("|1 + c/T| = {} exceeds 1.5", self.rho().abs()),
            ));
        }
        Ok(())
    }

    fn expect_family(&self, family: Family) -> Result<()> {
        if self.family != family {
            return Err(BreakError::spec(
                "family",
                format!("expected {family}, got {}", self.family),
            ));
        }
        self.validate()
    }

    fn coef(&self, t: usize, k: usize, j: usize) -> f64 {
        if t <= k || self.beta_post.is_empty() {
            self.beta_pre[j]
        } else {
            self.beta_post[j]
        }
    }
}

/// Quantities implied by the generating spec, kept with the sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub spec: DgpSpec,
    pub k: usize,
    pub rho: Option<f64>,
    pub phi: f64,
    pub sigma_v_sq: f64,
}

impl Truth {
    fn new(spec: &DgpSpec) -> Self {
        let rho = matches!(spec.family, Family::PredictiveLur | Family::Ar1).then(|| spec.rho());
        Self {
            k: spec.break_index(),
            rho,
            phi: spec.cov.phi(),
            sigma_v_sq: spec.cov.sigma_v_sq(),
            spec: spec.clone(),
        }
    }
}

/// One dataset: response `y`, T×p design `x` and, for simulated data, the
/// generating truth and the innovations that produced it.
#[derive(Clone, Debug)]
pub struct Sample {
    pub y: Vec<f64>,
    pub x: DMatrix<f64>,
    pub truth: Option<Truth>,
    pub innovations: Option<Innovations>,
}

impl Sample {
    pub fn new(y: Vec<f64>, x: DMatrix<f64>) -> Result<Self> {
        if y.len() != x.nrows() {
            return Err(BreakError::spec(
                "x",
                format!("{} rows for {} observations", x.nrows(), y.len()),
            ));
        }
        if x.ncols() == 0 {
            return Err(BreakError::spec("x", "design needs at least one column"));
        }
        Ok(Self {
            y,
            x,
            truth: None,
            innovations: None,
        })
    }

    /// Intercept-only sample.
    pub fn location(y: Vec<f64>) -> Self {
        let x = DMatrix::from_element(y.len(), 1, 1.0);
        Self {
            y,
            x,
            truth: None,
            innovations: None,
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }
}

/// Dispatches on `spec.family`.
pub fn generate(spec: &DgpSpec, stream: &mut Stream) -> Result<Sample> {
    match spec.family {
        Family::Location => gen_location(spec, stream),
        Family::LinearRegression => gen_linear_regression(spec, stream),
        Family::Cointegration => gen_cointegration(spec, stream),
        Family::PredictiveLur => gen_predictive_lur(spec, stream),
        Family::Ar1 => gen_ar1(spec, stream),
    }
}

fn draw_eps(stream: &mut Stream, n: usize, cov: &InnovCov) -> Vec<f64> {
    let sd = cov.sigma_eps_sq.sqrt();
    (0..n).map(|_| sd * std_normal(stream)).collect()
}

fn finish(spec: &DgpSpec, y: Vec<f64>, x: DMatrix<f64>, inn: Innovations) -> Sample {
    Sample {
        y,
        x,
        truth: Some(Truth::new(spec)),
        innovations: Some(inn),
    }
}

/// y_t = μ₁1{t ≤ k} + μ₂1{t > k} + ε_t.
pub fn gen_location(spec: &DgpSpec, stream: &mut Stream) -> Result<Sample> {
    spec.expect_family(Family::Location)?;
    let eps = draw_eps(stream, spec.t, &spec.cov);
    Ok(assemble_location(spec, eps))
}

pub fn assemble_location(spec: &DgpSpec, eps: Vec<f64>) -> Sample {
    let k = spec.break_index();
    let y = eps
        .iter()
        .enumerate()
        .map(|(i, e)| spec.coef(i + 1, k, 0) + e)
        .collect();
    let x = DMatrix::from_element(spec.t, 1, 1.0);
    finish(spec, y, x, Innovations { eps, u: Vec::new() })
}

/// y_t = x_t′β_regime + ε_t with x_t = [1, x̃_t′]′ and x̃_t ~ i.i.d. N(0, I).
pub fn gen_linear_regression(spec: &DgpSpec, stream: &mut Stream) -> Result<Sample> {
    spec.expect_family(Family::LinearRegression)?;
    let p = spec.dim();
    let sd = spec.cov.sigma_eps_sq.sqrt();
    let mut x_tilde = DMatrix::zeros(spec.t, p - 1);
    let mut eps = Vec::with_capacity(spec.t);
    for i in 0..spec.t {
        for j in 0..p - 1 {
            x_tilde[(i, j)] = std_normal(stream);
        }
        eps.push(sd * std_normal(stream));
    }
    assemble_linear_regression(spec, &x_tilde, eps)
}

/// Builds the regression sample from given non-intercept regressors
/// (T × (p−1)) and errors.
pub fn assemble_linear_regression(
    spec: &DgpSpec,
    x_tilde: &DMatrix<f64>,
    eps: Vec<f64>,
) -> Result<Sample> {
    let p = spec.dim();
    if x_tilde.nrows() != spec.t || x_tilde.ncols() + 1 != p || eps.len() != spec.t {
        return Err(BreakError::spec(
            "x",
            format!(
                "regressors {}x{} / errors {} do not match T = {}, p = {p}",
                x_tilde.nrows(),
                x_tilde.ncols(),
                eps.len(),
                spec.t
            ),
        ));
    }
    let k = spec.break_index();
    let mut x = DMatrix::from_element(spec.t, p, 1.0);
    x.columns_mut(1, p - 1).copy_from(x_tilde);
    let y = (0..spec.t)
        .map(|i| {
            (0..p)
                .map(|j| x[(i, j)] * spec.coef(i + 1, k, j))
                .sum::<f64>()
                + eps[i]
        })
        .collect();
    Ok(finish(spec, y, x, Innovations { eps, u: Vec::new() }))
}

/// y_t = β x_t + u_t, x_t = x_{t−1} + ε_t, x_0 = `x0`. No intercept.
pub fn gen_cointegration(spec: &DgpSpec, stream: &mut Stream) -> Result<Sample> {
    spec.expect_family(Family::Cointegration)?;
    let inn = draw_gaussian_pairs(stream, spec.t, &spec.cov)?;
    assemble_cointegration(spec, inn)
}

pub fn assemble_cointegration(spec: &DgpSpec, inn: Innovations) -> Result<Sample> {
    check_innovations(spec, &inn)?;
    let k = spec.break_index();
    let mut x = DMatrix::zeros(spec.t, 1);
    let mut y = Vec::with_capacity(spec.t);
    let mut level = spec.x0;
    for i in 0..spec.t {
        level += inn.eps[i];
        x[(i, 0)] = level;
        y.push(spec.coef(i + 1, k, 0) * level + inn.u[i]);
    }
    Ok(finish(spec, y, x, inn))
}

/// y_t = μ + β x_{t−1} + ε_t, x_t = ρ x_{t−1} + u_t with ρ = 1 + c/T.
///
/// x_0, …, x_T are generated so that the design row for y_t holds x_{t−1}
/// and the sample keeps exactly T observations.
pub fn gen_predictive_lur(spec: &DgpSpec, stream: &mut Stream) -> Result<Sample> {
    spec.expect_family(Family::PredictiveLur)?;
    let inn = draw_gaussian_pairs(stream, spec.t, &spec.cov)?;
    assemble_predictive_lur(spec, inn)
}

pub fn assemble_predictive_lur(spec: &DgpSpec, inn: Innovations) -> Result<Sample> {
    check_innovations(spec, &inn)?;
    let k = spec.break_index();
    let rho = spec.rho();
    let cols = if spec.intercept { 2 } else { 1 };
    let mut x = DMatrix::from_element(spec.t, cols, 1.0);
    let mut y = Vec::with_capacity(spec.t);
    let mut lagged = spec.x0;
    for i in 0..spec.t {
        x[(i, cols - 1)] = lagged;
        y.push(spec.mu + spec.coef(i + 1, k, 0) * lagged + inn.eps[i]);
        lagged = rho * lagged + inn.u[i];
    }
    Ok(finish(spec, y, x, inn))
}

/// y_t = (ρ + δ_regime) y_{t−1} + ε_t with y_0 = `x0`; design column y_{t−1}.
pub fn gen_ar1(spec: &DgpSpec, stream: &mut Stream) -> Result<Sample> {
    spec.expect_family(Family::Ar1)?;
    let eps = draw_eps(stream, spec.t, &spec.cov);
    let k = spec.break_index();
    let rho = spec.rho();
    let mut x = DMatrix::zeros(spec.t, 1);
    let mut y = Vec::with_capacity(spec.t);
    let mut lagged = spec.x0;
    for (i, e) in eps.iter().enumerate() {
        x[(i, 0)] = lagged;
        let yt = (rho + spec.coef(i + 1, k, 0)) * lagged + e;
        y.push(yt);
        lagged = yt;
    }
    Ok(finish(spec, y, x, Innovations { eps, u: Vec::new() }))
}

fn check_innovations(spec: &DgpSpec, inn: &Innovations) -> Result<()> {
    if inn.eps.len() != spec.t || inn.u.len() != spec.t {
        return Err(BreakError::spec(
            "T",
            format!(
                "innovation lengths ({}, {}) differ from T = {}",
                inn.eps.len(),
                inn.u.len(),
                spec.t
            ),
        ));
    }
    Ok(())
}
