//! OLS machinery shared by all statistics: full-sample and split-sample
//! fits, residual partial sums and their second-moment matrix.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dgp::Sample;
use crate::error::{BreakError, Result};

/// Relative tolerance for declaring a design column dependent on the
/// preceding ones: |R_jj| ≤ tol · ‖X_j‖ in the QR factor.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct OlsFit {
    pub beta_hat: DVector<f64>,
    pub residuals: Vec<f64>,
    /// Σ û² / T.
    pub sigma_hat_sq: f64,
    /// X′X.
    pub xtx: DMatrix<f64>,
    /// The fitted design, kept for the weighted partial sums Σ x_j û_j.
    pub design: DMatrix<f64>,
    /// ‖y‖², the scale against which a zero residual variance is judged.
    pub y_norm_sq: f64,
}

impl OlsFit {
    pub fn n_obs(&self) -> usize {
        self.residuals.len()
    }

    pub fn dim(&self) -> usize {
        self.beta_hat.len()
    }

    pub fn rss(&self) -> f64 {
        self.residuals.iter().map(|e| e * e).sum()
    }

    /// Residuals vanish relative to the data: ‖û‖ ≤ 1e-10 ‖y‖.
    pub fn is_degenerate(&self) -> bool {
        is_degenerate(self.rss(), self.y_norm_sq)
    }

    pub fn record(&self, k: Option<usize>) -> FitRecord {
        FitRecord {
            beta_hat: self.beta_hat.iter().copied().collect(),
            sigma_hat_sq: self.sigma_hat_sq,
            k,
        }
    }
}

/// JSON export of a fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub beta_hat: Vec<f64>,
    pub sigma_hat_sq: f64,
    pub k: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct SplitFit {
    pub k: usize,
    pub fit_pre: OlsFit,
    pub fit_post: OlsFit,
    pub pooled_null_fit: OlsFit,
}

pub fn ols_fit(sample: &Sample) -> Result<OlsFit> {
    ols_fit_parts(&sample.x, &sample.y)
}

pub fn ols_fit_parts(x: &DMatrix<f64>, y: &[f64]) -> Result<OlsFit> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(BreakError::spec(
            "y",
            format!("{} observations for a design with {n} rows", y.len()),
        ));
    }
    if n < p {
        return Err(BreakError::Singular { column: n });
    }
    let qr = x.clone().qr();
    let r = qr.r();
    for j in 0..p {
        let norm = x.column(j).norm();
        if norm == 0.0 || r[(j, j)].abs() <= RANK_TOL * norm {
            return Err(BreakError::Singular { column: j });
        }
    }
    let yv = DVector::from_column_slice(y);
    let qty = qr.q().transpose() * &yv;
    let beta_hat = r
        .solve_upper_triangular(&qty)
        .ok_or(BreakError::Singular { column: p - 1 })?;
    let fitted = x * &beta_hat;
    let residuals: Vec<f64> = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    let sigma_hat_sq = residuals.iter().map(|e| e * e).sum::<f64>() / n as f64;
    Ok(OlsFit {
        beta_hat,
        residuals,
        sigma_hat_sq,
        xtx: x.transpose() * x,
        design: x.clone(),
        y_norm_sq: yv.norm_squared(),
    })
}

pub(crate) fn is_degenerate(rss: f64, y_norm_sq: f64) -> bool {
    rss.is_nan() || rss <= 1e-20 * y_norm_sq
}

/// Separate OLS on rows 1..k and k+1..T plus the pooled fit.
pub fn split_fit(sample: &Sample, k: usize) -> Result<SplitFit> {
    let (n, p) = sample.x.shape();
    if k < p || k + p > n {
        return Err(BreakError::BreakIndex {
            k,
            min: p,
            max: n.saturating_sub(p),
        });
    }
    let fit_pre = ols_fit_parts(&sample.x.rows(0, k).into_owned(), &sample.y[..k])?;
    let fit_post = ols_fit_parts(&sample.x.rows(k, n - k).into_owned(), &sample.y[k..])?;
    let pooled_null_fit = ols_fit(sample)?;
    Ok(SplitFit {
        k,
        fit_pre,
        fit_post,
        pooled_null_fit,
    })
}

/// Ŝ_t = Σ_{j≤t} x_j û_j as a T×p matrix (row t holds Ŝ_t′).
pub fn residual_partial_sums(fit: &OlsFit) -> DMatrix<f64> {
    let (n, p) = fit.design.shape();
    let mut out = DMatrix::zeros(n, p);
    let mut acc = vec![0.0; p];
    for t in 0..n {
        for (j, a) in acc.iter_mut().enumerate() {
            *a += fit.design[(t, j)] * fit.residuals[t];
            out[(t, j)] = *a;
        }
    }
    out
}

/// Ĉ = T⁻² Σ_t Ŝ_t Ŝ_t′.
pub fn partial_sum_covariance(fit: &OlsFit) -> DMatrix<f64> {
    let s = residual_partial_sums(fit);
    let n = fit.n_obs() as f64;
    s.transpose() * &s / (n * n)
}

/// Cholesky factor of a symmetric positive definite Gram matrix that
/// reports the first column whose pivot falls below `tol` times its
/// diagonal entry.
#[derive(Clone, Debug)]
pub(crate) struct SpdFactor {
    l: DMatrix<f64>,
}

impl SpdFactor {
    pub(crate) fn new(g: &DMatrix<f64>, tol: f64) -> Result<Self> {
        let p = g.nrows();
        let mut l = DMatrix::zeros(p, p);
        for j in 0..p {
            let mut d = g[(j, j)];
            for m in 0..j {
                d -= l[(j, m)] * l[(j, m)];
            }
            if d.is_nan() || d <= tol * g[(j, j)].abs() || g[(j, j)] <= 0.0 {
                return Err(BreakError::Singular { column: j });
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in j + 1..p {
                let mut v = g[(i, j)];
                for m in 0..j {
                    v -= l[(i, m)] * l[(j, m)];
                }
                l[(i, j)] = v / djj;
            }
        }
        Ok(Self { l })
    }

    pub(crate) fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let z = self.l.solve_lower_triangular(b).expect("nonzero pivots");
        self.l
            .tr_solve_lower_triangular(&z)
            .expect("nonzero pivots")
    }

    pub(crate) fn inverse(&self) -> DMatrix<f64> {
        let p = self.l.nrows();
        let mut inv = DMatrix::identity(p, p);
        for j in 0..p {
            let col = self.solve(&inv.column(j).into_owned());
            inv.set_column(j, &col);
        }
        inv
    }
}
