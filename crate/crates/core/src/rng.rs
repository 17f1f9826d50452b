//! Seeded, stream-splittable randomness and correlated Gaussian innovations.
//!
//! Every Monte Carlo replication `r` draws from the ChaCha8 stream
//! `(master_seed, stream_id = r)`, so results never depend on how work is
//! scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{BreakError, Result};

/// Default master seed used by the command line when `--seed` is absent.
pub const DEFAULT_SEED: u64 = 0xC0FFEE;

/// Random stream handle. One stream belongs to one worker at a time.
pub type Stream = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub const fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }
}

/// Deterministic generator for `(master_seed, stream_id)`.
pub fn derive_stream(seed: SeedSpec) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.master_seed);
    rng.set_stream(seed.stream_id);
    rng
}

/// Derives an unrelated master seed for a sub-task (e.g. critical-value
/// tabulation inside an experiment) so that it does not share streams with
/// the data-generating draws.
pub fn fork_seed(master_seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = master_seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub fn std_normal(rng: &mut Stream) -> f64 {
    rng.sample(StandardNormal)
}

/// Covariance of the innovation pair (ε_t, u_t).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnovCov {
    #[serde(default = "one")]
    pub sigma_eps_sq: f64,
    #[serde(default = "one")]
    pub sigma_u_sq: f64,
    #[serde(default)]
    pub sigma_eps_u: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for InnovCov {
    fn default() -> Self {
        Self::identity()
    }
}

impl InnovCov {
    pub const fn identity() -> Self {
        Self {
            sigma_eps_sq: 1.0,
            sigma_u_sq: 1.0,
            sigma_eps_u: 0.0,
        }
    }

    /// Unit variances with correlation `corr`.
    pub const fn with_corr(corr: f64) -> Self {
        Self {
            sigma_eps_sq: 1.0,
            sigma_u_sq: 1.0,
            sigma_eps_u: corr,
        }
    }

    pub fn determinant(&self) -> f64 {
        self.sigma_eps_sq * self.sigma_u_sq - self.sigma_eps_u * self.sigma_eps_u
    }

    /// Zero variances are accepted (noiseless designs); negative ones and a
    /// negative determinant are not.
    pub fn validate(&self) -> Result<()> {
        let Self {
            sigma_eps_sq: a,
            sigma_u_sq: b,
            sigma_eps_u: ab,
        } = *self;
        if !(a.is_finite() && b.is_finite() && ab.is_finite()) {
            return Err(BreakError::InvalidCovariance(format!(
                "non-finite entry in ({a}, {b}, {ab})"
            )));
        }
        if a < 0.0 {
            return Err(BreakError::InvalidCovariance(format!(
                "sigma_eps_sq = {a} is negative"
            )));
        }
        if b < 0.0 {
            return Err(BreakError::InvalidCovariance(format!(
                "sigma_u_sq = {b} is negative"
            )));
        }
        let det = self.determinant();
        if det < -1e-12 * (a * b).max(f64::MIN_POSITIVE) {
            return Err(BreakError::InvalidCovariance(format!(
                "determinant {det:e} < 0 for sigma_eps_u = {ab}"
            )));
        }
        Ok(())
    }

    pub fn corr(&self) -> f64 {
        let d = (self.sigma_eps_sq * self.sigma_u_sq).sqrt();
        if d > 0.0 {
            self.sigma_eps_u / d
        } else {
            0.0
        }
    }

    /// φ = σ_uε / σ²_ε in the decomposition u_t = φ ε_t + v_t.
    pub fn phi(&self) -> f64 {
        if self.sigma_eps_sq > 0.0 {
            self.sigma_eps_u / self.sigma_eps_sq
        } else {
            0.0
        }
    }

    /// σ²_v = σ²_u − σ²_uε / σ²_ε, the variance of v_t.
    pub fn sigma_v_sq(&self) -> f64 {
        (self.sigma_u_sq - self.phi() * self.sigma_eps_u).max(0.0)
    }

    /// Lower-triangular square root `[l11, 0; l21, l22]` as `(l11, l21, l22)`.
    /// A perfectly correlated pair gets `l22 = 0`.
    pub fn cholesky(&self) -> Result<(f64, f64, f64)> {
        self.validate()?;
        let l11 = self.sigma_eps_sq.sqrt();
        let l21 = if l11 > 0.0 {
            self.sigma_eps_u / l11
        } else {
            0.0
        };
        let l22 = (self.sigma_u_sq - l21 * l21).max(0.0).sqrt();
        Ok((l11, l21, l22))
    }
}

/// Innovation sequences ε and u, index-aligned.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Innovations {
    pub eps: Vec<f64>,
    pub u: Vec<f64>,
}

impl Innovations {
    pub fn len(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }
}

/// Draws `n` pairs (ε_t, u_t) ~ N(0, cov) by transforming independent
/// standard normals with the lower-triangular root of `cov`.
pub fn draw_gaussian_pairs(stream: &mut Stream, n: usize, cov: &InnovCov) -> Result<Innovations> {
    let (l11, l21, l22) = cov.cholesky()?;
    let mut eps = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    for _ in 0..n {
        let z1 = std_normal(stream);
        let z2 = std_normal(stream);
        eps.push(l11 * z1);
        u.push(l21 * z1 + l22 * z2);
    }
    Ok(Innovations { eps, u })
}
