//! Structural-break statistics (OLS-CUSUM, CUSUM of squares, mean-shift Z,
//! sup-Wald), the data-generating processes they are studied under
//! (stationary, cointegrated and local-to-unity regressors), simulated
//! Brownian-bridge limit functionals, and a reproducible Monte Carlo engine
//! for size and power studies.

pub mod dgp;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod io;
pub mod limit_lab;
pub mod par;
pub mod rng;
pub mod stats;

pub use break_tests::{
    compute, cusum_path, cusum_sq_path, decide, wald_path, z_mean_path, OnSingular, ScanOptions,
    Sided, SquaresScale, StatKind, TestOutcome,
};
pub use dgp::{generate, DgpSpec, Family, Sample};
pub use error::{BreakError, Result};
pub use estimators::{
    ols_fit, partial_sum_covariance, residual_partial_sums, split_fit, OlsFit, SplitFit,
};
pub use experiments::{
    run_experiment, size_distortion_study, ExperimentSpec, McReport, TableSource,
};
pub use limit_lab::{tabulate, CriticalValueTable, FunctionalKind, TableRequest};
pub use rng::{derive_stream, InnovCov, SeedSpec};

/// Version stamped into every JSON document and bumped on schema changes.
pub const SCHEMA_VERSION: u32 = 1;
