//! Density deconvolution from two repeated noisy measurements of the same
//! latent variable, without assuming the measurement error is symmetric.
//!
//! The pipeline: empirical characteristic functions of the panel ([`cf`]),
//! the log-derivative (Kotlarski) estimator of the latent CF and its
//! baselines ([`estimators`]), block cross-validation for the bandwidth
//! ([`bandwidth`]), and Monte Carlo risk studies plus closed-form rates
//! ([`risk`]). [`config`] and [`runner`] drive batch experiments from a config
//! file; [`testkit`] holds analytic oracles shared by the test suites.

pub mod bandwidth;
pub mod cf;
pub mod config;
pub mod error;
pub mod estimators;
pub mod models;
pub mod quad;
pub mod risk;
pub mod runner;
pub mod testkit;

pub use cf::{
    analytic_cf, analytic_cf_derivative, empirical_cf_marginal, empirical_cf_partial, regularize_truncate,
    CfCurve, FreqGrid, PanelSample, Symmetry,
};
pub use error::{Error, Result};
pub use estimators::{
    density_from_cf, fourier_kernel, kotlarski_cf, li_vuong_cf, residual_cf, symmetric_cf, DensityCurve,
    Estimator, EstimatorDiagnostics, KernelKind,
};
pub use models::{sample_panel, ModelSpec, SeedSpec};
