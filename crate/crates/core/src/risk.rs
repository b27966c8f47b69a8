//! Loss functionals, oracle and adaptive bandwidth evaluation, and Monte Carlo
//! risk studies.
//!
//! Estimates are supported on the frequency grid and taken as zero beyond
//! `u_max`. The L2 losses are therefore split into the trapezoid integral of
//! `|phi - phi_hat FK_h|^2` over the grid and the exact tail `int_{|u|>u_max}
//! |phi|^2` of the true CF.

pub mod rates;

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bandwidth::{argmin_smallest, cv_select, BandwidthSet};
use crate::cf::{empirical_cf, empirical_cf_pair, CfCurve, FreqGrid, PanelSample};
use crate::error::{Error, Result};
use crate::estimators::{
    kotlarski_from_curves, li_vuong_from_curves, residual_from_curves, symmetric_from_curves, Estimator, KernelKind,
};
use crate::models::{sample_panel, ModelSpec, SeedSpec};
use crate::quad::{mean_and_stderr, tail_integral};

pub use rates::{predicted_rate, reference_rate, MomentOrder, RateCase, RateDescriptor, RateSpec, RateTarget, ReferenceEstimator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// Squared L2 distance between densities.
    DensityL2,
    /// Squared L2 distance between characteristic functions (`2 pi` times
    /// the density loss).
    CfL2,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::DensityL2 => "density_l2",
            LossKind::CfL2 => "cf_l2",
        }
    }

    fn scale(self) -> f64 {
        match self {
            LossKind::DensityL2 => 1.0 / (2.0 * PI),
            LossKind::CfL2 => 1.0,
        }
    }
}

impl FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "density_l2" => Ok(LossKind::DensityL2),
            "cf_l2" => Ok(LossKind::CfL2),
            other => Err(Error::Parse(format!("unknown loss `{other}` (expected density_l2 or cf_l2)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthMode {
    /// Per replication, the bandwidth in the candidate set with the smallest true loss.
    Oracle,
    /// Per replication, the cross-validated bandwidth.
    Adaptive,
    Fixed(f64),
}

impl fmt::Display for BandwidthMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BandwidthMode::Oracle => f.write_str("oracle"),
            BandwidthMode::Adaptive => f.write_str("adaptive"),
            BandwidthMode::Fixed(h) => write!(f, "fixed({h})"),
        }
    }
}

impl FromStr for BandwidthMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t {
            "oracle" => return Ok(BandwidthMode::Oracle),
            "adaptive" => return Ok(BandwidthMode::Adaptive),
            _ => {}
        }
        let inner = t
            .strip_prefix("fixed(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| Error::Parse(format!("unknown bandwidth mode `{t}` (expected oracle, adaptive or fixed(h))")))?;
        let h: f64 = inner.trim().parse().map_err(|_| Error::Parse(format!("bad bandwidth in `{t}`")))?;
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Parse(format!("bandwidth in `{t}` must be positive")));
        }
        Ok(BandwidthMode::Fixed(h))
    }
}

/// A latent law and an error law under a label.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub label: String,
    pub model_x: ModelSpec,
    pub model_eps: ModelSpec,
}

impl Scenario {
    pub fn new(label: impl Into<String>, model_x: ModelSpec, model_eps: ModelSpec) -> Self {
        Scenario { label: label.into(), model_x, model_eps }
    }

    fn target(&self, estimator: Estimator) -> &ModelSpec {
        if estimator.targets_error() {
            &self.model_eps
        } else {
            &self.model_x
        }
    }
}

/// Aggregated empirical risk of one estimator in one study cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub scenario: String,
    pub estimator: Estimator,
    pub n: usize,
    pub reps: usize,
    pub bandwidth_mode: BandwidthMode,
    pub loss_kind: LossKind,
    pub risk_mean: f64,
    pub risk_stderr: f64,
    pub seed: u64,
}

impl RiskReport {
    pub const CSV_HEADER: &'static str = "scenario,estimator,n,reps,bandwidth_mode,loss_kind,risk_mean,risk_stderr,seed";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.scenario,
            self.estimator.name(),
            self.n,
            self.reps,
            self.bandwidth_mode,
            self.loss_kind.name(),
            self.risk_mean,
            self.risk_stderr,
            self.seed
        )
    }
}

pub fn write_reports_csv<W: Write>(reports: &[RiskReport], mut w: W) -> Result<()> {
    writeln!(w, "{}", RiskReport::CSV_HEADER)?;
    for r in reports {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Precomputed truth for repeated loss evaluations on one grid.
#[derive(Debug, Clone)]
pub struct TruthLoss {
    grid: FreqGrid,
    truth: Vec<Complex64>,
    weights: Vec<f64>,
    /// `int_{|u| > u_max} |phi|^2 du`.
    tail: f64,
}

impl TruthLoss {
    pub fn new(truth: &ModelSpec, grid: &FreqGrid) -> Result<Self> {
        if !truth.is_square_integrable() {
            return Err(Error::config(format!("{truth} has no square-integrable density")));
        }
        let tail = 2.0 * tail_integral(|u| truth.cf(u).norm_sqr(), grid.u_max(), 1e-12)?;
        Ok(TruthLoss {
            grid: *grid,
            truth: grid.half_points().map(|u| truth.cf(u)).collect(),
            weights: grid.even_trapezoid_weights(),
            tail,
        })
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    fn check(&self, estimate: &CfCurve) -> Result<()> {
        if *estimate.grid() != self.grid {
            return Err(Error::config("estimate and truth live on different grids"));
        }
        if !estimate.is_hermitian(1e-9) {
            return Err(Error::config("loss needs a hermitian CF estimate"));
        }
        Ok(())
    }

    /// `int |phi - phi_hat FK_h|^2 du` over the real line.
    pub fn cf_distance(&self, estimate: &CfCurve, kind: KernelKind, h: f64) -> Result<f64> {
        self.check(estimate)?;
        let inside: f64 = estimate
            .half()
            .iter()
            .zip(&self.truth)
            .zip(self.grid.half_points())
            .zip(&self.weights)
            .map(|(((&e, &t), u), &w)| w * (t - e * kind.weight(h, u)).norm_sqr())
            .sum();
        Ok(inside + self.tail)
    }

    /// `cf_distance` for every `h = 1/m` in `set`, index `m - 1`.
    pub fn cf_distance_profile(&self, estimate: &CfCurve, kind: KernelKind, set: BandwidthSet) -> Result<Vec<f64>> {
        self.check(estimate)?;
        let len = self.truth.len();
        let mut truth_sq = 0.0;
        let mut cross = Vec::with_capacity(len);
        let mut est_sq = Vec::with_capacity(len);
        for ((&e, &t), &w) in estimate.half().iter().zip(&self.truth).zip(&self.weights) {
            truth_sq += w * t.norm_sqr();
            cross.push(w * (t * e.conj()).re);
            est_sq.push(w * e.norm_sqr());
        }
        let points: Vec<f64> = self.grid.half_points().collect();
        Ok(set
            .iter()
            .map(|m| {
                let h = BandwidthSet::bandwidth(m);
                let mut acc = 0.0;
                for k in 0..len {
                    let kw = kind.weight(h, points[k]);
                    if kw == 0.0 {
                        continue;
                    }
                    acc += kw * (kw * est_sq[k] - 2.0 * cross[k]);
                }
                (truth_sq + acc).max(0.0) + self.tail
            })
            .collect())
    }
}

/// `(1/2 pi) int |phi_truth - phi_hat FK_h|^2 du`, the squared L2 distance
/// between the true density and the kernel estimate.
pub fn density_l2_loss(estimate: &CfCurve, truth: &ModelSpec, kind: KernelKind, h: f64) -> Result<f64> {
    Ok(TruthLoss::new(truth, estimate.grid())?.cf_distance(estimate, kind, h)? * LossKind::DensityL2.scale())
}

/// `int |phi_truth - phi_hat FK_h|^2 du`.
pub fn cf_l2_loss(estimate: &CfCurve, truth: &ModelSpec, kind: KernelKind, h: f64) -> Result<f64> {
    TruthLoss::new(truth, estimate.grid())?.cf_distance(estimate, kind, h)
}

/// Grid, kernel, loss and seed shared by every cell of a study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudySettings {
    pub grid: FreqGrid,
    pub kernel: KernelKind,
    pub loss: LossKind,
    pub master_seed: u64,
}

impl StudySettings {
    /// Grid `[-40, 40]` with step 0.01, gaussian kernel, density loss.
    pub fn new(master_seed: u64) -> Self {
        StudySettings {
            grid: FreqGrid::new(40.0, 0.01).expect("default grid"),
            kernel: KernelKind::Gaussian,
            loss: LossKind::DensityL2,
            master_seed,
        }
    }
}

/// Seed of a (scenario, n) cell, so cells are reproducible on their own.
pub fn cell_seed(master_seed: u64, label: &str, n: usize) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = FNV_OFFSET;
    let bytes = master_seed.to_le_bytes().into_iter().chain(label.bytes()).chain((n as u64).to_le_bytes());
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    // splitmix64 finalizer
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// One (estimator, bandwidth mode) column of a study cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arm {
    pub estimator: Estimator,
    pub mode: BandwidthMode,
}

impl Arm {
    pub fn new(estimator: Estimator, mode: BandwidthMode) -> Self {
        Arm { estimator, mode }
    }
}

/// Per-replication losses of every arm, with their aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub reports: Vec<RiskReport>,
    /// `losses[arm][rep]`.
    pub losses: Vec<Vec<f64>>,
}

/// All estimates needed by `arms`, sharing the empirical CFs.
fn estimate_all(sample: &PanelSample, grid: &FreqGrid, estimators: &[Estimator]) -> Result<Vec<(Estimator, CfCurve)>> {
    let n = sample.n();
    let (marginal, partial) = empirical_cf_pair(sample, grid);
    let mut kotlarski = None;
    let mut out = Vec::new();
    for &e in estimators {
        let curve = match e {
            Estimator::Kotlarski | Estimator::Residual => {
                if kotlarski.is_none() {
                    kotlarski = Some(kotlarski_from_curves(&partial, &marginal, Some(n))?.0);
                }
                let phi_x = kotlarski.as_ref().expect("just computed");
                if e == Estimator::Kotlarski {
                    phi_x.clone()
                } else {
                    residual_from_curves(&marginal, phi_x, Some(n))?
                }
            }
            Estimator::LiVuong => li_vuong_from_curves(&partial, &marginal)?,
            Estimator::Symmetric => {
                let diff = empirical_cf(&sample.differences(), grid);
                symmetric_from_curves(&marginal, &diff, Some(n))?
            }
        };
        out.push((e, curve));
    }
    Ok(out)
}

fn check_arms(arms: &[Arm], n: usize) -> Result<()> {
    if arms.is_empty() {
        return Err(Error::config("a study cell needs at least one estimator"));
    }
    for arm in arms {
        if arm.mode == BandwidthMode::Adaptive {
            if arm.estimator != Estimator::Kotlarski {
                return Err(Error::config(format!(
                    "adaptive bandwidth is only available for kotlarski, not {}",
                    arm.estimator.name()
                )));
            }
            if n < 15 {
                return Err(Error::TooFewObservations(n));
            }
        }
    }
    Ok(())
}

/// Losses of every arm on replication `rep` of a cell.
fn replication_losses(
    scenario: &Scenario,
    n: usize,
    seed: SeedSpec,
    arms: &[Arm],
    truths: &[(Estimator, TruthLoss)],
    settings: &StudySettings,
) -> Result<Vec<f64>> {
    let sample = sample_panel(&scenario.model_x, &scenario.model_eps, n, seed)?;
    let mut estimators: Vec<Estimator> = Vec::new();
    for arm in arms {
        if !estimators.contains(&arm.estimator) {
            estimators.push(arm.estimator);
        }
    }
    let estimates = estimate_all(&sample, &settings.grid, &estimators)?;
    let set = BandwidthSet::for_sample_size(n);
    let scale = settings.loss.scale();
    let mut profiles: Vec<Option<Vec<f64>>> = vec![None; estimates.len()];
    let mut selected = None;
    let mut out = Vec::with_capacity(arms.len());
    for arm in arms {
        let idx = estimators.iter().position(|&e| e == arm.estimator).expect("collected above");
        let curve = &estimates[idx].1;
        let truth = &truths.iter().find(|(e, _)| *e == arm.estimator).expect("truth per estimator").1;
        let loss = match arm.mode {
            BandwidthMode::Fixed(h) => truth.cf_distance(curve, settings.kernel, h)?,
            BandwidthMode::Oracle | BandwidthMode::Adaptive => {
                if profiles[idx].is_none() {
                    profiles[idx] = Some(truth.cf_distance_profile(curve, settings.kernel, set)?);
                }
                let profile = profiles[idx].as_ref().expect("just computed");
                let m = if arm.mode == BandwidthMode::Oracle {
                    argmin_smallest(profile) + 1
                } else {
                    if selected.is_none() {
                        selected = Some(cv_select(&sample, &settings.grid, settings.kernel)?.m);
                    }
                    selected.expect("just computed")
                };
                profile[m - 1]
            }
        };
        out.push(loss * scale);
    }
    Ok(out)
}

/// Runs `reps` seeded replications of one (scenario, n) cell and evaluates
/// every arm on the same samples.
pub fn run_cell(scenario: &Scenario, n: usize, reps: usize, arms: &[Arm], settings: &StudySettings) -> Result<CellResult> {
    if reps == 0 {
        return Err(Error::config("reps must be at least 1"));
    }
    check_arms(arms, n)?;
    scenario.model_x.validate()?;
    scenario.model_eps.validate()?;
    let mut truths: Vec<(Estimator, TruthLoss)> = Vec::new();
    for arm in arms {
        if !truths.iter().any(|(e, _)| *e == arm.estimator) {
            truths.push((arm.estimator, TruthLoss::new(scenario.target(arm.estimator), &settings.grid)?));
        }
    }
    let seed = cell_seed(settings.master_seed, &scenario.label, n);
    let per_rep: Vec<Vec<f64>> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| replication_losses(scenario, n, SeedSpec::new(seed, rep), arms, &truths, settings))
        .collect::<Result<_>>()?;
    let losses: Vec<Vec<f64>> = (0..arms.len()).map(|a| per_rep.iter().map(|r| r[a]).collect()).collect();
    let reports = arms
        .iter()
        .zip(&losses)
        .map(|(arm, l)| {
            let (risk_mean, risk_stderr) = mean_and_stderr(l);
            RiskReport {
                scenario: scenario.label.clone(),
                estimator: arm.estimator,
                n,
                reps,
                bandwidth_mode: arm.mode,
                loss_kind: settings.loss,
                risk_mean,
                risk_stderr,
                seed,
            }
        })
        .collect();
    Ok(CellResult { reports, losses })
}

fn single(scenario: &Scenario, n: usize, reps: usize, arm: Arm, settings: &StudySettings) -> Result<RiskReport> {
    Ok(run_cell(scenario, n, reps, &[arm], settings)?.reports.remove(0))
}

/// Empirical risk with the per-replication oracle bandwidth.
pub fn oracle_risk(
    scenario: &Scenario,
    n: usize,
    reps: usize,
    estimator: Estimator,
    settings: &StudySettings,
) -> Result<RiskReport> {
    single(scenario, n, reps, Arm::new(estimator, BandwidthMode::Oracle), settings)
}

/// Empirical risk of the modified estimator with the cross-validated bandwidth.
pub fn adaptive_risk(scenario: &Scenario, n: usize, reps: usize, settings: &StudySettings) -> Result<RiskReport> {
    single(scenario, n, reps, Arm::new(Estimator::Kotlarski, BandwidthMode::Adaptive), settings)
}

/// Oracle risks of the modified estimator and the symmetric baseline on the
/// same samples.
pub fn compare_symmetric(scenario: &Scenario, n: usize, reps: usize, settings: &StudySettings) -> Result<(RiskReport, RiskReport)> {
    let arms = [
        Arm::new(Estimator::Kotlarski, BandwidthMode::Oracle),
        Arm::new(Estimator::Symmetric, BandwidthMode::Oracle),
    ];
    let mut cell = run_cell(scenario, n, reps, &arms, settings)?;
    let sym = cell.reports.pop().expect("two arms");
    let kot = cell.reports.pop().expect("two arms");
    Ok((kot, sym))
}
