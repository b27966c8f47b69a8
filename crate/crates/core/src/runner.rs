//! Executes an [`ExperimentConfig`] and writes its output files.
//!
//! Output directory layout:
//!
//! - `risk.csv`: one risk report row per (scenario, n, estimator, bandwidth).
//! - `plot_risk_vs_n.csv`: `scenario,estimator,bandwidth_mode,n,risk_mean,lower,upper`
//!   with a two standard error band, sorted for line plots.
//! - `replications.csv`: `scenario,n,rep,estimator,bandwidth_mode,loss`, every
//!   per-replication loss. Arms of one cell share their samples.
//! - `curves/<scenario>_<estimator>_cf.csv` and `..._density.csv`: replication 0
//!   at the largest n, plus `curves/index.csv` recording the bandwidth used.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::bandwidth::{cv_select, BandwidthSet};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::estimators::{default_x_points, density_from_cf, Estimator};
use crate::models::{sample_panel, SeedSpec};
use crate::risk::{cell_seed, run_cell, write_reports_csv, BandwidthMode, CellResult, RiskReport, Scenario, TruthLoss};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub reps: Option<usize>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output: PathBuf,
    pub reports: Vec<RiskReport>,
}

struct Cell {
    scenario: String,
    n: usize,
    result: CellResult,
}

/// Runs every (scenario, n) cell, then writes the output files. `progress`
/// sees each finished cell's reports.
pub fn run_experiment(
    config: &ExperimentConfig,
    options: &RunOptions,
    mut progress: impl FnMut(&[RiskReport]),
) -> Result<RunSummary> {
    let mut config = config.clone();
    if let Some(r) = options.reps {
        config.reps = r;
    }
    let output = options.output.clone().unwrap_or_else(|| config.output.clone());
    let settings = config.settings();
    let arms = config.arms();
    let mut cells = Vec::new();
    for scenario in &config.scenarios {
        for &n in &config.sample_sizes {
            let result = run_cell(scenario, n, config.reps, &arms, &settings)?;
            progress(&result.reports);
            cells.push(Cell { scenario: scenario.label.clone(), n, result });
        }
    }
    fs::create_dir_all(&output)?;
    let reports: Vec<RiskReport> = cells.iter().flat_map(|c| c.result.reports.iter().cloned()).collect();
    write_reports_csv(&reports, create(&output.join("risk.csv"))?)?;
    write_plot_data(&reports, &output.join("plot_risk_vs_n.csv"))?;
    write_replications(&cells, &output.join("replications.csv"))?;
    write_curves(&config, &output.join("curves"))?;
    Ok(RunSummary { output, reports })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_plot_data(reports: &[RiskReport], path: &Path) -> Result<()> {
    let mut rows: Vec<&RiskReport> = reports.iter().collect();
    // Stable sort keeps scenario order from the config.
    let scenario_rank = |label: &str| reports.iter().position(|r| r.scenario == label).unwrap_or(0);
    rows.sort_by_key(|r| (scenario_rank(&r.scenario), r.estimator.name(), r.bandwidth_mode.to_string(), r.n));
    let mut w = create(path)?;
    writeln!(w, "scenario,estimator,bandwidth_mode,n,risk_mean,lower,upper")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.scenario,
            r.estimator.name(),
            r.bandwidth_mode,
            r.n,
            r.risk_mean,
            (r.risk_mean - 2.0 * r.risk_stderr).max(0.0),
            r.risk_mean + 2.0 * r.risk_stderr
        )?;
    }
    w.flush()?;
    Ok(())
}

fn write_replications(cells: &[Cell], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "scenario,n,rep,estimator,bandwidth_mode,loss")?;
    for cell in cells {
        let reps = cell.result.losses.first().map_or(0, Vec::len);
        for rep in 0..reps {
            for (report, losses) in cell.result.reports.iter().zip(&cell.result.losses) {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    cell.scenario,
                    cell.n,
                    rep,
                    report.estimator.name(),
                    report.bandwidth_mode,
                    losses[rep]
                )?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Bandwidth used for the curve dump of one estimator: the first configured
/// mode, resolved on replication 0.
fn dump_bandwidth(
    config: &ExperimentConfig,
    scenario: &Scenario,
    estimator: Estimator,
    sample: &crate::cf::PanelSample,
    estimate: &crate::cf::CfCurve,
) -> Result<f64> {
    let mode = config.bandwidth_modes[0];
    let target = if estimator.targets_error() { &scenario.model_eps } else { &scenario.model_x };
    Ok(match mode {
        BandwidthMode::Fixed(h) => h,
        BandwidthMode::Adaptive if estimator == Estimator::Kotlarski => cv_select(sample, &config.grid, config.kernel)?.h,
        _ => {
            let set = BandwidthSet::for_sample_size(sample.n());
            let profile = TruthLoss::new(target, &config.grid)?.cf_distance_profile(estimate, config.kernel, set)?;
            BandwidthSet::bandwidth(crate::bandwidth::argmin_smallest(&profile) + 1)
        }
    })
}

fn write_curves(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let Some(&n) = config.sample_sizes.iter().max() else {
        return Ok(());
    };
    let x_points = default_x_points();
    let mut index = create(&dir.join("index.csv"))?;
    writeln!(index, "scenario,estimator,n,rep,h,density_h,cf_file,density_file")?;
    for scenario in &config.scenarios {
        let seed = SeedSpec::new(cell_seed(config.master_seed, &scenario.label, n), 0);
        let sample = sample_panel(&scenario.model_x, &scenario.model_eps, n, seed)?;
        for &estimator in &config.estimators {
            let estimate = estimator.estimate(&sample, &config.grid)?;
            let h = dump_bandwidth(config, scenario, estimator, &sample, &estimate)?;
            // The density inversion needs the kernel to be resolved by the
            // grid; narrower bandwidths are widened to the smallest that is.
            let floor = config.kernel.required_u_max(1.0) / config.grid.u_max();
            let density_h = h.max(floor);
            let stem = format!("{}_{}", scenario.label, estimator.name());
            let cf_file = format!("{stem}_cf.csv");
            let density_file = format!("{stem}_density.csv");
            let mut w = create(&dir.join(&cf_file))?;
            estimate.write_csv(&mut w)?;
            w.flush()?;
            let density = density_from_cf(&estimate, config.kernel, density_h, &x_points)?;
            let mut w = create(&dir.join(&density_file))?;
            density.write_csv(&mut w)?;
            w.flush()?;
            writeln!(
                index,
                "{},{},{},0,{},{},{},{}",
                scenario.label,
                estimator.name(),
                n,
                h,
                density_h,
                cf_file,
                density_file
            )?;
        }
    }
    index.flush()?;
    Ok(())
}
