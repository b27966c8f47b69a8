use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use panel_deconv::config::{validate_file, ExperimentConfig};
use panel_deconv::risk::{predicted_rate, MomentOrder, RateSpec, RateTarget};
use panel_deconv::runner::{run_experiment, RunOptions};

/// Thread count for the Monte Carlo runs; defaults to all cores.
const THREADS_ENV: &str = "PANEL_DECONV_THREADS";

#[derive(Parser)]
#[command(name = "panel-deconv", version, about = "Deconvolution from repeated measurements with non-symmetric errors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Override the number of replications.
        #[arg(long)]
        reps: Option<usize>,
        /// 50 replications per cell.
        #[arg(long, conflicts_with = "reps")]
        quick: bool,
        /// Override the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check a config file without running it.
    Validate { config: PathBuf },
    /// Print the convergence rate of the density estimator.
    Rates {
        /// X for the latent density, eps for the error density.
        #[arg(long)]
        target: String,
        #[arg(long)]
        beta_x: f64,
        #[arg(long)]
        beta_eps: f64,
        #[arg(long, default_value_t = 0.0)]
        c_x: f64,
        #[arg(long, default_value_t = 0.0)]
        c_eps: f64,
        #[arg(long, default_value_t = 0.0)]
        rho_x: f64,
        #[arg(long, default_value_t = 0.0)]
        rho_eps: f64,
        /// Number of finite moments, or `inf`.
        #[arg(long, default_value = "inf")]
        p: String,
    },
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got `{value}`"))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Run { config, reps, quick, output } => {
            configure_threads()?;
            let parsed = ExperimentConfig::from_file(&config).map_err(|e| e.to_string())?;
            let experiment = match parsed {
                Ok(c) => c,
                Err(diags) => {
                    for d in diags {
                        eprintln!("{}: {d}", config.display());
                    }
                    return Ok(ExitCode::from(2));
                }
            };
            let options = RunOptions { reps: if quick { Some(50) } else { reps }, output };
            let summary = run_experiment(&experiment, &options, |reports| {
                for r in reports {
                    eprintln!(
                        "{} n={} {} {}: {:.6} ± {:.6}",
                        r.scenario,
                        r.n,
                        r.estimator.name(),
                        r.bandwidth_mode,
                        r.risk_mean,
                        r.risk_stderr
                    );
                }
            })
            .map_err(|e| e.to_string())?;
            println!("{}", summary.output.join("risk.csv").display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { config } => {
            let diags = validate_file(&config).map_err(|e| e.to_string())?;
            for d in &diags {
                println!("{d}");
            }
            Ok(if diags.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Rates { target, beta_x, beta_eps, c_x, c_eps, rho_x, rho_eps, p } => {
            let target: RateTarget = target.parse().map_err(|e: panel_deconv::Error| e.to_string())?;
            let p: MomentOrder = p.parse().map_err(|e: panel_deconv::Error| e.to_string())?;
            let x = RateSpec { beta: beta_x, c: c_x, rho: rho_x };
            let eps = RateSpec { beta: beta_eps, c: c_eps, rho: rho_eps };
            let rate = predicted_rate(target, &x, &eps, p).map_err(|e| e.to_string())?;
            println!("rate = {rate}");
            println!("poly_exponent = {}", rate.poly);
            println!("log_exponent = {}", rate.log.unwrap_or(0.0));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
