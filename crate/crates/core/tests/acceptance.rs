//! Acceptance criteria. Each test writes one `PASS`/`FAIL` line to stderr.
//!
//! The table reproductions run 50 replications per cell with a factor-3 band
//! by default. Set `ACCEPTANCE_FULL=1` for 500 replications and a factor-2
//! band.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use panel_deconv::bandwidth::{argmin_smallest, cv_select};
use panel_deconv::config::ExperimentConfig;
use panel_deconv::estimators::default_x_points;
use panel_deconv::risk::{
    predicted_rate, run_cell, BandwidthMode, MomentOrder, RateSpec, RateTarget, RiskReport, TruthLoss,
};
use panel_deconv::testkit::{asymmetric_error_scenarios, partial_deviation, x_domain_l2, OracleScenario};
use panel_deconv::*;

fn full_mode() -> bool {
    std::env::var("ACCEPTANCE_FULL").is_ok_and(|v| v == "1")
}

fn report(id: &str, title: &str, failures: &[String], started: Instant) {
    let verdict = if failures.is_empty() { "PASS" } else { "FAIL" };
    // Written to the raw handle so the verdict shows even when output is captured.
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "criterion {id} [{verdict}] {title} ({:.1}s)", started.elapsed().as_secs_f64());
    for f in failures {
        let _ = writeln!(err, "    {f}");
    }
    drop(err);
    assert!(failures.is_empty(), "criterion {id} failed: {}", failures.join("; "));
}

fn bundled(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    ExperimentConfig::from_file(&path).expect("readable").expect("valid bundled config")
}

fn run_config(config: &ExperimentConfig, reps: usize) -> Vec<RiskReport> {
    let settings = config.settings();
    let arms = config.arms();
    let mut reports = Vec::new();
    for scenario in &config.scenarios {
        for &n in &config.sample_sizes {
            reports.extend(run_cell(scenario, n, reps, &arms, &settings).expect("cell runs").reports);
        }
    }
    reports
}

fn find<'a>(reports: &'a [RiskReport], label: &str, est: Estimator, mode: BandwidthMode, n: usize) -> &'a RiskReport {
    reports
        .iter()
        .find(|r| r.scenario == label && r.estimator == est && r.bandwidth_mode == mode && r.n == n)
        .expect("cell present")
}

fn combined_se(a: &RiskReport, b: &RiskReport) -> f64 {
    a.risk_stderr.hypot(b.risk_stderr)
}

#[test]
fn criterion_1_identity_recovery() {
    let t = Instant::now();
    let grid = FreqGrid::new(10.0, 1e-3).unwrap();
    let mut failures = Vec::new();
    for s in asymmetric_error_scenarios() {
        let err = OracleScenario::new(s.model_x.clone(), s.model_eps.clone()).kotlarski_oracle_error(&grid).unwrap();
        if err.is_nan() || err >= 1e-5 {
            failures.push(format!("scenario {}: sup error {err:.3e}", s.label));
        }
    }
    report("1", "noise-free Kotlarski path recovers phi_X (sup error < 1e-5)", &failures, t);
}

// (label, n, oracle, adaptive)
const TABLE_41: [(&str, usize, f64, f64); 12] = [
    ("i", 100, 0.0151, 0.0198),
    ("i", 1000, 0.0034, 0.0076),
    ("i", 10000, 0.0015, 0.0040),
    ("ii", 100, 0.0135, 0.0172),
    ("ii", 1000, 0.0027, 0.0074),
    ("ii", 10000, 0.0013, 0.0038),
    ("iii", 100, 0.0104, 0.0198),
    ("iii", 1000, 0.0019, 0.0044),
    ("iii", 10000, 0.0007, 0.0016),
    ("iv", 100, 0.0310, 0.0410),
    ("iv", 1000, 0.0118, 0.0352),
    ("iv", 10000, 0.0040, 0.0067),
];

// (label, n, kotlarski oracle, symmetric oracle)
const TABLE_42: [(&str, usize, f64, f64); 12] = [
    ("i", 100, 0.09721, 0.25311),
    ("i", 1000, 0.05917, 0.15747),
    ("i", 10000, 0.03955, 0.10378),
    ("ii", 100, 0.04373, 0.12089),
    ("ii", 1000, 0.02442, 0.08018),
    ("ii", 10000, 0.01491, 0.05250),
    ("iii", 100, 0.00930, 0.01446),
    ("iii", 1000, 0.0032, 0.00424),
    ("iii", 10000, 0.00057, 0.00058),
    ("iv", 100, 0.00631, 0.00903),
    ("iv", 1000, 0.00184, 0.00254),
    ("iv", 10000, 0.00077, 0.00071),
];

#[test]
fn criterion_2_asymmetric_error_table() {
    let t = Instant::now();
    let (reps, factor) = if full_mode() { (500, 2.0) } else { (50, 3.0) };
    let config = bundled("paper_table_41.cfg");
    let reports = run_config(&config, reps);
    let kot = Estimator::Kotlarski;
    let mut failures = Vec::new();
    for &(label, n, or, ad) in &TABLE_41 {
        for (mode, target) in [(BandwidthMode::Oracle, or), (BandwidthMode::Adaptive, ad)] {
            let got = find(&reports, label, kot, mode, n);
            let ratio = got.risk_mean / target;
            println!("    {label:>3} n={n:<5} {:<8} risk {:.5} (se {:.5}) target {target:.4} ratio {ratio:.2}", mode.to_string(), got.risk_mean, got.risk_stderr);
            if !(1.0 / factor..=factor).contains(&ratio) {
                failures.push(format!("{label} n={n} {mode}: {:.5} vs {target} (ratio {ratio:.2}, band x{factor})", got.risk_mean));
            }
        }
        let (o, a) = (find(&reports, label, kot, BandwidthMode::Oracle, n), find(&reports, label, kot, BandwidthMode::Adaptive, n));
        if o.risk_mean > a.risk_mean + 2.0 * combined_se(o, a) {
            failures.push(format!("{label} n={n}: oracle {:.5} above adaptive {:.5}", o.risk_mean, a.risk_mean));
        }
    }
    for s in &config.scenarios {
        for mode in [BandwidthMode::Oracle, BandwidthMode::Adaptive] {
            for w in config.sample_sizes.windows(2) {
                let (small, large) = (find(&reports, &s.label, kot, mode, w[0]), find(&reports, &s.label, kot, mode, w[1]));
                if large.risk_mean > small.risk_mean + 2.0 * combined_se(small, large) {
                    failures.push(format!("{} {mode}: risk rises from n={} to n={}", s.label, w[0], w[1]));
                }
            }
        }
    }
    let title = format!("asymmetric-error risk table, {reps} reps, within factor {factor}, orderings hold");
    report("2", &title, &failures, t);
}

#[test]
fn criterion_3_symmetric_baseline_comparison() {
    let t = Instant::now();
    let reps = if full_mode() { 500 } else { 50 };
    let config = bundled("paper_table_42.cfg");
    let reports = run_config(&config, reps);
    let oracle = BandwidthMode::Oracle;
    let mut failures = Vec::new();
    for &(label, n, kot_target, sym_target) in &TABLE_42 {
        let kot = find(&reports, label, Estimator::Kotlarski, oracle, n);
        let sym = find(&reports, label, Estimator::Symmetric, oracle, n);
        let ratio = kot.risk_mean / sym.risk_mean;
        println!(
            "    {label:>3} n={n:<5} kotlarski {:.5} (target {kot_target}) symmetric {:.5} (target {sym_target}) ratio {ratio:.2}",
            kot.risk_mean, sym.risk_mean
        );
        match label {
            "i" | "ii" if kot.risk_mean >= sym.risk_mean => {
                failures.push(format!("{label} n={n}: kotlarski {:.5} not below symmetric {:.5}", kot.risk_mean, sym.risk_mean))
            }
            "iii" | "iv" if n == 10000 && !(0.5..=2.0).contains(&ratio) => {
                failures.push(format!("{label} n={n}: risk ratio {ratio:.2} outside [0.5, 2]"))
            }
            _ => {}
        }
    }
    report("3", &format!("symmetric-baseline comparison, {reps} reps"), &failures, t);
}

#[test]
fn criterion_4_property_suite() {
    let t = Instant::now();
    let mut failures = Vec::new();
    let x: ModelSpec = "normal(0,1)".parse().unwrap();
    let eps: ModelSpec = "bgamma(2,2,3,3)".parse().unwrap();
    let grid = FreqGrid::new(40.0, 0.01).unwrap();

    for rep in 0..5 {
        let n = [15, 50, 200, 1000, 5000][rep as usize];
        let sample = sample_panel(&x, &eps, n, SeedSpec::new(404, rep)).unwrap();
        let (est, _) = kotlarski_cf(&sample, &grid);
        let max_mod = est.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        if max_mod > 1.0 + 1e-12 {
            failures.push(format!("clipping: |phi| = {max_mod} at n={n}"));
        }
        if !est.is_hermitian(0.0) {
            failures.push(format!("hermitian symmetry broken at n={n}"));
        }
        if est.value_at(0.0).map(|v| (v.re, v.im)) != Some((1.0, 0.0)) {
            failures.push(format!("phi(0) = {:?} at n={n}", est.value_at(0.0)));
        }
        let floor = 1.0 / (n as f64).sqrt();
        let reg = regularize_truncate(&empirical_cf_marginal(&sample, &grid), n).unwrap();
        let min_mod = reg.values().iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
        if min_mod < floor * (1.0 - 1e-12) {
            failures.push(format!("truncation floor: {min_mod} < {floor} at n={n}"));
        }
    }

    let sample = sample_panel(&x, &eps, 1000, SeedSpec::new(405, 0)).unwrap();
    let (est, _) = kotlarski_cf(&sample, &grid);
    let xs = default_x_points();
    let density = density_from_cf(&est, KernelKind::Gaussian, 0.5, &xs).unwrap();
    let mass = density.integral();
    if (mass - 1.0).abs() >= 1e-3 {
        failures.push(format!("density mass {mass}"));
    }

    let truth = TruthLoss::new(&x, &grid).unwrap();
    for h in [0.25, 0.5, 1.0] {
        let fourier = truth.cf_distance(&est, KernelKind::Gaussian, h).unwrap() / std::f64::consts::TAU;
        let spatial = x_domain_l2(&est, KernelKind::Gaussian, h, &x, &xs).unwrap();
        if (fourier - spatial).abs() > 0.01 * spatial {
            failures.push(format!("Parseval at h={h}: {fourier} vs {spatial}"));
        }
    }

    let n = 1_000_000;
    let coarse = FreqGrid::new(10.0, 0.05).unwrap();
    let dev = partial_deviation(&x, &eps, n, &coarse, SeedSpec::new(406, 0)).unwrap();
    let second_moment = 1.0 + 2.0 / 4.0 + 3.0 / 9.0;
    let bound = 5.0 * f64::sqrt(second_moment) / (n as f64).sqrt();
    if dev >= bound {
        failures.push(format!("partial-derivative deviation {dev:.3e} >= {bound:.3e}"));
    }

    let sample = sample_panel(&x, &eps, 200, SeedSpec::new(407, 0)).unwrap();
    let a = cv_select(&sample, &grid, KernelKind::Gaussian).unwrap();
    let b = cv_select(&sample, &grid, KernelKind::Gaussian).unwrap();
    if a.m != b.m || a.profile.losses != b.profile.losses {
        failures.push("cv_select is not deterministic".into());
    }
    for scale in [1e-3, 7.0, 1e4] {
        let scaled: Vec<f64> = a.profile.losses.iter().map(|l| l * scale).collect();
        if argmin_smallest(&scaled) + 1 != a.m {
            failures.push(format!("argmin moves under scaling by {scale}"));
        }
    }
    let title = "clipping, symmetry, truncation floor, phi(0), mass, Parseval, deviation bound, cv determinism";
    report("4", title, &failures, t);
    assert!(t.elapsed().as_secs() < 60, "property suite took {:?}", t.elapsed());
}

#[test]
fn criterion_5_rate_calculator() {
    let t = Instant::now();
    let ord = RateSpec::ordinary;
    let inf = MomentOrder::Infinite;
    let fin = MomentOrder::Finite;
    // (target, x, eps, p, poly, log)
    let cases = [
        // (2*2-1) / (2*1 + 2*(1+1/2)*2 + 1) = 3/9
        (RateTarget::Latent, ord(2.0), ord(1.0), fin(2), 1.0 / 3.0, 0.0),
        // p = inf drops the 1/p term: 3 / (2 + 4 + 1)
        (RateTarget::Latent, ord(2.0), ord(1.0), inf, 3.0 / 7.0, 0.0),
        // supersmooth error: (log n)^{-(2*2-1)/2}
        (RateTarget::Latent, ord(2.0), RateSpec::supersmooth(0.0, 1.0, 2.0), fin(4), 0.0, 1.5),
        // q = 1/2: (2*2-1) / (2*2*1 + 2*1.5*2 + 1.5) = 3/11.5
        (RateTarget::Error, ord(1.0), ord(2.0), fin(3), 6.0 / 23.0, 0.0),
        // q = 0 at p = inf: 3 / (2 + 4 + 1)
        (RateTarget::Error, ord(1.0), ord(2.0), inf, 3.0 / 7.0, 0.0),
        // supersmooth latent, rho = 1, beta_eps = 1, p = inf: n^{-1} (log n)^{2}
        (RateTarget::Latent, RateSpec::supersmooth(0.0, 1.0, 1.0), ord(1.0), inf, 1.0, -2.0),
    ];
    let mut failures = Vec::new();
    for (i, (target, x, eps, p, poly, log)) in cases.iter().enumerate() {
        match predicted_rate(*target, x, eps, *p) {
            Ok(r) if (r.poly - poly).abs() < 1e-12 && (r.log.unwrap_or(f64::NAN) - log).abs() < 1e-12 => {}
            other => failures.push(format!("set {}: expected ({poly}, {log}), got {other:?}", i + 1)),
        }
    }
    // Large finite p approaches the p = inf value.
    let limit = predicted_rate(RateTarget::Error, &ord(1.0), &ord(2.0), fin(1_000_000)).unwrap();
    if (limit.poly - 3.0 / 7.0).abs() > 1e-5 {
        failures.push(format!("p -> inf limit: {}", limit.poly));
    }
    let both = predicted_rate(RateTarget::Latent, &RateSpec::supersmooth(0.0, 1.0, 2.0), &RateSpec::supersmooth(0.0, 1.0, 2.0), inf);
    if !matches!(both, Err(Error::UnsupportedRateCase(_))) {
        failures.push(format!("both supersmooth: {both:?}"));
    }
    report("5", "rate calculator on hand-derived parameter sets", &failures, t);
}
