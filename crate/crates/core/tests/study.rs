//! Monte Carlo properties of the samplers, estimators and risk studies.

use panel_deconv::risk::{
    adaptive_risk, oracle_risk, predicted_rate, run_cell, Arm, BandwidthMode, MomentOrder, RateSpec, RateTarget,
    StudySettings, TruthLoss,
};
use panel_deconv::testkit::{asymmetric_error_scenarios, x_domain_l2, OracleScenario};
use panel_deconv::*;

fn model(s: &str) -> ModelSpec {
    s.parse().unwrap()
}

#[test]
fn sampler_matches_the_analytic_cf() {
    let n = 1_000_000;
    let grid = FreqGrid::new(5.0, 0.05).unwrap();
    for literal in ["normal(0,1)", "gamma(4,2,shift=-2)", "bgamma(2,2,3,3)", "mixnormal(0.5:-2:1, 0.5:2:2)"] {
        let m = model(literal);
        let draws = m.sample(n, SeedSpec::new(11, 0)).unwrap();
        let empirical = cf::empirical_cf(&draws, &grid);
        let dev = empirical.max_abs_diff(&analytic_cf(&m, &grid));
        assert!(dev < 5.0 / (n as f64).sqrt(), "{literal}: {dev}");
    }
}

#[test]
fn oracle_paths_reach_trapezoid_accuracy() {
    let step = 0.01;
    let grid = FreqGrid::new(10.0, step).unwrap();
    for s in asymmetric_error_scenarios() {
        let o = OracleScenario::new(s.model_x.clone(), s.model_eps.clone());
        let truth = analytic_cf(&s.model_x, &grid);
        let kot = o.kotlarski_oracle(&grid).unwrap().max_abs_diff(&truth);
        let lv = o.li_vuong_oracle(&grid).unwrap().max_abs_diff(&truth);
        assert!(kot <= 10.0 * step * step, "{}: {kot}", s.label);
        assert!(lv <= 10.0 * step * step, "{}: {lv}", s.label);
    }
}

#[test]
fn li_vuong_equals_kotlarski_while_truncation_is_inactive() {
    let grid = FreqGrid::new(10.0, 0.01).unwrap();
    let sample = sample_panel(&model("normal(0,1)"), &model("bgamma(2,2,3,3)"), 5000, SeedSpec::new(12, 0)).unwrap();
    let (kot, diag) = kotlarski_cf(&sample, &grid);
    let lv = li_vuong_cf(&sample, &grid).unwrap();
    let marginal = empirical_cf_marginal(&sample, &grid);
    let floor = 1.0 / (sample.n() as f64).sqrt();
    let (half_m, half_k, half_l) = (marginal.half(), kot.half(), lv.half());
    let exponent = diag.cumulative_integral.half();
    let mut checked = 0;
    for i in 0..half_m.len() {
        if half_m[i].norm() < floor || exponent[i].re > 0.0 {
            break;
        }
        assert!((half_k[i] - half_l[i]).norm() < 1e-12, "index {i}");
        checked += 1;
    }
    assert!(checked > 100, "{checked}");
}

#[test]
fn parseval_duality_on_estimated_curves() {
    let grid = FreqGrid::new(40.0, 0.01).unwrap();
    // Noisy estimates spread mass far beyond the data range.
    let xs = estimators::uniform_points(-60.0, 60.0, 0.01).unwrap();
    for s in asymmetric_error_scenarios() {
        let sample = sample_panel(&s.model_x, &s.model_eps, 500, SeedSpec::new(13, 0)).unwrap();
        let truth = TruthLoss::new(&s.model_x, &grid).unwrap();
        for est in [kotlarski_cf(&sample, &grid).0, symmetric_cf(&sample, &grid)] {
            for h in [0.3, 0.6] {
                let fourier = truth.cf_distance(&est, KernelKind::Gaussian, h).unwrap() / std::f64::consts::TAU;
                let spatial = x_domain_l2(&est, KernelKind::Gaussian, h, &s.model_x, &xs).unwrap();
                assert!((fourier - spatial).abs() < 0.01 * spatial, "{} h={h}: {fourier} vs {spatial}", s.label);
            }
        }
    }
}

#[test]
fn oracle_risk_decreases_with_n() {
    let settings = StudySettings::new(2024);
    for s in asymmetric_error_scenarios() {
        let risks: Vec<f64> = [100, 1000, 10000]
            .iter()
            .map(|&n| oracle_risk(&s, n, 50, Estimator::Kotlarski, &settings).unwrap().risk_mean)
            .collect();
        assert!(risks[0] > risks[1] && risks[1] > risks[2], "{}: {risks:?}", s.label);
    }
}

#[test]
fn log_log_slope_tracks_the_predicted_rate() {
    let settings = StudySettings::new(77);
    let sizes = [250usize, 1000, 4000];
    // Both pairs are ordinary smooth with all moments finite.
    let cases = [("i", 4.0, 5.0), ("ii", 3.0, 4.0)];
    let scenarios = asymmetric_error_scenarios();
    for (label, beta_x, beta_eps) in cases {
        let s = scenarios.iter().find(|s| s.label == label).unwrap();
        let predicted = predicted_rate(
            RateTarget::Latent,
            &RateSpec::ordinary(beta_x),
            &RateSpec::ordinary(beta_eps),
            MomentOrder::Infinite,
        )
        .unwrap()
        .poly;
        let points: Vec<(f64, f64)> = sizes
            .iter()
            .map(|&n| {
                let r = oracle_risk(s, n, 50, Estimator::Kotlarski, &settings).unwrap().risk_mean;
                ((n as f64).ln(), r.ln())
            })
            .collect();
        let mx = points.iter().map(|p| p.0).sum::<f64>() / 3.0;
        let my = points.iter().map(|p| p.1).sum::<f64>() / 3.0;
        let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!(slope < 0.0 && (slope + predicted).abs() <= 0.25, "{label}: slope {slope}, predicted -{predicted}");
    }
}

#[test]
fn adaptive_stays_within_four_times_the_oracle() {
    let settings = StudySettings::new(1000);
    let s = &asymmetric_error_scenarios()[0];
    let or = oracle_risk(s, 1000, 500, Estimator::Kotlarski, &settings).unwrap();
    let ad = adaptive_risk(s, 1000, 500, &settings).unwrap();
    assert!(ad.risk_mean / or.risk_mean <= 4.0, "{} / {}", ad.risk_mean, or.risk_mean);
    assert!(or.risk_mean <= ad.risk_mean);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let s = &asymmetric_error_scenarios()[2];
    let settings = StudySettings::new(9);
    let arms = [
        Arm::new(Estimator::Kotlarski, BandwidthMode::Oracle),
        Arm::new(Estimator::Kotlarski, BandwidthMode::Adaptive),
        Arm::new(Estimator::Symmetric, BandwidthMode::Fixed(0.5)),
    ];
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_cell(s, 100, 8, &arms, &settings).unwrap())
    };
    assert_eq!(run(1), run(3));
}
