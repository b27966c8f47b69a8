//! Analytic oracles and fixtures shared by the test suites.

use num_complex::Complex64;
use statrs::distribution::{Continuous, Gamma, Normal};
use statrs::function::gamma::ln_gamma;

use crate::cf::{analytic_cf, analytic_cf_derivative, empirical_cf_partial, CfCurve, FreqGrid, Symmetry};
use crate::error::{Error, Result};
use crate::estimators::{density_from_cf, kotlarski_from_curves, li_vuong_from_curves, trapezoid, KernelKind};
use crate::models::{sample_panel, ModelSpec, SeedSpec, MEAN_ZERO_TOL};
use crate::quad::simpson;
use crate::risk::Scenario;

/// Closed-form CFs of a latent/error pair.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleScenario {
    pub model_x: ModelSpec,
    pub model_eps: ModelSpec,
}

impl OracleScenario {
    pub fn new(model_x: ModelSpec, model_eps: ModelSpec) -> Self {
        OracleScenario { model_x, model_eps }
    }

    pub fn phi_x(&self, u: f64) -> Complex64 {
        self.model_x.cf(u)
    }

    pub fn phi_x_prime(&self, u: f64) -> Complex64 {
        self.model_x.cf_derivative(u)
    }

    pub fn phi_eps(&self, u: f64) -> Complex64 {
        self.model_eps.cf(u)
    }

    /// CF of one measurement, `phi_X phi_eps`.
    pub fn phi_y(&self, u: f64) -> Complex64 {
        self.phi_x(u) * self.phi_eps(u)
    }

    /// Marginal CF of the second measurement on `grid`.
    pub fn marginal(&self, grid: &FreqGrid) -> CfCurve {
        let half: Vec<Complex64> = grid.half_points().map(|u| self.phi_y(u)).collect();
        CfCurve::from_half(*grid, &half, Symmetry::Hermitian)
    }

    /// Partial derivative `phi_X'(u) phi_eps(u)` of the joint CF on `grid`
    /// (valid for centred errors).
    pub fn partial(&self, grid: &FreqGrid) -> CfCurve {
        let half: Vec<Complex64> = grid.half_points().map(|u| self.phi_x_prime(u) * self.phi_eps(u)).collect();
        CfCurve::from_half(*grid, &half, Symmetry::AntiHermitian)
    }

    /// The modified estimator evaluated on exact population curves.
    pub fn kotlarski_oracle(&self, grid: &FreqGrid) -> Result<CfCurve> {
        Ok(kotlarski_from_curves(&self.partial(grid), &self.marginal(grid), None)?.0)
    }

    /// The Li–Vuong estimator evaluated on exact population curves.
    pub fn li_vuong_oracle(&self, grid: &FreqGrid) -> Result<CfCurve> {
        li_vuong_from_curves(&self.partial(grid), &self.marginal(grid))
    }

    /// Sup distance on `grid` between the oracle-path estimate and `phi_X`.
    pub fn kotlarski_oracle_error(&self, grid: &FreqGrid) -> Result<f64> {
        Ok(self.kotlarski_oracle(grid)?.max_abs_diff(&analytic_cf(&self.model_x, grid)))
    }
}

/// `sup_u |empirical partial - phi_X' phi_eps|` for a simulated panel of size `n`.
pub fn partial_deviation(model_x: &ModelSpec, model_eps: &ModelSpec, n: usize, grid: &FreqGrid, seed: SeedSpec) -> Result<f64> {
    if model_eps.mean().abs() > MEAN_ZERO_TOL {
        return Err(Error::config(format!("error model mean = {}, must be 0", model_eps.mean())));
    }
    let sample = sample_panel(model_x, model_eps, n, seed)?;
    let empirical = empirical_cf_partial(&sample, grid);
    let phi_prime = analytic_cf_derivative(model_x, grid);
    let phi_eps = analytic_cf(model_eps, grid);
    Ok(empirical
        .values()
        .iter()
        .zip(phi_prime.values())
        .zip(phi_eps.values())
        .map(|((&e, &d), &p)| (e - d * p).norm())
        .fold(0.0, f64::max))
}

/// Relative change `|r(step) - r(step/2)| / max(|r(step/2)|, 1e-12)` of a
/// step-parameterized computation.
pub fn refinement_change(op: impl Fn(f64) -> Result<f64>, step: f64) -> Result<f64> {
    let coarse = op(step)?;
    let fine = op(step / 2.0)?;
    Ok((coarse - fine).abs() / fine.abs().max(1e-12))
}

/// Whether halving the step changes the result by less than `tolerance` (relative).
pub fn refinement_check(op: impl Fn(f64) -> Result<f64>, step: f64, tolerance: f64) -> Result<bool> {
    Ok(refinement_change(op, step)? < tolerance)
}

/// Density of `model` at `x`. Bilateral gamma densities are computed by
/// quadrature of the convolution and lose accuracy for shapes below 1.
pub fn pdf(model: &ModelSpec, x: f64) -> f64 {
    match model {
        ModelSpec::Gamma { shape, rate, shift } => gamma_pdf(*shape, *rate, x - shift),
        ModelSpec::Normal { mean, variance } => Normal::new(*mean, variance.sqrt()).expect("validated").pdf(x),
        ModelSpec::NormalMixture(parts) => parts
            .iter()
            .map(|c| c.weight * Normal::new(c.mean, c.variance.sqrt()).expect("validated").pdf(x))
            .sum(),
        ModelSpec::BilateralGamma { shape_pos, rate_pos, shape_neg, rate_neg } => {
            // f(x) = int g_pos(t) g_neg(t - x) dt over t > max(x, 0)
            let pos = LogGamma::new(*shape_pos, *rate_pos);
            let neg = LogGamma::new(*shape_neg, *rate_neg);
            let lo = x.max(0.0);
            let reach = |a: f64, l: f64| (a + 12.0 * a.sqrt() + 30.0) / l;
            let hi = lo + reach(*shape_pos, *rate_pos).max(reach(*shape_neg, *rate_neg));
            simpson(|t| (pos.ln_pdf(t) + neg.ln_pdf(t - x)).exp(), lo, hi, 2000)
        }
    }
}

/// Gamma log-density with the normalizer computed once.
struct LogGamma {
    shape: f64,
    rate: f64,
    ln_norm: f64,
}

impl LogGamma {
    fn new(shape: f64, rate: f64) -> Self {
        LogGamma { shape, rate, ln_norm: shape * rate.ln() - ln_gamma(shape) }
    }

    fn ln_pdf(&self, x: f64) -> f64 {
        // The singular endpoint of shapes below 1 is dropped.
        if x < 0.0 || (x == 0.0 && self.shape != 1.0) {
            return f64::NEG_INFINITY;
        }
        let power = if self.shape == 1.0 { 0.0 } else { (self.shape - 1.0) * x.ln() };
        self.ln_norm + power - self.rate * x
    }
}

fn gamma_pdf(shape: f64, rate: f64, x: f64) -> f64 {
    if x < 0.0 || (x == 0.0 && shape < 1.0) {
        return 0.0;
    }
    Gamma::new(shape, rate).expect("validated").pdf(x)
}

/// Squared L2 distance between `pdf(truth)` and the kernel estimate from
/// `estimate`, by trapezoid over `x_points`.
pub fn x_domain_l2(estimate: &CfCurve, kind: KernelKind, h: f64, truth: &ModelSpec, x_points: &[f64]) -> Result<f64> {
    let density = density_from_cf(estimate, kind, h, x_points)?;
    let sq: Vec<f64> = density
        .x_points()
        .iter()
        .zip(density.values())
        .map(|(&x, &f)| (pdf(truth, x) - f).powi(2))
        .collect();
    Ok(trapezoid(x_points, &sq))
}

fn model(literal: &str) -> ModelSpec {
    literal.parse().expect("fixture literal")
}

/// Latent/error pairs with asymmetric errors, labelled `i` to `iv`.
pub fn asymmetric_error_scenarios() -> Vec<Scenario> {
    vec![
        Scenario::new("i", model("gamma(4,2)"), model("bgamma(2,2,3,3)")),
        Scenario::new("ii", model("bgamma(1,1,2,2)"), model("gamma(4,2,shift=-2)")),
        Scenario::new("iii", model("normal(0,1)"), model("bgamma(2,2,3,3)")),
        Scenario::new("iv", model("normal(0,1)"), model("mixnormal(0.5:-2:1, 0.5:2:2)")),
    ]
}

/// Pairs used to compare against the symmetric-error baseline, labelled `i` to `iv`.
pub fn symmetry_comparison_scenarios() -> Vec<Scenario> {
    vec![
        Scenario::new("i", model("gamma(2,4)"), model("bgamma(3,5,3,5)")),
        Scenario::new("ii", model("bgamma(1,2,1,2)"), model("bgamma(4,3,4,3)")),
        Scenario::new("iii", model("bgamma(4,3,4,3)"), model("bgamma(1,2,1,2)")),
        Scenario::new("iv", model("normal(0,1)"), model("bgamma(3,5,3,5)")),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::uniform_points;

    #[test]
    fn oracle_scenario_invariants() {
        for s in asymmetric_error_scenarios().into_iter().chain(symmetry_comparison_scenarios()) {
            let o = OracleScenario::new(s.model_x.clone(), s.model_eps.clone());
            assert!((o.phi_y(0.0) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
            assert!((o.phi_x_prime(0.0) - Complex64::new(0.0, s.model_x.mean())).norm() < 1e-12);
            assert!(s.model_eps.mean().abs() < MEAN_ZERO_TOL, "{}", s.label);
        }
    }

    #[test]
    fn pdfs_integrate_to_one_with_the_right_mean() {
        let xs = uniform_points(-30.0, 30.0, 0.005).unwrap();
        for s in asymmetric_error_scenarios().into_iter().chain(symmetry_comparison_scenarios()) {
            for m in [&s.model_x, &s.model_eps] {
                let f: Vec<f64> = xs.iter().map(|&x| pdf(m, x)).collect();
                let mass = trapezoid(&xs, &f);
                let xf: Vec<f64> = xs.iter().zip(&f).map(|(x, f)| x * f).collect();
                assert!((mass - 1.0).abs() < 1e-4, "{m}: mass {mass}");
                assert!((trapezoid(&xs, &xf) - m.mean()).abs() < 1e-3, "{m}");
            }
        }
    }

    #[test]
    fn partial_deviation_at_zero_is_mean_error() {
        let x = model("normal(0,1)");
        let e = model("bgamma(2,2,3,3)");
        let grid = FreqGrid::new(0.5, 0.5).unwrap();
        let seed = SeedSpec::new(5, 0);
        let sample = sample_panel(&x, &e, 50, seed).unwrap();
        let mean_y1 = sample.y1().iter().sum::<f64>() / 50.0;
        let partial = empirical_cf_partial(&sample, &grid);
        assert!((partial.value_at(0.0).unwrap().im - mean_y1).abs() < 1e-12);
        assert_eq!(partial_deviation(&x, &e, 50, &grid, seed).unwrap(), partial_deviation(&x, &e, 50, &grid, seed).unwrap());
        assert!(partial_deviation(&x, &model("gamma(4,2)"), 50, &grid, seed).is_err());
    }

    #[test]
    fn refinement_passes_and_fails() {
        let o = OracleScenario::new(model("normal(0,1)"), model("bgamma(2,2,3,3)"));
        let at_three = |step: f64| -> Result<f64> {
            let grid = FreqGrid::new(3.0, step)?;
            Ok(o.kotlarski_oracle(&grid)?.value_at(3.0).expect("on grid").re)
        };
        assert!(refinement_check(at_three, 0.01, 0.01).unwrap());

        let gamma = model("gamma(4,2)");
        let xs = uniform_points(-5.0, 15.0, 0.01).unwrap();
        let mass = |step: f64| -> Result<f64> {
            let grid = FreqGrid::new(60.0, step)?;
            Ok(density_from_cf(&analytic_cf(&gamma, &grid), KernelKind::Gaussian, 0.1, &xs)?.integral())
        };
        assert!(refinement_check(mass, 0.01, 1e-3).unwrap());

        // A coarse step aliases the empirical CF of widely spread data.
        let spread: Vec<f64> = (0..200).map(|j| (j as f64 * 0.731).sin() * 40.0).collect();
        let oscillating = |step: f64| -> Result<f64> {
            let grid = FreqGrid::new(20.0, step)?;
            let cf = crate::cf::empirical_cf(&spread, &grid);
            let w = grid.even_trapezoid_weights();
            Ok(cf.half().iter().zip(&w).map(|(v, w)| w * v.re).sum())
        };
        assert!(!refinement_check(oscillating, 0.5, 0.01).unwrap());
    }
}
