//! Characteristic-function estimators and kernel-smoothed Fourier inversion.
//!
//! All estimators work on the non-negative half of the grid and reflect.
//! The log-derivative integral `int_0^u dpsi/psi` is a cumulative trapezoid on
//! the shared grid; at `-u` the integrand is `-conj(integrand(u))`, so the
//! reflected curve is exactly the integral over the negative branch.

use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;

use crate::cf::{
    clamp_unit, empirical_cf, empirical_cf_pair, truncate_value, CfCurve, FreqGrid, PanelSample, Symmetry,
};
use crate::error::{Error, Result};

/// Smoothing kernel, described by its Fourier transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    /// `FK = 1_[-1,1]`
    Sinc,
    /// `FK(u) = exp(-u^2 / 2)`
    Gaussian,
}

impl KernelKind {
    /// `FK_h(u) = FK(h u)`.
    #[inline]
    pub fn weight(self, h: f64, u: f64) -> f64 {
        match self {
            KernelKind::Sinc => {
                if (h * u).abs() <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            KernelKind::Gaussian => (-0.5 * (h * u) * (h * u)).exp(),
        }
    }

    /// Smallest `u_max` at which the grid represents `FK_h` faithfully.
    pub fn required_u_max(self, h: f64) -> f64 {
        match self {
            KernelKind::Sinc => 1.0 / h,
            KernelKind::Gaussian => 6.0 / h,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Sinc => "sinc",
            KernelKind::Gaussian => "gaussian",
        }
    }
}

impl FromStr for KernelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sinc" => Ok(KernelKind::Sinc),
            "gaussian" => Ok(KernelKind::Gaussian),
            other => Err(Error::Parse(format!("unknown kernel `{other}` (expected sinc or gaussian)"))),
        }
    }
}

/// Kernel weights `FK_h(u)` on every point of `grid`.
pub fn fourier_kernel(kind: KernelKind, h: f64, grid: &FreqGrid) -> Result<Vec<f64>> {
    check_bandwidth(h)?;
    Ok(grid.points().into_iter().map(|u| kind.weight(h, u)).collect())
}

/// Kernel weights on the non-negative half of `grid`.
pub(crate) fn half_kernel(kind: KernelKind, h: f64, grid: &FreqGrid) -> Vec<f64> {
    grid.half_points().map(|u| kind.weight(h, u)).collect()
}

fn check_bandwidth(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(Error::config(format!("bandwidth must be positive, got {h}")))
    }
}

/// The characteristic-function estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    /// Truncated denominator, clipped to the unit disc.
    Kotlarski,
    /// Raw empirical denominator, no clipping.
    LiVuong,
    /// Plug-in estimator of the error CF.
    Residual,
    /// Baseline that assumes symmetric errors.
    Symmetric,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Kotlarski => "kotlarski",
            Estimator::LiVuong => "li_vuong",
            Estimator::Residual => "residual",
            Estimator::Symmetric => "symmetric",
        }
    }

    /// Whether the estimator targets the error law rather than `X`.
    pub fn targets_error(self) -> bool {
        matches!(self, Estimator::Residual)
    }

    /// Estimates on the full sample.
    pub fn estimate(self, sample: &PanelSample, grid: &FreqGrid) -> Result<CfCurve> {
        match self {
            Estimator::Kotlarski => Ok(kotlarski_cf(sample, grid).0),
            Estimator::LiVuong => li_vuong_cf(sample, grid),
            Estimator::Residual => Ok(residual_cf(sample, grid)),
            Estimator::Symmetric => Ok(symmetric_cf(sample, grid)),
        }
    }
}

impl FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "kotlarski" => Ok(Estimator::Kotlarski),
            "li_vuong" => Ok(Estimator::LiVuong),
            "residual" => Ok(Estimator::Residual),
            "symmetric" => Ok(Estimator::Symmetric),
            other => Err(Error::Parse(format!(
                "unknown estimator `{other}` (expected kotlarski, li_vuong, residual or symmetric)"
            ))),
        }
    }
}

/// By-products of the modified estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorDiagnostics {
    /// `int_0^u dpsi / psi_tilde`, the exponent before clipping.
    pub cumulative_integral: CfCurve,
    /// Share of grid points where the unclipped estimate left the unit disc.
    pub clip_fraction: f64,
    /// Share of grid points where the truncation threshold was active.
    pub truncation_fraction: f64,
}

#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct HalfCounts {
    pub clipped: usize,
    pub truncated: usize,
}

/// Exponentiated cumulative log-derivative integral on the half grid.
///
/// `sqrt_n = Some(s)` truncates the denominator at modulus `1/s`; `None` uses
/// it as is. With `clip` the result is `exp(I) / max(1, |exp(I)|)`, evaluated
/// as `exp(min(Re I, 0) + i Im I)` so that large exponents cannot overflow.
pub(crate) fn log_derivative_integral(
    partial: &[Complex64],
    marginal: &[Complex64],
    sqrt_n: Option<f64>,
    clip: bool,
    step: f64,
    out: &mut [Complex64],
    mut integral: Option<&mut [Complex64]>,
) -> HalfCounts {
    debug_assert_eq!(partial.len(), marginal.len());
    debug_assert_eq!(out.len(), marginal.len());
    let mut counts = HalfCounts::default();
    let ratio = |k: usize, counts: &mut HalfCounts| -> Complex64 {
        let den = match sqrt_n {
            Some(s) => {
                if s * marginal[k].norm() < 1.0 {
                    counts.truncated += 1;
                }
                truncate_value(marginal[k], s)
            }
            None => marginal[k],
        };
        partial[k] / den
    };
    let half_step = 0.5 * step;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut prev = ratio(0, &mut counts);
    out[0] = Complex64::new(1.0, 0.0);
    if let Some(ints) = integral.as_deref_mut() {
        ints[0] = acc;
    }
    for k in 1..marginal.len() {
        let cur = ratio(k, &mut counts);
        acc += (prev + cur) * half_step;
        prev = cur;
        let re = if clip && acc.re > 0.0 {
            counts.clipped += 1;
            0.0
        } else {
            acc.re
        };
        let v = Complex64::from_polar(re.exp(), acc.im);
        out[k] = if clip { clamp_unit(v) } else { v };
        if let Some(ints) = integral.as_deref_mut() {
            ints[k] = acc;
        }
    }
    counts
}

/// Share of the full grid covered by `count` flagged non-negative points,
/// none of which is `u = 0`.
fn full_grid_fraction(count: usize, grid: &FreqGrid) -> f64 {
    (2 * count) as f64 / grid.len() as f64
}

fn check_same_grid(a: &CfCurve, b: &CfCurve) -> Result<()> {
    if a.grid() != b.grid() {
        return Err(Error::config("curves live on different grids"));
    }
    Ok(())
}

/// Modified Kotlarski estimator of `phi_X` from the partial-derivative and
/// marginal curves. `truncation = Some(n)` applies the `n^{-1/2}` denominator
/// floor; `None` (analytic inputs) uses the denominator unchanged.
pub fn kotlarski_from_curves(
    partial: &CfCurve,
    marginal: &CfCurve,
    truncation: Option<usize>,
) -> Result<(CfCurve, EstimatorDiagnostics)> {
    check_same_grid(partial, marginal)?;
    let grid = *marginal.grid();
    let sqrt_n = truncation.map(|n| (n.max(1) as f64).sqrt());
    let mut out = vec![Complex64::new(0.0, 0.0); grid.half_len()];
    let mut integral = out.clone();
    let counts = log_derivative_integral(
        partial.half(),
        marginal.half(),
        sqrt_n,
        true,
        grid.step(),
        &mut out,
        Some(&mut integral),
    );
    let diagnostics = EstimatorDiagnostics {
        cumulative_integral: CfCurve::from_half(grid, &integral, Symmetry::Hermitian),
        clip_fraction: full_grid_fraction(counts.clipped, &grid),
        truncation_fraction: full_grid_fraction(counts.truncated, &grid),
    };
    Ok((CfCurve::from_half(grid, &out, Symmetry::Hermitian), diagnostics))
}

/// Modified Kotlarski estimator of `phi_X`: exponentiated cumulative integral
/// of the empirical partial derivative over the truncated empirical marginal,
/// clipped pointwise to the unit disc.
pub fn kotlarski_cf(sample: &PanelSample, grid: &FreqGrid) -> (CfCurve, EstimatorDiagnostics) {
    let (marginal, partial) = empirical_cf_pair(sample, grid);
    kotlarski_from_curves(&partial, &marginal, Some(sample.n())).expect("curves share the grid")
}

/// Li–Vuong estimator from curves: raw denominator, no clipping.
pub fn li_vuong_from_curves(partial: &CfCurve, marginal: &CfCurve) -> Result<CfCurve> {
    check_same_grid(partial, marginal)?;
    let grid = *marginal.grid();
    if let Some(k) = marginal.half().iter().position(|v| v.norm() == 0.0) {
        return Err(Error::Estimator(format!(
            "empirical marginal CF vanishes at u = {}",
            k as f64 * grid.step()
        )));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); grid.half_len()];
    log_derivative_integral(partial.half(), marginal.half(), None, false, grid.step(), &mut out, None);
    Ok(CfCurve::from_half(grid, &out, Symmetry::Hermitian))
}

/// Li–Vuong estimator of `phi_X`. Fails if the empirical marginal CF is
/// exactly zero somewhere on the grid.
pub fn li_vuong_cf(sample: &PanelSample, grid: &FreqGrid) -> Result<CfCurve> {
    let (marginal, partial) = empirical_cf_pair(sample, grid);
    li_vuong_from_curves(&partial, &marginal)
}

pub(crate) fn residual_half(marginal: &[Complex64], phi_x: &[Complex64], sqrt_n: Option<f64>, out: &mut [Complex64]) {
    for ((o, &m), &p) in out.iter_mut().zip(marginal).zip(phi_x) {
        let den = match sqrt_n {
            Some(s) => truncate_value(p, s),
            None => p,
        };
        *o = m / den;
    }
}

/// Plug-in estimator of `phi_eps = psi(0,u) / phi_X(u)` with the estimate of
/// `phi_X` truncated at `n^{-1/2}` (no truncation for `None`).
pub fn residual_from_curves(marginal: &CfCurve, phi_x: &CfCurve, truncation: Option<usize>) -> Result<CfCurve> {
    check_same_grid(marginal, phi_x)?;
    let grid = *marginal.grid();
    let mut out = vec![Complex64::new(0.0, 0.0); grid.half_len()];
    residual_half(marginal.half(), phi_x.half(), truncation.map(|n| (n as f64).sqrt()), &mut out);
    Ok(CfCurve::from_half(grid, &out, Symmetry::Hermitian))
}

/// Plug-in estimator of the error CF.
pub fn residual_cf(sample: &PanelSample, grid: &FreqGrid) -> CfCurve {
    let (marginal, partial) = empirical_cf_pair(sample, grid);
    let (phi_x, _) = kotlarski_from_curves(&partial, &marginal, Some(sample.n())).expect("shared grid");
    residual_from_curves(&marginal, &phi_x, Some(sample.n())).expect("shared grid")
}

pub(crate) fn symmetric_half(
    marginal: &[Complex64],
    diff_cf: &[Complex64],
    sqrt_n: Option<f64>,
    out: &mut [Complex64],
) {
    let floor = sqrt_n.map_or(0.0, |s| 1.0 / s);
    for ((o, &m), d) in out.iter_mut().zip(marginal).zip(diff_cf) {
        let den = d.re.max(0.0).sqrt().max(floor);
        *o = m / den;
    }
}

/// Symmetric-error baseline from curves: `marginal / max(sqrt(max(Re diff, 0)), n^{-1/2})`,
/// where `diff_cf` estimates the CF of `Y_1 - Y_2`, i.e. `phi_eps^2` under
/// symmetry.
pub fn symmetric_from_curves(marginal: &CfCurve, diff_cf: &CfCurve, truncation: Option<usize>) -> Result<CfCurve> {
    check_same_grid(marginal, diff_cf)?;
    let grid = *marginal.grid();
    let mut out = vec![Complex64::new(0.0, 0.0); grid.half_len()];
    symmetric_half(marginal.half(), diff_cf.half(), truncation.map(|n| (n as f64).sqrt()), &mut out);
    Ok(CfCurve::from_half(grid, &out, Symmetry::Hermitian))
}

/// Baseline estimator of `phi_X` valid for symmetric errors.
pub fn symmetric_cf(sample: &PanelSample, grid: &FreqGrid) -> CfCurve {
    let (marginal, _) = empirical_cf_pair(sample, grid);
    let diff = empirical_cf(&sample.differences(), grid);
    symmetric_from_curves(&marginal, &diff, Some(sample.n())).expect("shared grid")
}

/// Density values on a uniform support grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityCurve {
    x: Vec<f64>,
    values: Vec<f64>,
}

impl DensityCurve {
    pub fn x_points(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Trapezoidal integral over the support grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.x, &self.values)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,f")?;
        for (x, f) in self.x.iter().zip(&self.values) {
            writeln!(w, "{x},{f}")?;
        }
        Ok(())
    }
}

pub(crate) fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1])).sum()
}

/// `start, start + step, ..., end` (inclusive).
pub fn uniform_points(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && end > start && step.is_finite() && start.is_finite() && end.is_finite()) {
        return Err(Error::config(format!("invalid support grid [{start}, {end}] step {step}")));
    }
    let count = ((end - start) / step).round() as usize;
    Ok((0..=count).map(|i| start + i as f64 * step).collect())
}

/// Default support grid `[-10, 10]` with step `0.01`.
pub fn default_x_points() -> Vec<f64> {
    uniform_points(-10.0, 10.0, 0.01).expect("valid constants")
}

fn check_uniform(x: &[f64]) -> Result<()> {
    if x.len() < 2 {
        return Err(Error::config("support grid needs at least two points"));
    }
    let step = x[1] - x[0];
    if step.is_nan() || step <= 0.0 {
        return Err(Error::config("support grid must be increasing"));
    }
    if x.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > 1e-9 * step.max(1.0)) {
        return Err(Error::config("support grid must be uniform"));
    }
    Ok(())
}

/// Kernel density estimate `f(x) = (1/2pi) int e^{-iux} phi(u) FK_h(u) du` by
/// trapezoidal quadrature over the curve's grid.
///
/// Hermitian pairing of `u` and `-u` makes the result real:
/// `f(x) = (1/pi) int_0^U Re(e^{-iux} phi(u)) FK_h(u) du`.
pub fn density_from_cf(cf: &CfCurve, kind: KernelKind, h: f64, x_points: &[f64]) -> Result<DensityCurve> {
    check_bandwidth(h)?;
    check_uniform(x_points)?;
    if cf.symmetry() != Symmetry::Hermitian && !cf.is_hermitian(1e-12) {
        return Err(Error::config("density inversion needs a hermitian curve"));
    }
    let grid = cf.grid();
    let needed = kind.required_u_max(h);
    if grid.u_max() < needed * (1.0 - 1e-12) {
        return Err(Error::config(format!(
            "frequency grid reaches {} but the {} kernel with h = {h} needs u_max >= {needed}",
            grid.u_max(),
            kind.name()
        )));
    }
    let mut weighted: Vec<Complex64> = cf
        .half()
        .iter()
        .zip(grid.half_points())
        .map(|(&v, u)| v * kind.weight(h, u))
        .collect();
    let tw = grid.even_trapezoid_weights();
    for (w, t) in weighted.iter_mut().zip(&tw) {
        *w *= *t;
    }
    let values = x_points
        .iter()
        .map(|&x| {
            // sum_k tw_k Re(e^{-i u_k x} phi_k K_k), phasor advanced by rotation
            let mut total = 0.0;
            let mut k = 0;
            let len = weighted.len();
            let (s, c) = (-grid.step() * x).sin_cos();
            let rot = Complex64::new(c, s);
            while k < len {
                let (s0, c0) = (-(k as f64) * grid.step() * x).sin_cos();
                let mut z = Complex64::new(c0, s0);
                let end = (k + 64).min(len);
                for w in &weighted[k..end] {
                    total += (z * w).re;
                    z *= rot;
                }
                k = end;
            }
            total / (2.0 * std::f64::consts::PI)
        })
        .collect();
    Ok(DensityCurve { x: x_points.to_vec(), values })
}
