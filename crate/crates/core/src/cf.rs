//! Frequency grids, characteristic-function curves and the empirical
//! characteristic functions of a two-column panel sample.
//!
//! Every curve lives on a symmetric uniform grid `-u_max..=u_max`. Values are
//! computed for `u >= 0` only; negative frequencies are filled by reflection
//! (conjugation for hermitian curves, negated conjugation for the
//! anti-hermitian partial-derivative curve), so the symmetry holds bit-exactly.

use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::models::ModelSpec;

/// Phasor recurrences are re-anchored with an exact `sin_cos` this often.
const RESYNC_EVERY: usize = 64;

/// Symmetric uniform frequency grid containing zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqGrid {
    step: f64,
    intervals: usize,
}

impl FreqGrid {
    /// Builds the grid `{k * step : k = -K..=K}` with `K = u_max / step`.
    ///
    /// `u_max / step` must be a positive integer (up to a relative rounding
    /// slack of `1e-9`).
    pub fn new(u_max: f64, step: f64) -> Result<Self> {
        if !(u_max.is_finite() && u_max > 0.0) {
            return Err(Error::config(format!("grid u_max must be positive, got {u_max}")));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::config(format!("grid step must be positive, got {step}")));
        }
        let ratio = u_max / step;
        let intervals = ratio.round();
        if intervals < 1.0 || (ratio - intervals).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::config(format!(
                "grid step {step} does not divide u_max {u_max} into a whole number of intervals"
            )));
        }
        Ok(FreqGrid { step, intervals: intervals as usize })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Number of intervals on each side of zero.
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn u_max(&self) -> f64 {
        self.intervals as f64 * self.step
    }

    /// Total number of grid points, `2K + 1`.
    pub fn len(&self) -> usize {
        2 * self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of non-negative points, `K + 1`.
    pub fn half_len(&self) -> usize {
        self.intervals + 1
    }

    /// Index of `u = 0` in the full grid.
    pub fn zero_index(&self) -> usize {
        self.intervals
    }

    /// The `idx`-th point of the full grid.
    pub fn point(&self, idx: usize) -> f64 {
        (idx as f64 - self.intervals as f64) * self.step
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// The non-negative points `0, step, ..., u_max`.
    pub fn half_points(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.intervals + 1).map(move |k| k as f64 * self.step)
    }

    /// Full-grid index of `u`, if `u` is a grid point.
    pub fn index_of(&self, u: f64) -> Option<usize> {
        let k = (u / self.step).round();
        if k.abs() > self.intervals as f64 || (k * self.step - u).abs() > 1e-9 * self.step {
            return None;
        }
        Some((k as i64 + self.intervals as i64) as usize)
    }

    /// Trapezoid weights on the half grid that integrate an even function over
    /// the full grid: `step * (g_0 + 2 g_1 + ... + 2 g_{K-1} + g_K)`.
    pub fn even_trapezoid_weights(&self) -> Vec<f64> {
        let mut w = vec![2.0 * self.step; self.half_len()];
        w[0] = self.step;
        w[self.intervals] = self.step;
        w
    }

    /// Same grid with half the step.
    pub fn refined(&self) -> FreqGrid {
        FreqGrid { step: self.step / 2.0, intervals: 2 * self.intervals }
    }
}

/// Reflection symmetry carried by a curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    /// `value(-u) = conj(value(u))`
    Hermitian,
    /// `value(-u) = -conj(value(u))`
    AntiHermitian,
    None,
}

/// Complex samples of a function on a [`FreqGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct CfCurve {
    grid: FreqGrid,
    values: Vec<Complex64>,
    symmetry: Symmetry,
}

impl CfCurve {
    /// Builds a full curve from its values on `u >= 0`, reflecting according to
    /// `symmetry`. With [`Symmetry::None`] the negative half is filled by
    /// conjugation as well, but the curve is not flagged.
    pub fn from_half(grid: FreqGrid, half: &[Complex64], symmetry: Symmetry) -> Self {
        assert_eq!(half.len(), grid.half_len(), "half curve length does not match grid");
        let k = grid.intervals();
        let mut values = Vec::with_capacity(grid.len());
        for j in (1..=k).rev() {
            let v = half[j].conj();
            values.push(if symmetry == Symmetry::AntiHermitian { -v } else { v });
        }
        values.extend_from_slice(half);
        CfCurve { grid, values, symmetry }
    }

    /// Wraps full-grid values without any symmetry flag.
    pub fn from_values(grid: FreqGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::config(format!(
                "curve has {} values but the grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(CfCurve { grid, values, symmetry: Symmetry::None })
    }

    pub fn grid(&self) -> &FreqGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Values at `u >= 0`.
    pub fn half(&self) -> &[Complex64] {
        &self.values[self.grid.zero_index()..]
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    /// Value at grid point `u`; `None` if `u` is not on the grid.
    pub fn value_at(&self, u: f64) -> Option<Complex64> {
        self.grid.index_of(u).map(|i| self.values[i])
    }

    /// Checks `value(-u) = conj(value(u))` within an absolute tolerance.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        let n = self.values.len();
        (0..n / 2).all(|i| (self.values[i] - self.values[n - 1 - i].conj()).norm() <= tol)
    }

    pub fn map_half(&self, symmetry: Symmetry, f: impl Fn(f64, Complex64) -> Complex64) -> CfCurve {
        let half: Vec<Complex64> =
            self.grid.half_points().zip(self.half()).map(|(u, &v)| f(u, v)).collect();
        CfCurve::from_half(self.grid, &half, symmetry)
    }

    pub fn max_abs_diff(&self, other: &CfCurve) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Writes the curve as CSV with header `u,re,im`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "u,re,im")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{},{}", self.grid.point(i), v.re, v.im)?;
        }
        Ok(())
    }

    /// Reads a `u,re,im` CSV written by [`CfCurve::write_csv`]. The `u` column
    /// must form a symmetric uniform grid.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut us = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with('u')) {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!("line {}: expected 3 columns", lineno + 1)));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            us.push(parse(fields[0])?);
            values.push(Complex64::new(parse(fields[1])?, parse(fields[2])?));
        }
        if us.len() < 3 || us.len() % 2 == 0 {
            return Err(Error::Parse("curve needs an odd number (>= 3) of rows".into()));
        }
        let u_max = *us.last().unwrap();
        let step = u_max / ((us.len() - 1) / 2) as f64;
        let grid = FreqGrid::new(u_max, step)?;
        for (i, &u) in us.iter().enumerate() {
            if (u - grid.point(i)).abs() > 1e-9 * step.max(1.0) {
                return Err(Error::Parse(format!("row {}: u = {u} is off the uniform grid", i + 1)));
            }
        }
        CfCurve::from_values(grid, values)
    }
}

/// Observations `(Y_{j,1}, Y_{j,2}) = (X_j + e_{j,1}, X_j + e_{j,2})`.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelSample {
    y1: Vec<f64>,
    y2: Vec<f64>,
}

impl PanelSample {
    pub fn new(y1: Vec<f64>, y2: Vec<f64>) -> Result<Self> {
        if y1.len() != y2.len() {
            return Err(Error::config(format!(
                "panel columns differ in length ({} vs {})",
                y1.len(),
                y2.len()
            )));
        }
        if y1.is_empty() {
            return Err(Error::config("panel sample needs at least one row"));
        }
        if let Some(i) = y1.iter().zip(&y2).position(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Error::config(format!("panel row {i} is not finite")));
        }
        Ok(PanelSample { y1, y2 })
    }

    pub fn from_rows(rows: &[(f64, f64)]) -> Result<Self> {
        let (y1, y2) = rows.iter().copied().unzip();
        PanelSample::new(y1, y2)
    }

    pub fn n(&self) -> usize {
        self.y1.len()
    }

    pub fn y1(&self) -> &[f64] {
        &self.y1
    }

    pub fn y2(&self) -> &[f64] {
        &self.y2
    }

    pub fn row(&self, j: usize) -> (f64, f64) {
        (self.y1[j], self.y2[j])
    }

    /// Rows `range` as a new sample.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<PanelSample> {
        PanelSample::new(self.y1[range.clone()].to_vec(), self.y2[range].to_vec())
    }

    /// Within-row differences `Y_{j,1} - Y_{j,2}`.
    pub fn differences(&self) -> Vec<f64> {
        self.y1.iter().zip(&self.y2).map(|(a, b)| a - b).collect()
    }
}

/// Adds `sum_j e^{i k step y_j}` into `plain[k]` and, when `weights` is given,
/// `sum_j w_j e^{i k step y_j}` into `weighted[k]`, for `k = 0..plain.len()`.
///
/// The phasors are advanced by complex rotation and re-anchored every
/// [`RESYNC_EVERY`] steps. Four observations are advanced together so the
/// rotation chains overlap.
pub(crate) fn accumulate_phasors(
    ys: &[f64],
    weights: Option<&[f64]>,
    step: f64,
    plain: &mut [Complex64],
    mut weighted: Option<&mut [Complex64]>,
) {
    let len = plain.len();
    let mut j = 0;
    while j < ys.len() {
        let lanes = (ys.len() - j).min(4);
        let mut y = [0.0; 4];
        let mut w = [0.0; 4];
        for l in 0..lanes {
            y[l] = ys[j + l];
            w[l] = weights.map_or(0.0, |ws| ws[j + l]);
        }
        let mut z = [Complex64::new(1.0, 0.0); 4];
        let mut rot = [Complex64::new(1.0, 0.0); 4];
        for l in 0..lanes {
            let (s, c) = (step * y[l]).sin_cos();
            rot[l] = Complex64::new(c, s);
        }
        let mut k = 0;
        while k < len {
            let end = (k + RESYNC_EVERY).min(len);
            if k > 0 {
                for l in 0..lanes {
                    let (s, c) = (k as f64 * step * y[l]).sin_cos();
                    z[l] = Complex64::new(c, s);
                }
            }
            match weighted.as_deref_mut() {
                Some(wacc) => {
                    for kk in k..end {
                        let mut p = Complex64::new(0.0, 0.0);
                        let mut q = Complex64::new(0.0, 0.0);
                        for l in 0..lanes {
                            p += z[l];
                            q += z[l] * w[l];
                            z[l] *= rot[l];
                        }
                        plain[kk] += p;
                        wacc[kk] += q;
                    }
                }
                None => {
                    for slot in &mut plain[k..end] {
                        let mut p = Complex64::new(0.0, 0.0);
                        for l in 0..lanes {
                            p += z[l];
                            z[l] *= rot[l];
                        }
                        *slot += p;
                    }
                }
            }
            k = end;
        }
        j += lanes;
    }
}

/// Raw sums over rows `rows` of a panel on the half grid:
/// `plain[k] = sum_j e^{i u_k Y_{j,2}}`, `weighted[k] = sum_j Y_{j,1} e^{i u_k Y_{j,2}}`.
pub(crate) fn panel_sums(
    sample: &PanelSample,
    rows: std::ops::Range<usize>,
    grid: &FreqGrid,
    plain: &mut [Complex64],
    weighted: &mut [Complex64],
) {
    plain.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
    weighted.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
    accumulate_phasors(
        &sample.y2()[rows.clone()],
        Some(&sample.y1()[rows]),
        grid.step(),
        plain,
        Some(weighted),
    );
}

/// Turns raw sums into the empirical marginal CF and its partial derivative on
/// the half grid, in place.
pub(crate) fn normalize_sums(plain: &mut [Complex64], weighted: &mut [Complex64], count: usize) {
    let inv = 1.0 / count as f64;
    for v in plain.iter_mut() {
        *v = clamp_unit(*v * inv);
    }
    plain[0] = Complex64::new(1.0, 0.0);
    for v in weighted.iter_mut() {
        *v = Complex64::new(0.0, 1.0) * *v * inv;
    }
}

/// A mean of unit phasors, or `cis`, can exceed modulus one by an ulp; pull it back.
#[inline]
pub(crate) fn clamp_unit(v: Complex64) -> Complex64 {
    let m = v.norm();
    if m <= 1.0 {
        return v;
    }
    let w = v / m;
    if w.norm() > 1.0 {
        w * (1.0 - f64::EPSILON)
    } else {
        w
    }
}

/// Empirical marginal CF `(1/n) sum_j e^{i u Y_{j,2}}` (the joint CF at `u_1 = 0`).
pub fn empirical_cf_marginal(sample: &PanelSample, grid: &FreqGrid) -> CfCurve {
    let mut plain = vec![Complex64::new(0.0, 0.0); grid.half_len()];
    accumulate_phasors(sample.y2(), None, grid.step(), &mut plain, None);
    let inv = 1.0 / sample.n() as f64;
    for v in plain.iter_mut() {
        *v = clamp_unit(*v * inv);
    }
    plain[0] = Complex64::new(1.0, 0.0);
    CfCurve::from_half(*grid, &plain, Symmetry::Hermitian)
}

/// Empirical partial derivative in `u_1` at `u_1 = 0`:
/// `(1/n) sum_j i Y_{j,1} e^{i u Y_{j,2}}`.
pub fn empirical_cf_partial(sample: &PanelSample, grid: &FreqGrid) -> CfCurve {
    let (_, partial) = empirical_cf_pair(sample, grid);
    partial
}

/// Marginal and partial-derivative curves from a single pass over the data.
pub fn empirical_cf_pair(sample: &PanelSample, grid: &FreqGrid) -> (CfCurve, CfCurve) {
    let mut plain = vec![Complex64::new(0.0, 0.0); grid.half_len()];
    let mut weighted = plain.clone();
    panel_sums(sample, 0..sample.n(), grid, &mut plain, &mut weighted);
    normalize_sums(&mut plain, &mut weighted, sample.n());
    (
        CfCurve::from_half(*grid, &plain, Symmetry::Hermitian),
        CfCurve::from_half(*grid, &weighted, Symmetry::AntiHermitian),
    )
}

/// Empirical CF of arbitrary real data `(1/n) sum_j e^{i u x_j}`.
pub fn empirical_cf(data: &[f64], grid: &FreqGrid) -> CfCurve {
    let mut plain = vec![Complex64::new(0.0, 0.0); grid.half_len()];
    accumulate_phasors(data, None, grid.step(), &mut plain, None);
    let inv = 1.0 / data.len().max(1) as f64;
    for v in plain.iter_mut() {
        *v = clamp_unit(*v * inv);
    }
    if !data.is_empty() {
        plain[0] = Complex64::new(1.0, 0.0);
    }
    CfCurve::from_half(*grid, &plain, Symmetry::Hermitian)
}

/// Pointwise truncation `v / min(sqrt(n) |v|, 1)`: values with modulus below
/// `n^{-1/2}` are lifted onto that floor with their phase kept. An exact zero
/// maps to `n^{-1/2} + 0i`.
#[inline]
pub fn truncate_value(v: Complex64, sqrt_n: f64) -> Complex64 {
    let m = v.norm();
    if m == 0.0 {
        return Complex64::new(1.0 / sqrt_n, 0.0);
    }
    let s = sqrt_n * m;
    if s >= 1.0 {
        v
    } else {
        v / s
    }
}

/// Truncation regularization of a whole curve with threshold `n^{-1/2}`.
pub fn regularize_truncate(curve: &CfCurve, n: usize) -> Result<CfCurve> {
    if n == 0 {
        return Err(Error::config("truncation needs n >= 1"));
    }
    let sqrt_n = (n as f64).sqrt();
    let values = curve.values().iter().map(|&v| truncate_value(v, sqrt_n)).collect();
    Ok(CfCurve { grid: curve.grid, values, symmetry: curve.symmetry })
}

/// Closed-form characteristic function of `model` sampled on `grid`.
pub fn analytic_cf(model: &ModelSpec, grid: &FreqGrid) -> CfCurve {
    let half: Vec<Complex64> = grid.half_points().map(|u| model.cf(u)).collect();
    CfCurve::from_half(*grid, &half, Symmetry::Hermitian)
}

/// Closed-form derivative of the characteristic function of `model`.
pub fn analytic_cf_derivative(model: &ModelSpec, grid: &FreqGrid) -> CfCurve {
    let half: Vec<Complex64> = grid.half_points().map(|u| model.cf_derivative(u)).collect();
    CfCurve::from_half(*grid, &half, Symmetry::AntiHermitian)
}
