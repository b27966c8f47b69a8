//! Bandwidth selection by block leave-10-out cross-validation.
//!
//! Rows are split into consecutive blocks of five. Fold `k` holds out the ten
//! rows of blocks `k` and `k + 1`; the modified estimator is built on the
//! held-out rows and on the remaining rows, and the empirical loss for
//! bandwidth `1/m` is the squared L2 distance between the held-out estimate
//! smoothed at `1/sqrt(n)` and the complementary estimate smoothed at `1/m`,
//! averaged over folds. When `n` is not a multiple of five the trailing
//! `n mod 5` rows are left out of the cross-validation.

use num_complex::Complex64;

use crate::cf::{accumulate_phasors, FreqGrid, PanelSample};
use crate::error::{Error, Result};
use crate::estimators::{half_kernel, KernelKind};

pub const BLOCK_SIZE: usize = 5;
const FOLD_SIZE: usize = 2 * BLOCK_SIZE;

/// Candidate bandwidths `h = 1/m` for `m = 1..=floor(sqrt(n))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BandwidthSet {
    max_m: usize,
}

impl BandwidthSet {
    pub fn for_sample_size(n: usize) -> Self {
        BandwidthSet { max_m: n.isqrt().max(1) }
    }

    pub fn max_m(&self) -> usize {
        self.max_m
    }

    pub fn contains(&self, m: usize) -> bool {
        (1..=self.max_m).contains(&m)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> {
        1..=self.max_m
    }

    pub fn bandwidth(m: usize) -> f64 {
        1.0 / m as f64
    }
}

/// Number of folds used for a sample of size `n`.
pub fn fold_count(n: usize) -> usize {
    (n / BLOCK_SIZE).saturating_sub(1)
}

fn check_size(n: usize) -> Result<usize> {
    let blocks = n / BLOCK_SIZE;
    if blocks < 3 {
        return Err(Error::TooFewObservations(n));
    }
    Ok(blocks)
}

/// `i w conj(p) / |p|^2`, the empirical log-derivative from raw sums over
/// `count` rows, with the denominator `p / count` lifted to modulus
/// `count^{-1/2}` when it falls below.
#[inline]
fn log_derivative(w: Complex64, p: Complex64, count: f64, sqrt_count: f64) -> Complex64 {
    let m2 = p.norm_sqr();
    if m2 == 0.0 {
        return Complex64::new(0.0, 1.0) * w / sqrt_count;
    }
    let d = if m2 >= count { m2 } else { sqrt_count * m2.sqrt() };
    let q = w * p.conj();
    Complex64::new(-q.im / d, q.re / d)
}

/// Runs the fold estimators and hands each pair (held-out, complement) of
/// clipped exponents `min(Re I, 0) + i Im I` on the half grid to `visit`;
/// the estimate is `exp` of the exponent.
fn for_each_fold(sample: &PanelSample, grid: &FreqGrid, mut visit: impl FnMut(&[Complex64], &[Complex64])) -> Result<()> {
    let blocks = check_size(sample.n())?;
    let used = blocks * BLOCK_SIZE;
    let len = grid.half_len();
    let zero = Complex64::new(0.0, 0.0);
    let step = grid.step();
    let half_step = 0.5 * step;

    let mut total_p = vec![zero; len];
    let mut total_w = vec![zero; len];
    accumulate_phasors(&sample.y2()[..used], Some(&sample.y1()[..used]), step, &mut total_p, Some(&mut total_w));

    let block_sums = |b: usize, plain: &mut [Complex64], weighted: &mut [Complex64]| {
        let rows = b * BLOCK_SIZE..(b + 1) * BLOCK_SIZE;
        plain.fill(zero);
        weighted.fill(zero);
        accumulate_phasors(&sample.y2()[rows.clone()], Some(&sample.y1()[rows]), step, plain, Some(weighted));
    };

    let (mut prev_p, mut prev_w) = (vec![zero; len], vec![zero; len]);
    let (mut cur_p, mut cur_w) = (vec![zero; len], vec![zero; len]);
    block_sums(0, &mut prev_p, &mut prev_w);

    let mut held = vec![zero; len];
    let mut rest = vec![zero; len];
    let held_n = FOLD_SIZE as f64;
    let rest_n = (used - FOLD_SIZE) as f64;
    let (sqrt_held, sqrt_rest) = (held_n.sqrt(), rest_n.sqrt());

    for b in 1..blocks {
        block_sums(b, &mut cur_p, &mut cur_w);
        let mut acc_h = zero;
        let mut acc_r = zero;
        let mut last_h = zero;
        let mut last_r = zero;
        for k in 0..len {
            let ip = prev_p[k] + cur_p[k];
            let iw = prev_w[k] + cur_w[k];
            let rh = log_derivative(iw, ip, held_n, sqrt_held);
            let rr = log_derivative(total_w[k] - iw, total_p[k] - ip, rest_n, sqrt_rest);
            if k > 0 {
                acc_h += (last_h + rh) * half_step;
                acc_r += (last_r + rr) * half_step;
            }
            last_h = rh;
            last_r = rr;
            held[k] = Complex64::new(acc_h.re.min(0.0), acc_h.im);
            rest[k] = Complex64::new(acc_r.re.min(0.0), acc_r.im);
        }
        visit(&held, &rest);
        std::mem::swap(&mut prev_p, &mut cur_p);
        std::mem::swap(&mut prev_w, &mut cur_w);
    }
    Ok(())
}

/// `sum_k w_k |held_k Kr_k - rest_k Km_k|^2` on the half grid.
pub(crate) fn fold_loss(held: &[Complex64], rest: &[Complex64], k_ref: &[f64], k_m: &[f64], weights: &[f64]) -> f64 {
    (0..held.len())
        .map(|k| weights[k] * (held[k] * k_ref[k] - rest[k] * k_m[k]).norm_sqr())
        .sum()
}

fn exp_curve(exponents: &[Complex64]) -> impl Iterator<Item = Complex64> + '_ {
    exponents.iter().map(|e| Complex64::from_polar(e.re.exp(), e.im))
}

/// Empirical loss for one `m`, computed fold by fold as
/// `mean_k || held_k FK_{1/sqrt n} - rest_k FK_{1/m} ||^2` (trapezoid on the grid).
pub fn cv_loss(sample: &PanelSample, m: usize, grid: &FreqGrid, kind: KernelKind) -> Result<f64> {
    let set = BandwidthSet::for_sample_size(sample.n());
    if !set.contains(m) {
        return Err(Error::config(format!("m = {m} is outside 1..={}", set.max_m())));
    }
    let k_ref = half_kernel(kind, 1.0 / (sample.n() as f64).sqrt(), grid);
    let k_m = half_kernel(kind, BandwidthSet::bandwidth(m), grid);
    let weights = grid.even_trapezoid_weights();
    let mut losses = Vec::new();
    for_each_fold(sample, grid, |held, rest| {
        let held: Vec<Complex64> = exp_curve(held).collect();
        let rest: Vec<Complex64> = exp_curve(rest).collect();
        losses.push(fold_loss(&held, &rest, &k_ref, &k_m, &weights));
    })?;
    Ok(crate::quad::compensated_sum(losses.iter().copied()) / losses.len() as f64)
}

/// Empirical losses for every `m` in the bandwidth set.
#[derive(Debug, Clone, PartialEq)]
pub struct CvProfile {
    /// `losses[m - 1]` is the loss for bandwidth `1/m`.
    pub losses: Vec<f64>,
    pub folds: usize,
}

impl CvProfile {
    pub fn loss(&self, m: usize) -> f64 {
        self.losses[m - 1]
    }

    /// The minimizing `m`, ties broken toward smaller `m`.
    pub fn argmin(&self) -> usize {
        argmin_smallest(&self.losses) + 1
    }
}

/// Index of the smallest value; the first one wins ties and NaN never wins.
pub fn argmin_smallest(values: &[f64]) -> usize {
    let mut best = 0;
    let mut best_v = f64::INFINITY;
    for (i, &v) in values.iter().enumerate() {
        if v < best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Cross-validation losses for all `m` from a single pass over the folds.
///
/// Per grid point the fold loss expands to
/// `|a|^2 Kr^2 - 2 Re(a conj b) Kr Km + |b|^2 Km^2`, so only the fold sums of
/// `|a|^2`, `Re(a conj b)` and `|b|^2` are needed.
pub fn cv_profile(sample: &PanelSample, grid: &FreqGrid, kind: KernelKind) -> Result<CvProfile> {
    let len = grid.half_len();
    let mut held_sq = vec![0.0; len];
    let mut cross = vec![0.0; len];
    let mut rest_sq = vec![0.0; len];
    let mut folds = 0usize;
    for_each_fold(sample, grid, |held, rest| {
        for k in 0..len {
            let a = held[k].re.exp();
            let b = rest[k].re.exp();
            held_sq[k] += a * a;
            cross[k] += a * b * (held[k].im - rest[k].im).cos();
            rest_sq[k] += b * b;
        }
        folds += 1;
    })?;
    let set = BandwidthSet::for_sample_size(sample.n());
    let k_ref = half_kernel(kind, 1.0 / (sample.n() as f64).sqrt(), grid);
    let weights = grid.even_trapezoid_weights();
    let losses = set
        .iter()
        .map(|m| {
            let h = BandwidthSet::bandwidth(m);
            let total: f64 = grid
                .half_points()
                .enumerate()
                .map(|(k, u)| {
                    let km = kind.weight(h, u);
                    let kr = k_ref[k];
                    weights[k] * (held_sq[k] * kr * kr - 2.0 * cross[k] * kr * km + rest_sq[k] * km * km)
                })
                .sum();
            (total / folds as f64).max(0.0)
        })
        .collect();
    Ok(CvProfile { losses, folds })
}

/// Selected bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct CvSelection {
    pub m: usize,
    pub h: f64,
    pub profile: CvProfile,
}

/// Minimizes the cross-validation loss over `m = 1..=floor(sqrt(n))`.
pub fn cv_select(sample: &PanelSample, grid: &FreqGrid, kind: KernelKind) -> Result<CvSelection> {
    let profile = cv_profile(sample, grid, kind)?;
    let m = profile.argmin();
    Ok(CvSelection { m, h: BandwidthSet::bandwidth(m), profile })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{sample_panel, ModelSpec, SeedSpec};

    fn scenario_sample(n: usize, rep: u64) -> PanelSample {
        let x: ModelSpec = "normal(0,1)".parse().unwrap();
        let e: ModelSpec = "bgamma(2,2,3,3)".parse().unwrap();
        sample_panel(&x, &e, n, SeedSpec::new(99, rep)).unwrap()
    }

    #[test]
    fn bandwidth_set_domain() {
        assert_eq!(BandwidthSet::for_sample_size(100).max_m(), 10);
        assert_eq!(BandwidthSet::for_sample_size(99).max_m(), 9);
        assert_eq!(BandwidthSet::for_sample_size(1).max_m(), 1);
        assert_eq!(BandwidthSet::for_sample_size(10_000).iter().count(), 100);
        assert_eq!(BandwidthSet::bandwidth(4), 0.25);
    }

    #[test]
    fn fold_count_matches_blocks() {
        assert_eq!(fold_count(100), 19);
        assert_eq!(fold_count(15), 2);
        let s = scenario_sample(100, 0);
        let grid = FreqGrid::new(5.0, 0.05).unwrap();
        let p = cv_profile(&s, &grid, KernelKind::Gaussian).unwrap();
        assert_eq!(p.folds, 19);
    }

    #[test]
    fn too_few_rows() {
        let s = scenario_sample(14, 0);
        let grid = FreqGrid::new(5.0, 0.05).unwrap();
        assert_eq!(cv_select(&s, &grid, KernelKind::Gaussian).unwrap_err(), Error::TooFewObservations(14));
        assert!(cv_select(&scenario_sample(15, 0), &grid, KernelKind::Gaussian).is_ok());
    }

    #[test]
    fn profile_matches_direct_losses() {
        let s = scenario_sample(103, 1);
        let grid = FreqGrid::new(10.0, 0.01).unwrap();
        for kind in [KernelKind::Gaussian, KernelKind::Sinc] {
            let p = cv_profile(&s, &grid, kind).unwrap();
            for m in [1, 4, 10] {
                let direct = cv_loss(&s, m, &grid, kind).unwrap();
                assert!((p.loss(m) - direct).abs() <= 1e-9 * direct.max(1e-12), "{kind:?} m={m}: {} vs {direct}", p.loss(m));
            }
        }
    }

    #[test]
    fn argmin_ties_go_to_smaller_m() {
        assert_eq!(argmin_smallest(&[3.0, 1.0, 1.0, 2.0]), 1);
        assert_eq!(argmin_smallest(&[f64::NAN, 2.0, 2.0]), 1);
    }

    #[test]
    fn selection_is_deterministic_and_in_range() {
        let s = scenario_sample(100, 2);
        let grid = FreqGrid::new(20.0, 0.01).unwrap();
        let a = cv_select(&s, &grid, KernelKind::Gaussian).unwrap();
        let b = cv_select(&s, &grid, KernelKind::Gaussian).unwrap();
        assert_eq!(a, b);
        assert!((1..=10).contains(&a.m));
        assert_eq!(a.h, 1.0 / a.m as f64);
        assert!(a.profile.losses.iter().all(|l| l.is_finite() && *l >= 0.0));
    }

    #[test]
    fn within_block_permutation_leaves_loss_unchanged() {
        let s = scenario_sample(50, 3);
        let mut rows: Vec<(f64, f64)> = (0..s.n()).map(|j| s.row(j)).collect();
        rows[5..10].reverse();
        rows.swap(20, 23);
        let p = PanelSample::from_rows(&rows).unwrap();
        let grid = FreqGrid::new(10.0, 0.01).unwrap();
        let a = cv_profile(&s, &grid, KernelKind::Gaussian).unwrap();
        let b = cv_profile(&p, &grid, KernelKind::Gaussian).unwrap();
        for (x, y) in a.losses.iter().zip(&b.losses) {
            assert!((x - y).abs() <= 1e-9 * x.abs().max(1e-12));
        }
    }

    #[test]
    fn halving_the_grid_step_barely_moves_the_loss() {
        let s = scenario_sample(100, 4);
        let grid = FreqGrid::new(20.0, 0.01).unwrap();
        let coarse = cv_profile(&s, &grid, KernelKind::Gaussian).unwrap();
        let fine = cv_profile(&s, &grid.refined(), KernelKind::Gaussian).unwrap();
        for (c, f) in coarse.losses.iter().zip(&fine.losses) {
            assert!(c.is_finite());
            assert!((c - f).abs() / f < 0.01, "{c} vs {f}");
        }
        assert!((1..=10).contains(&coarse.argmin()));
    }

    #[test]
    fn fold_estimates_match_the_estimator_on_the_fold_rows() {
        let s = scenario_sample(52, 6);
        let grid = FreqGrid::new(10.0, 0.01).unwrap();
        let mut first = None;
        for_each_fold(&s, &grid, |held, rest| {
            if first.is_none() {
                first = Some((exp_curve(held).collect::<Vec<_>>(), exp_curve(rest).collect::<Vec<_>>()));
            }
        })
        .unwrap();
        let (held, rest) = first.unwrap();
        let expect_held = crate::estimators::kotlarski_cf(&s.slice(0..10).unwrap(), &grid).0;
        let expect_rest = crate::estimators::kotlarski_cf(&s.slice(10..50).unwrap(), &grid).0;
        for k in 0..grid.half_len() {
            assert!((held[k] - expect_held.half()[k]).norm() < 1e-9, "held {k}");
            assert!((rest[k] - expect_rest.half()[k]).norm() < 1e-9, "rest {k}");
        }
    }

    #[test]
    fn identical_curves_and_kernels_give_zero_loss() {
        let grid = FreqGrid::new(20.0, 0.01).unwrap();
        let s = scenario_sample(100, 7);
        let est = crate::estimators::kotlarski_cf(&s, &grid).0;
        let k_ref = half_kernel(KernelKind::Gaussian, 1.0 / (100f64).sqrt(), &grid);
        let k_m = half_kernel(KernelKind::Gaussian, BandwidthSet::bandwidth(10), &grid);
        let w = grid.even_trapezoid_weights();
        assert_eq!(fold_loss(est.half(), est.half(), &k_ref, &k_m, &w), 0.0);
    }

    #[test]
    fn argmin_is_invariant_under_positive_scaling() {
        let s = scenario_sample(100, 8);
        let grid = FreqGrid::new(20.0, 0.01).unwrap();
        let p = cv_profile(&s, &grid, KernelKind::Gaussian).unwrap();
        for c in [1e-6, 0.3, 7.0, 1e5] {
            let scaled: Vec<f64> = p.losses.iter().map(|l| l * c).collect();
            assert_eq!(argmin_smallest(&scaled) + 1, p.argmin());
        }
    }
}
