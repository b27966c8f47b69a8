//! Small quadrature and summation helpers.

use crate::error::{Error, Result};

/// Composite Simpson rule on `[a, b]` with `panels` (even) subintervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels + panels % 2;
    let h = (b - a) / panels as f64;
    let mut acc = f(a) + f(b);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// `int_start^inf f(u) du` for a non-negative integrand that decays at least
/// like a power `> 1`, integrated on doubling panels `[v, 2v]` until a panel
/// contributes less than `rel_tol` of the running total.
pub fn tail_integral(f: impl Fn(f64) -> f64, start: f64, rel_tol: f64) -> Result<f64> {
    if start.is_nan() || start <= 0.0 {
        return Err(Error::config("tail integral needs a positive start"));
    }
    let mut lo = start;
    let mut total = 0.0;
    for _ in 0..400 {
        let hi = 2.0 * lo;
        let part = simpson(&f, lo, hi, 256);
        total += part;
        if part <= rel_tol * total || (total == 0.0 && part == 0.0) {
            return Ok(total);
        }
        lo = hi;
    }
    Err(Error::config(format!("tail integral from {start} did not converge")))
}

/// Neumaier-compensated sum, in iteration order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Mean and standard error of the mean (zero for a single value).
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean)));
    (mean, (ss / (n - 1.0)).sqrt() / n.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_for_cubics() {
        let v = simpson(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 4);
        assert!((v - 4.0 + 4.0 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn power_law_tail() {
        // int_2^inf u^-4 du = 1 / (3 * 8)
        let v = tail_integral(|u| u.powi(-4), 2.0, 1e-15).unwrap();
        assert!((v - 1.0 / 24.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn gaussian_tail() {
        // int_1^inf e^{-u^2} du = sqrt(pi)/2 * erfc(1)
        let v = tail_integral(|u| (-u * u).exp(), 1.0, 1e-15).unwrap();
        assert!((v - 0.1394027926403309).abs() < 1e-10, "{v}");
    }

    #[test]
    fn compensated_sum_handles_cancellation() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(xs), 2.0);
        let (m, se) = mean_and_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(mean_and_stderr(&[3.0]), (3.0, 0.0));
    }
}
