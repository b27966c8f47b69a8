//! Closed-form convergence rates for the latent and error density estimators.
//!
//! A CF class is `(1 + C|u|^2)^{-beta/2} exp(-c |u|^rho)`: ordinary smooth when
//! `c = 0`, supersmooth when `c > 0`. Rates are reported as
//! `n^{-poly} (log n)^{-log}`; a negative `log` is a growing log factor.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Smoothness class of a characteristic function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSpec {
    pub beta: f64,
    pub c: f64,
    pub rho: f64,
}

impl RateSpec {
    pub fn ordinary(beta: f64) -> Self {
        RateSpec { beta, c: 0.0, rho: 0.0 }
    }

    pub fn supersmooth(beta: f64, c: f64, rho: f64) -> Self {
        RateSpec { beta, c, rho }
    }

    pub fn is_supersmooth(&self) -> bool {
        self.c > 0.0
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::config(format!("beta_{name} must be finite and >= 0, got {}", self.beta)));
        }
        if !(self.c.is_finite() && self.c >= 0.0) {
            return Err(Error::config(format!("c_{name} must be finite and >= 0, got {}", self.c)));
        }
        if self.is_supersmooth() && !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::config(format!("rho_{name} must be > 0 when c_{name} > 0, got {}", self.rho)));
        }
        Ok(())
    }
}

/// Number of finite moments assumed for the panel; `Infinite` is the limit
/// `p -> inf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentOrder {
    Finite(u32),
    Infinite,
}

impl MomentOrder {
    fn inverse(self) -> f64 {
        match self {
            MomentOrder::Finite(p) => 1.0 / p as f64,
            MomentOrder::Infinite => 0.0,
        }
    }
}

impl FromStr for MomentOrder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" => Ok(MomentOrder::Infinite),
            t => t
                .parse::<u32>()
                .map(MomentOrder::Finite)
                .map_err(|_| Error::Parse(format!("moment order `{t}` is neither an integer nor `inf`"))),
        }
    }
}

impl fmt::Display for MomentOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MomentOrder::Finite(p) => write!(f, "{p}"),
            MomentOrder::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateTarget {
    Latent,
    Error,
}

impl FromStr for RateTarget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "X" | "x" => Ok(RateTarget::Latent),
            "eps" | "epsilon" => Ok(RateTarget::Error),
            other => Err(Error::Parse(format!("unknown rate target `{other}` (expected X or eps)"))),
        }
    }
}

/// Which smoothness regime a pair of classes falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateCase {
    BothOrdinary,
    SupersmoothError,
    SupersmoothLatent,
}

impl RateCase {
    pub fn classify(x: &RateSpec, eps: &RateSpec) -> Result<Self> {
        match (x.is_supersmooth(), eps.is_supersmooth()) {
            (false, false) => Ok(RateCase::BothOrdinary),
            (false, true) => Ok(RateCase::SupersmoothError),
            (true, false) => Ok(RateCase::SupersmoothLatent),
            (true, true) => Err(Error::UnsupportedRateCase(
                "no rate is available when both densities are supersmooth".into(),
            )),
        }
    }
}

/// `n^{-poly} (log n)^{-log}`. `log = None` marks a log factor whose power
/// is left unspecified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateDescriptor {
    pub case: RateCase,
    pub poly: f64,
    pub log: Option<f64>,
}

impl RateDescriptor {
    /// The rate evaluated at `n` (unspecified log factors count as 1).
    pub fn evaluate(&self, n: f64) -> f64 {
        n.powf(-self.poly) * n.ln().powf(-self.log.unwrap_or(0.0))
    }
}

impl fmt::Display for RateDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let log = match self.log {
            Some(0.0) => String::new(),
            Some(l) => format!("(log n)^({})", -l),
            None => "(log n)^gamma".to_string(),
        };
        match (self.poly == 0.0, log.is_empty()) {
            (true, true) => f.write_str("1"),
            (true, false) => f.write_str(&log),
            (false, true) => write!(f, "n^({})", -self.poly),
            (false, false) => write!(f, "n^({}) {log}", -self.poly),
        }
    }
}

fn pos(v: f64) -> f64 {
    v.max(0.0)
}

fn need_beta_above_half(beta: f64, name: &str) -> Result<()> {
    if beta > 0.5 {
        Ok(())
    } else {
        Err(Error::config(format!("beta_{name} must exceed 1/2, got {beta}")))
    }
}

fn need_p_at_least_two(p: MomentOrder) -> Result<()> {
    match p {
        MomentOrder::Finite(k) if k < 2 => Err(Error::config(format!("moment order p must be >= 2, got {k}"))),
        _ => Ok(()),
    }
}

/// Rate of the mean integrated squared error of the density estimator for
/// `target` at the rate-optimal bandwidth.
pub fn predicted_rate(target: RateTarget, x: &RateSpec, eps: &RateSpec, p: MomentOrder) -> Result<RateDescriptor> {
    x.validate("x")?;
    eps.validate("eps")?;
    need_p_at_least_two(p)?;
    let case = RateCase::classify(x, eps)?;
    let ip = p.inverse();
    let (bx, be) = (x.beta, eps.beta);
    let (poly, log) = match (target, case) {
        (RateTarget::Latent, RateCase::BothOrdinary) => {
            need_beta_above_half(bx, "x")?;
            need_beta_above_half(be, "eps")?;
            ((2.0 * bx - 1.0) / (2.0 * be + 2.0 * (1.0 + ip) * bx + 1.0), 0.0)
        }
        (RateTarget::Latent, RateCase::SupersmoothError) => {
            need_beta_above_half(bx, "x")?;
            (0.0, (2.0 * bx - 1.0) / eps.rho)
        }
        (RateTarget::Latent, RateCase::SupersmoothLatent) => {
            need_beta_above_half(be, "eps")?;
            let rho = x.rho;
            let g1 = -2.0 * bx + 1.0 - rho;
            // gamma_3 / (p + 1), written so that p = inf is a plain limit.
            let g3_scaled = pos(pos(2.0 * bx + 2.0 * be + 1.0 - rho) + (1.0 - rho) * ip) / (1.0 + ip);
            let share = 1.0 / (1.0 + ip);
            (share, -(share * g1 + g3_scaled) / rho)
        }
        (RateTarget::Error, RateCase::BothOrdinary) => {
            need_beta_above_half(bx, "x")?;
            need_beta_above_half(be, "eps")?;
            // 1 / (p - 1)
            let q = match p {
                MomentOrder::Finite(k) => 1.0 / (k as f64 - 1.0),
                MomentOrder::Infinite => 0.0,
            };
            let den = 2.0 * (1.0 + 2.0 * q) * bx + 2.0 * (1.0 + q) * be + 1.0 + q;
            ((2.0 * be - 1.0) / den, 0.0)
        }
        (RateTarget::Error, RateCase::SupersmoothLatent) => {
            need_beta_above_half(be, "eps")?;
            (0.0, (2.0 * be - 1.0) / x.rho)
        }
        (RateTarget::Error, RateCase::SupersmoothError) => {
            let rho = eps.rho;
            let g1 = -2.0 * be + 1.0 - rho;
            let g3 = pos(pos(2.0 * bx + 2.0 * be + 1.0 - rho) + 2.0 * bx + 1.0 - rho);
            let share = 1.0 - ip;
            (share, -(share * g1 + ip * g3) / rho)
        }
    };
    Ok(RateDescriptor { case, poly, log: Some(log) })
}

/// Competing estimators whose published rates are tabulated for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceEstimator {
    LiVuong,
    Symmetric,
}

/// Published rates of the comparison estimators, as tabulated. The
/// supersmooth-latent rows carry an unspecified log power. The symmetric
/// estimator's `n^{-1+delta}` (any `delta > 0`) is reported as `poly = 1`.
pub fn reference_rate(
    estimator: ReferenceEstimator,
    target: RateTarget,
    x: &RateSpec,
    eps: &RateSpec,
) -> Result<RateDescriptor> {
    x.validate("x")?;
    eps.validate("eps")?;
    let case = RateCase::classify(x, eps)?;
    let (bx, be) = (x.beta, eps.beta);
    let (poly, log) = match (estimator, target, case) {
        (ReferenceEstimator::LiVuong, RateTarget::Latent, RateCase::BothOrdinary) => {
            ((2.0 * bx - 1.0) / (4.0 * bx + 6.0 * be + 4.0), Some(0.0))
        }
        (ReferenceEstimator::LiVuong, RateTarget::Latent, RateCase::SupersmoothError)
        | (ReferenceEstimator::Symmetric, RateTarget::Latent, RateCase::SupersmoothError) => {
            (0.0, Some((2.0 * bx - 1.0) / eps.rho))
        }
        (ReferenceEstimator::LiVuong, RateTarget::Latent, RateCase::SupersmoothLatent) => (1.0 / 3.0, None),
        (ReferenceEstimator::LiVuong, RateTarget::Error, RateCase::BothOrdinary) => {
            // Numerator as tabulated.
            ((2.0 * bx - 1.0) / (6.0 * bx + 6.0 * be + 4.0), Some(0.0))
        }
        (ReferenceEstimator::LiVuong, RateTarget::Error, RateCase::SupersmoothError) => (1.0 / 3.0, None),
        (ReferenceEstimator::LiVuong, RateTarget::Error, RateCase::SupersmoothLatent) => {
            (0.0, Some((2.0 * be - 1.0) / x.rho))
        }
        (ReferenceEstimator::Symmetric, RateTarget::Latent, RateCase::BothOrdinary) => {
            ((2.0 * bx - 1.0) / (2.0 * bx.max(be) + 2.0 * be), Some(0.0))
        }
        (ReferenceEstimator::Symmetric, RateTarget::Latent, RateCase::SupersmoothLatent) => (1.0, None),
        (ReferenceEstimator::Symmetric, RateTarget::Error, _) => {
            return Err(Error::UnsupportedRateCase("no tabulated error-density rate for the symmetric estimator".into()))
        }
    };
    Ok(RateDescriptor { case, poly, log })
}
