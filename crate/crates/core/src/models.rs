//! Parametric distributions used to drive simulations and oracle checks.
//!
//! Gamma laws are parametrized by `(shape, rate)`, so `gamma(4,2)` has mean 2.
//! The bilateral gamma `bgamma(a1,l1,a2,l2)` is the law of `G1 - G2` with
//! independent `G1 ~ gamma(a1,l1)` and `G2 ~ gamma(a2,l2)`; its CF is
//! `(1 - iu/l1)^(-a1) (1 + iu/l2)^(-a2)`.
//!
//! # Literal grammar
//!
//! ```text
//! model     := gamma | bgamma | normal | mixnormal
//! gamma     := "gamma(" shape "," rate [ "," ["shift="] shift ] ")"
//! bgamma    := "bgamma(" a1 "," l1 "," a2 "," l2 ")"
//! normal    := "normal(" mean "," variance ")"
//! mixnormal := "mixnormal(" comp { "," comp } ")"
//! comp      := weight ":" mean ":" variance
//! ```
//!
//! Whitespace is ignored; numbers are decimal floats.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::cf::PanelSample;
use crate::error::{Error, Result};

/// Error models must have |mean| below this to count as centred.
pub const MEAN_ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Gamma { shape: f64, rate: f64, shift: f64 },
    BilateralGamma { shape_pos: f64, rate_pos: f64, shape_neg: f64, rate_neg: f64 },
    Normal { mean: f64, variance: f64 },
    NormalMixture(Vec<MixtureComponent>),
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be positive and finite, got {v}")))
    }
}

impl ModelSpec {
    pub fn gamma(shape: f64, rate: f64, shift: f64) -> Result<Self> {
        let m = ModelSpec::Gamma { shape, rate, shift };
        m.validate()?;
        Ok(m)
    }

    pub fn bilateral_gamma(shape_pos: f64, rate_pos: f64, shape_neg: f64, rate_neg: f64) -> Result<Self> {
        let m = ModelSpec::BilateralGamma { shape_pos, rate_pos, shape_neg, rate_neg };
        m.validate()?;
        Ok(m)
    }

    pub fn normal(mean: f64, variance: f64) -> Result<Self> {
        let m = ModelSpec::Normal { mean, variance };
        m.validate()?;
        Ok(m)
    }

    pub fn normal_mixture(components: Vec<MixtureComponent>) -> Result<Self> {
        let m = ModelSpec::NormalMixture(components);
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ModelSpec::Gamma { shape, rate, shift } => {
                positive("gamma shape", shape)?;
                positive("gamma rate", rate)?;
                if !shift.is_finite() {
                    return Err(Error::config("gamma shift must be finite"));
                }
            }
            ModelSpec::BilateralGamma { shape_pos, rate_pos, shape_neg, rate_neg } => {
                positive("bilateral gamma shape", shape_pos)?;
                positive("bilateral gamma rate", rate_pos)?;
                positive("bilateral gamma shape", shape_neg)?;
                positive("bilateral gamma rate", rate_neg)?;
            }
            ModelSpec::Normal { mean, variance } => {
                if !mean.is_finite() {
                    return Err(Error::config("normal mean must be finite"));
                }
                positive("normal variance", variance)?;
            }
            ModelSpec::NormalMixture(ref comps) => {
                if comps.is_empty() {
                    return Err(Error::config("normal mixture needs at least one component"));
                }
                let mut total = 0.0;
                for c in comps {
                    if !(c.weight > 0.0 && c.weight <= 1.0) {
                        return Err(Error::config(format!(
                            "mixture weight must lie in (0, 1], got {}",
                            c.weight
                        )));
                    }
                    if !c.mean.is_finite() {
                        return Err(Error::config("mixture mean must be finite"));
                    }
                    positive("mixture variance", c.variance)?;
                    total += c.weight;
                }
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::config(format!("mixture weights sum to {total}, not 1")));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ModelSpec::Gamma { shape, rate, shift } => shape / rate + shift,
            ModelSpec::BilateralGamma { shape_pos, rate_pos, shape_neg, rate_neg } => {
                shape_pos / rate_pos - shape_neg / rate_neg
            }
            ModelSpec::Normal { mean, .. } => mean,
            ModelSpec::NormalMixture(ref comps) => comps.iter().map(|c| c.weight * c.mean).sum(),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            ModelSpec::Gamma { shape, rate, .. } => shape / (rate * rate),
            ModelSpec::BilateralGamma { shape_pos, rate_pos, shape_neg, rate_neg } => {
                shape_pos / (rate_pos * rate_pos) + shape_neg / (rate_neg * rate_neg)
            }
            ModelSpec::Normal { variance, .. } => variance,
            ModelSpec::NormalMixture(ref comps) => {
                let m = self.mean();
                comps.iter().map(|c| c.weight * (c.variance + c.mean * c.mean)).sum::<f64>() - m * m
            }
        }
    }

    /// `E[Z^2]`.
    pub fn second_moment(&self) -> f64 {
        let m = self.mean();
        self.variance() + m * m
    }

    /// Characteristic function `E[e^{iuZ}]`.
    pub fn cf(&self, u: f64) -> Complex64 {
        match *self {
            ModelSpec::Gamma { shape, rate, shift } => {
                gamma_factor(shape, rate, u) * Complex64::from_polar(1.0, u * shift)
            }
            ModelSpec::BilateralGamma { shape_pos, rate_pos, shape_neg, rate_neg } => {
                gamma_factor(shape_pos, rate_pos, u) * gamma_factor(shape_neg, rate_neg, -u)
            }
            ModelSpec::Normal { mean, variance } => normal_cf(mean, variance, u),
            ModelSpec::NormalMixture(ref comps) => {
                comps.iter().map(|c| c.weight * normal_cf(c.mean, c.variance, u)).sum()
            }
        }
    }

    /// Derivative of the characteristic function in `u`.
    pub fn cf_derivative(&self, u: f64) -> Complex64 {
        let i = Complex64::new(0.0, 1.0);
        match *self {
            ModelSpec::Gamma { shape, rate, shift } => {
                let log_deriv = i * shift + i * (shape / rate) / Complex64::new(1.0, -u / rate);
                self.cf(u) * log_deriv
            }
            ModelSpec::BilateralGamma { shape_pos, rate_pos, shape_neg, rate_neg } => {
                let log_deriv = i * (shape_pos / rate_pos) / Complex64::new(1.0, -u / rate_pos)
                    - i * (shape_neg / rate_neg) / Complex64::new(1.0, u / rate_neg);
                self.cf(u) * log_deriv
            }
            ModelSpec::Normal { mean, variance } => {
                normal_cf(mean, variance, u) * Complex64::new(-variance * u, mean)
            }
            ModelSpec::NormalMixture(ref comps) => comps
                .iter()
                .map(|c| c.weight * normal_cf(c.mean, c.variance, u) * Complex64::new(-c.variance * u, c.mean))
                .sum(),
        }
    }

    /// Whether the density is square integrable, i.e. `|cf|^2` is integrable.
    pub fn is_square_integrable(&self) -> bool {
        match *self {
            ModelSpec::Gamma { shape, .. } => shape > 0.5,
            ModelSpec::BilateralGamma { shape_pos, shape_neg, .. } => shape_pos + shape_neg > 0.5,
            ModelSpec::Normal { .. } | ModelSpec::NormalMixture(_) => true,
        }
    }

    /// Draws `count` i.i.d. values from the stream identified by `seed`.
    pub fn sample(&self, count: usize, seed: SeedSpec) -> Result<Vec<f64>> {
        if count == 0 {
            return Err(Error::config("sample size must be at least 1"));
        }
        self.validate()?;
        let sampler = Sampler::new(self);
        let mut rng = seed.rng();
        Ok((0..count).map(|_| sampler.draw(&mut rng)).collect())
    }
}

/// `(1 - iu/rate)^(-shape)` on the principal branch (the base has positive real part).
fn gamma_factor(shape: f64, rate: f64, u: f64) -> Complex64 {
    let t = u / rate;
    let log_modulus = -0.5 * shape * (t * t).ln_1p();
    Complex64::from_polar(log_modulus.exp(), shape * t.atan())
}

fn normal_cf(mean: f64, variance: f64, u: f64) -> Complex64 {
    Complex64::from_polar((-0.5 * variance * u * u).exp(), mean * u)
}

/// Identifies one reproducible random stream: a ChaCha8 generator seeded with
/// `master_seed`, positioned on stream `replication_index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub replication_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, replication_index: u64) -> Self {
        SeedSpec { master_seed, replication_index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.replication_index);
        rng
    }
}

/// Pre-built distribution objects for repeated draws.
#[derive(Debug, Clone)]
pub struct Sampler {
    kind: SamplerKind,
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Gamma { dist: Gamma<f64>, shift: f64 },
    Bilateral { pos: Gamma<f64>, neg: Gamma<f64> },
    Normal { mean: f64, sd: f64 },
    Mixture { cumulative: Vec<f64>, means: Vec<f64>, sds: Vec<f64> },
}

impl Sampler {
    /// Panics if the model is invalid; callers validate first.
    pub fn new(model: &ModelSpec) -> Self {
        let gamma = |shape: f64, rate: f64| Gamma::new(shape, 1.0 / rate).expect("validated gamma");
        let kind = match *model {
            ModelSpec::Gamma { shape, rate, shift } => SamplerKind::Gamma { dist: gamma(shape, rate), shift },
            ModelSpec::BilateralGamma { shape_pos, rate_pos, shape_neg, rate_neg } => SamplerKind::Bilateral {
                pos: gamma(shape_pos, rate_pos),
                neg: gamma(shape_neg, rate_neg),
            },
            ModelSpec::Normal { mean, variance } => SamplerKind::Normal { mean, sd: variance.sqrt() },
            ModelSpec::NormalMixture(ref comps) => {
                let mut acc = 0.0;
                let cumulative = comps
                    .iter()
                    .map(|c| {
                        acc += c.weight;
                        acc
                    })
                    .collect();
                SamplerKind::Mixture {
                    cumulative,
                    means: comps.iter().map(|c| c.mean).collect(),
                    sds: comps.iter().map(|c| c.variance.sqrt()).collect(),
                }
            }
        };
        Sampler { kind }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            SamplerKind::Gamma { dist, shift } => dist.sample(rng) + shift,
            SamplerKind::Bilateral { pos, neg } => pos.sample(rng) - neg.sample(rng),
            SamplerKind::Normal { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            SamplerKind::Mixture { cumulative, means, sds } => {
                let v: f64 = rng.random::<f64>() * cumulative[cumulative.len() - 1];
                let k = cumulative.iter().position(|&c| v < c).unwrap_or(cumulative.len() - 1);
                let z: f64 = StandardNormal.sample(rng);
                means[k] + sds[k] * z
            }
        }
    }
}

/// Simulates `n` rows `(X_j + e_{j,1}, X_j + e_{j,2})` with all three draws
/// independent. The error model must be centred.
pub fn sample_panel(model_x: &ModelSpec, model_eps: &ModelSpec, n: usize, seed: SeedSpec) -> Result<PanelSample> {
    if n == 0 {
        return Err(Error::config("panel size must be at least 1"));
    }
    model_x.validate()?;
    model_eps.validate()?;
    let m = model_eps.mean();
    if m.abs() > MEAN_ZERO_TOL {
        return Err(Error::config(format!("error model mean = {m}, must be 0")));
    }
    let sx = Sampler::new(model_x);
    let se = Sampler::new(model_eps);
    let mut rng = seed.rng();
    let mut y1 = Vec::with_capacity(n);
    let mut y2 = Vec::with_capacity(n);
    for _ in 0..n {
        let x = sx.draw(&mut rng);
        y1.push(x + se.draw(&mut rng));
        y2.push(x + se.draw(&mut rng));
    }
    PanelSample::new(y1, y2)
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Gamma { shape, rate, shift } => {
                if *shift == 0.0 {
                    write!(f, "gamma({shape},{rate})")
                } else {
                    write!(f, "gamma({shape},{rate},shift={shift})")
                }
            }
            ModelSpec::BilateralGamma { shape_pos, rate_pos, shape_neg, rate_neg } => {
                write!(f, "bgamma({shape_pos},{rate_pos},{shape_neg},{rate_neg})")
            }
            ModelSpec::Normal { mean, variance } => write!(f, "normal({mean},{variance})"),
            ModelSpec::NormalMixture(comps) => {
                write!(f, "mixnormal(")?;
                for (i, c) in comps.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}:{}:{}", c.weight, c.mean, c.variance)?;
                }
                write!(f, ")")
            }
        }
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let open = compact
            .find('(')
            .ok_or_else(|| Error::Parse(format!("model literal `{s}` is missing `(`")))?;
        if !compact.ends_with(')') {
            return Err(Error::Parse(format!("model literal `{s}` is missing `)`")));
        }
        let name = &compact[..open];
        let body = &compact[open + 1..compact.len() - 1];
        let args: Vec<&str> = if body.is_empty() { Vec::new() } else { body.split(',').collect() };
        let num = |t: &str| -> Result<f64> {
            t.parse::<f64>().map_err(|_| Error::Parse(format!("`{t}` is not a number in `{s}`")))
        };
        let arity = |want: &[usize]| -> Result<()> {
            if want.contains(&args.len()) {
                Ok(())
            } else {
                Err(Error::Parse(format!("`{name}` takes {want:?} arguments, got {}", args.len())))
            }
        };
        match name {
            "gamma" => {
                arity(&[2, 3])?;
                let shift = match args.get(2) {
                    Some(a) => num(a.strip_prefix("shift=").unwrap_or(a))?,
                    None => 0.0,
                };
                ModelSpec::gamma(num(args[0])?, num(args[1])?, shift)
            }
            "bgamma" => {
                arity(&[4])?;
                ModelSpec::bilateral_gamma(num(args[0])?, num(args[1])?, num(args[2])?, num(args[3])?)
            }
            "normal" => {
                arity(&[2])?;
                ModelSpec::normal(num(args[0])?, num(args[1])?)
            }
            "mixnormal" => {
                if args.is_empty() {
                    return Err(Error::Parse("mixnormal needs at least one component".into()));
                }
                let comps = args
                    .iter()
                    .map(|a| {
                        let parts: Vec<&str> = a.split(':').collect();
                        if parts.len() != 3 {
                            return Err(Error::Parse(format!("mixture component `{a}` is not weight:mean:variance")));
                        }
                        Ok(MixtureComponent { weight: num(parts[0])?, mean: num(parts[1])?, variance: num(parts[2])? })
                    })
                    .collect::<Result<Vec<_>>>()?;
                ModelSpec::normal_mixture(comps)
            }
            other => Err(Error::Parse(format!("unknown model `{other}`"))),
        }
    }
}
