//! Distributions with inverse-CDF sampling, so that a sample is a pure function of
//! a uniform seed in `[0, 1)`.

use crate::error::{Error, Result};
use crate::value::Value;
use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub enum Dist {
    Gaussian { mu: f64, sigma: f64 },
    Uniform { a: f64, b: f64 },
    Bernoulli { p: f64 },
    /// Independent coordinates with per-coordinate standard deviations.
    MvGaussian { mu: Arc<[f64]>, sigma: Arc<[f64]> },
    Empirical(Arc<Empirical>),
}

/// Weighted finite support; weights are normalized.
#[derive(Debug, Clone)]
pub struct Empirical {
    pub support: Vec<Value>,
    pub weights: Vec<f64>,
}

impl PartialEq for Empirical {
    fn eq(&self, other: &Self) -> bool {
        self.support == other.support
            && self.weights.len() == other.weights.len()
            && self.weights.iter().zip(&other.weights).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub ess: f64,
}

impl Dist {
    pub fn gaussian(mu: f64, sigma: f64) -> Result<Dist> {
        if !(sigma > 0.0) || !sigma.is_finite() || !mu.is_finite() {
            return Err(Error::Domain(format!("gaussian({mu}, {sigma}): need finite mean and sigma > 0")));
        }
        Ok(Dist::Gaussian { mu, sigma })
    }

    pub fn uniform(a: f64, b: f64) -> Result<Dist> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Domain(format!("uniform({a}, {b}): need a < b")));
        }
        Ok(Dist::Uniform { a, b })
    }

    pub fn bernoulli(p: f64) -> Result<Dist> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("bernoulli({p}): need 0 <= p <= 1")));
        }
        Ok(Dist::Bernoulli { p })
    }

    pub fn mv_gaussian(mu: Arc<[f64]>, sigma: Arc<[f64]>) -> Result<Dist> {
        if mu.len() != sigma.len() || mu.is_empty() {
            return Err(Error::Domain("gaussian: mean and sigma vectors differ in length".into()));
        }
        if sigma.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::Domain("gaussian: every sigma must be > 0".into()));
        }
        Ok(Dist::MvGaussian { mu, sigma })
    }

    /// Normalizes `log_weights` into an empirical distribution.
    pub fn empirical(support: Vec<Value>, log_weights: &[f64]) -> Result<Dist> {
        let m = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return Err(Error::Domain("empirical distribution with zero total weight".into()));
        }
        let ws: Vec<f64> = log_weights.iter().map(|w| (w - m).exp()).collect();
        let total: f64 = ws.iter().sum();
        let weights = ws.into_iter().map(|w| w / total).collect();
        Ok(Dist::Empirical(Arc::new(Empirical { support, weights })))
    }

    /// Number of uniforms a draw consumes when every coordinate gets its own.
    pub fn dim(&self) -> usize {
        match self {
            Dist::MvGaussian { mu, .. } => mu.len(),
            _ => 1,
        }
    }

    /// Inverse CDF. Multi-coordinate distributions derive coordinates `k >= 1` from
    /// `u` with [`coordinate`].
    pub fn icdf(&self, u: f64) -> Result<Value> {
        if !(0.0..1.0).contains(&u) {
            return Err(Error::Domain(format!("seed {u} outside [0, 1)")));
        }
        Ok(match self {
            Dist::Gaussian { mu, sigma } => Value::Real(mu + sigma * normal_icdf(u)?),
            Dist::Uniform { a, b } => Value::Real(a + u * (b - a)),
            Dist::Bernoulli { p } => Value::Bool(u >= 1.0 - p),
            Dist::MvGaussian { mu, sigma } => {
                let mut xs = Vec::with_capacity(mu.len());
                for k in 0..mu.len() {
                    xs.push(mu[k] + sigma[k] * normal_icdf(coordinate(u, k))?);
                }
                Value::vector(xs)
            }
            Dist::Empirical(e) => {
                let mut acc = 0.0;
                for (v, w) in e.support.iter().zip(&e.weights) {
                    acc += w;
                    if u < acc {
                        return Ok(v.clone());
                    }
                }
                e.support.last().cloned().ok_or_else(|| Error::Domain("empty support".into()))?
            }
        })
    }

    pub fn log_pdf(&self, x: &Value) -> Result<f64> {
        Ok(match self {
            Dist::Gaussian { mu, sigma } => gaussian_log_pdf(*mu, *sigma, x.as_real()?),
            Dist::Uniform { a, b } => {
                let x = x.as_real()?;
                if *a <= x && x <= *b {
                    -(b - a).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Dist::Bernoulli { p } => {
                if x.as_bool()? {
                    p.ln()
                } else {
                    (1.0 - p).ln()
                }
            }
            Dist::MvGaussian { mu, sigma } => match x {
                Value::Vec(xs) if xs.len() == mu.len() => {
                    (0..mu.len()).map(|k| gaussian_log_pdf(mu[k], sigma[k], xs[k])).sum()
                }
                v => return Err(Error::ty(format!("gaussian of dimension {}: bad point {v}", mu.len()))),
            },
            Dist::Empirical(e) => {
                let m: f64 = e.support.iter().zip(&e.weights).filter(|(v, _)| *v == x).map(|(_, w)| w).sum();
                m.ln()
            }
        })
    }

    pub fn pdf(&self, x: &Value) -> Result<f64> {
        Ok(self.log_pdf(x)?.exp())
    }

    pub fn summarize(&self) -> Result<Summary> {
        Ok(match self {
            Dist::Gaussian { mu, sigma } => {
                Summary { mean: vec![*mu], var: vec![sigma * sigma], ess: f64::INFINITY }
            }
            Dist::Uniform { a, b } => Summary {
                mean: vec![0.5 * (a + b)],
                var: vec![(b - a) * (b - a) / 12.0],
                ess: f64::INFINITY,
            },
            Dist::Bernoulli { p } => Summary { mean: vec![*p], var: vec![p * (1.0 - p)], ess: f64::INFINITY },
            Dist::MvGaussian { mu, sigma } => Summary {
                mean: mu.to_vec(),
                var: sigma.iter().map(|s| s * s).collect(),
                ess: f64::INFINITY,
            },
            Dist::Empirical(e) => e.summarize()?,
        })
    }
}

impl Empirical {
    pub fn summarize(&self) -> Result<Summary> {
        let points: Vec<Vec<f64>> = self.support.iter().map(Value::flatten).collect::<Result<_>>()?;
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::ty("empirical support mixes values of different shapes"));
        }
        let mut mean = vec![0.0; dim];
        for (p, w) in points.iter().zip(&self.weights) {
            for k in 0..dim {
                mean[k] += w * p[k];
            }
        }
        let mut var = vec![0.0; dim];
        for (p, w) in points.iter().zip(&self.weights) {
            for k in 0..dim {
                let d = p[k] - mean[k];
                var[k] += w * d * d;
            }
        }
        let ess = 1.0 / self.weights.iter().map(|w| w * w).sum::<f64>();
        Ok(Summary { mean, var, ess })
    }
}

impl fmt::Display for Dist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dist::Gaussian { mu, sigma } => write!(f, "gaussian({mu}, {sigma})"),
            Dist::Uniform { a, b } => write!(f, "uniform({a}, {b})"),
            Dist::Bernoulli { p } => write!(f, "bernoulli({p})"),
            Dist::MvGaussian { mu, sigma } => write!(f, "gaussian({mu:?}, {sigma:?})"),
            Dist::Empirical(e) => write!(f, "empirical({} atoms)", e.support.len()),
        }
    }
}

fn gaussian_log_pdf(mu: f64, sigma: f64, x: f64) -> f64 {
    let z = (x - mu) / sigma;
    -0.5 * z * z - sigma.ln() - 0.5 * (2.0 * PI).ln()
}

/// Uniform for coordinate `k` of a multi-coordinate draw seeded by `u`.
pub fn coordinate(u: f64, k: usize) -> f64 {
    if k == 0 {
        return u;
    }
    let mut z = u.to_bits() ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal quantile: Acklam's rational approximation followed by one Halley
/// refinement against the exact CDF.
pub fn normal_icdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("normal quantile undefined at {p}")));
    }
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383_577_518_672_69e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [7.784695709041462e-3, 3.224671290700398e-1, 2.445134137142996, 3.754408661907416];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    Ok(x - u / (1.0 + 0.5 * x * u))
}
