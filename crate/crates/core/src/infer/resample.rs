use super::Resampling;
use crate::error::{Error, Result};
use rand::RngCore;

use super::rng::unit;

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m.is_nan() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Effective sample size `1 / Σ w²` of normalized weights.
pub fn ess(logw: &[f64]) -> f64 {
    let z = log_sum_exp(logw);
    if z == f64::NEG_INFINITY {
        return 0.0;
    }
    1.0 / logw.iter().map(|w| (2.0 * (w - z)).exp()).sum::<f64>()
}

/// Normalized linear weights; `Degenerate` if every weight is zero.
pub fn normalize(logw: &[f64], step: u64) -> Result<Vec<f64>> {
    let z = log_sum_exp(logw);
    if z == f64::NEG_INFINITY {
        return Err(Error::Degenerate { step });
    }
    if !z.is_finite() {
        return Err(Error::NonFinite(format!("normalization constant at step {step}")));
    }
    Ok(logw.iter().map(|w| (w - z).exp()).collect())
}

/// Ancestor indices of `n` resampled particles.
pub fn resample(logw: &[f64], n: usize, mode: Resampling, rng: &mut dyn RngCore, step: u64) -> Result<Vec<usize>> {
    let w = normalize(logw, step)?;
    let mut cum = Vec::with_capacity(w.len());
    let mut acc = 0.0;
    for x in &w {
        acc += x;
        cum.push(acc);
    }
    let last = w.len() - 1;
    let pick = |u: f64| cum.partition_point(|&c| c <= u * acc).min(last);
    Ok(match mode {
        Resampling::Multinomial => (0..n).map(|_| pick(unit(rng.next_u64()))).collect(),
        Resampling::Systematic => {
            let u0 = unit(rng.next_u64());
            (0..n).map(|k| pick((k as f64 + u0) / n as f64)).collect()
        }
    })
}

/// Index drawn from a categorical given by log-weights, using one uniform.
pub fn categorical(logw: &[f64], u: f64) -> usize {
    let z = log_sum_exp(logw);
    let mut acc = 0.0;
    for (k, w) in logw.iter().enumerate() {
        acc += (w - z).exp();
        if u < acc {
            return k;
        }
    }
    logw.iter().rposition(|w| *w > f64::NEG_INFINITY).unwrap_or(logw.len() - 1)
}
