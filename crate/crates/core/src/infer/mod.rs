//! Sequential Monte Carlo realizations of `infer`: a particle filter over the
//! co-iterative step function, and the Assumed Parameter Filter over a model whose
//! constant parameters were externalized by [`crate::apf`].

mod apf;
mod pf;
pub mod resample;
pub mod rng;

pub use apf::{Apf, ApfPosterior, Cloud};
pub use pf::Pf;
pub use resample::{ess, log_sum_exp};
pub use rng::{seeds_for, SeedGen};

use crate::coiter::{Interp, ModelId};
use crate::dist::Dist;
use crate::error::Result;
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Resampling {
    #[default]
    Multinomial,
    Systematic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferConfig {
    pub particles: usize,
    /// θ-cloud size per particle (APF only).
    pub cloud: usize,
    pub seed: u64,
    pub resampling: Resampling,
    /// Resample when `ESS < ess_threshold · N`; `1.0` resamples every step.
    pub ess_threshold: f64,
    /// Step particles on the rayon pool. Results do not depend on this flag.
    pub parallel: bool,
}

impl Default for InferConfig {
    fn default() -> Self {
        InferConfig {
            particles: 1000,
            cloud: 100,
            seed: 0,
            resampling: Resampling::Multinomial,
            ess_threshold: 0.5,
            parallel: false,
        }
    }
}

/// Posterior of one filtering step.
#[derive(Debug, Clone)]
pub struct Posterior {
    /// Empirical distribution over the particles' output values.
    pub dist: Dist,
    pub ess: f64,
    /// Cumulative log marginal likelihood estimate.
    pub log_evidence: f64,
}

/// Filter state stored inside a nested `infer` or `APF.infer`.
#[derive(Debug, Clone)]
pub enum Nested {
    Pf(Pf),
    Apf(Apf),
}

impl Nested {
    pub(crate) fn pf(ip: &Interp, m: ModelId, site: u64) -> Nested {
        let mut cfg = ip.infer.clone();
        cfg.seed = rng::mix(cfg.seed, site);
        Nested::Pf(Pf::build(ip, m, cfg))
    }

    pub(crate) fn apf(ip: &Interp, m: ModelId, prior: Value, site: u64) -> Nested {
        let mut cfg = ip.infer.clone();
        cfg.seed = rng::mix(cfg.seed, site);
        Nested::Apf(Apf::build(ip, m, prior, cfg))
    }

    pub(crate) fn step(&mut self, ip: &Interp, input: &Value) -> Result<Value> {
        let d = match self {
            Nested::Pf(f) => f.step(ip, input)?.dist,
            Nested::Apf(f) => f.step(ip, input)?.posterior.dist,
        };
        Ok(Value::Dist(d))
    }
}

/// Whether a step should start by resampling.
pub(crate) fn should_resample(cfg: &InferConfig, logw: &[f64]) -> bool {
    cfg.ess_threshold >= 1.0 || ess(logw) < cfg.ess_threshold * logw.len() as f64
}

/// Rejects `NaN` and `+∞` weights and the all-zero case.
pub(crate) fn check_weights(logw: &[f64], step: u64) -> Result<()> {
    use crate::error::Error;
    if let Some(w) = logw.iter().find(|w| w.is_nan() || **w == f64::INFINITY) {
        return Err(Error::NonFinite(format!("particle log-weight {w} at step {step}")));
    }
    if logw.iter().all(|w| *w == f64::NEG_INFINITY) {
        return Err(Error::Degenerate { step });
    }
    Ok(())
}
