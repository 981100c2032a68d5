use super::resample::{categorical, log_sum_exp, resample};
use super::rng::{unit, SeedGen, RESAMPLE_LANE};
use super::{check_weights, should_resample, InferConfig, Posterior};
use crate::coiter::{Interp, ModelId, State};
use crate::dist::Dist;
use crate::error::{Error, Result};
use crate::prim;
use crate::value::Value;
use rand::RngCore;
use rayon::prelude::*;

/// Weighted θ-draws carried by one particle. The support is fixed at the first step;
/// only the log-weights change.
#[derive(Debug, Clone, PartialEq)]
pub struct Cloud {
    pub thetas: Vec<Value>,
    pub logq: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ApfPosterior {
    pub posterior: Posterior,
    /// Mean and variance of the flattened θ under the particle-cloud mixture.
    pub theta_mean: Vec<f64>,
    pub theta_var: Vec<f64>,
}

/// Assumed Parameter Filter over a compiled model taking `(θ, input)`.
///
/// Seed layout for particle `i` at step `t`: words `0..p` feed the model, words
/// `p + k·L .. p + (k+1)·L` draw cloud member `k` from the prior at `t = 0` (`L` prior
/// leaves) and word `p + K·L` picks the member used for the step.
#[derive(Debug, Clone)]
pub struct Apf {
    model: ModelId,
    prior: Value,
    leaves: usize,
    cfg: InferConfig,
    gen: SeedGen,
    particles: Vec<State>,
    logw: Vec<f64>,
    clouds: Vec<Cloud>,
    t: u64,
    log_evidence: f64,
}

impl Apf {
    pub fn new(ip: &Interp, m: ModelId, prior: Value) -> Result<Apf> {
        if ip.infer.particles == 0 || ip.infer.cloud == 0 {
            return Err(Error::Domain("particle and cloud counts must be positive".into()));
        }
        Ok(Apf::build(ip, m, prior, ip.infer.clone()))
    }

    pub(crate) fn build(ip: &Interp, m: ModelId, prior: Value, cfg: InferConfig) -> Apf {
        let n = cfg.particles.max(1);
        Apf {
            model: m,
            leaves: prim::leaves(&prior),
            prior,
            gen: SeedGen::new(cfg.seed),
            particles: vec![ip.init(m); n],
            logw: vec![0.0; n],
            clouds: Vec::new(),
            t: 0,
            log_evidence: 0.0,
            cfg,
        }
    }

    pub fn clouds(&self) -> &[Cloud] {
        &self.clouds
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.logw
    }

    fn has_theta(&self) -> bool {
        !matches!(self.prior, Value::Unit)
    }

    fn input(&self, theta: &Value, x: &Value) -> Value {
        if self.has_theta() {
            Value::pair(theta.clone(), x.clone())
        } else {
            x.clone()
        }
    }

    fn particle(
        &self,
        ip: &Interp,
        i: usize,
        st: &mut State,
        lw: &mut f64,
        cloud: &mut Cloud,
        x: &Value,
    ) -> Result<Value> {
        let (t, p, k, l) = (self.t, ip.rv(self.model), self.cfg.cloud.max(1), self.leaves);
        let mut rng = self.gen.stream(i as u32, t);
        let mut seeds = vec![0.0; p];
        for s in seeds.iter_mut() {
            *s = unit(rng.next_u64());
        }
        if t == 0 {
            let mut thetas = Vec::with_capacity(k);
            for _ in 0..k {
                thetas.push(prim::sample_with(&self.prior, &mut |d| d.icdf(unit(rng.next_u64())))?);
            }
            *cloud = Cloud { thetas, logq: vec![-(k as f64).ln(); k] };
        }
        rng.set_word_pos(2 * (p + k * l) as u128);
        let pick = categorical(&cloud.logq, unit(rng.next_u64()));
        let before = st.clone();
        let (v, w, trace) = ip.step_record(self.model, &self.input(&cloud.thetas[pick], x), st, &seeds)?;
        *lw += w;
        if w > f64::NEG_INFINITY {
            let mut q = cloud.logq.clone();
            for (qk, th) in q.iter_mut().zip(&cloud.thetas) {
                *qk += match ip.score(self.model, &self.input(th, x), &before, &trace) {
                    Ok((_, s)) => s,
                    Err(Error::Inconsistent(_) | Error::Domain(_)) => f64::NEG_INFINITY,
                    Err(e) => return Err(e),
                };
            }
            let z = log_sum_exp(&q);
            if z.is_finite() {
                q.iter_mut().for_each(|qk| *qk -= z);
                cloud.logq = q;
            }
        }
        Ok(v)
    }

    pub fn step(&mut self, ip: &Interp, x: &Value) -> Result<ApfPosterior> {
        let t = self.t;
        let n = self.particles.len();
        if t > 0 && should_resample(&self.cfg, &self.logw) {
            let mut rng = self.gen.stream(RESAMPLE_LANE, t);
            let idx = resample(&self.logw, n, self.cfg.resampling, &mut rng, t)?;
            self.particles = idx.iter().map(|&i| self.particles[i].clone()).collect();
            self.clouds = idx.iter().map(|&i| self.clouds[i].clone()).collect();
            self.logw.iter_mut().for_each(|w| *w = 0.0);
        }
        if t == 0 {
            self.clouds = vec![Cloud { thetas: Vec::new(), logq: Vec::new() }; n];
        }
        let before = log_sum_exp(&self.logw);
        let mut particles = std::mem::take(&mut self.particles);
        let mut logw = std::mem::take(&mut self.logw);
        let mut clouds = std::mem::take(&mut self.clouds);
        let this = &*self;
        let values: Result<Vec<Value>> = if self.cfg.parallel {
            particles
                .par_iter_mut()
                .zip(logw.par_iter_mut())
                .zip(clouds.par_iter_mut())
                .enumerate()
                .map(|(i, ((st, lw), c))| this.particle(ip, i, st, lw, c, x))
                .collect()
        } else {
            particles
                .iter_mut()
                .zip(logw.iter_mut())
                .zip(clouds.iter_mut())
                .enumerate()
                .map(|(i, ((st, lw), c))| this.particle(ip, i, st, lw, c, x))
                .collect()
        };
        self.particles = particles;
        self.logw = logw;
        self.clouds = clouds;
        let values = values?;
        check_weights(&self.logw, t)?;
        self.log_evidence += log_sum_exp(&self.logw) - before;
        self.t += 1;
        let (theta_mean, theta_var) = self.theta_moments()?;
        Ok(ApfPosterior {
            posterior: Posterior {
                dist: Dist::empirical(values, &self.logw)?,
                ess: super::ess(&self.logw),
                log_evidence: self.log_evidence,
            },
            theta_mean,
            theta_var,
        })
    }

    fn theta_moments(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        if !self.has_theta() {
            return Ok((Vec::new(), Vec::new()));
        }
        let z = log_sum_exp(&self.logw);
        let mut m1: Vec<f64> = Vec::new();
        let mut m2: Vec<f64> = Vec::new();
        for (c, lw) in self.clouds.iter().zip(&self.logw) {
            let wi = (lw - z).exp();
            if wi == 0.0 {
                continue;
            }
            for (th, q) in c.thetas.iter().zip(&c.logq) {
                let w = wi * q.exp();
                let xs = th.flatten()?;
                if m1.is_empty() {
                    m1 = vec![0.0; xs.len()];
                    m2 = vec![0.0; xs.len()];
                }
                for (j, x) in xs.iter().enumerate() {
                    m1[j] += w * x;
                    m2[j] += w * x * x;
                }
            }
        }
        let var = m1.iter().zip(&m2).map(|(a, b)| (b - a * a).max(0.0)).collect();
        Ok((m1, var))
    }
}
