use super::resample::{log_sum_exp, resample};
use super::rng::{SeedGen, RESAMPLE_LANE};
use super::{check_weights, should_resample, InferConfig, Posterior};
use crate::coiter::{Interp, ModelId, State};
use crate::dist::Dist;
use crate::error::{Error, Result};
use crate::value::Value;
use rayon::prelude::*;

/// Bootstrap particle filter. Each step resamples (when the ESS criterion asks for it),
/// steps every particle on its own seeds and reweights.
#[derive(Debug, Clone)]
pub struct Pf {
    model: ModelId,
    cfg: InferConfig,
    gen: SeedGen,
    particles: Vec<State>,
    logw: Vec<f64>,
    t: u64,
    log_evidence: f64,
}

impl Pf {
    /// A filter for `m` configured by the interpreter's [`InferConfig`].
    pub fn new(ip: &Interp, m: ModelId) -> Result<Pf> {
        if ip.infer.particles == 0 {
            return Err(Error::Domain("the number of particles must be positive".into()));
        }
        Ok(Pf::build(ip, m, ip.infer.clone()))
    }

    pub(crate) fn build(ip: &Interp, m: ModelId, cfg: InferConfig) -> Pf {
        let n = cfg.particles.max(1);
        Pf {
            model: m,
            gen: SeedGen::new(cfg.seed),
            particles: vec![ip.init(m); n],
            logw: vec![0.0; n],
            t: 0,
            log_evidence: 0.0,
            cfg,
        }
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn particles(&self) -> &[State] {
        &self.particles
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.logw
    }

    pub fn step(&mut self, ip: &Interp, input: &Value) -> Result<Posterior> {
        let t = self.t;
        let n = self.particles.len();
        if t > 0 && should_resample(&self.cfg, &self.logw) {
            let mut rng = self.gen.stream(RESAMPLE_LANE, t);
            let idx = resample(&self.logw, n, self.cfg.resampling, &mut rng, t)?;
            self.particles = idx.iter().map(|&i| self.particles[i].clone()).collect();
            self.logw.iter_mut().for_each(|w| *w = 0.0);
        }
        let before = log_sum_exp(&self.logw);
        let (m, rv, gen) = (self.model, ip.rv(self.model), &self.gen);
        let one = |i: usize, st: &mut State, lw: &mut f64| -> Result<Value> {
            let mut seeds = vec![0.0; rv];
            gen.fill(i, t, &mut seeds);
            let (v, w) = ip.step(m, input, st, &seeds)?;
            *lw += w;
            Ok(v)
        };
        let values: Vec<Value> = if self.cfg.parallel {
            self.particles
                .par_iter_mut()
                .zip(self.logw.par_iter_mut())
                .enumerate()
                .map(|(i, (st, lw))| one(i, st, lw))
                .collect::<Result<_>>()?
        } else {
            self.particles
                .iter_mut()
                .zip(self.logw.iter_mut())
                .enumerate()
                .map(|(i, (st, lw))| one(i, st, lw))
                .collect::<Result<_>>()?
        };
        check_weights(&self.logw, t)?;
        self.log_evidence += log_sum_exp(&self.logw) - before;
        self.t += 1;
        Ok(Posterior {
            dist: Dist::empirical(values, &self.logw)?,
            ess: super::ess(&self.logw),
            log_evidence: self.log_evidence,
        })
    }
}
