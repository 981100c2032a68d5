use super::eval::{Rel, Streams};
use crate::coiter::{Interp, Semantics};
use crate::error::{Error, Result};
use crate::infer::rng::{unit, SeedGen};
use crate::lang::Expr;
use crate::value::Value;
use rand::RngCore;
use serde::Serialize;

/// First disagreement found by a differential check.
#[derive(Debug, Clone, Serialize)]
pub struct Counterexample {
    pub trial: usize,
    pub step: usize,
    /// Random streams of the left-hand side, `seeds[j][t]`.
    pub seeds: Vec<Vec<f64>>,
    pub left: Vec<(String, f64)>,
    pub right: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub pass: bool,
    pub trials: usize,
    pub passed: usize,
    pub counterexample: Option<Counterexample>,
}

impl Report {
    fn new(trials: usize) -> Report {
        Report { pass: true, trials, passed: 0, counterexample: None }
    }

    fn record(&mut self, trial: usize, seeds: &[Vec<f64>], l: Result<Vec<(Value, f64)>>, r: Result<Vec<(Value, f64)>>) {
        match first_difference(&l, &r) {
            None => self.passed += 1,
            Some(step) => {
                self.pass = false;
                if self.counterexample.is_none() {
                    self.counterexample = Some(Counterexample {
                        trial,
                        step,
                        seeds: seeds.to_vec(),
                        left: show(&l),
                        right: show(&r),
                    });
                }
            }
        }
    }
}

fn same(a: &(Value, f64), b: &(Value, f64)) -> bool {
    a.0 == b.0 && (a.1 == b.1 || (a.1.is_nan() && b.1.is_nan()))
}

fn first_difference(l: &Result<Vec<(Value, f64)>>, r: &Result<Vec<(Value, f64)>>) -> Option<usize> {
    match (l, r) {
        (Ok(a), Ok(b)) => {
            let n = a.iter().zip(b).take_while(|(x, y)| same(x, y)).count();
            (n < a.len().max(b.len())).then_some(n)
        }
        (Err(a), Err(b)) if a == b => None,
        (Ok(a), Err(_)) | (Err(_), Ok(a)) => Some(a.len()),
        (Err(_), Err(_)) => Some(0),
    }
}

fn show(r: &Result<Vec<(Value, f64)>>) -> Vec<(String, f64)> {
    match r {
        Ok(tr) => tr.iter().map(|(v, w)| (v.to_string(), *w)).collect(),
        Err(e) => vec![(format!("error: {e}"), f64::NAN)],
    }
}

/// Uniform random streams `p × steps` for one trial.
pub fn random_prefix(seed: u64, trial: usize, p: usize, steps: usize) -> Vec<Vec<f64>> {
    let mut rng = SeedGen::new(seed).stream(trial as u32, 0);
    (0..p).map(|_| (0..steps).map(|_| unit(rng.next_u64())).collect()).collect()
}

/// Checks `rel_eval(e1, R) = rel_eval(e2, perm(R))` on random prefixes, where stream `j`
/// of the left side becomes stream `perm[j]` of the right side. Entries past the right
/// side's stream count drop the stream; every right stream must be hit exactly once.
#[allow(clippy::too_many_arguments)]
pub fn equiv_check(
    left: (&Rel, &Expr),
    right: (&Rel, &Expr),
    inputs: &[&str],
    xs: &[Value],
    perm: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Report> {
    let (p1, p2) = (left.0.rv(left.1), right.0.rv(right.1));
    let mut seen = vec![false; p2];
    let clash = perm.iter().any(|&j| j < p2 && std::mem::replace(&mut seen[j], true));
    if perm.len() != p1 || clash || seen.contains(&false) {
        return Err(Error::Permutation(format!(
            "{p1} and {p2} random streams cannot be matched by a permutation of length {}",
            perm.len()
        )));
    }
    let mut report = Report::new(trials);
    for trial in 0..trials {
        let r1 = random_prefix(seed, trial, p1, xs.len());
        let mut r2 = vec![Vec::new(); p2];
        for (j, s) in r1.iter().enumerate() {
            if perm[j] < p2 {
                r2[perm[j]] = s.clone();
            }
        }
        let a = left.0.eval(left.1, inputs, xs, &mut Streams(&r1));
        let b = right.0.eval(right.1, inputs, xs, &mut Streams(&r2));
        report.record(trial, &r1, a, b);
    }
    Ok(report)
}

/// Compares the co-iterative interpreter, fed seed `R[j][t]` at step `t`, with the
/// relational evaluation on the same streams.
pub fn coit_rel_agree(
    rel: &Rel,
    e: &Expr,
    inputs: &[&str],
    xs: &[Value],
    semantics: Semantics,
    trials: usize,
    seed: u64,
) -> Result<Report> {
    let mut ip = Interp::new(rel.program())?.with_semantics(semantics);
    let m = ip.add_expr(e, inputs)?;
    let p = ip.rv(m);
    let mut report = Report::new(trials);
    for trial in 0..trials {
        let r = random_prefix(seed, trial, p, xs.len());
        let mut st = ip.init(m);
        let mut seeds = vec![0.0; p];
        let co: Result<Vec<(Value, f64)>> = xs
            .iter()
            .enumerate()
            .map(|(t, x)| {
                for (j, s) in seeds.iter_mut().enumerate() {
                    *s = r[j][t];
                }
                ip.step(m, x, &mut st, &seeds)
            })
            .collect();
        let re = rel.eval(e, inputs, xs, &mut Streams(&r));
        report.record(trial, &r, co, re);
    }
    Ok(report)
}
