use super::eval::{Rel, SeedSource};
use crate::dist::Dist;
use crate::error::{Error, Result};
use crate::lang::Expr;
use crate::value::Value;
use std::collections::BTreeMap;

/// Largest number of seed-cube cells `grid_infer` visits.
pub const GRID_BUDGET: u64 = 10_000_000;

/// Normalized distribution over values at one instant, sorted by value key.
pub type Measure = Vec<(Value, f64)>;

/// Cells `[lo, hi)` of a seed coordinate feeding `d`. Discrete distributions split
/// exactly at their inverse-CDF breakpoints; others use `n` equal cells.
fn cells(d: &Dist, n: usize) -> Vec<(f64, f64)> {
    let cuts: Vec<f64> = match d {
        Dist::Bernoulli { p } => vec![1.0 - p],
        Dist::Empirical(e) => {
            let mut acc = 0.0;
            let mut cuts: Vec<f64> = e.weights.iter().map(|w| {
                acc += w;
                acc
            }).collect();
            cuts.pop();
            cuts
        }
        _ => (1..n).map(|k| k as f64 / n as f64).collect(),
    };
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut lo = 0.0;
    for c in cuts.into_iter().chain([1.0]) {
        let c = c.clamp(lo, 1.0);
        if c > lo {
            out.push((lo, c));
        }
        lo = c;
    }
    out
}

/// Depth-first walk of the seed trie by re-execution: the choices of the current path,
/// in demand order.
struct Walk {
    n: usize,
    choices: Vec<(usize, usize)>,
    pos: usize,
    vol: f64,
}

impl SeedSource for Walk {
    fn seed(&mut self, _: usize, _: usize, d: &Dist) -> Result<f64> {
        let cs = cells(d, self.n);
        if self.pos == self.choices.len() {
            self.choices.push((0, cs.len()));
        }
        let (c, _) = self.choices[self.pos];
        self.pos += 1;
        let (lo, hi) = cs[c];
        self.vol *= hi - lo;
        Ok(0.5 * (lo + hi))
    }
}

impl Walk {
    /// Advances to the next leaf; false when the trie is exhausted.
    fn next(&mut self) -> bool {
        while let Some((c, n)) = self.choices.pop() {
            if c + 1 < n {
                self.choices.push((c + 1, n));
                return true;
            }
        }
        false
    }
}

/// Midpoint quadrature of the step-wise posterior of `e` over the seed cube: at each
/// instant `t`, every cell contributes its volume times the product of the weights up to
/// `t`, at the value it produces. Sites that are never evaluated cost no cells.
pub fn grid_infer(rel: &Rel, e: &Expr, inputs: &[&str], xs: &[Value], grid_n: usize) -> Result<Vec<Measure>> {
    if grid_n == 0 {
        return Err(Error::Domain("grid_n must be positive".into()));
    }
    let steps = xs.len();
    let mut acc: Vec<BTreeMap<String, (Value, f64)>> = vec![BTreeMap::new(); steps];
    let mut walk = Walk { n: grid_n, choices: Vec::new(), pos: 0, vol: 1.0 };
    let mut leaves = 0u64;
    loop {
        leaves += 1;
        if leaves > GRID_BUDGET {
            return Err(Error::Budget(GRID_BUDGET));
        }
        walk.pos = 0;
        walk.vol = 1.0;
        let trace = rel.eval(e, inputs, xs, &mut walk)?;
        // Cells along this path span a sub-grid that the walk will visit in full.
        let span = walk.choices.iter().try_fold(1u64, |acc, &(_, n)| acc.checked_mul(n as u64));
        if span.map_or(true, |s| s > GRID_BUDGET) {
            return Err(Error::Budget(GRID_BUDGET));
        }
        let mut lw = 0.0;
        for (t, (v, w)) in trace.into_iter().enumerate() {
            lw += w;
            let mass = walk.vol * lw.exp();
            acc[t].entry(v.key()).or_insert((v, 0.0)).1 += mass;
        }
        if !walk.next() {
            break;
        }
    }
    acc.into_iter()
        .enumerate()
        .map(|(t, m)| {
            let z: f64 = m.values().map(|(_, p)| p).sum();
            if !(z > 0.0) {
                return Err(Error::Degenerate { step: t as u64 });
            }
            Ok(m.into_values().map(|(v, p)| (v, p / z)).collect())
        })
        .collect()
}

/// Total variation distance between two finite measures.
pub fn total_variation(a: &[(Value, f64)], b: &[(Value, f64)]) -> f64 {
    let mut m: BTreeMap<String, f64> = BTreeMap::new();
    for (v, p) in a {
        *m.entry(v.key()).or_default() += p;
    }
    for (v, p) in b {
        *m.entry(v.key()).or_default() -= p;
    }
    0.5 * m.values().map(|d| d.abs()).sum::<f64>()
}
