//! Random causal programs for differential and property tests.
//!
//! Every program declares a few helper nodes and an entry `proba main(y)` whose body is
//! a `where` block. Instantaneous references between its equations follow a hidden
//! order, so the block is always schedulable; the equations are then emitted shuffled.

use crate::error::Result;
use crate::lang::{self, Eq, Expr, Program, RvTable};
use crate::value::Value;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub max_depth: usize,
    pub max_eqs: usize,
    /// Declare helpers with constant parameters (`init c = sample(..) and c = last c`).
    pub params: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { max_depth: 4, max_eqs: 6, params: false }
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub source: String,
    /// Resolved and kind-checked.
    pub program: Program,
}

impl Generated {
    pub const ENTRY: &'static str = "main";
    pub const INPUT: &'static str = "y";
}

struct Gen {
    rng: ChaCha8Rng,
    det_nodes: Vec<String>,
    proba_nodes: Vec<String>,
    fresh: usize,
}

/// Names visible to an expression: instantaneous variables and `last`-able ones.
#[derive(Clone)]
struct Scope {
    now: Vec<String>,
    last: Vec<String>,
}

impl Gen {
    fn real_const(&mut self) -> String {
        lang::print::real((self.rng.gen_range(-20..=20) as f64) * 0.25)
    }

    fn leaf(&mut self, sc: &Scope) -> String {
        match self.rng.gen_range(0..4) {
            0 => self.real_const(),
            1 if !sc.now.is_empty() => sc.now.choose(&mut self.rng).unwrap().clone(),
            2 if !sc.last.is_empty() => format!("last {}", sc.last.choose(&mut self.rng).unwrap()),
            _ => "y".into(),
        }
    }

    fn cond(&mut self, d: usize, sc: &Scope) -> String {
        let a = self.real(d.saturating_sub(1), sc, true);
        let op = *[">", "<", ">="].choose(&mut self.rng).unwrap();
        format!("({a} {op} {})", self.real_const())
    }

    /// A real-valued expression of depth at most `d`; `det` forbids probabilistic
    /// constructs.
    fn real(&mut self, d: usize, sc: &Scope, det: bool) -> String {
        if d == 0 {
            return self.leaf(sc);
        }
        let d1 = d - 1;
        match self.rng.gen_range(0..14) {
            0 | 1 => {
                let op = *["+", "-"].choose(&mut self.rng).unwrap();
                format!("({} {op} {})", self.real(d1, sc, det), self.real(d1, sc, det))
            }
            2 => format!("(0.5 * {})", self.real(d1, sc, det)),
            3 => format!("sin({})", self.real(d1, sc, det)),
            4 => {
                let f = *["max", "min"].choose(&mut self.rng).unwrap();
                format!("{f}({}, {})", self.real(d1, sc, det), self.real(d1, sc, det))
            }
            5 => format!(
                "(if {} then {} else {})",
                self.cond(d1, sc),
                self.real(d1, sc, det),
                self.real(d1, sc, det)
            ),
            6 => format!(
                "(present {} -> {} else {})",
                self.cond(d1, sc),
                self.real(d1, sc, det),
                self.real(d1, sc, det)
            ),
            7 => format!("(reset {} every {})", self.real(d1, sc, det), self.cond(d1, sc)),
            8 => {
                let h = self.det_nodes.choose(&mut self.rng).unwrap().clone();
                format!("{h}({})", self.real(d1, sc, det))
            }
            9 => {
                let z = format!("z{}", self.fresh);
                self.fresh += 1;
                let e = self.real(d1, sc, det);
                if self.rng.gen_bool(0.5) {
                    format!("({z} where rec {z} = {e})")
                } else {
                    format!("({z} where rec init {z} = {} and {z} = 0.5 * last {z} + {e})", self.real_const())
                }
            }
            10 | 11 if !det => {
                let m = self.real(d1, sc, true);
                if self.rng.gen_bool(0.7) {
                    format!("sample(gaussian({m}, {}))", self.sigma())
                } else {
                    format!("({m} + sample(uniform(0.0, 1.0)))")
                }
            }
            12 | 13 if !det => {
                let k = self.proba_nodes.choose(&mut self.rng).unwrap().clone();
                format!("{k}({})", self.real(d1, sc, false))
            }
            _ => self.leaf(sc),
        }
    }

    fn sigma(&mut self) -> String {
        lang::print::real(*[0.5, 1.0, 2.0].choose(&mut self.rng).unwrap())
    }

    fn helpers(&mut self, params: bool) -> Vec<String> {
        let mut out = Vec::new();
        let a = self.real_const();
        out.push(format!("node h0(u) = s where rec init s = {a} and s = 0.5 * last s + u"));
        out.push("node h1(u) = sin(u) + 1.0".to_string());
        let s = self.sigma();
        out.push(format!("proba k0(u) = sample(gaussian(0.5 * u, {s}))"));
        out.push(format!(
            "proba k1(u) = x where rec init x = 0.0 and x = sample(gaussian(0.5 * last x + u, {s})) \
             and () = observe(gaussian(x, 1.0), u)"
        ));
        self.det_nodes = vec!["h0".into(), "h1".into()];
        self.proba_nodes = vec!["k0".into(), "k1".into()];
        if params {
            let s = self.sigma();
            out.push(format!(
                "proba p0(u) = u + theta where rec init theta = sample(gaussian(0.0, {s})) and theta = last theta"
            ));
            out.push(
                "proba p1(u) = c * u + sample(gaussian(c, 1.0)) where \
                 rec init c = sample(uniform(0.0, 1.0)) and c = last c \
                 and () = observe(gaussian(c, 2.0), u)"
                    .to_string(),
            );
            out.push(
                "proba p2(u) = p0(u) + w where rec init b = sample((gaussian(0.0, 1.0), uniform(0.0, 1.0))) \
                 and b = last b and x = fst(b) and w = snd(b) + x"
                    .to_string(),
            );
            self.proba_nodes.extend(["p0".into(), "p1".into(), "p2".into()]);
        }
        out
    }

    fn main(&mut self, cfg: &GenConfig) -> String {
        let n_eqs = self.rng.gen_range(1..=cfg.max_eqs.max(1));
        let n_vars = self.rng.gen_range(1..=n_eqs.div_ceil(2).max(1));
        let mut budget = n_eqs - n_vars;
        let names: Vec<String> = (0..n_vars).map(|i| format!("x{i}")).collect();
        let mut inits = Vec::new();
        for x in &names {
            if budget > 0 && self.rng.gen_bool(0.6) {
                inits.push(x.clone());
                budget -= 1;
            }
        }
        let mut eqs = Vec::new();
        for x in &inits {
            let e = match self.rng.gen_range(0..3) {
                0 => self.real_const(),
                1 => "y".into(),
                _ => format!("sample(gaussian({}, 1.0))", self.real_const()),
            };
            eqs.push(format!("init {x} = {e}"));
        }
        for (i, x) in names.iter().enumerate() {
            let sc = Scope { now: names[..i].to_vec(), last: inits.clone() };
            let d = self.rng.gen_range(1..=cfg.max_depth.max(1));
            eqs.push(format!("{x} = {}", self.real(d, &sc, false)));
        }
        let all = Scope { now: names.clone(), last: inits.clone() };
        while budget > 0 {
            let d = self.rng.gen_range(0..cfg.max_depth.max(1));
            let m = self.real(d, &all, true);
            eqs.push(format!("() = observe(gaussian({m}, {}), y)", self.sigma()));
            budget -= 1;
        }
        if cfg.params && self.rng.gen_bool(0.5) {
            // Constant parameter of the entry node itself; replaces one `last` source.
            eqs.push("init c0 = sample(gaussian(0.0, 1.0))".into());
            eqs.push("c0 = last c0".into());
            let i = self.rng.gen_range(0..eqs.len() - 2);
            if let Some(q) = eqs.get_mut(i).filter(|q| q.starts_with('x')) {
                q.push_str(" + c0");
            }
        }
        eqs.shuffle(&mut self.rng);
        let d = self.rng.gen_range(0..cfg.max_depth.max(1));
        let body = self.real(d, &all, true);
        format!("proba main(y) = {body} where rec {}", eqs.join("\n  and "))
    }
}

/// A random causal program drawn from `seed`.
pub fn generate(seed: u64, cfg: &GenConfig) -> Result<Generated> {
    let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(seed), det_nodes: Vec::new(), proba_nodes: Vec::new(), fresh: 0 };
    let mut decls = g.helpers(cfg.params);
    decls.push(g.main(cfg));
    let source = decls.join("\n");
    let program = lang::load(&source)?.0;
    Ok(Generated { source, program })
}

/// Input stream for generated programs.
pub fn inputs(seed: u64, steps: usize) -> Vec<Value> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    (0..steps).map(|_| Value::Real(rng.gen_range(-2.0..2.0))).collect()
}

/// Reorders the equations of the `where` block at the root of `node`'s body:
/// equation `order[i]` moves to position `i`. Returns the new program and the seed
/// permutation (`perm[j]` is the new index of old seed `j`) matching the new split.
pub fn permute_equations(p: &Program, node: &str, order: &[usize]) -> Option<(Program, Vec<usize>)> {
    let rv = RvTable::new(p);
    let mut out = p.clone();
    let decl = out.decls.iter_mut().find(|d| d.name() == node)?;
    let body = match decl {
        lang::Decl::Node { body, .. } | lang::Decl::Proba { body, .. } => body,
        lang::Decl::Let { .. } => return None,
    };
    let Expr::Where(b, eqs) = body else { return None };
    if order.len() != eqs.len() {
        return None;
    }
    let head = rv.count(b);
    let sizes: Vec<usize> = eqs.iter().map(|q| rv.count(q.expr())).collect();
    let mut starts = Vec::with_capacity(eqs.len());
    let mut o = head;
    for s in &sizes {
        starts.push(o);
        o += s;
    }
    let mut perm: Vec<usize> = (0..o).collect();
    let mut at = head;
    for &j in order {
        for k in 0..sizes[j] {
            perm[starts[j] + k] = at + k;
        }
        at += sizes[j];
    }
    let new: Vec<Eq> = order.iter().map(|&j| eqs[j].clone()).collect();
    *eqs = new;
    Some((out, perm))
}
