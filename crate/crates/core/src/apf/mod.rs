//! Constant-parameter analysis and the compilation that turns constant parameters
//! into model inputs, so that the Assumed Parameter Filter can reweight them.

mod compile;
mod perm;

pub use compile::{compile, model_name, prior_name};
pub use perm::{permutations, PermEntry, PermTable};

use crate::lang::{self, Decl, Eq, Expr, Kind, Pat, Program};
use serde_json::{json, Value as Json};
use std::collections::HashSet;

/// Where a constant parameter comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    /// `init x = sample(prior) and x = last x` in the node body.
    Init,
    /// Constant parameters of a called probabilistic node, keyed by instance.
    Instance(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub prior: Expr,
    pub source: Source,
}

/// Parameters of one probabilistic node, in order of first appearance.
pub type Phi = Vec<Param>;

#[derive(Debug, Clone, Default)]
pub struct Analysis {
    /// One entry per probabilistic node, in declaration order.
    pub phi: Vec<(String, Phi)>,
    /// Global constants.
    pub constants: HashSet<String>,
}

impl Analysis {
    pub fn get(&self, f: &str) -> Option<&Phi> {
        self.phi.iter().find(|(n, _)| n == f).map(|(_, p)| p)
    }

    /// `{"node": {"param": "prior source"}}` for every probabilistic node.
    pub fn to_json(&self) -> Json {
        let mut out = serde_json::Map::new();
        for (f, phi) in &self.phi {
            let m: serde_json::Map<String, Json> =
                phi.iter().map(|p| (p.name.clone(), json!(lang::print::expr(&p.prior)))).collect();
            out.insert(f.clone(), Json::Object(m));
        }
        Json::Object(out)
    }
}

/// `C ⊢ e`: `e` denotes a constant stream given the constant names `c`.
pub fn const_check(c: &HashSet<String>, e: &Expr) -> bool {
    match e {
        Expr::Const(_) => true,
        Expr::Var(x) => c.contains(x),
        Expr::Pair(a, b) => const_check(c, a) && const_check(c, b),
        Expr::Op(_, args) => args.iter().all(|a| const_check(c, a)),
        Expr::Where(body, eqs) => {
            let dom: HashSet<String> =
                eqs.iter().flat_map(|q| q.defined()).map(String::from).collect();
            if const_eqs(c, eqs) != dom {
                return false;
            }
            let mut inner = c.clone();
            inner.extend(dom);
            const_check(&inner, body)
        }
        _ => false,
    }
}

/// `C ⊢ E : D`: the variables of `eqs` that are constant. Mutual dependencies are
/// resolved by iterating to the least solution.
pub fn const_eqs(c: &HashSet<String>, eqs: &[Eq]) -> HashSet<String> {
    let mut d: HashSet<String> = HashSet::new();
    loop {
        let mut env = c.clone();
        env.extend(d.iter().cloned());
        let mut next = HashSet::new();
        for q in eqs {
            match q {
                Eq::Def(Pat::Var(x), Expr::Last(y)) if x == y => {
                    next.insert(x.clone());
                }
                Eq::Def(p, e) if const_check(&env, e) => {
                    next.extend(p.vars().into_iter().map(String::from));
                }
                _ => {}
            }
        }
        if next == d {
            return d;
        }
        d = next;
    }
}

fn is_hold(eqs: &[Eq], x: &str) -> bool {
    eqs.iter().any(|q| matches!(q, Eq::Def(Pat::Var(y), Expr::Last(z)) if y == x && z == x))
}

struct Collector<'a> {
    consts: &'a HashSet<String>,
    done: &'a [(String, Phi)],
    kinds: &'a dyn Fn(&str) -> Option<Kind>,
}

impl Collector<'_> {
    fn callee_has_params(&self, g: &str) -> bool {
        (self.kinds)(g) == Some(Kind::Proba)
            && self.done.iter().any(|(n, p)| n == g && !p.is_empty())
    }

    fn expr(&self, e: &Expr, out: &mut Phi) {
        match e {
            Expr::Const(_) | Expr::Var(_) | Expr::Last(_) => {}
            Expr::Present(c, _, _) => self.expr(c, out),
            Expr::Reset(_, c) => self.expr(c, out),
            Expr::App { func, inst, arg } => {
                if self.callee_has_params(func) {
                    out.push(Param {
                        name: inst.clone(),
                        prior: Expr::var(&prior_name(func)),
                        source: Source::Instance(func.clone()),
                    });
                }
                self.expr(arg, out);
            }
            Expr::Where(body, eqs) => {
                self.expr(body, out);
                let d = const_eqs(self.consts, eqs);
                for q in eqs {
                    match q {
                        Eq::Init(x, Expr::Sample(prior))
                            if d.contains(x) && is_hold(eqs, x) && const_check(self.consts, prior) =>
                        {
                            out.push(Param { name: x.clone(), prior: (**prior).clone(), source: Source::Init });
                        }
                        q => self.expr(q.expr(), out),
                    }
                }
            }
            _ => e.children().into_iter().for_each(|c| self.expr(c, out)),
        }
    }
}

/// The compiled counterpart of `f(arg)`: `f__model` fed with parameters drawn once from
/// `f__prior`, or plain `f__model(arg)` when `f` has none. Its seeds are the compiled
/// model's followed by the prior's, the layout targeted by [`permutations`].
pub fn expanded(a: &Analysis, f: &str, arg: Expr) -> Expr {
    if a.get(f).map_or(true, |p| p.is_empty()) {
        return Expr::app(&model_name(f), arg);
    }
    let th = "theta";
    Expr::Where(
        Box::new(Expr::app(&model_name(f), Expr::pair(Expr::var(th), arg))),
        vec![
            Eq::Init(th.into(), Expr::Sample(Box::new(Expr::var(&prior_name(f))))),
            Eq::Def(Pat::Var(th.into()), Expr::Last(th.into())),
        ],
    )
}

/// Computes the constant parameters and their priors for every probabilistic node of a
/// resolved program.
pub fn analyze(p: &Program) -> Analysis {
    let mut a = Analysis::default();
    let kinds = |f: &str| p.kind_of(f);
    for d in &p.decls {
        match d {
            Decl::Let { name, body } => {
                if const_check(&a.constants, body) {
                    a.constants.insert(name.clone());
                }
            }
            Decl::Node { .. } => {}
            Decl::Proba { name, body, .. } => {
                let mut phi = Vec::new();
                Collector { consts: &a.constants, done: &a.phi, kinds: &kinds }.expr(body, &mut phi);
                a.phi.push((name.clone(), phi));
            }
        }
    }
    a
}

#[cfg(test)]
mod tests;
