use super::{Analysis, Phi};
use crate::error::Result;
use crate::lang::{self, Decl, Eq, Expr, Kind, Pat, Program};

pub fn model_name(f: &str) -> String {
    format!("{f}__model")
}

pub fn prior_name(f: &str) -> String {
    format!("{f}__prior")
}

struct Compiler<'a> {
    prog: &'a Program,
    analysis: &'a Analysis,
}

impl Compiler<'_> {
    fn has_params(&self, f: &str) -> bool {
        self.analysis.get(f).is_some_and(|p| !p.is_empty())
    }

    fn expr(&self, phi: &Phi, e: &Expr) -> Expr {
        let c = |e: &Expr| Box::new(self.expr(phi, e));
        let in_dom = |x: &str| phi.iter().any(|p| p.name == x);
        match e {
            Expr::Const(_) | Expr::Var(_) | Expr::Last(_) => e.clone(),
            Expr::Pair(a, b) => Expr::Pair(c(a), c(b)),
            Expr::Op(p, args) => Expr::Op(*p, args.iter().map(|a| self.expr(phi, a)).collect()),
            Expr::Present(a, b, d) => Expr::Present(c(a), c(b), c(d)),
            Expr::Reset(a, b) => Expr::Reset(c(a), c(b)),
            Expr::Sample(a) => Expr::Sample(c(a)),
            Expr::Factor(a) => Expr::Factor(c(a)),
            Expr::ApfInfer { model, prior, arg } => {
                Expr::ApfInfer { model: model.clone(), prior: prior.clone(), arg: c(arg) }
            }
            Expr::Infer(m) => match m.as_ref() {
                Expr::App { func, arg, .. } => Expr::ApfInfer {
                    model: model_name(func),
                    prior: prior_name(func),
                    arg: c(arg),
                },
                m => Expr::Infer(c(m)),
            },
            Expr::Where(body, eqs) => {
                let eqs: Vec<Eq> = eqs
                    .iter()
                    .filter(|q| match q {
                        Eq::Init(x, _) => !in_dom(x),
                        Eq::Def(Pat::Var(x), _) => !in_dom(x),
                        Eq::Def(..) => true,
                    })
                    .map(|q| match q {
                        Eq::Init(x, e) => Eq::Init(x.clone(), self.expr(phi, e)),
                        Eq::Def(p, e) => Eq::Def(p.clone(), self.expr(phi, e)),
                    })
                    .collect();
                if eqs.is_empty() {
                    self.expr(phi, body)
                } else {
                    Expr::Where(c(body), eqs)
                }
            }
            Expr::App { func, inst, arg } => {
                let arg = self.expr(phi, arg);
                if self.prog.kind_of(func) != Some(Kind::Proba) {
                    return Expr::App { func: func.clone(), inst: inst.clone(), arg: Box::new(arg) };
                }
                if !self.has_params(func) {
                    return Expr::app(&model_name(func), arg);
                }
                let call = Expr::app(&model_name(func), Expr::pair(Expr::var(inst), arg));
                if in_dom(inst) {
                    call
                } else {
                    // Not a parameter of the caller: draw the callee's parameters locally.
                    Expr::Where(
                        Box::new(call),
                        vec![
                            Eq::Init(inst.clone(), Expr::Sample(Box::new(Expr::var(&prior_name(func))))),
                            Eq::Def(Pat::Var(inst.clone()), Expr::Last(inst.clone())),
                        ],
                    )
                }
            }
        }
    }
}

/// Compiles every probabilistic node `f` into `f__prior` (the tuple of its parameters'
/// priors) and `f__model`, which takes the parameters as an extra first input.
/// The result is resolved again, so it carries fresh instance identifiers.
pub fn compile(p: &Program, a: &Analysis) -> Result<Program> {
    let cc = Compiler { prog: p, analysis: a };
    let mut decls = Vec::new();
    let empty = Vec::new();
    for d in &p.decls {
        match d {
            Decl::Let { .. } => decls.push(d.clone()),
            Decl::Node { name, param, body } => decls.push(Decl::Node {
                name: name.clone(),
                param: param.clone(),
                body: cc.expr(&empty, body),
            }),
            Decl::Proba { name, param, body } => {
                let phi = a.get(name).unwrap_or(&empty);
                let prior = Expr::tuple(phi.iter().map(|q| q.prior.clone()).collect());
                decls.push(Decl::Let { name: prior_name(name), body: prior });
                let names: Vec<String> = phi.iter().map(|q| q.name.clone()).collect();
                let param = if phi.is_empty() {
                    param.clone()
                } else {
                    Pat::Pair(Box::new(Pat::tuple(&names)), Box::new(param.clone()))
                };
                decls.push(Decl::Proba { name: model_name(name), param, body: cc.expr(phi, body) });
            }
        }
    }
    lang::uniquify(&Program::new(decls))
}
