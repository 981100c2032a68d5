use super::ast::*;
use crate::error::{Error, Result};
use std::collections::HashMap;

/// Kind of every node declaration in a program.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KindEnv(pub HashMap<String, Kind>);

impl KindEnv {
    pub fn of(p: &Program) -> Self {
        KindEnv(p.decls.iter().filter_map(|d| Some((d.name().to_string(), d.kind()?))).collect())
    }

    pub fn get(&self, f: &str) -> Option<Kind> {
        self.0.get(f).copied()
    }

    /// Deterministic expressions contain no `sample`, `factor` or probabilistic call
    /// outside of an `infer`.
    pub fn is_det(&self, e: &Expr) -> bool {
        match e {
            Expr::Sample(_) | Expr::Factor(_) => false,
            Expr::App { func, arg, .. } => self.get(func) == Some(Kind::Det) && self.is_det(arg),
            Expr::Infer(_) => true,
            _ => e.children().into_iter().all(|c| self.is_det(c)),
        }
    }
}

struct Checker<'a> {
    kinds: &'a KindEnv,
    globals: &'a HashMap<String, ()>,
    decl: &'a str,
}

impl Checker<'_> {
    fn fail<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::kind(self.decl, msg))
    }

    fn det(&self, e: &Expr) -> Result<()> {
        match e {
            Expr::Sample(_) => self.fail("`sample` in a deterministic context"),
            Expr::Factor(_) => self.fail("`factor` in a deterministic context"),
            Expr::App { func, arg, .. } => {
                if self.kinds.get(func) != Some(Kind::Det) {
                    return self.fail(format!(
                        "probabilistic node `{func}` called from a deterministic context; wrap it in `infer`"
                    ));
                }
                self.det(arg)
            }
            Expr::Infer(m) => match m.as_ref() {
                Expr::App { func, arg, .. } if self.kinds.get(func) == Some(Kind::Proba) => {
                    self.det(arg)
                }
                _ => self.fail("`infer` expects an application of a probabilistic node"),
            },
            Expr::ApfInfer { model, prior, arg } => {
                if self.kinds.get(model) != Some(Kind::Proba) {
                    return self.fail(format!("`{model}` is not a probabilistic node"));
                }
                if !self.globals.contains_key(prior) {
                    return self.fail(format!("`{prior}` is not a global constant"));
                }
                self.det(arg)
            }
            _ => e.children().into_iter().try_for_each(|c| self.det(c)),
        }
    }

    fn proba(&self, e: &Expr) -> Result<()> {
        match e {
            Expr::Sample(a) | Expr::Factor(a) => {
                self.in_proba_det(a, if matches!(e, Expr::Sample(_)) { "sample" } else { "factor" })
            }
            Expr::Present(c, a, b) => {
                self.in_proba_det(c, "present condition")?;
                self.proba(a)?;
                self.proba(b)
            }
            Expr::Reset(a, c) => {
                self.in_proba_det(c, "reset condition")?;
                self.proba(a)
            }
            Expr::App { arg, .. } => self.proba(arg),
            Expr::Infer(_) | Expr::ApfInfer { .. } => {
                self.fail("`infer` is only allowed in deterministic nodes")
            }
            _ => e.children().into_iter().try_for_each(|c| self.proba(c)),
        }
    }

    fn in_proba_det(&self, e: &Expr, what: &str) -> Result<()> {
        if !self.kinds.is_det(e) {
            return self.fail(format!("the argument of {what} must be deterministic"));
        }
        self.proba(e)
    }

    fn global(&self, e: &Expr) -> Result<()> {
        match e {
            Expr::App { .. } | Expr::Infer(_) | Expr::ApfInfer { .. } => {
                self.fail("global constants cannot call nodes")
            }
            _ => self.det(e),
        }
    }
}

/// Checks the kind discipline and returns the kind of every node.
///
/// Programs must be resolved first (see [`super::resolve::uniquify`]).
pub fn kind_check(p: &Program) -> Result<KindEnv> {
    let kinds = KindEnv::of(p);
    let globals: HashMap<String, ()> = p
        .decls
        .iter()
        .filter(|d| d.kind().is_none())
        .map(|d| (d.name().to_string(), ()))
        .collect();
    for d in &p.decls {
        let c = Checker { kinds: &kinds, globals: &globals, decl: d.name() };
        match d {
            Decl::Let { body, .. } => c.global(body)?,
            Decl::Node { body, .. } => c.det(body)?,
            Decl::Proba { body, .. } => c.proba(body)?,
        }
    }
    Ok(kinds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse::parse_program, resolve::uniquify};

    fn check(src: &str) -> Result<KindEnv> {
        kind_check(&uniquify(&parse_program(src).unwrap()).unwrap())
    }

    #[test]
    fn sample_in_node_is_rejected() {
        let err = check("node f(x) = sample(gaussian(x, 1.0))").unwrap_err();
        assert!(matches!(err, Error::Kind { ref decl, .. } if decl == "f"), "{err}");
    }

    #[test]
    fn proba_call_needs_infer_in_det_code() {
        let src = "proba m(y) = sample(gaussian(y, 1.0))\nnode main(y) = m(y)";
        assert!(matches!(check(src), Err(Error::Kind { .. })));
        let src = "proba m(y) = sample(gaussian(y, 1.0))\nnode main(y) = mean(infer(m(y)))";
        assert!(check(src).is_ok());
    }

    #[test]
    fn sample_argument_must_be_deterministic() {
        let src = "proba m(y) = sample(gaussian(sample(gaussian(y, 1.0)), 1.0))";
        assert!(matches!(check(src), Err(Error::Kind { .. })));
        let src = "proba m(y) = present sample(bernoulli(0.5)) -> 1.0 else 2.0";
        assert!(matches!(check(src), Err(Error::Kind { .. })));
    }

    #[test]
    fn infer_inside_proba_is_rejected() {
        let src = "proba m(y) = sample(gaussian(y, 1.0))\nproba n(y) = mean(infer(m(y)))";
        assert!(matches!(check(src), Err(Error::Kind { .. })));
    }
}
