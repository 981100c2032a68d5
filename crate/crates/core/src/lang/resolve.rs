//! Name resolution: unique binder names, instance identifiers and scoping checks.

use super::ast::*;
use crate::error::{Error, Result};
use std::collections::{HashMap, HashSet};

/// Generator of identifiers that avoid every name already in use.
#[derive(Debug, Default, Clone)]
pub struct Fresh {
    used: HashSet<String>,
}

impl Fresh {
    pub fn for_program(p: &Program) -> Self {
        let mut f = Fresh::default();
        for d in &p.decls {
            f.used.insert(d.name().to_string());
            if let Some(pat) = d.param() {
                f.used.extend(pat.vars().into_iter().map(String::from));
            }
            collect_names(d.body(), &mut f.used);
        }
        f
    }

    pub fn reserve(&mut self, name: &str) {
        self.used.insert(name.to_string());
    }

    pub fn is_used(&self, name: &str) -> bool {
        self.used.contains(name)
    }

    /// `base` itself if unused, else the first free `base_k`.
    pub fn fresh(&mut self, base: &str) -> String {
        if self.used.insert(base.to_string()) {
            return base.to_string();
        }
        (1..)
            .map(|k| format!("{base}_{k}"))
            .find(|c| self.used.insert(c.clone()))
            .unwrap()
    }
}

fn collect_names(e: &Expr, out: &mut HashSet<String>) {
    match e {
        Expr::Var(x) | Expr::Last(x) => {
            out.insert(x.clone());
        }
        Expr::App { inst, .. } if !inst.is_empty() => {
            out.insert(inst.clone());
        }
        Expr::Where(_, eqs) => {
            for eq in eqs {
                match eq {
                    Eq::Def(p, _) => out.extend(p.vars().into_iter().map(String::from)),
                    Eq::Init(x, _) => {
                        out.insert(x.clone());
                    }
                }
            }
        }
        _ => {}
    }
    for c in e.children() {
        collect_names(c, out);
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Binding {
    Plain,
    /// A `where` variable that also has an `init` equation, so `last x` is valid.
    WithLast,
}

struct Resolver<'p> {
    fresh: Fresh,
    /// Binder names already claimed by some scope in the program.
    claimed: HashSet<String>,
    globals: HashSet<String>,
    nodes: &'p HashMap<String, Kind>,
    scopes: Vec<HashMap<String, (String, Binding)>>,
}

impl Resolver<'_> {
    fn bind(&mut self, x: &str, b: Binding) -> String {
        let name = if self.globals.contains(x) || !self.claimed.insert(x.to_string()) {
            let n = self.fresh.fresh(x);
            self.claimed.insert(n.clone());
            n
        } else {
            x.to_string()
        };
        self.scopes.last_mut().unwrap().insert(x.to_string(), (name.clone(), b));
        name
    }

    fn lookup(&self, x: &str) -> Option<&(String, Binding)> {
        self.scopes.iter().rev().find_map(|s| s.get(x))
    }

    fn pat(&mut self, p: &Pat) -> Pat {
        match p {
            Pat::Unit => Pat::Unit,
            Pat::Var(x) => {
                let b = self.scopes.last().unwrap().get(x).map(|(n, _)| n.clone());
                Pat::Var(b.unwrap_or_else(|| self.bind(x, Binding::Plain)))
            }
            Pat::Pair(a, b) => Pat::Pair(Box::new(self.pat(a)), Box::new(self.pat(b))),
        }
    }

    fn expr(&mut self, e: &Expr) -> Result<Expr> {
        Ok(match e {
            Expr::Const(c) => Expr::Const(c.clone()),
            Expr::Var(x) => match self.lookup(x) {
                Some((n, _)) => Expr::Var(n.clone()),
                None if self.globals.contains(x) => Expr::Var(x.clone()),
                None => return Err(Error::Unbound(x.clone())),
            },
            Expr::Last(x) => match self.lookup(x) {
                Some((n, Binding::WithLast)) => Expr::Last(n.clone()),
                _ => return Err(Error::Unbound(format!("last {x}"))),
            },
            Expr::Pair(a, b) => Expr::pair(self.expr(a)?, self.expr(b)?),
            Expr::Op(p, args) => {
                Expr::Op(*p, args.iter().map(|a| self.expr(a)).collect::<Result<_>>()?)
            }
            Expr::App { func, arg, .. } => {
                if !self.nodes.contains_key(func) {
                    return Err(Error::Unbound(func.clone()));
                }
                let arg = self.expr(arg)?;
                let inst = self.fresh.fresh(&format!("theta_{func}"));
                Expr::App { func: func.clone(), inst, arg: Box::new(arg) }
            }
            Expr::Where(body, eqs) => {
                self.scopes.push(HashMap::new());
                let inits: HashSet<&str> = eqs
                    .iter()
                    .filter_map(|q| match q {
                        Eq::Init(x, _) => Some(x.as_str()),
                        _ => None,
                    })
                    .collect();
                let mut defined = HashSet::new();
                for q in eqs {
                    if let Eq::Def(p, _) = q {
                        for x in p.vars() {
                            if !defined.insert(x) {
                                return Err(Error::Causality(format!("`{x}` is defined twice")));
                            }
                            let b = if inits.contains(x) { Binding::WithLast } else { Binding::Plain };
                            self.bind(x, b);
                        }
                    }
                }
                for x in &inits {
                    if !defined.contains(x) {
                        return Err(Error::Causality(format!("`init {x}` has no defining equation")));
                    }
                }
                let mut seen_init = HashSet::new();
                let mut out = Vec::with_capacity(eqs.len());
                for q in eqs {
                    out.push(match q {
                        Eq::Def(p, e) => {
                            let e = self.expr(e)?;
                            Eq::Def(self.pat(p), e)
                        }
                        Eq::Init(x, e) => {
                            if !seen_init.insert(x) {
                                return Err(Error::Causality(format!("`init {x}` appears twice")));
                            }
                            let n = self.lookup(x).unwrap().0.clone();
                            Eq::Init(n, self.expr(e)?)
                        }
                    });
                }
                let body = self.expr(body)?;
                self.scopes.pop();
                Expr::Where(Box::new(body), out)
            }
            Expr::Present(c, a, b) => {
                Expr::Present(Box::new(self.expr(c)?), Box::new(self.expr(a)?), Box::new(self.expr(b)?))
            }
            Expr::Reset(a, c) => Expr::Reset(Box::new(self.expr(a)?), Box::new(self.expr(c)?)),
            Expr::Sample(a) => Expr::Sample(Box::new(self.expr(a)?)),
            Expr::Factor(a) => Expr::Factor(Box::new(self.expr(a)?)),
            Expr::Infer(a) => Expr::Infer(Box::new(self.expr(a)?)),
            Expr::ApfInfer { model, prior, arg } => {
                if !self.nodes.contains_key(model) {
                    return Err(Error::Unbound(model.clone()));
                }
                if !self.globals.contains(prior) {
                    return Err(Error::Unbound(prior.clone()));
                }
                Expr::ApfInfer { model: model.clone(), prior: prior.clone(), arg: Box::new(self.expr(arg)?) }
            }
        })
    }
}

/// Renames binders so that every local name is unique across the program, assigns a
/// fresh instance identifier to every node application and checks scoping: names must
/// be declared before use, so recursion is rejected.
pub fn uniquify(p: &Program) -> Result<Program> {
    let mut nodes = HashMap::new();
    let mut globals = HashSet::new();
    let mut out = Program { decls: Vec::new(), positions: p.positions.clone() };
    let mut fresh = Fresh::for_program(p);
    let mut claimed = HashSet::new();
    for d in &p.decls {
        if nodes.contains_key(d.name()) || globals.contains(d.name()) {
            return Err(Error::kind(d.name(), "declared twice"));
        }
        let mut r = Resolver {
            fresh: std::mem::take(&mut fresh),
            claimed: std::mem::take(&mut claimed),
            globals: globals.clone(),
            nodes: &nodes,
            scopes: vec![HashMap::new()],
        };
        let decl = match d {
            Decl::Let { name, body } => Decl::Let { name: name.clone(), body: r.expr(body)? },
            Decl::Node { name, param, body } | Decl::Proba { name, param, body } => {
                let param = r.pat(param);
                let body = r.expr(body)?;
                if matches!(d, Decl::Node { .. }) {
                    Decl::Node { name: name.clone(), param, body }
                } else {
                    Decl::Proba { name: name.clone(), param, body }
                }
            }
        };
        fresh = r.fresh;
        claimed = r.claimed;
        match decl.kind() {
            Some(k) => {
                nodes.insert(decl.name().to_string(), k);
            }
            None => {
                globals.insert(decl.name().to_string());
            }
        }
        out.decls.push(decl);
    }
    Ok(out)
}

/// Resolves a free-standing expression against the declarations of `p`, with `inputs`
/// bound as locals. Returns the (possibly renamed) input names and the expression.
pub fn resolve_expr(p: &Program, e: &Expr, inputs: &[&str]) -> Result<(Vec<String>, Expr)> {
    let nodes: HashMap<String, Kind> =
        p.decls.iter().filter_map(|d| Some((d.name().to_string(), d.kind()?))).collect();
    let globals: HashSet<String> =
        p.decls.iter().filter(|d| d.kind().is_none()).map(|d| d.name().to_string()).collect();
    let mut fresh = Fresh::for_program(p);
    let mut names = HashSet::new();
    collect_names(e, &mut names);
    for n in &names {
        fresh.reserve(n);
    }
    let mut r = Resolver { fresh, claimed: HashSet::new(), globals, nodes: &nodes, scopes: vec![HashMap::new()] };
    let ins = inputs.iter().map(|x| r.bind(x, Binding::Plain)).collect();
    Ok((ins, r.expr(e)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse::parse_program;

    #[test]
    fn shadowed_binders_are_renamed() {
        let p = parse_program(
            "node a(x) = y where rec y = x\nnode b(x) = (y where rec y = x) + x",
        )
        .unwrap();
        let u = uniquify(&p).unwrap();
        let text = crate::lang::print::program(&u);
        assert!(text.contains("node b(x_1)"), "{text}");
        assert!(text.contains("y_1 = x_1"), "{text}");
    }

    #[test]
    fn instances_get_distinct_ids() {
        let p = parse_program("node f(x) = x\nnode g(x) = f(x) + f(x)").unwrap();
        let u = uniquify(&p).unwrap();
        let mut ids = Vec::new();
        u.decls[1].body().visits(&mut |e| {
            if let Expr::App { inst, .. } = e {
                ids.push(inst.clone());
            }
            false
        });
        assert_eq!(ids.len(), 2);
        assert_ne!(ids[0], ids[1]);
    }

    #[test]
    fn unbound_and_recursive_names_fail() {
        let p = parse_program("node f(x) = y").unwrap();
        assert_eq!(uniquify(&p).unwrap_err(), Error::Unbound("y".into()));
        let p = parse_program("node f(x) = f(x)").unwrap();
        assert_eq!(uniquify(&p).unwrap_err(), Error::Unbound("f".into()));
        let p = parse_program("node f(x) = y where rec y = last y").unwrap();
        assert_eq!(uniquify(&p).unwrap_err(), Error::Unbound("last y".into()));
    }
}
