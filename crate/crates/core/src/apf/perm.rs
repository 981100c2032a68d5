use super::{Analysis, Phi, Source};
use crate::error::{Error, Result};
use crate::lang::{Decl, Eq, Expr, Kind, Pat, Program, RvTable};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

/// Seed routing for one compiled model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermEntry {
    pub source_rv: usize,
    pub compiled_rv: usize,
    pub prior_rv: usize,
    /// Source seed `i` goes to position `perm[i]` of `[model seeds : prior seeds]`.
    pub perm: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PermTable {
    pub models: BTreeMap<String, PermEntry>,
}

impl PermEntry {
    /// Rearranges source seeds into the compiled `[model : prior]` layout.
    pub fn apply<T: Clone + Default>(&self, src: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); src.len()];
        for (i, &j) in self.perm.iter().enumerate() {
            out[j] = src[i].clone();
        }
        out
    }
}

/// A seed position identified by the chain of instances leading to it, the sample site
/// and the leaf within a tuple sample.
type Label = (Vec<String>, usize, usize);

struct Layouts<'p> {
    prog: &'p Program,
    analysis: &'p Analysis,
    rv: RvTable<'p>,
    sites: HashMap<*const Expr, usize>,
}

fn number_sites(e: &Expr, sites: &mut HashMap<*const Expr, usize>) {
    if matches!(e, Expr::Sample(_)) {
        let n = sites.len();
        sites.insert(e as *const Expr, n);
    }
    for c in e.children() {
        number_sites(c, sites);
    }
}

fn under(inst: &str, labels: Vec<Label>) -> impl Iterator<Item = Label> + '_ {
    labels.into_iter().map(move |(mut path, s, j)| {
        path.insert(0, inst.to_string());
        (path, s, j)
    })
}

fn init_sample<'e>(e: &'e Expr, x: &str) -> Option<&'e Expr> {
    if let Expr::Where(_, eqs) = e {
        for q in eqs {
            if let Eq::Init(y, s @ Expr::Sample(_)) = q {
                if y == x {
                    return Some(s);
                }
            }
        }
    }
    e.children().into_iter().find_map(|c| init_sample(c, x))
}

fn removed(phi: &Phi, q: &Eq) -> bool {
    let x = match q {
        Eq::Init(x, _) | Eq::Def(Pat::Var(x), _) => x,
        Eq::Def(..) => return false,
    };
    phi.iter().any(|p| &p.name == x)
}

impl<'p> Layouts<'p> {
    fn new(prog: &'p Program, analysis: &'p Analysis) -> Self {
        let mut sites = HashMap::new();
        for d in &prog.decls {
            number_sites(d.body(), &mut sites);
        }
        Layouts { prog, analysis, rv: RvTable::new(prog), sites }
    }

    fn body(&self, f: &str) -> &'p Expr {
        self.prog.get(f).map(Decl::body).expect("resolved callee")
    }

    fn phi(&self, f: &str) -> &'p [super::Param] {
        self.analysis.get(f).map(Vec::as_slice).unwrap_or(&[])
    }

    fn site(&self, e: &Expr, out: &mut Vec<Label>) {
        let Expr::Sample(d) = e else { unreachable!() };
        let id = self.sites[&(e as *const Expr)];
        out.extend((0..self.rv.sample_arity(d)).map(|j| (Vec::new(), id, j)));
    }

    fn source(&self, f: &str) -> Vec<Label> {
        let mut out = Vec::new();
        self.walk(self.body(f), None, &mut out);
        out
    }

    fn model(&self, f: &str) -> Vec<Label> {
        let phi = self.phi(f).to_vec();
        let mut out = Vec::new();
        self.walk(self.body(f), Some(&phi), &mut out);
        out
    }

    fn prior(&self, f: &str) -> Vec<Label> {
        let mut out = Vec::new();
        for p in self.phi(f) {
            match &p.source {
                Source::Init => {
                    let site = init_sample(self.body(f), &p.name);
                    self.site(site.expect("parameter has an init sample"), &mut out);
                }
                Source::Instance(g) => out.extend(under(&p.name, self.prior(g))),
            }
        }
        out
    }

    /// Seed labels of `e` in evaluation order; with `phi`, in the layout of the compiled
    /// body instead of the source one.
    fn walk(&self, e: &Expr, phi: Option<&Phi>, out: &mut Vec<Label>) {
        match e {
            Expr::Const(_) | Expr::Var(_) | Expr::Last(_) => {}
            Expr::Factor(_) | Expr::Infer(_) | Expr::ApfInfer { .. } => {}
            Expr::Sample(_) => self.site(e, out),
            Expr::Reset(body, _) => self.walk(body, phi, out),
            Expr::App { func, inst, arg } => {
                let proba = self.prog.kind_of(func) == Some(Kind::Proba);
                match phi {
                    Some(phi) if proba => {
                        out.extend(under(inst, self.model(func)));
                        self.walk(arg, Some(phi), out);
                        let lifted = phi.iter().any(|p| &p.name == inst);
                        if !self.phi(func).is_empty() && !lifted {
                            out.extend(under(inst, self.prior(func)));
                        }
                    }
                    _ => {
                        out.extend(under(inst, self.source(func)));
                        self.walk(arg, phi, out);
                    }
                }
            }
            Expr::Where(body, eqs) => {
                self.walk(body, phi, out);
                for q in eqs {
                    if !phi.is_some_and(|phi| removed(phi, q)) {
                        self.walk(q.expr(), phi, out);
                    }
                }
            }
            _ => e.children().into_iter().for_each(|c| self.walk(c, phi, out)),
        }
    }
}

/// Seed permutations for every probabilistic node of a resolved program: running the
/// source node on seeds `R` matches running the compiled model on `perm(R)` with the
/// trailing block fed to `sample(f__prior)`.
pub fn permutations(p: &Program, a: &Analysis) -> Result<PermTable> {
    let l = Layouts::new(p, a);
    let mut table = PermTable::default();
    for d in &p.decls {
        let Decl::Proba { name, .. } = d else { continue };
        let src = l.source(name);
        let model = l.model(name);
        let prior = l.prior(name);
        let pos: HashMap<&Label, usize> = model.iter().chain(&prior).enumerate().map(|(i, x)| (x, i)).collect();
        if pos.len() != src.len() {
            return Err(Error::Permutation(format!(
                "`{name}` has {} source seeds but {} compiled ones",
                src.len(),
                pos.len()
            )));
        }
        let perm = src
            .iter()
            .map(|x| pos.get(x).copied())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Permutation(format!("`{name}`: unmatched seed")))?;
        table.models.insert(
            name.clone(),
            PermEntry { source_rv: src.len(), compiled_rv: model.len(), prior_rv: prior.len(), perm },
        );
    }
    Ok(table)
}
