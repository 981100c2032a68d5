//! Constructive evaluation of the relational semantics on finite prefixes.
//!
//! Every variable is a stream of lazily computed cells. Branches of `present` live on
//! the sub-clock of the instants where they are selected, and each `reset` slice is a
//! fresh activation starting at its firing instant.

use crate::dist::Dist;
use crate::error::{Error, Result};
use crate::lang::{self, Const, Decl, Eq, Expr, Pat, Prim, Program, RvTable};
use crate::prim;
use crate::value::Value;
use std::collections::{HashMap, HashSet};

/// Provider of the uniform seed `j` of the root expression at instant `t`.
pub trait SeedSource {
    fn seed(&mut self, j: usize, t: usize, d: &Dist) -> Result<f64>;
}

/// Explicit random streams: `r[j][t]`.
pub struct Streams<'a>(pub &'a [Vec<f64>]);

impl SeedSource for Streams<'_> {
    fn seed(&mut self, j: usize, t: usize, _: &Dist) -> Result<f64> {
        self.0
            .get(j)
            .and_then(|s| s.get(t))
            .copied()
            .ok_or_else(|| Error::Domain(format!("no random stream value R[{j}][{t}]")))
    }
}

enum Link {
    Root,
    /// Node body called from `caller`, whose seeds start at `base`.
    Call { caller: usize, base: usize },
    /// Branch of a `present`: local instant `k` is parent instant `map[k]`.
    Clock { parent: usize, map: Vec<usize> },
    /// Reset slice starting at parent instant `start`.
    Slice { parent: usize, start: usize },
}

enum Def<'e> {
    Input(Vec<bool>),
    Arg { caller: usize, arg: &'e Expr, off: usize, path: Vec<bool> },
    Eq { expr: &'e Expr, off: usize, path: Vec<bool> },
}

struct Frame<'e> {
    link: Link,
    vars: HashMap<&'e str, Def<'e>>,
    inits: HashMap<&'e str, (&'e Expr, usize)>,
    wheres: HashSet<*const Expr>,
    kids: HashMap<(*const Expr, usize), usize>,
}

impl<'e> Frame<'e> {
    fn new(link: Link) -> Self {
        Frame { link, vars: HashMap::new(), inits: HashMap::new(), wheres: HashSet::new(), kids: HashMap::new() }
    }
}

fn paths<'e>(p: &'e Pat, prefix: &mut Vec<bool>, out: &mut Vec<(&'e str, Vec<bool>)>) {
    match p {
        Pat::Unit => {}
        Pat::Var(x) => out.push((x, prefix.clone())),
        Pat::Pair(a, b) => {
            prefix.push(false);
            paths(a, prefix, out);
            prefix.pop();
            prefix.push(true);
            paths(b, prefix, out);
            prefix.pop();
        }
    }
}

fn project(mut v: Value, path: &[bool]) -> Result<Value> {
    for &right in path {
        let (a, b) = v.as_pair()?;
        v = if right { b.clone() } else { a.clone() };
    }
    Ok(v)
}

fn sorted_sum(mut ws: Vec<f64>) -> f64 {
    ws.sort_unstable_by(f64::total_cmp);
    ws.iter().sum()
}

type Key = (usize, *const Expr, usize);

struct Run<'e, 's> {
    prog: &'e Program,
    rv: &'e RvTable<'e>,
    globals: &'e HashMap<String, Value>,
    input: &'e [Value],
    seeds: &'s mut dyn SeedSource,
    frames: Vec<Frame<'e>>,
    memo: HashMap<Key, (Value, f64)>,
    busy: HashSet<Key>,
    counts: HashMap<*const Expr, usize>,
}

impl<'e> Run<'e, '_> {
    fn count(&mut self, e: &Expr) -> usize {
        let k = e as *const Expr;
        if let Some(&n) = self.counts.get(&k) {
            return n;
        }
        let n = self.rv.count(e);
        self.counts.insert(k, n);
        n
    }

    fn kid(&mut self, f: usize, key: (*const Expr, usize), link: impl FnOnce() -> Link) -> usize {
        if let Some(&k) = self.frames[f].kids.get(&key) {
            return k;
        }
        let k = self.frames.len();
        self.frames.push(Frame::new(link()));
        self.frames[f].kids.insert(key, k);
        k
    }

    /// Root seed coordinates of seed `j` of frame `f` at local instant `t`.
    fn seed_at(&self, mut f: usize, mut j: usize, mut t: usize) -> (usize, usize) {
        loop {
            match &self.frames[f].link {
                Link::Root => return (j, t),
                Link::Call { caller, base } => {
                    j += base;
                    f = *caller;
                }
                Link::Clock { parent, map } => {
                    t = map[t];
                    f = *parent;
                }
                Link::Slice { parent, start } => {
                    t += start;
                    f = *parent;
                }
            }
        }
    }

    fn memo(&mut self, e: &'e Expr, f: usize, off: usize, t: usize) -> Result<(Value, f64)> {
        let key = (f, e as *const Expr, t);
        if let Some(r) = self.memo.get(&key) {
            return Ok(r.clone());
        }
        if !self.busy.insert(key) {
            return Err(Error::Inconsistent(format!(
                "instantaneous cycle through `{}` at instant {t}",
                lang::print::expr(e)
            )));
        }
        let r = self.ev(e, f, off, t);
        self.busy.remove(&key);
        let r = r?;
        self.memo.insert(key, r.clone());
        Ok(r)
    }

    /// Frame defining `x` as seen from `f`, with the instant translated to its clock.
    fn owner(&self, mut f: usize, x: &str, mut t: usize) -> Option<(usize, usize)> {
        loop {
            let fr = &self.frames[f];
            if fr.vars.contains_key(x) {
                return Some((f, t));
            }
            match &fr.link {
                Link::Clock { parent, map } => {
                    t = map[t];
                    f = *parent;
                }
                Link::Slice { parent, start } => {
                    t += start;
                    f = *parent;
                }
                Link::Root | Link::Call { .. } => return None,
            }
        }
    }

    fn var(&mut self, f: usize, x: &str, t: usize) -> Result<Value> {
        let Some((g, t)) = self.owner(f, x, t) else {
            return self.globals.get(x).cloned().ok_or_else(|| Error::Unbound(x.to_string()));
        };
        let (v, path) = match &self.frames[g].vars[x] {
            Def::Input(path) => (self.input[t].clone(), path.clone()),
            &Def::Arg { caller, arg, off, ref path } => {
                let path = path.clone();
                (self.memo(arg, caller, off, t)?.0, path)
            }
            &Def::Eq { expr, off, ref path } => {
                let path = path.clone();
                (self.memo(expr, g, off, t)?.0, path)
            }
        };
        project(v, &path)
    }

    fn last(&mut self, f: usize, x: &str, t: usize) -> Result<Value> {
        let (g, t) = self.owner(f, x, t).ok_or_else(|| Error::Unbound(format!("last {x}")))?;
        if t > 0 {
            return self.var(g, x, t - 1);
        }
        let (e, off) = *self.frames[g].inits.get(x).ok_or_else(|| Error::Unbound(format!("last {x}")))?;
        Ok(self.memo(e, g, off, 0)?.0)
    }

    fn register(&mut self, e: &'e Expr, body: &'e Expr, eqs: &'e [Eq], f: usize, off: usize) {
        if !self.frames[f].wheres.insert(e as *const Expr) {
            return;
        }
        let mut o = off + self.count(body);
        for q in eqs {
            match q {
                Eq::Init(x, ie) => {
                    self.frames[f].inits.insert(x, (ie, o));
                }
                Eq::Def(p, de) => {
                    let mut out = Vec::new();
                    paths(p, &mut Vec::new(), &mut out);
                    for (x, path) in out {
                        self.frames[f].vars.insert(x, Def::Eq { expr: de, off: o, path });
                    }
                }
            }
            o += self.count(q.expr());
        }
    }

    fn ev(&mut self, e: &'e Expr, f: usize, off: usize, t: usize) -> Result<(Value, f64)> {
        match e {
            Expr::Const(c) => Ok((
                match c {
                    Const::Unit => Value::Unit,
                    Const::Bool(b) => Value::Bool(*b),
                    Const::Real(x) => Value::Real(*x),
                },
                0.0,
            )),
            Expr::Var(x) => Ok((self.var(f, x, t)?, 0.0)),
            Expr::Last(x) => Ok((self.last(f, x, t)?, 0.0)),
            Expr::Pair(a, b) => {
                let (va, wa) = self.ev(a, f, off, t)?;
                let o = off + self.count(a);
                let (vb, wb) = self.ev(b, f, o, t)?;
                Ok((Value::pair(va, vb), wa + wb))
            }
            Expr::Op(p, args) => {
                let (mut o, mut w) = (off, 0.0);
                let mut vs = Vec::with_capacity(args.len());
                for a in args {
                    let (v, wa) = self.ev(a, f, o, t)?;
                    vs.push(v);
                    w += wa;
                    o += self.count(a);
                }
                Ok((prim::apply(*p, &vs)?, w))
            }
            Expr::App { func, arg, .. } => {
                let Some(Decl::Node { param, body, .. } | Decl::Proba { param, body, .. }) = self.prog.get(func)
                else {
                    return Err(Error::Unbound(func.clone()));
                };
                let ao = off + self.rv.node(func);
                let (_, wa) = self.memo(arg, f, ao, t)?;
                let k = self.kid(f, (e as *const Expr, 0), || Link::Call { caller: f, base: off });
                if self.frames[k].vars.is_empty() {
                    let mut out = Vec::new();
                    paths(param, &mut Vec::new(), &mut out);
                    for (x, path) in out {
                        self.frames[k].vars.insert(x, Def::Arg { caller: f, arg, off: ao, path });
                    }
                }
                let (v, wf) = self.ev(body, k, 0, t)?;
                Ok((v, wf + wa))
            }
            Expr::Where(body, eqs) => {
                self.register(e, body, eqs, f, off);
                let mut o = off + self.count(body);
                let mut ws = Vec::with_capacity(eqs.len());
                for q in eqs {
                    ws.push(match q {
                        Eq::Def(_, de) => self.memo(de, f, o, t)?.1,
                        Eq::Init(_, ie) if t == 0 => self.memo(ie, f, o, 0)?.1,
                        Eq::Init(..) => 0.0,
                    });
                    o += self.count(q.expr());
                }
                let (v, wb) = self.ev(body, f, off, t)?;
                Ok((v, wb + sorted_sum(ws)))
            }
            Expr::Present(c, a, b) => {
                let (vc, wc) = self.memo(c, f, off, t)?;
                let sel = vc.as_bool()?;
                let mut map = Vec::new();
                for s in 0..=t {
                    if self.memo(c, f, off, s)?.0.as_bool()? == sel {
                        map.push(s);
                    }
                }
                let local = map.len() - 1;
                let k = self.kid(f, (e as *const Expr, sel as usize), || Link::Clock { parent: f, map: Vec::new() });
                self.frames[k].link = Link::Clock { parent: f, map };
                let o = off + self.count(c);
                let (v, w) = if sel {
                    self.ev(a, k, o, local)?
                } else {
                    let o = o + self.count(a);
                    self.ev(b, k, o, local)?
                };
                Ok((v, wc + w))
            }
            Expr::Reset(a, c) => {
                let co = off + self.count(a);
                let mut start = 0;
                for s in (1..=t).rev() {
                    if self.memo(c, f, co, s)?.0.as_bool()? {
                        start = s;
                        break;
                    }
                }
                self.memo(c, f, co, t)?.0.as_bool()?;
                let k = self.kid(f, (e as *const Expr, start), || Link::Slice { parent: f, start });
                self.ev(a, k, off, t - start)
            }
            Expr::Sample(d) => {
                let (vd, wd) = self.ev(d, f, off, t)?;
                let at = off + self.count(d);
                let own = self.rv.sample_arity(d);
                if prim::leaves(&vd) != own {
                    return Err(Error::ty(format!("sample site expects {own} distribution leaves, got {vd}")));
                }
                let mut k = 0;
                let mut coords = Vec::with_capacity(own);
                for j in 0..own {
                    coords.push(self.seed_at(f, at + j, t));
                }
                let seeds = &mut *self.seeds;
                let v = prim::sample_with(&vd, &mut |dist| {
                    let (j, s) = coords[k];
                    k += 1;
                    dist.icdf(seeds.seed(j, s, dist)?)
                })?;
                Ok((v, wd))
            }
            Expr::Factor(inner) => match inner.as_ref() {
                Expr::Op(Prim::Pdf, args) => {
                    let (vd, wd) = self.ev(&args[0], f, off, t)?;
                    let o = off + self.count(&args[0]);
                    let (vx, wx) = self.ev(&args[1], f, o, t)?;
                    Ok((Value::Unit, wd + wx + prim::log_pdf(&vd, &vx)?))
                }
                a => {
                    let (v, w) = self.ev(a, f, off, t)?;
                    Ok((Value::Unit, w + prim::factor_weight(&v)?))
                }
            },
            Expr::Infer(_) | Expr::ApfInfer { .. } => {
                Err(Error::Unsupported("`infer` under the relational semantics".into()))
            }
        }
    }
}

/// Relational evaluator for the expressions of one resolved program.
pub struct Rel<'p> {
    prog: &'p Program,
    rv: RvTable<'p>,
    globals: HashMap<String, Value>,
}

impl<'p> Rel<'p> {
    pub fn new(prog: &'p Program) -> Result<Rel<'p>> {
        let mut rel = Rel { prog, rv: RvTable::new(prog), globals: HashMap::new() };
        for d in &prog.decls {
            if let Decl::Let { name, body } = d {
                let v = rel.eval_resolved(body, &Pat::Unit, &[Value::Unit], &mut Streams(&[]))?[0].0.clone();
                rel.globals.insert(name.clone(), v);
            }
        }
        Ok(rel)
    }

    pub fn program(&self) -> &Program {
        self.prog
    }

    /// Seeds per instant consumed by `e`.
    pub fn rv(&self, e: &Expr) -> usize {
        self.rv.count(e)
    }

    /// `(value, log-weight)` of `e` at every instant of `xs`, the stream of input tuples
    /// bound to `inputs`.
    pub fn eval(
        &self,
        e: &Expr,
        inputs: &[&str],
        xs: &[Value],
        seeds: &mut dyn SeedSource,
    ) -> Result<Vec<(Value, f64)>> {
        let (names, e) = lang::resolve_expr(self.prog, e, inputs)?;
        self.eval_resolved(&e, &Pat::tuple(&names), xs, seeds)
    }

    fn eval_resolved(
        &self,
        e: &Expr,
        param: &Pat,
        xs: &[Value],
        seeds: &mut dyn SeedSource,
    ) -> Result<Vec<(Value, f64)>> {
        let mut root = Frame::new(Link::Root);
        let mut out = Vec::new();
        paths(param, &mut Vec::new(), &mut out);
        for (x, path) in out {
            root.vars.insert(x, Def::Input(path));
        }
        let mut run = Run {
            prog: self.prog,
            rv: &self.rv,
            globals: &self.globals,
            input: xs,
            seeds,
            frames: vec![root],
            memo: HashMap::new(),
            busy: HashSet::new(),
            counts: HashMap::new(),
        };
        (0..xs.len()).map(|t| run.ev(e, 0, 0, t)).collect()
    }
}

/// Evaluates `e` over the prefix `xs` with random streams `r` (`r[j][t]`).
pub fn rel_eval(p: &Program, e: &Expr, inputs: &[&str], xs: &[Value], r: &[Vec<f64>]) -> Result<Vec<(Value, f64)>> {
    Rel::new(p)?.eval(e, inputs, xs, &mut Streams(r))
}
