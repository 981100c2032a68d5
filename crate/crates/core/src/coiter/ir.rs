//! Lowering from the syntax tree to an evaluation IR.
//!
//! Every node knows how many seeds (`rv`) and state slots (`size`) one step
//! consumes, so children find their segments by prefix sums. Variables are
//! resolved to frame slots and globals to indices.

use crate::error::{Error, Result};
use crate::lang::ast::*;
use crate::lang::RvTable;
use crate::value::Value;
use std::collections::{BTreeSet, HashMap};

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub rv: u32,
    pub size: u32,
    pub k: K,
}

#[derive(Debug, Clone)]
pub(crate) enum K {
    Const(Value),
    Local(u32),
    Global(u32),
    Pair(Box<Node>, Box<Node>),
    Op(Prim, Vec<Node>),
    App { body: u32, arg: Box<Node> },
    Where(Box<WhereIr>),
    Present(Box<Node>, Box<Node>, Box<Node>),
    Reset(Box<Node>, Box<Node>),
    Sample(Box<Node>),
    Factor(Box<Node>),
    /// `factor(pdf(d, x))`, scored in log space.
    FactorPdf(Box<Node>, Box<Node>),
    Infer { body: u32, arg: Box<Node> },
    ApfInfer { body: u32, prior: u32, arg: Box<Node> },
}

#[derive(Debug, Clone)]
pub(crate) enum PatIr {
    Unit,
    Slot(u32),
    Pair(Box<PatIr>, Box<PatIr>),
}

#[derive(Debug, Clone)]
pub(crate) enum EqKind {
    Def(PatIr),
    Init { last: u32, var: u32 },
}

#[derive(Debug, Clone)]
pub(crate) struct EqIr {
    pub kind: EqKind,
    pub expr: Node,
    /// State and seed offsets relative to the enclosing `where`.
    pub base: u32,
    pub off: u32,
}

#[derive(Debug, Clone)]
pub(crate) struct WhereIr {
    pub body: Node,
    pub eqs: Vec<EqIr>,
    /// Topological order of the equations, when the block is schedulable.
    pub order: Option<Vec<u32>>,
    /// Frame slots defined by the block: variables and `last` values.
    pub domain: Vec<u32>,
    pub names: Vec<String>,
}

#[derive(Debug, Clone)]
pub(crate) struct Body {
    pub name: String,
    pub frame: u32,
    pub param: PatIr,
    pub root: Node,
}

pub(crate) struct Lowerer<'a> {
    pub rv: &'a RvTable<'a>,
    pub bodies: &'a HashMap<String, u32>,
    pub body_info: &'a [(u32, u32)],
    pub globals: &'a HashMap<String, u32>,
    slots: HashMap<String, u32>,
    lasts: HashMap<String, u32>,
    next: u32,
}

impl<'a> Lowerer<'a> {
    pub fn new(
        rv: &'a RvTable<'a>,
        bodies: &'a HashMap<String, u32>,
        body_info: &'a [(u32, u32)],
        globals: &'a HashMap<String, u32>,
    ) -> Self {
        Lowerer { rv, bodies, body_info, globals, slots: HashMap::new(), lasts: HashMap::new(), next: 0 }
    }

    pub fn frame_size(&self) -> u32 {
        self.next
    }

    fn slot(&mut self, x: &str) -> u32 {
        if let Some(&s) = self.slots.get(x) {
            return s;
        }
        let s = self.next;
        self.next += 1;
        self.slots.insert(x.to_string(), s);
        s
    }

    fn last_slot(&mut self, x: &str) -> u32 {
        if let Some(&s) = self.lasts.get(x) {
            return s;
        }
        let s = self.next;
        self.next += 1;
        self.lasts.insert(x.to_string(), s);
        s
    }

    pub fn pat(&mut self, p: &Pat) -> PatIr {
        match p {
            Pat::Unit => PatIr::Unit,
            Pat::Var(x) => PatIr::Slot(self.slot(x)),
            Pat::Pair(a, b) => PatIr::Pair(Box::new(self.pat(a)), Box::new(self.pat(b))),
        }
    }

    fn node(k: K, children: &[&Node]) -> Node {
        let rv = children.iter().map(|c| c.rv).sum();
        let size = children.iter().map(|c| c.size).sum();
        Node { rv, size, k }
    }

    fn callee(&self, f: &str) -> Result<u32> {
        self.bodies.get(f).copied().ok_or_else(|| Error::Unbound(f.to_string()))
    }

    pub fn expr(&mut self, e: &Expr) -> Result<Node> {
        Ok(match e {
            Expr::Const(c) => Node {
                rv: 0,
                size: 0,
                k: K::Const(match c {
                    Const::Unit => Value::Unit,
                    Const::Bool(b) => Value::Bool(*b),
                    Const::Real(x) => Value::Real(*x),
                }),
            },
            Expr::Var(x) => {
                let k = match self.slots.get(x) {
                    Some(&s) => K::Local(s),
                    None => match self.globals.get(x) {
                        Some(&g) => K::Global(g),
                        None => return Err(Error::Unbound(x.clone())),
                    },
                };
                Node { rv: 0, size: 0, k }
            }
            Expr::Last(x) => {
                let s = *self.lasts.get(x).ok_or_else(|| Error::Unbound(format!("last {x}")))?;
                Node { rv: 0, size: 0, k: K::Local(s) }
            }
            Expr::Pair(a, b) => {
                let (a, b) = (self.expr(a)?, self.expr(b)?);
                let n = Self::node(K::Const(Value::Unit), &[&a, &b]);
                Node { k: K::Pair(Box::new(a), Box::new(b)), ..n }
            }
            Expr::Op(p, args) => {
                let args: Vec<Node> = args.iter().map(|a| self.expr(a)).collect::<Result<_>>()?;
                let refs: Vec<&Node> = args.iter().collect();
                let n = Self::node(K::Const(Value::Unit), &refs);
                Node { k: K::Op(*p, args), ..n }
            }
            Expr::App { func, arg, .. } => {
                let body = self.callee(func)?;
                let (rv_f, size_f) = self.body_info[body as usize];
                let arg = self.expr(arg)?;
                Node { rv: rv_f + arg.rv, size: size_f + arg.size, k: K::App { body, arg: Box::new(arg) } }
            }
            Expr::Where(body, eqs) => self.where_(body, eqs)?,
            Expr::Present(c, a, b) => {
                let (c, a, b) = (self.expr(c)?, self.expr(a)?, self.expr(b)?);
                let n = Self::node(K::Const(Value::Unit), &[&c, &a, &b]);
                Node { k: K::Present(Box::new(c), Box::new(a), Box::new(b)), ..n }
            }
            Expr::Reset(a, c) => {
                let (a, c) = (self.expr(a)?, self.expr(c)?);
                let n = Self::node(K::Const(Value::Unit), &[&a, &c]);
                Node { k: K::Reset(Box::new(a), Box::new(c)), ..n }
            }
            Expr::Sample(d) => {
                let own = self.rv.sample_arity(d) as u32;
                let d = self.expr(d)?;
                Node { rv: d.rv + own, size: d.size, k: K::Sample(Box::new(d)) }
            }
            Expr::Factor(inner) => match inner.as_ref() {
                Expr::Op(Prim::Pdf, args) => {
                    let (d, x) = (self.expr(&args[0])?, self.expr(&args[1])?);
                    let n = Self::node(K::Const(Value::Unit), &[&d, &x]);
                    Node { k: K::FactorPdf(Box::new(d), Box::new(x)), ..n }
                }
                _ => {
                    let a = self.expr(inner)?;
                    Node { rv: a.rv, size: a.size, k: K::Factor(Box::new(a)) }
                }
            },
            Expr::Infer(m) => match m.as_ref() {
                Expr::App { func, arg, .. } => {
                    let body = self.callee(func)?;
                    let arg = self.expr(arg)?;
                    Node { rv: 0, size: 1 + arg.size, k: K::Infer { body, arg: Box::new(arg) } }
                }
                _ => return Err(Error::kind("infer", "expects a node application")),
            },
            Expr::ApfInfer { model, prior, arg } => {
                let body = self.callee(model)?;
                let prior = *self.globals.get(prior).ok_or_else(|| Error::Unbound(prior.clone()))?;
                let arg = self.expr(arg)?;
                Node { rv: 0, size: 1 + arg.size, k: K::ApfInfer { body, prior, arg: Box::new(arg) } }
            }
        })
    }

    fn where_(&mut self, body: &Expr, eqs: &[Eq]) -> Result<Node> {
        let mut domain = Vec::new();
        let mut names = Vec::new();
        for q in eqs {
            match q {
                Eq::Def(p, _) => {
                    for x in p.vars() {
                        domain.push(self.slot(x));
                        names.push(x.to_string());
                    }
                }
                Eq::Init(x, _) => {
                    domain.push(self.last_slot(x));
                    names.push(format!("last {x}"));
                }
            }
        }
        let body = self.expr(body)?;
        let (mut base, mut off) = (body.size, body.rv);
        let mut out = Vec::with_capacity(eqs.len());
        for q in eqs {
            let (kind, expr, extra) = match q {
                Eq::Def(p, e) => (EqKind::Def(self.pat(p)), self.expr(e)?, 0),
                Eq::Init(x, e) => {
                    let kind = EqKind::Init { last: self.last_slot(x), var: self.slot(x) };
                    (kind, self.expr(e)?, 1)
                }
            };
            let (size, rv) = (expr.size + extra, expr.rv);
            out.push(EqIr { kind, expr, base, off });
            base += size;
            off += rv;
        }
        let order = schedule(eqs);
        Ok(Node {
            rv: off,
            size: base,
            k: K::Where(Box::new(WhereIr { body, eqs: out, order, domain, names })),
        })
    }
}

/// Instantaneous free names of an expression: `(x, false)` for `x`, `(x, true)` for `last x`.
pub(crate) fn free_inst(e: &Expr, out: &mut BTreeSet<(String, bool)>) {
    match e {
        Expr::Var(x) => {
            out.insert((x.clone(), false));
        }
        Expr::Last(x) => {
            out.insert((x.clone(), true));
        }
        Expr::App { arg, .. } | Expr::ApfInfer { arg, .. } => free_inst(arg, out),
        Expr::Infer(m) => {
            if let Expr::App { arg, .. } = m.as_ref() {
                free_inst(arg, out)
            }
        }
        Expr::Where(body, eqs) => {
            let mut inner = BTreeSet::new();
            free_inst(body, &mut inner);
            for q in eqs {
                free_inst(q.expr(), &mut inner);
            }
            for q in eqs {
                match q {
                    Eq::Def(p, _) => {
                        for x in p.vars() {
                            inner.remove(&(x.to_string(), false));
                        }
                    }
                    Eq::Init(x, _) => {
                        inner.remove(&(x.clone(), true));
                    }
                }
            }
            out.extend(inner);
        }
        _ => {
            for c in e.children() {
                free_inst(c, out);
            }
        }
    }
}

/// Dependency order of an equation list, breaking ties by source position.
/// `None` if instantaneous dependencies form a cycle.
pub(crate) fn schedule(eqs: &[Eq]) -> Option<Vec<u32>> {
    let mut producer: HashMap<(String, bool), usize> = HashMap::new();
    for (j, q) in eqs.iter().enumerate() {
        match q {
            Eq::Def(p, _) => {
                for x in p.vars() {
                    producer.insert((x.to_string(), false), j);
                }
            }
            Eq::Init(x, _) => {
                producer.insert((x.clone(), true), j);
            }
        }
    }
    let n = eqs.len();
    let mut indeg = vec![0usize; n];
    let mut succ = vec![Vec::new(); n];
    for (j, q) in eqs.iter().enumerate() {
        let mut fv = BTreeSet::new();
        free_inst(q.expr(), &mut fv);
        let deps: BTreeSet<usize> = fv.iter().filter_map(|k| producer.get(k).copied()).collect();
        for i in deps {
            if i == j {
                return None;
            }
            succ[i].push(j);
            indeg[j] += 1;
        }
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&j| indeg[j] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(&j) = ready.iter().next() {
        ready.remove(&j);
        order.push(j as u32);
        for &k in &succ[j] {
            indeg[k] -= 1;
            if indeg[k] == 0 {
                ready.insert(k);
            }
        }
    }
    (order.len() == n).then_some(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse::parse_expr;

    fn eqs_of(src: &str) -> Vec<Eq> {
        match parse_expr(src).unwrap() {
            Expr::Where(_, eqs) => eqs,
            _ => panic!(),
        }
    }

    #[test]
    fn schedule_orders_by_dependency() {
        let eqs = eqs_of("y where rec y = g(x) and init x = 0.0 and x = last x + 1.0");
        assert_eq!(schedule(&eqs), Some(vec![1, 2, 0]));
    }

    #[test]
    fn last_breaks_cycles_but_direct_loops_do_not() {
        let eqs = eqs_of("x where rec init x = 0.0 and x = last x + 1.0");
        assert!(schedule(&eqs).is_some());
        let eqs = eqs_of("x where rec x = y and y = x");
        assert_eq!(schedule(&eqs), None);
    }
}
