//! Step function of the density-based co-iterative semantics over the lowered IR.

use super::ir::*;
use super::{FixStats, Interp, Semantics, Slot};
use crate::error::{Error, Result};
use crate::prim;
use crate::value::Value;

/// Where `sample` sites get their values from.
pub(crate) enum Sites<'a> {
    Seeds(&'a [f64]),
    /// Return the recorded value and score it.
    Replay(&'a [Option<Value>]),
    /// Draw from seeds and record committed draws.
    Record(&'a [f64], Vec<Option<Value>>),
}

/// View of the state vector: writable for the committing pass, read-only otherwise.
pub(crate) enum St<'s> {
    W(&'s mut [Slot]),
    R(&'s [Slot]),
}

impl St<'_> {
    fn rb(&mut self) -> St<'_> {
        match self {
            St::W(s) => St::W(&mut **s),
            St::R(s) => St::R(s),
        }
    }

    fn ro(&self) -> St<'_> {
        match self {
            St::W(s) => St::R(&**s),
            St::R(s) => St::R(s),
        }
    }

    fn get(&self, i: usize) -> &Slot {
        match self {
            St::W(s) => &s[i],
            St::R(s) => &s[i],
        }
    }
}

pub(crate) struct Cx<'a> {
    pub frame: Vec<Value>,
    pub sites: Sites<'a>,
    /// Initial state of the root model, used to restart `reset` bodies.
    pub template: &'a [Slot],
    pub stats: FixStats,
    weights: Vec<f64>,
    scratch: Vec<Value>,
}

impl<'a> Cx<'a> {
    pub fn new(sites: Sites<'a>, template: &'a [Slot], frame: usize) -> Self {
        Cx {
            frame: vec![Value::Bottom; frame],
            sites,
            template,
            stats: FixStats::default(),
            weights: Vec::new(),
            scratch: Vec::new(),
        }
    }
}

pub(crate) fn bind(frame: &mut [Value], fb: usize, p: &PatIr, v: Value) -> Result<()> {
    match p {
        PatIr::Unit => Ok(()),
        PatIr::Slot(s) => {
            frame[fb + *s as usize] = v;
            Ok(())
        }
        PatIr::Pair(a, b) => match v {
            Value::Bottom => {
                bind(frame, fb, a, Value::Bottom)?;
                bind(frame, fb, b, Value::Bottom)
            }
            Value::Pair(pv) => {
                bind(frame, fb, a, pv.0.clone())?;
                bind(frame, fb, b, pv.1.clone())
            }
            v => Err(Error::ty(format!("cannot destructure {v} as a pair"))),
        },
    }
}

fn sorted_sum(ws: &mut [f64]) -> f64 {
    ws.sort_unstable_by(f64::total_cmp);
    ws.iter().sum()
}

impl Interp {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn ev(
        &self,
        n: &Node,
        cx: &mut Cx,
        fb: usize,
        mut st: St,
        base: usize,
        off: usize,
        strict: bool,
    ) -> Result<(Value, f64)> {
        match &n.k {
            K::Const(v) => Ok((v.clone(), 0.0)),
            K::Local(s) => {
                let v = cx.frame[fb + *s as usize].clone();
                if strict && v.is_bottom() {
                    return Err(Error::BottomEscape("a variable read"));
                }
                Ok((v, 0.0))
            }
            K::Global(g) => Ok((self.globals[*g as usize].clone(), 0.0)),
            K::Pair(a, b) => {
                let (va, wa) = self.ev(a, cx, fb, st.rb(), base, off, strict)?;
                let (vb, wb) =
                    self.ev(b, cx, fb, st, base + a.size as usize, off + a.rv as usize, strict)?;
                let v = if va.is_bottom() || vb.is_bottom() { Value::Bottom } else { Value::pair(va, vb) };
                Ok((v, wa + wb))
            }
            K::Op(p, args) => {
                let mark = cx.scratch.len();
                let (mut b, mut o, mut w) = (base, off, 0.0);
                for a in args {
                    let (v, wa) = self.ev(a, cx, fb, st.rb(), b, o, strict)?;
                    cx.scratch.push(v);
                    w += wa;
                    b += a.size as usize;
                    o += a.rv as usize;
                }
                let r = prim::apply(*p, &cx.scratch[mark..]);
                cx.scratch.truncate(mark);
                Ok((r?, w))
            }
            K::App { body, arg } => {
                let callee = &self.bodies[*body as usize];
                let (rs, ro) = (callee.root.size as usize, callee.root.rv as usize);
                let (va, wa) = self.ev(arg, cx, fb, st.rb(), base + rs, off + ro, strict)?;
                let nf = cx.frame.len();
                cx.frame.resize(nf + callee.frame as usize, Value::Bottom);
                bind(&mut cx.frame, nf, &callee.param, va)?;
                let r = self.ev(&callee.root, cx, nf, st, base, off, strict);
                cx.frame.truncate(nf);
                let (v, wf) = r?;
                Ok((v, wf + wa))
            }
            K::Where(w) => self.where_(w, cx, fb, st, base, off, strict),
            K::Present(c, a, b) => {
                let (vc, wc) = self.ev(c, cx, fb, st.rb(), base, off, strict)?;
                let cond = match vc {
                    Value::Bottom if strict => return Err(Error::BottomEscape("a present condition")),
                    Value::Bottom => return Ok((Value::Bottom, 0.0)),
                    v => v.as_bool()?,
                };
                let (b0, o0) = (base + c.size as usize, off + c.rv as usize);
                let (v, w) = if cond {
                    self.ev(a, cx, fb, st, b0, o0, strict)?
                } else {
                    self.ev(b, cx, fb, st, b0 + a.size as usize, o0 + a.rv as usize, strict)?
                };
                Ok((v, wc + w))
            }
            K::Reset(a, c) => {
                let (vc, _) =
                    self.ev(c, cx, fb, st.rb(), base + a.size as usize, off + a.rv as usize, strict)?;
                let fire = match vc {
                    Value::Bottom if strict => return Err(Error::BottomEscape("a reset condition")),
                    Value::Bottom => return Ok((Value::Bottom, 0.0)),
                    v => v.as_bool()?,
                };
                if !fire {
                    return self.ev(a, cx, fb, st, base, off, strict);
                }
                let range = base..base + a.size as usize;
                let template = cx.template;
                match st {
                    St::W(s) => {
                        s[range.clone()].clone_from_slice(&template[range]);
                        self.ev(a, cx, fb, St::W(s), base, off, strict)
                    }
                    St::R(_) => self.ev(a, cx, fb, St::R(template), base, off, strict),
                }
            }
            K::Sample(d) => {
                let (vd, wd) = self.ev(d, cx, fb, st, base, off, strict)?;
                if vd.is_bottom() {
                    if strict {
                        return Err(Error::BottomEscape("a sample argument"));
                    }
                    return Ok((Value::Bottom, 0.0));
                }
                let at = off + d.rv as usize;
                let own = (n.rv - d.rv) as usize;
                if prim::leaves(&vd) != own {
                    return Err(Error::ty(format!("sample site expects {own} distribution leaves, got {vd}")));
                }
                match &mut cx.sites {
                    Sites::Seeds(seeds) => Ok((draw(&vd, &seeds[at..at + own])?, wd)),
                    Sites::Record(seeds, trace) => {
                        let v = draw(&vd, &seeds[at..at + own])?;
                        if strict {
                            trace[at] = Some(v.clone());
                        }
                        Ok((v, wd))
                    }
                    Sites::Replay(trace) => match &trace[at] {
                        Some(v) => {
                            let s = if strict { prim::tuple_log_pdf(&vd, v)? } else { 0.0 };
                            Ok((v.clone(), wd + s))
                        }
                        None => Err(Error::Inconsistent(format!("no recorded value for sample site {at}"))),
                    },
                }
            }
            K::Factor(e) => {
                let (v, w) = self.ev(e, cx, fb, st, base, off, strict)?;
                if v.is_bottom() {
                    if strict {
                        return Err(Error::BottomEscape("a factor argument"));
                    }
                    return Ok((Value::Bottom, 0.0));
                }
                Ok((Value::Unit, w + prim::factor_weight(&v)?))
            }
            K::FactorPdf(d, x) => {
                let (vd, wd) = self.ev(d, cx, fb, st.rb(), base, off, strict)?;
                let (vx, wx) =
                    self.ev(x, cx, fb, st, base + d.size as usize, off + d.rv as usize, strict)?;
                if vd.is_bottom() || !vx.is_defined() {
                    if strict {
                        return Err(Error::BottomEscape("an observe argument"));
                    }
                    return Ok((Value::Bottom, 0.0));
                }
                if !strict {
                    return Ok((Value::Unit, 0.0));
                }
                Ok((Value::Unit, wd + wx + prim::log_pdf(&vd, &vx)?))
            }
            K::Infer { arg, .. } | K::ApfInfer { arg, .. } => {
                let (va, _) = self.ev(arg, cx, fb, st.rb(), base + 1, off, strict)?;
                if !va.is_defined() {
                    if strict {
                        return Err(Error::BottomEscape("an infer argument"));
                    }
                    return Ok((Value::Bottom, 0.0));
                }
                let v = match st {
                    St::W(s) => match &mut s[base] {
                        Slot::Filter(f) => f.step(self, &va)?,
                        Slot::V(_) => unreachable!("infer slot holds a filter"),
                    },
                    St::R(s) => match &s[base] {
                        Slot::Filter(f) => f.clone().step(self, &va)?,
                        Slot::V(_) => unreachable!("infer slot holds a filter"),
                    },
                };
                Ok((v, 0.0))
            }
        }
    }

    /// Value of `last x` produced by an `init` equation.
    #[allow(clippy::too_many_arguments)]
    fn init_last(
        &self,
        q: &EqIr,
        cx: &mut Cx,
        fb: usize,
        st: St,
        base: usize,
        off: usize,
        strict: bool,
    ) -> Result<(Value, f64)> {
        match st.get(base) {
            Slot::V(Value::Nil) => self.ev(&q.expr, cx, fb, st.ro(), base + 1, off, strict),
            Slot::V(v) => Ok((v.clone(), 0.0)),
            Slot::Filter(_) => unreachable!("init slot holds a value"),
        }
    }

    /// One equation under the current environment; binds its result and returns its weight.
    #[allow(clippy::too_many_arguments)]
    fn equation(
        &self,
        q: &EqIr,
        cx: &mut Cx,
        fb: usize,
        st: St,
        base: usize,
        off: usize,
        strict: bool,
    ) -> Result<f64> {
        let (b, o) = (base + q.base as usize, off + q.off as usize);
        match &q.kind {
            EqKind::Def(p) => {
                let (v, w) = self.ev(&q.expr, cx, fb, st, b, o, strict)?;
                bind(&mut cx.frame, fb, p, v)?;
                Ok(w)
            }
            EqKind::Init { last, .. } => {
                let (v, w) = self.init_last(q, cx, fb, st, b, o, strict)?;
                cx.frame[fb + *last as usize] = v;
                Ok(w)
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn where_(
        &self,
        w: &WhereIr,
        cx: &mut Cx,
        fb: usize,
        mut st: St,
        base: usize,
        off: usize,
        strict: bool,
    ) -> Result<(Value, f64)> {
        for &s in &w.domain {
            cx.frame[fb + s as usize] = Value::Bottom;
        }
        let scheduled = match (self.semantics, &w.order) {
            (Semantics::Fixpoint, _) => None,
            (_, Some(order)) => Some(order),
            (Semantics::Scheduled, None) => return Err(Error::Schedule(w.names.clone())),
            (Semantics::Auto, None) => None,
        };
        let mark = cx.weights.len();
        cx.weights.resize(mark + w.eqs.len(), 0.0);
        if let Some(order) = scheduled {
            for &j in order {
                let q = &w.eqs[j as usize];
                let wq = self.equation(q, cx, fb, st.rb(), base, off, strict)?;
                cx.weights[mark + j as usize] = wq;
            }
        } else {
            self.fixpoint(w, cx, fb, st.ro(), base, off)?;
            if strict {
                if let Some(i) = w.domain.iter().position(|&s| cx.frame[fb + s as usize].is_bottom()) {
                    return Err(Error::Causality(format!(
                        "`{}` is undefined after the fixpoint iteration",
                        w.names[i]
                    )));
                }
                // Authoritative pass: same values, now with state updates and weights.
                for (j, q) in w.eqs.iter().enumerate() {
                    let wq = self.equation(q, cx, fb, st.rb(), base, off, true)?;
                    cx.weights[mark + j] = wq;
                }
            }
        }
        if let St::W(s) = &mut st {
            for q in &w.eqs {
                if let EqKind::Init { var, .. } = q.kind {
                    s[base + q.base as usize] = Slot::V(cx.frame[fb + var as usize].clone());
                }
            }
        }
        let r = self.ev(&w.body, cx, fb, st, base, off, strict);
        let ew = sorted_sum(&mut cx.weights[mark..]);
        cx.weights.truncate(mark);
        let (v, bw) = r?;
        Ok((v, bw + ew))
    }

    /// Kleene iteration from the all-undefined environment, in probing mode.
    #[allow(clippy::too_many_arguments)]
    fn fixpoint(
        &self,
        w: &WhereIr,
        cx: &mut Cx,
        fb: usize,
        st: St,
        base: usize,
        off: usize,
    ) -> Result<()> {
        let mut defined = 0;
        let mut iterations = 0u32;
        loop {
            iterations += 1;
            for q in &w.eqs {
                if let EqKind::Init { last, .. } = q.kind {
                    let (b, o) = (base + q.base as usize, off + q.off as usize);
                    let (v, _) = self.init_last(q, cx, fb, st.ro(), b, o, false)?;
                    cx.frame[fb + last as usize] = v;
                }
            }
            let mark = cx.scratch.len();
            for q in &w.eqs {
                if let EqKind::Def(_) = q.kind {
                    let (b, o) = (base + q.base as usize, off + q.off as usize);
                    let (v, _) = self.ev(&q.expr, cx, fb, st.ro(), b, o, false)?;
                    cx.scratch.push(v);
                }
            }
            let mut vals = cx.scratch.drain(mark..).collect::<Vec<_>>().into_iter();
            for q in &w.eqs {
                if let EqKind::Def(p) = &q.kind {
                    bind(&mut cx.frame, fb, p, vals.next().unwrap())?;
                }
            }
            let now = w.domain.iter().filter(|&&s| !cx.frame[fb + s as usize].is_bottom()).count();
            if now == w.domain.len() {
                // Everything is defined, so one more application would only confirm it.
                iterations += 1;
                break;
            }
            if now == defined {
                break;
            }
            defined = now;
        }
        cx.stats.record(iterations, w.domain.len());
        Ok(())
    }
}

fn draw(d: &Value, seeds: &[f64]) -> Result<Value> {
    let mut k = 0;
    prim::sample_with(d, &mut |dist| {
        let u = seeds[k];
        k += 1;
        dist.icdf(u)
    })
}
