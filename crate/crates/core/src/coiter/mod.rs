//! Co-iterative interpreter: every declaration becomes an initial state and a step
//! function over explicit seeds, returning a value and a log-weight.
//!
//! Unordered equation sets are solved either by Kleene iteration over the flat domain
//! ([`Semantics::Fixpoint`]) or by evaluating them in dependency order
//! ([`Semantics::Scheduled`]). Both give bit-identical results on causal programs.

mod eval;
pub(crate) mod ir;

use crate::error::{Error, Result};
use crate::infer::{InferConfig, Nested};
use crate::lang::{self, Decl, Expr, Program, RvTable};
use crate::value::Value;
use eval::{Cx, Sites, St};
use ir::{Body, Lowerer};
use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Semantics {
    /// Kleene iteration for every `where` block.
    Fixpoint,
    /// Dependency order; unschedulable blocks are an error.
    Scheduled,
    /// Dependency order where one exists, fixpoint otherwise.
    #[default]
    Auto,
}

/// One cell of the flat state vector.
#[derive(Debug, Clone)]
pub enum Slot {
    V(Value),
    /// Particle cloud of a nested `infer`.
    Filter(Box<Nested>),
}

/// Complete state of one model instance.
#[derive(Debug, Clone)]
pub struct State(pub(crate) Vec<Slot>);

impl State {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Stored values (`last` buffers), skipping nested filters.
    pub fn observable(&self) -> Vec<Value> {
        self.0
            .iter()
            .filter_map(|s| match s {
                Slot::V(v) => Some(v.clone()),
                Slot::Filter(_) => None,
            })
            .collect()
    }
}

/// Values drawn at each sample site of one step, indexed by the site's first seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace(pub Vec<Option<Value>>);

/// Fixpoint iteration counts observed during a step.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FixStats {
    pub fixpoints: u64,
    pub max_iterations: u32,
    /// Blocks whose iteration count exceeded `|X| + 1`.
    pub over_bound: u64,
}

impl FixStats {
    pub(crate) fn record(&mut self, iterations: u32, domain: usize) {
        self.fixpoints += 1;
        self.max_iterations = self.max_iterations.max(iterations);
        if iterations as usize > domain + 1 {
            self.over_bound += 1;
        }
    }

    pub fn merge(&mut self, o: &FixStats) {
        self.fixpoints += o.fixpoints;
        self.max_iterations = self.max_iterations.max(o.max_iterations);
        self.over_bound += o.over_bound;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelId(pub(crate) u32);

pub struct Interp {
    prog: Program,
    pub(crate) bodies: Vec<Body>,
    by_name: HashMap<String, u32>,
    body_info: Vec<(u32, u32)>,
    pub(crate) globals: Vec<Value>,
    global_index: HashMap<String, u32>,
    pub(crate) semantics: Semantics,
    pub(crate) infer: InferConfig,
    templates: Vec<OnceLock<Arc<Vec<Slot>>>>,
}

impl std::fmt::Debug for Interp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Interp").field("nodes", &self.by_name.len()).field("semantics", &self.semantics).finish()
    }
}

impl Interp {
    /// Builds an interpreter for a resolved program (see [`lang::load`]), evaluating
    /// global constants eagerly.
    pub fn new(prog: &Program) -> Result<Interp> {
        let mut ip = Interp {
            prog: prog.clone(),
            bodies: Vec::new(),
            by_name: HashMap::new(),
            body_info: Vec::new(),
            globals: Vec::new(),
            global_index: HashMap::new(),
            semantics: Semantics::default(),
            infer: InferConfig::default(),
            templates: Vec::new(),
        };
        let rv = RvTable::new(prog);
        for d in &prog.decls {
            match d {
                Decl::Let { name, body } => {
                    let mut lw = Lowerer::new(&rv, &ip.by_name, &ip.body_info, &ip.global_index);
                    let root = lw.expr(body)?;
                    let body = Body { name: name.clone(), frame: lw.frame_size(), param: ir::PatIr::Unit, root };
                    let v = ip.eval_global(&body)?;
                    ip.global_index.insert(name.clone(), ip.globals.len() as u32);
                    ip.globals.push(v);
                }
                Decl::Node { name, param, body } | Decl::Proba { name, param, body } => {
                    let mut lw = Lowerer::new(&rv, &ip.by_name, &ip.body_info, &ip.global_index);
                    let param = lw.pat(param);
                    let root = lw.expr(body)?;
                    let b = Body { name: name.clone(), frame: lw.frame_size(), param, root };
                    ip.push_body(b);
                }
            }
        }
        Ok(ip)
    }

    /// Parses, resolves and kind-checks `src`, then builds the interpreter.
    pub fn from_source(src: &str) -> Result<Interp> {
        let (p, _) = lang::load(src)?;
        Interp::new(&p)
    }

    fn push_body(&mut self, b: Body) -> ModelId {
        let id = self.bodies.len() as u32;
        self.by_name.insert(b.name.clone(), id);
        self.body_info.push((b.root.rv, b.root.size));
        self.bodies.push(b);
        self.templates.push(OnceLock::new());
        ModelId(id)
    }

    fn eval_global(&self, b: &Body) -> Result<Value> {
        let mut state = Vec::new();
        self.init_slots(&b.root, &mut state);
        let template = state.clone();
        let mut cx = Cx::new(Sites::Seeds(&[]), &template, b.frame as usize);
        let (v, _) = self.ev(&b.root, &mut cx, 0, St::W(&mut state), 0, 0, true)?;
        Ok(v)
    }

    pub fn with_semantics(mut self, s: Semantics) -> Self {
        self.semantics = s;
        self.templates = (0..self.bodies.len()).map(|_| OnceLock::new()).collect();
        self
    }

    pub fn with_infer(mut self, cfg: InferConfig) -> Self {
        self.infer = cfg;
        self.templates = (0..self.bodies.len()).map(|_| OnceLock::new()).collect();
        self
    }

    pub fn semantics(&self) -> Semantics {
        self.semantics
    }

    pub fn infer_config(&self) -> &InferConfig {
        &self.infer
    }

    pub fn program(&self) -> &Program {
        &self.prog
    }

    pub fn model(&self, name: &str) -> Result<ModelId> {
        self.by_name.get(name).map(|&i| ModelId(i)).ok_or_else(|| Error::Unbound(name.to_string()))
    }

    pub fn name(&self, m: ModelId) -> &str {
        &self.bodies[m.0 as usize].name
    }

    pub fn global(&self, name: &str) -> Option<&Value> {
        self.global_index.get(name).map(|&i| &self.globals[i as usize])
    }

    /// Adds a free-standing expression as a model whose input is the tuple of `inputs`.
    pub fn add_expr(&mut self, e: &Expr, inputs: &[&str]) -> Result<ModelId> {
        let (names, e) = lang::resolve_expr(&self.prog, e, inputs)?;
        let rv = RvTable::new(&self.prog);
        let mut lw = Lowerer::new(&rv, &self.by_name, &self.body_info, &self.global_index);
        let param = lw.pat(&lang::Pat::tuple(&names));
        let root = lw.expr(&e)?;
        let name = format!("<expr {}>", self.bodies.len());
        let b = Body { name, frame: lw.frame_size(), param, root };
        Ok(self.push_body(b))
    }

    /// Seeds consumed by one step of `m`.
    pub fn rv(&self, m: ModelId) -> usize {
        self.bodies[m.0 as usize].root.rv as usize
    }

    fn template(&self, m: ModelId) -> &Arc<Vec<Slot>> {
        self.templates[m.0 as usize].get_or_init(|| {
            let mut out = Vec::new();
            self.init_slots(&self.bodies[m.0 as usize].root, &mut out);
            Arc::new(out)
        })
    }

    pub fn init(&self, m: ModelId) -> State {
        State(self.template(m).as_ref().clone())
    }

    fn run_step<'s>(
        &'s self,
        m: ModelId,
        input: &Value,
        st: St,
        sites: Sites<'s>,
    ) -> Result<(Value, f64, Cx<'s>)> {
        let b = &self.bodies[m.0 as usize];
        let need = b.root.rv as usize;
        let have = match &sites {
            Sites::Seeds(s) | Sites::Record(s, _) => s.len(),
            Sites::Replay(t) => t.len(),
        };
        if have < need {
            return Err(Error::Domain(format!("{} needs {need} seeds, got {have}", b.name)));
        }
        let mut cx = Cx::new(sites, self.template(m), b.frame as usize);
        eval::bind(&mut cx.frame, 0, &b.param, input.clone())?;
        let (v, w) = self.ev(&b.root, &mut cx, 0, st, 0, 0, true)?;
        check_weight(w)?;
        Ok((v, w, cx))
    }

    /// One committed step: updates `st` and returns the value and log-weight.
    pub fn step(&self, m: ModelId, input: &Value, st: &mut State, seeds: &[f64]) -> Result<(Value, f64)> {
        self.step_stats(m, input, st, seeds).map(|(v, w, _)| (v, w))
    }

    pub fn step_stats(
        &self,
        m: ModelId,
        input: &Value,
        st: &mut State,
        seeds: &[f64],
    ) -> Result<(Value, f64, FixStats)> {
        let (v, w, cx) = self.run_step(m, input, St::W(&mut st.0), Sites::Seeds(seeds))?;
        Ok((v, w, cx.stats))
    }

    /// Committed step that also records the value drawn at every sample site.
    pub fn step_record(
        &self,
        m: ModelId,
        input: &Value,
        st: &mut State,
        seeds: &[f64],
    ) -> Result<(Value, f64, Trace)> {
        let trace = vec![None; self.rv(m)];
        let (v, w, cx) = self.run_step(m, input, St::W(&mut st.0), Sites::Record(seeds, trace))?;
        match cx.sites {
            Sites::Record(_, t) => Ok((v, w, Trace(t))),
            _ => unreachable!(),
        }
    }

    /// Joint log-density of a recorded step: sample sites return their recorded values
    /// and contribute their density. `st` is not modified.
    pub fn score(&self, m: ModelId, input: &Value, st: &State, trace: &Trace) -> Result<(Value, f64)> {
        let (v, w, _) = self.run_step(m, input, St::R(&st.0), Sites::Replay(&trace.0))?;
        Ok((v, w))
    }

    /// Runs a seed-free model over an input stream.
    pub fn run(&self, m: ModelId, inputs: &[Value]) -> Result<Vec<Value>> {
        if self.rv(m) != 0 {
            return Err(Error::kind(self.name(m), "`run` needs a deterministic node"));
        }
        let mut st = self.init(m);
        inputs.iter().map(|x| self.step(m, x, &mut st, &[]).map(|(v, _)| v)).collect()
    }

    pub(crate) fn init_slots(&self, n: &ir::Node, out: &mut Vec<Slot>) {
        use ir::K;
        match &n.k {
            K::Const(_) | K::Local(_) | K::Global(_) => {}
            K::Pair(a, b) | K::Reset(a, b) | K::FactorPdf(a, b) => {
                self.init_slots(a, out);
                self.init_slots(b, out);
            }
            K::Op(_, args) => args.iter().for_each(|a| self.init_slots(a, out)),
            K::App { body, arg } => {
                self.init_slots(&self.bodies[*body as usize].root, out);
                self.init_slots(arg, out);
            }
            K::Where(w) => {
                self.init_slots(&w.body, out);
                for q in &w.eqs {
                    if let ir::EqKind::Init { .. } = q.kind {
                        out.push(Slot::V(Value::Nil));
                    }
                    self.init_slots(&q.expr, out);
                }
            }
            K::Present(c, a, b) => {
                self.init_slots(c, out);
                self.init_slots(a, out);
                self.init_slots(b, out);
            }
            K::Sample(e) | K::Factor(e) => self.init_slots(e, out),
            K::Infer { body, arg } => {
                let site = out.len() as u64;
                out.push(Slot::Filter(Box::new(Nested::pf(self, ModelId(*body), site))));
                self.init_slots(arg, out);
            }
            K::ApfInfer { body, prior, arg } => {
                let site = out.len() as u64;
                let prior = self.globals[*prior as usize].clone();
                out.push(Slot::Filter(Box::new(Nested::apf(self, ModelId(*body), prior, site))));
                self.init_slots(arg, out);
            }
        }
    }
}

fn check_weight(w: f64) -> Result<()> {
    if w.is_nan() || w == f64::INFINITY {
        return Err(Error::NonFinite(format!("step log-weight {w}")));
    }
    Ok(())
}
