use crate::obs::{self, Table};
use anyhow::{anyhow, Context, Result};
use muz_core::apf::{self, PermTable};
use muz_core::lang::{self, Kind, Pat, Program};
use muz_core::rel::{coit_rel_agree, equiv_check, grid_infer, Rel};
use muz_core::{Apf, Expr, InferConfig, Interp, Pf, Semantics, Value};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Marks errors that come from files or streams rather than from the program.
#[derive(Debug)]
pub struct Io;

impl std::fmt::Display for Io {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("I/O error")
    }
}

fn io<T>(r: Result<T>) -> Result<T> {
    r.map_err(|e| e.context(Io))
}

pub fn load(path: &Path) -> Result<Program> {
    let src = io(fs::read_to_string(path).with_context(|| format!("reading {}", path.display())))?;
    let (p, _) = lang::load(&src).with_context(|| path.display().to_string())?;
    if p.decls.is_empty() {
        let e = muz_core::Error::Syntax { pos: lang::Pos { line: 1, col: 1 }, msg: "no declarations".into() };
        return Err(anyhow::Error::from(e).context(path.display().to_string()));
    }
    Ok(p)
}

fn output(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(io(fs::File::create(p).with_context(|| format!("creating {}", p.display())))?),
        None => Box::new(std::io::stdout().lock()),
    })
}

/// The named node, or the last node of the requested kind.
fn entry<'p>(p: &'p Program, name: Option<&str>, kind: Kind) -> Result<(&'p str, &'p Pat)> {
    let d = match name {
        Some(n) => p.get(n).ok_or_else(|| muz_core::Error::Unbound(n.to_string()))?,
        None => p
            .decls
            .iter()
            .rev()
            .find(|d| d.kind() == Some(kind))
            .ok_or_else(|| muz_core::Error::Unbound(format!("entry ({kind:?} node)")))?,
    };
    if d.kind() != Some(kind) {
        let want = if kind == Kind::Det { "a `node`" } else { "a `proba` node" };
        return Err(muz_core::Error::kind(d.name(), format!("expected {want}")).into());
    }
    Ok((d.name(), d.param().unwrap()))
}

/// `steps` inputs from the observation file, or `steps` unit inputs without one.
fn inputs(pat: &Pat, obs: Option<&Path>, steps: Option<usize>) -> Result<Vec<Value>> {
    match obs {
        Some(path) => {
            let mut xs = io(obs::read(path, pat))?;
            if let Some(t) = steps {
                if t > xs.len() {
                    return io(Err(anyhow!("{} has {} rows, {t} steps requested", path.display(), xs.len())));
                }
                xs.truncate(t);
            }
            Ok(xs)
        }
        None => Ok(vec![Value::Unit; steps.unwrap_or(0)]),
    }
}

pub fn check(file: &Path) -> Result<()> {
    let p = load(file)?;
    let a = apf::analyze(&p);
    println!("{}", serde_json::to_string_pretty(&a.to_json())?);
    Ok(())
}

pub fn dump_ast(file: &Path) -> Result<()> {
    let p = load(file)?;
    println!("{}", serde_json::to_string_pretty(&p)?);
    Ok(())
}

pub fn run(file: &Path, node: Option<&str>, steps: Option<usize>, obs: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let p = load(file)?;
    let (name, pat) = entry(&p, node, Kind::Det)?;
    let xs = inputs(pat, obs, steps)?;
    let ip = Interp::new(&p)?;
    let ys = ip.run(ip.model(name)?, &xs)?;
    let rows: Vec<Vec<f64>> = ys.iter().map(Value::flatten).collect::<muz_core::Result<_>>()?;
    let dim = rows.first().map_or(1, Vec::len);
    let cols: Vec<String> = (0..dim).map(|i| format!("out_{i}")).collect();
    let mut t = io(Table::new(output(out)?, &cols))?;
    for (i, r) in rows.iter().enumerate() {
        io(t.row(i, r))?;
    }
    io(t.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Algo {
    Pf,
    Apf,
}

pub struct InferSpec<'a> {
    pub file: &'a Path,
    pub node: Option<&'a str>,
    pub steps: Option<usize>,
    pub obs: Option<&'a Path>,
    pub out: Option<&'a Path>,
    pub algo: Algo,
    pub cfg: InferConfig,
}

enum Filter {
    Pf(Pf),
    Apf(Apf),
}

pub fn infer(s: InferSpec<'_>) -> Result<()> {
    let src = load(s.file)?;
    let (name, pat) = entry(&src, s.node, Kind::Proba)?;
    let xs = inputs(pat, s.obs, s.steps)?;
    let (ip, mut filter) = match s.algo {
        Algo::Pf => {
            let ip = Interp::new(&src)?.with_infer(s.cfg);
            let f = Pf::new(&ip, ip.model(name)?)?;
            (ip, Filter::Pf(f))
        }
        Algo::Apf => {
            let c = apf::compile(&src, &apf::analyze(&src))?;
            let ip = Interp::new(&c)?.with_infer(s.cfg);
            let prior = ip.global(&apf::prior_name(name)).cloned().unwrap_or(Value::Unit);
            let f = Apf::new(&ip, ip.model(&apf::model_name(name))?, prior)?;
            (ip, Filter::Apf(f))
        }
    };
    let mut table: Option<Table<Box<dyn Write>>> = None;
    let mut sink = Some(output(s.out)?);
    for (t, x) in xs.iter().enumerate() {
        let post = match &mut filter {
            Filter::Pf(f) => f.step(&ip, x)?,
            Filter::Apf(f) => f.step(&ip, x)?.posterior,
        };
        let sum = post.dist.summarize()?;
        if table.is_none() {
            table = Some(io(Table::new(sink.take().unwrap(), &obs::posterior_columns(sum.mean.len())))?);
        }
        let mut row = Vec::with_capacity(2 * sum.mean.len() + 2);
        for (m, v) in sum.mean.iter().zip(&sum.var) {
            row.push(*m);
            row.push(v.sqrt());
        }
        row.push(post.ess);
        row.push(post.log_evidence);
        io(table.as_mut().unwrap().row(t, &row))?;
    }
    let table = match table {
        Some(t) => t,
        None => io(Table::new(sink.take().unwrap(), &obs::posterior_columns(1)))?,
    };
    io(table.finish())
}

/// Compiled program next to the source unless `out` is given; the permutation goes
/// to the same stem with `.perm.json`.
pub fn compile_apf(file: &Path, out: Option<&Path>) -> Result<(PathBuf, PathBuf)> {
    let p = load(file)?;
    let a = apf::analyze(&p);
    let c = apf::compile(&p, &a)?;
    let perm = apf::permutations(&p, &a)?;
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| file.with_extension("apf.muz"));
    let sidecar = out.with_extension("perm.json");
    io(fs::write(&out, lang::print::program(&c) + "\n").with_context(|| format!("writing {}", out.display())))?;
    io(fs::write(&sidecar, serde_json::to_string_pretty(&perm)? + "\n")
        .with_context(|| format!("writing {}", sidecar.display())))?;
    Ok((out, sidecar))
}

pub struct EquivSpec<'a> {
    pub left: &'a Path,
    pub right: &'a Path,
    pub node: Option<&'a str>,
    pub right_node: Option<&'a str>,
    /// A `.perm.json` sidecar or an inline list such as `1,0`.
    pub perm: Option<&'a str>,
    pub steps: usize,
    pub trials: usize,
    pub seed: u64,
    pub obs: Option<&'a Path>,
}

/// Runs the check and prints the JSON report; returns whether every trial passed.
pub fn equiv(s: EquivSpec<'_>) -> Result<bool> {
    let (p1, p2) = (load(s.left)?, load(s.right)?);
    let (f, pat) = entry(&p1, s.node, Kind::Proba)?;
    let xs = inputs(pat, s.obs, Some(s.steps))?;
    let y = "y";
    let e1 = Expr::app(f, Expr::var(y));
    let r1 = Rel::new(&p1)?;
    let r2 = Rel::new(&p2)?;
    let inline = s.perm.map(|p| p.split(',').map(|x| x.trim().parse::<usize>()).collect::<Result<Vec<_>, _>>());
    let (e2, perm) = match (s.perm, inline) {
        (_, Some(Ok(perm))) => (Expr::app(s.right_node.unwrap_or(f), Expr::var(y)), perm),
        (Some(path), _) => {
            let txt = io(fs::read_to_string(path).with_context(|| format!("reading {path}")))?;
            let table: PermTable = io(serde_json::from_str(&txt).with_context(|| format!("parsing {path}")))?;
            let entry = table.models.get(f).ok_or_else(|| anyhow!("{path} has no entry for `{f}`"))?;
            (apf::expanded(&apf::analyze(&p1), f, Expr::var(y)), entry.perm.clone())
        }
        (None, _) => (Expr::app(s.right_node.unwrap_or(f), Expr::var(y)), (0..r1.rv(&e1)).collect()),
    };
    let report = equiv_check((&r1, &e1), (&r2, &e2), &[y], &xs, &perm, s.trials, s.seed)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(report.pass)
}

pub struct OracleSpec<'a> {
    pub file: &'a Path,
    pub node: Option<&'a str>,
    pub steps: usize,
    pub obs: Option<&'a Path>,
    pub grid: usize,
    /// Compare with the co-iterative interpreter on this many random prefixes instead.
    pub agree: Option<usize>,
    pub seed: u64,
}

/// Prints grid posteriors or an agreement report; returns false when agreement fails.
pub fn oracle(s: OracleSpec<'_>) -> Result<bool> {
    let p = load(s.file)?;
    let (f, pat) = entry(&p, s.node, Kind::Proba)?;
    let xs = inputs(pat, s.obs, Some(s.steps))?;
    let rel = Rel::new(&p)?;
    let e = Expr::app(f, Expr::var("y"));
    if let Some(trials) = s.agree {
        let r = coit_rel_agree(&rel, &e, &["y"], &xs, Semantics::Auto, trials, s.seed)?;
        println!("{}", serde_json::to_string_pretty(&r)?);
        return Ok(r.pass);
    }
    let ms = grid_infer(&rel, &e, &["y"], &xs, s.grid)?;
    let json: Vec<serde_json::Value> = ms
        .iter()
        .enumerate()
        .map(|(t, m)| {
            let atoms: Vec<serde_json::Value> =
                m.iter().map(|(v, p)| serde_json::json!({ "value": v.to_string(), "p": p })).collect();
            serde_json::json!({ "step": t, "measure": atoms })
        })
        .collect();
    println!("{}", serde_json::to_string_pretty(&json)?);
    Ok(true)
}
