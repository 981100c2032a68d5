//! Observation CSV ingestion and posterior CSV emission.

use anyhow::{bail, Context, Result};
use muz_core::lang::Pat;
use muz_core::Value;
use std::io::Write;
use std::path::Path;

/// Rebuilds the input value of one instant from its flattened cells. A pattern whose
/// leaf count matches the cells gives the shape; otherwise the cells form a tuple.
pub fn input_value(pat: &Pat, cells: &[Value]) -> Value {
    fn build(p: &Pat, cells: &mut std::slice::Iter<'_, Value>) -> Value {
        match p {
            Pat::Unit => Value::Unit,
            Pat::Var(_) => cells.next().cloned().unwrap_or(Value::Unit),
            Pat::Pair(a, b) => {
                let a = build(a, cells);
                Value::pair(a, build(b, cells))
            }
        }
    }
    if pat.vars().len() == cells.len() {
        return build(pat, &mut cells.iter());
    }
    match cells {
        [] => Value::Unit,
        [x] => x.clone(),
        [x, rest @ ..] => Value::pair(x.clone(), input_value(&Pat::Unit, rest)),
    }
}

fn cell(s: &str) -> Result<Value> {
    match s.trim() {
        "true" => Ok(Value::Bool(true)),
        "false" => Ok(Value::Bool(false)),
        "()" | "" => Ok(Value::Unit),
        x => Ok(Value::Real(x.parse::<f64>().with_context(|| format!("not a number: `{x}`"))?)),
    }
}

/// Reads `step,<columns…>` rows, one per instant in order.
pub fn read(path: &Path, pat: &Pat) -> Result<Vec<Value>> {
    let mut rd = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header = rd.headers()?.clone();
    if header.get(0) != Some("step") {
        bail!("{}: the first column must be `step`", path.display());
    }
    let mut out = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let row = row?;
        let step: usize = row[0].trim().parse().with_context(|| format!("row {}: bad step", i + 1))?;
        if step != i {
            bail!("{}: row {} has step {step}", path.display(), i + 1);
        }
        let cells: Vec<Value> = row.iter().skip(1).map(cell).collect::<Result<_>>()?;
        out.push(input_value(pat, &cells));
    }
    Ok(out)
}

/// Writes rows of `step,<columns>`; numbers use the shortest round-trip form.
pub struct Table<W: Write> {
    w: csv::Writer<W>,
}

impl<W: Write> Table<W> {
    pub fn new(out: W, columns: &[String]) -> Result<Self> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(std::iter::once("step").chain(columns.iter().map(String::as_str)))?;
        Ok(Table { w })
    }

    pub fn row(&mut self, step: usize, xs: &[f64]) -> Result<()> {
        let mut rec = vec![step.to_string()];
        rec.extend(xs.iter().map(|x| format!("{x:?}")));
        self.w.write_record(&rec)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

pub fn posterior_columns(dim: usize) -> Vec<String> {
    let mut cols = Vec::with_capacity(2 * dim + 2);
    for i in 0..dim {
        cols.push(format!("mean_{i}"));
        cols.push(format!("std_{i}"));
    }
    cols.push("ess".into());
    cols.push("log_evidence".into());
    cols
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_follow_the_parameter_shape() {
        let p = Pat::Pair(Box::new(Pat::Var("a".into())), Box::new(Pat::Var("b".into())));
        let v = input_value(&p, &[Value::Real(1.0), Value::Bool(true)]);
        assert_eq!(v, Value::pair(Value::Real(1.0), Value::Bool(true)));
        let v = input_value(&Pat::Var("y".into()), &[Value::Real(1.0), Value::Real(2.0)]);
        assert_eq!(v, Value::pair(Value::Real(1.0), Value::Real(2.0)));
        assert_eq!(input_value(&Pat::Unit, &[]), Value::Unit);
    }

    #[test]
    fn posterior_header() {
        assert_eq!(posterior_columns(1), ["mean_0", "std_0", "ess", "log_evidence"]);
    }
}
