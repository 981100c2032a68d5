//! Strict primitive operators. Any undefined argument yields an undefined result.

use crate::dist::Dist;
use crate::error::{Error, Result};
use crate::lang::Prim;
use crate::value::Value;
use std::sync::Arc;

fn arith(p: Prim, a: f64, b: f64) -> f64 {
    match p {
        Prim::Add => a + b,
        Prim::Sub => a - b,
        Prim::Mul => a * b,
        Prim::Div => a / b,
        Prim::Min => a.min(b),
        Prim::Max => a.max(b),
        _ => unreachable!(),
    }
}

fn unary_real(p: Prim, x: f64) -> Result<f64> {
    Ok(match p {
        Prim::Neg => -x,
        Prim::Exp => x.exp(),
        Prim::Log if x >= 0.0 => x.ln(),
        Prim::Sqrt if x >= 0.0 => x.sqrt(),
        Prim::Log | Prim::Sqrt => return Err(Error::Domain(format!("{p:?} of {x}"))),
        Prim::Abs => x.abs(),
        Prim::Sin => x.sin(),
        Prim::Cos => x.cos(),
        _ => unreachable!(),
    })
}

/// Structural equality used by the `=` operator (reals compare numerically).
fn equal(a: &Value, b: &Value) -> Result<bool> {
    Ok(match (a, b) {
        (Value::Real(x), Value::Real(y)) => x == y,
        (Value::Bool(x), Value::Bool(y)) => x == y,
        (Value::Unit, Value::Unit) => true,
        (Value::Vec(x), Value::Vec(y)) => x.len() == y.len() && x.iter().zip(y.iter()).all(|(u, v)| u == v),
        (Value::Pair(x), Value::Pair(y)) => equal(&x.0, &y.0)? && equal(&x.1, &y.1)?,
        _ => return Err(Error::ty(format!("cannot compare {a} and {b}"))),
    })
}

fn elementwise(p: Prim, a: &Value, b: &Value) -> Result<Value> {
    Ok(match (a, b) {
        (Value::Real(x), Value::Real(y)) => Value::Real(arith(p, *x, *y)),
        (Value::Vec(x), Value::Vec(y)) if x.len() == y.len() => {
            Value::vector(x.iter().zip(y.iter()).map(|(u, v)| arith(p, *u, *v)).collect())
        }
        (Value::Vec(x), Value::Real(y)) => Value::vector(x.iter().map(|u| arith(p, *u, *y)).collect()),
        (Value::Real(x), Value::Vec(y)) => Value::vector(y.iter().map(|v| arith(p, *x, *v)).collect()),
        _ => return Err(Error::ty(format!("{p:?} applied to {a} and {b}"))),
    })
}

fn reals(v: &Value) -> Result<Arc<[f64]>> {
    match v {
        Value::Vec(xs) => Ok(xs.clone()),
        v => Err(Error::ty(format!("expected a vector, got {v}"))),
    }
}

pub fn apply(p: Prim, args: &[Value]) -> Result<Value> {
    if args.iter().any(|a| !a.is_defined()) {
        return Ok(Value::Bottom);
    }
    let a = |i: usize| &args[i];
    Ok(match p {
        Prim::Add | Prim::Sub | Prim::Mul | Prim::Div | Prim::Min | Prim::Max => {
            elementwise(p, a(0), a(1))?
        }
        Prim::Neg => match a(0) {
            Value::Vec(xs) => Value::vector(xs.iter().map(|x| -x).collect()),
            v => Value::Real(-v.as_real()?),
        },
        Prim::Exp | Prim::Log | Prim::Sqrt | Prim::Abs | Prim::Sin | Prim::Cos => {
            Value::Real(unary_real(p, a(0).as_real()?)?)
        }
        Prim::Not => Value::Bool(!a(0).as_bool()?),
        Prim::And => Value::Bool(a(0).as_bool()? && a(1).as_bool()?),
        Prim::Or => Value::Bool(a(0).as_bool()? || a(1).as_bool()?),
        Prim::Eq => Value::Bool(equal(a(0), a(1))?),
        Prim::Ne => Value::Bool(!equal(a(0), a(1))?),
        Prim::Lt => Value::Bool(a(0).as_real()? < a(1).as_real()?),
        Prim::Le => Value::Bool(a(0).as_real()? <= a(1).as_real()?),
        Prim::Gt => Value::Bool(a(0).as_real()? > a(1).as_real()?),
        Prim::Ge => Value::Bool(a(0).as_real()? >= a(1).as_real()?),
        Prim::If => {
            if a(0).as_bool()? {
                a(1).clone()
            } else {
                a(2).clone()
            }
        }
        Prim::Fst => a(0).as_pair()?.0.clone(),
        Prim::Snd => a(0).as_pair()?.1.clone(),
        Prim::Vector => Value::vector(args.iter().map(Value::as_real).collect::<Result<_>>()?),
        Prim::Gaussian => Value::Dist(match (a(0), a(1)) {
            (Value::Real(m), Value::Real(s)) => Dist::gaussian(*m, *s)?,
            (Value::Vec(m), Value::Real(s)) => Dist::mv_gaussian(m.clone(), vec![*s; m.len()].into())?,
            (m, s) => Dist::mv_gaussian(reals(m)?, reals(s)?)?,
        }),
        Prim::Uniform => Value::Dist(Dist::uniform(a(0).as_real()?, a(1).as_real()?)?),
        Prim::Bernoulli => Value::Dist(Dist::bernoulli(a(0).as_real()?)?),
        Prim::Pdf => Value::Real(a(0).as_dist()?.pdf(a(1))?),
        Prim::Mean => {
            let m = a(0).as_dist()?.summarize()?.mean;
            if m.len() == 1 {
                Value::Real(m[0])
            } else {
                Value::vector(m)
            }
        }
    })
}

/// `log pdf(d, x)`, computed directly to avoid underflow in `factor(pdf(d, x))`.
pub fn log_pdf(d: &Value, x: &Value) -> Result<f64> {
    d.as_dist()?.log_pdf(x)
}

/// Log-weight contributed by `factor(v)`.
pub fn factor_weight(v: &Value) -> Result<f64> {
    let s = v.as_real()?;
    if s < 0.0 || s.is_nan() {
        return Err(Error::NegativeScore(s));
    }
    Ok(s.ln())
}

/// Number of uniform seeds consumed when sampling `d`: one per distribution leaf.
pub fn leaves(d: &Value) -> usize {
    match d {
        Value::Pair(p) => leaves(&p.0) + leaves(&p.1),
        Value::Unit => 0,
        _ => 1,
    }
}

/// Samples a distribution or a tuple of distributions, leaf `k` using `draw(k)`.
pub fn sample_with(d: &Value, draw: &mut dyn FnMut(&Dist) -> Result<Value>) -> Result<Value> {
    match d {
        Value::Dist(dist) => draw(dist),
        Value::Unit => Ok(Value::Unit),
        Value::Pair(p) => {
            let a = sample_with(&p.0, draw)?;
            let b = sample_with(&p.1, draw)?;
            Ok(Value::pair(a, b))
        }
        v => Err(Error::ty(format!("cannot sample from {v}"))),
    }
}

/// Joint log-density of `x` under a distribution or tuple of distributions.
pub fn tuple_log_pdf(d: &Value, x: &Value) -> Result<f64> {
    match (d, x) {
        (Value::Dist(dist), x) => dist.log_pdf(x),
        (Value::Unit, Value::Unit) => Ok(0.0),
        (Value::Pair(p), Value::Pair(q)) => Ok(tuple_log_pdf(&p.0, &q.0)? + tuple_log_pdf(&p.1, &q.1)?),
        (d, x) => Err(Error::ty(format!("value {x} does not match distribution {d}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_in_bottom() {
        assert_eq!(apply(Prim::Add, &[Value::Bottom, Value::Real(1.0)]).unwrap(), Value::Bottom);
        assert_eq!(
            apply(Prim::If, &[Value::Bool(true), Value::Real(1.0), Value::Bottom]).unwrap(),
            Value::Bottom
        );
    }

    #[test]
    fn broadcasting_and_errors() {
        let v = apply(Prim::Mul, &[Value::vector(vec![1.0, 2.0]), Value::Real(3.0)]).unwrap();
        assert_eq!(v, Value::vector(vec![3.0, 6.0]));
        assert!(matches!(apply(Prim::Add, &[Value::Bool(true), Value::Real(1.0)]), Err(Error::Type(_))));
        assert!(matches!(factor_weight(&Value::Real(-1.0)), Err(Error::NegativeScore(_))));
        assert_eq!(factor_weight(&Value::Real(0.0)).unwrap(), f64::NEG_INFINITY);
    }
}
