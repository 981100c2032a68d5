//! Runtime values: a flat domain with an explicit undefined element.

use crate::dist::Dist;
use crate::error::{Error, Result};
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub enum Value {
    /// Not yet defined during a fixpoint iteration.
    Bottom,
    /// Uninitialized `init` slot.
    Nil,
    Unit,
    Bool(bool),
    Real(f64),
    Vec(Arc<[f64]>),
    Pair(Arc<(Value, Value)>),
    Dist(Dist),
}

impl PartialEq for Value {
    /// Bit-level identity; reals compare by representation, so `NaN == NaN`.
    fn eq(&self, other: &Self) -> bool {
        use Value::*;
        match (self, other) {
            (Bottom, Bottom) | (Nil, Nil) | (Unit, Unit) => true,
            (Bool(a), Bool(b)) => a == b,
            (Real(a), Real(b)) => a.to_bits() == b.to_bits(),
            (Vec(a), Vec(b)) => {
                a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            (Pair(a), Pair(b)) => a.0 == b.0 && a.1 == b.1,
            (Dist(a), Dist(b)) => a == b,
            _ => false,
        }
    }
}

impl Value {
    pub fn pair(a: Value, b: Value) -> Value {
        Value::Pair(Arc::new((a, b)))
    }

    pub fn vector(xs: Vec<f64>) -> Value {
        Value::Vec(xs.into())
    }

    pub fn is_bottom(&self) -> bool {
        matches!(self, Value::Bottom)
    }

    /// Whether the value contains no `Bottom` anywhere.
    pub fn is_defined(&self) -> bool {
        match self {
            Value::Bottom => false,
            Value::Pair(p) => p.0.is_defined() && p.1.is_defined(),
            _ => true,
        }
    }

    pub fn as_real(&self) -> Result<f64> {
        match self {
            Value::Real(x) => Ok(*x),
            v => Err(Error::ty(format!("expected a real, got {v}"))),
        }
    }

    pub fn as_bool(&self) -> Result<bool> {
        match self {
            Value::Bool(b) => Ok(*b),
            v => Err(Error::ty(format!("expected a boolean, got {v}"))),
        }
    }

    pub fn as_dist(&self) -> Result<&Dist> {
        match self {
            Value::Dist(d) => Ok(d),
            v => Err(Error::ty(format!("expected a distribution, got {v}"))),
        }
    }

    pub fn as_pair(&self) -> Result<(&Value, &Value)> {
        match self {
            Value::Pair(p) => Ok((&p.0, &p.1)),
            v => Err(Error::ty(format!("expected a pair, got {v}"))),
        }
    }

    /// Numeric coordinates in depth-first order, as used for CSV columns and summaries.
    pub fn flatten(&self) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        self.flatten_into(&mut out)?;
        Ok(out)
    }

    fn flatten_into(&self, out: &mut Vec<f64>) -> Result<()> {
        match self {
            Value::Real(x) => out.push(*x),
            Value::Bool(b) => out.push(if *b { 1.0 } else { 0.0 }),
            Value::Vec(xs) => out.extend_from_slice(xs),
            Value::Unit => {}
            Value::Pair(p) => {
                p.0.flatten_into(out)?;
                p.1.flatten_into(out)?;
            }
            Value::Dist(d) => out.extend(d.summarize()?.mean),
            Value::Bottom | Value::Nil => {
                return Err(Error::BottomEscape("an observable output"));
            }
        }
        Ok(())
    }

    /// Total order key used to aggregate discrete measures.
    pub fn key(&self) -> String {
        format!("{self:?}")
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bottom => write!(f, "⊥"),
            Value::Nil => write!(f, "nil"),
            Value::Unit => write!(f, "()"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Real(x) => write!(f, "{}", crate::lang::print::real(*x)),
            Value::Vec(xs) => {
                write!(f, "[")?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, "; ")?;
                    }
                    write!(f, "{}", crate::lang::print::real(*x))?;
                }
                write!(f, "]")
            }
            Value::Pair(p) => write!(f, "({}, {})", p.0, p.1),
            Value::Dist(d) => write!(f, "{d}"),
        }
    }
}
