//! Reactive probabilistic dataflow: a small synchronous language with `sample`,
//! `observe` and `infer`, its co-iterative interpreter, particle inference and the
//! constant-parameter compilation for the Assumed Parameter Filter.

pub mod apf;
pub mod coiter;
pub mod dist;
pub mod error;
pub mod gen;
pub mod infer;
pub mod lang;
pub mod prim;
pub mod rel;
pub mod value;

pub use coiter::{FixStats, Interp, ModelId, Semantics, State, Trace};
pub use dist::Dist;
pub use error::{Error, Result};
pub use infer::{Apf, InferConfig, Pf, Posterior, Resampling};
pub use lang::{load, Decl, Expr, Program};
pub use value::Value;
