//! Surface language: syntax tree, parser, printer, name resolution and static checks.

pub mod alpha;
pub mod ast;
pub mod kind;
pub mod parse;
pub mod print;
pub mod resolve;
pub mod rv;

pub use ast::*;
pub use kind::{kind_check, KindEnv};
pub use parse::{parse_expr, parse_program};
pub use resolve::{resolve_expr, uniquify};
pub use rv::{rv_count, RvTable};

use crate::error::Result;

/// Parses, resolves and kind-checks a source file.
pub fn load(src: &str) -> Result<(Program, KindEnv)> {
    let p = uniquify(&parse_program(src)?)?;
    let k = kind_check(&p)?;
    Ok((p, k))
}
