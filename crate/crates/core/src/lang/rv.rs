//! Static count of the random variables consumed by one step of an expression.

use super::ast::*;
use std::collections::HashMap;

/// Random-variable counts for a program's declarations.
#[derive(Debug, Clone)]
pub struct RvTable<'p> {
    prog: &'p Program,
    nodes: HashMap<&'p str, usize>,
}

impl<'p> RvTable<'p> {
    pub fn new(prog: &'p Program) -> Self {
        let mut t = RvTable { prog, nodes: HashMap::new() };
        // Declarations only call earlier ones, so one pass in order suffices.
        for d in &prog.decls {
            if d.kind().is_some() {
                let n = t.count(d.body());
                t.nodes.insert(d.name(), n);
            }
        }
        t
    }

    pub fn node(&self, f: &str) -> usize {
        self.nodes.get(f).copied().unwrap_or(0)
    }

    /// Seeds consumed by `sample(e)`: one per distribution leaf of a syntactic tuple,
    /// following global definitions.
    pub fn sample_arity(&self, e: &Expr) -> usize {
        match e {
            Expr::Pair(a, b) => self.sample_arity(a) + self.sample_arity(b),
            Expr::Const(Const::Unit) => 0,
            Expr::Var(g) => match self.prog.get(g) {
                Some(Decl::Let { body, .. }) => self.sample_arity(body),
                _ => 1,
            },
            _ => 1,
        }
    }

    pub fn count(&self, e: &Expr) -> usize {
        match e {
            Expr::Const(_) | Expr::Var(_) | Expr::Last(_) => 0,
            Expr::Factor(_) | Expr::Infer(_) | Expr::ApfInfer { .. } => 0,
            Expr::Sample(d) => self.sample_arity(d),
            Expr::App { func, arg, .. } => self.node(func) + self.count(arg),
            Expr::Reset(body, _) => self.count(body),
            _ => e.children().into_iter().map(|c| self.count(c)).sum(),
        }
    }
}

pub fn rv_count(e: &Expr, prog: &Program) -> usize {
    RvTable::new(prog).count(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse::{parse_expr, parse_program};

    #[test]
    fn counts_follow_calls_and_tuples() {
        let p = parse_program(
            "let pr = (gaussian(0.0, 1.0), uniform(0.0, 1.0))\n\
             proba f(x) = sample(gaussian(x, 1.0)) + sample(gaussian(x, 2.0))",
        )
        .unwrap();
        assert_eq!(rv_count(&parse_expr("f(1.0) + f(2.0)").unwrap(), &p), 4);
        assert_eq!(rv_count(&parse_expr("sample(pr)").unwrap(), &p), 2);
        assert_eq!(
            rv_count(&parse_expr("present c -> f(1.0) else sample(pr)").unwrap(), &p),
            4
        );
        assert_eq!(rv_count(&parse_expr("factor(1.0)").unwrap(), &p), 0);
    }
}
