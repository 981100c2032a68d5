//! Structural equality up to a consistent renaming of local names.
//!
//! Declaration and global names must match exactly. Parameters, equation
//! variables and instance identifiers may differ as long as the renaming is a
//! bijection. Names are assumed unique per program, so a single map suffices.

use super::ast::*;
use std::collections::HashMap;

#[derive(Default)]
struct Renaming {
    fwd: HashMap<String, String>,
    bwd: HashMap<String, String>,
}

impl Renaming {
    fn bind(&mut self, a: &str, b: &str) -> bool {
        match (self.fwd.get(a), self.bwd.get(b)) {
            (None, None) => {
                self.fwd.insert(a.to_string(), b.to_string());
                self.bwd.insert(b.to_string(), a.to_string());
                true
            }
            (Some(x), Some(y)) => x == b && y == a,
            _ => false,
        }
    }

    fn refers(&self, a: &str, b: &str) -> bool {
        match (self.fwd.get(a), self.bwd.get(b)) {
            (Some(x), _) => x == b,
            (None, None) => a == b,
            (None, Some(_)) => false,
        }
    }

    fn pat(&mut self, a: &Pat, b: &Pat) -> bool {
        match (a, b) {
            (Pat::Unit, Pat::Unit) => true,
            (Pat::Var(x), Pat::Var(y)) => self.bind(x, y),
            (Pat::Pair(a1, a2), Pat::Pair(b1, b2)) => self.pat(a1, b1) && self.pat(a2, b2),
            _ => false,
        }
    }

    fn expr(&mut self, a: &Expr, b: &Expr) -> bool {
        use Expr::*;
        match (a, b) {
            (Const(x), Const(y)) => x == y,
            (Var(x), Var(y)) | (Last(x), Last(y)) => self.refers(x, y),
            (Pair(a1, a2), Pair(b1, b2)) => self.expr(a1, b1) && self.expr(a2, b2),
            (Op(p, xs), Op(q, ys)) => {
                p == q && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| self.expr(x, y))
            }
            (App { func: f, arg: x, .. }, App { func: g, arg: y, .. }) => f == g && self.expr(x, y),
            (Where(e1, q1), Where(e2, q2)) => {
                if q1.len() != q2.len() {
                    return false;
                }
                for (x, y) in q1.iter().zip(q2) {
                    let ok = match (x, y) {
                        (Eq::Def(p, _), Eq::Def(q, _)) => self.pat(p, q),
                        (Eq::Init(..), Eq::Init(..)) => true,
                        _ => false,
                    };
                    if !ok {
                        return false;
                    }
                }
                for (x, y) in q1.iter().zip(q2) {
                    if let (Eq::Init(u, _), Eq::Init(v, _)) = (x, y) {
                        if !self.refers(u, v) {
                            return false;
                        }
                    }
                    if !self.expr(x.expr(), y.expr()) {
                        return false;
                    }
                }
                self.expr(e1, e2)
            }
            (Present(c1, a1, b1), Present(c2, a2, b2)) => {
                self.expr(c1, c2) && self.expr(a1, a2) && self.expr(b1, b2)
            }
            (Reset(a1, c1), Reset(a2, c2)) => self.expr(a1, a2) && self.expr(c1, c2),
            (Sample(x), Sample(y)) | (Factor(x), Factor(y)) | (Infer(x), Infer(y)) => self.expr(x, y),
            (
                ApfInfer { model: m1, prior: p1, arg: x },
                ApfInfer { model: m2, prior: p2, arg: y },
            ) => m1 == m2 && p1 == p2 && self.expr(x, y),
            _ => false,
        }
    }
}

pub fn alpha_eq_expr(a: &Expr, b: &Expr) -> bool {
    Renaming::default().expr(a, b)
}

pub fn alpha_eq_program(a: &Program, b: &Program) -> bool {
    if a.decls.len() != b.decls.len() {
        return false;
    }
    let mut r = Renaming::default();
    a.decls.iter().zip(&b.decls).all(|(x, y)| {
        x.name() == y.name()
            && x.kind() == y.kind()
            && match (x.param(), y.param()) {
                (Some(p), Some(q)) => r.pat(p, q),
                (None, None) => true,
                _ => false,
            }
            && r.expr(x.body(), y.body())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse::parse_program;

    #[test]
    fn renaming_is_accepted_but_must_be_consistent() {
        let a = parse_program("node f(x) = y where rec init y = x and y = last y + x").unwrap();
        let b = parse_program("node f(u) = v where rec init v = u and v = last v + u").unwrap();
        let c = parse_program("node f(u) = v where rec init v = u and v = last v + v").unwrap();
        assert!(alpha_eq_program(&a, &b));
        assert!(!alpha_eq_program(&a, &c));
    }

    #[test]
    fn global_names_must_match() {
        let a = parse_program("let k = 1.0\nnode f(x) = x + k").unwrap();
        let b = parse_program("let k = 1.0\nnode f(x) = x + x").unwrap();
        assert!(!alpha_eq_program(&a, &b));
    }
}
