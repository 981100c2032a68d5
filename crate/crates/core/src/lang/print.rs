use super::ast::*;
use std::fmt::Write;

// Precedence levels, matching the parser.
const WHERE: u8 = 0;
const CTL: u8 = 1;
const OR: u8 = 2;
const AND: u8 = 3;
const CMP: u8 = 4;
const ADD: u8 = 5;
const MUL: u8 = 6;
const UNARY: u8 = 7;
const ATOM: u8 = 8;

fn level(e: &Expr) -> u8 {
    match e {
        Expr::Where(..) => WHERE,
        Expr::Present(..) | Expr::Reset(..) | Expr::Op(Prim::If, _) => CTL,
        Expr::Op(p, _) => match p {
            Prim::Or => OR,
            Prim::And => AND,
            Prim::Eq | Prim::Ne | Prim::Lt | Prim::Le | Prim::Gt | Prim::Ge => CMP,
            Prim::Add | Prim::Sub => ADD,
            Prim::Mul | Prim::Div => MUL,
            Prim::Neg | Prim::Not => UNARY,
            _ => ATOM,
        },
        Expr::Const(Const::Real(x)) if x.is_sign_negative() => UNARY,
        _ => ATOM,
    }
}

fn infix(p: Prim) -> Option<&'static str> {
    Some(match p {
        Prim::Or => "||",
        Prim::And => "&&",
        Prim::Eq => "=",
        Prim::Ne => "<>",
        Prim::Lt => "<",
        Prim::Le => "<=",
        Prim::Gt => ">",
        Prim::Ge => ">=",
        Prim::Add => "+",
        Prim::Sub => "-",
        Prim::Mul => "*",
        Prim::Div => "/",
        _ => return None,
    })
}

pub fn real(x: f64) -> String {
    let s = format!("{x:?}");
    if s.contains(['.', 'e', 'E', 'N', 'i']) {
        s
    } else {
        format!("{s}.0")
    }
}

pub fn pat(p: &Pat) -> String {
    match p {
        Pat::Unit => "()".into(),
        Pat::Var(x) => x.clone(),
        Pat::Pair(a, b) => format!("({}, {})", pat(a), pat(b)),
    }
}

struct Printer {
    out: String,
    indent: usize,
}

impl Printer {
    fn expr_at(&mut self, e: &Expr, min: u8) {
        if level(e) < min {
            self.out.push('(');
            self.expr(e);
            self.out.push(')');
        } else {
            self.expr(e);
        }
    }

    fn expr(&mut self, e: &Expr) {
        match e {
            Expr::Const(Const::Unit) => self.out.push_str("()"),
            Expr::Const(Const::Bool(b)) => write!(self.out, "{b}").unwrap(),
            Expr::Const(Const::Real(x)) => self.out.push_str(&real(*x)),
            Expr::Var(x) => self.out.push_str(x),
            Expr::Last(x) => write!(self.out, "last {x}").unwrap(),
            Expr::Pair(a, b) => {
                self.out.push('(');
                self.expr(a);
                self.out.push_str(", ");
                self.expr(b);
                self.out.push(')');
            }
            Expr::Op(Prim::If, args) => {
                self.out.push_str("if ");
                self.expr_at(&args[0], CTL);
                self.out.push_str(" then ");
                self.expr_at(&args[1], CTL);
                self.out.push_str(" else ");
                self.expr_at(&args[2], CTL);
            }
            Expr::Op(Prim::Neg, args) => {
                self.out.push('-');
                // `-1.0` would re-parse as a literal, so literals keep their parentheses.
                if matches!(args[0], Expr::Const(Const::Real(_))) {
                    self.out.push('(');
                    self.expr(&args[0]);
                    self.out.push(')');
                } else {
                    self.expr_at(&args[0], UNARY);
                }
            }
            Expr::Op(Prim::Not, args) => {
                self.out.push_str("not ");
                self.expr_at(&args[0], UNARY);
            }
            Expr::Op(Prim::Vector, args) => {
                self.out.push('[');
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str("; ");
                    }
                    self.expr(a);
                }
                self.out.push(']');
            }
            Expr::Op(p, args) => {
                if let Some(sym) = infix(*p) {
                    let l = level(e);
                    let (lmin, rmin) = if l == CMP { (ADD, ADD) } else { (l, l + 1) };
                    self.expr_at(&args[0], lmin);
                    write!(self.out, " {sym} ").unwrap();
                    self.expr_at(&args[1], rmin);
                } else {
                    self.out.push_str(p.name().expect("named intrinsic"));
                    self.call_args(args.iter());
                }
            }
            Expr::App { func, arg, .. } => {
                self.out.push_str(func);
                match arg.as_ref() {
                    Expr::Pair(a, b) => self.call_args([a.as_ref(), b.as_ref()].into_iter()),
                    Expr::Const(Const::Unit) => self.out.push_str("()"),
                    a => self.call_args(std::iter::once(a)),
                }
            }
            Expr::ApfInfer { model, prior, arg } => {
                write!(self.out, "APF.infer({model}, {prior}, ").unwrap();
                self.expr(arg);
                self.out.push(')');
            }
            Expr::Sample(a) => {
                self.out.push_str("sample");
                self.call_args(std::iter::once(a.as_ref()));
            }
            Expr::Factor(a) => {
                self.out.push_str("factor");
                self.call_args(std::iter::once(a.as_ref()));
            }
            Expr::Infer(a) => {
                self.out.push_str("infer");
                self.call_args(std::iter::once(a.as_ref()));
            }
            Expr::Present(c, a, b) => {
                self.out.push_str("present ");
                self.expr_at(c, OR);
                self.out.push_str(" -> ");
                self.expr_at(a, CTL);
                self.out.push_str(" else ");
                self.expr_at(b, CTL);
            }
            Expr::Reset(body, c) => {
                self.out.push_str("reset ");
                self.expr(body);
                self.out.push_str(" every ");
                self.expr_at(c, CTL);
            }
            Expr::Where(body, eqs) => {
                self.expr(body);
                self.indent += 1;
                self.newline();
                self.out.push_str("where rec ");
                for (i, eq) in eqs.iter().enumerate() {
                    if i > 0 {
                        self.newline();
                        self.out.push_str("and ");
                    }
                    self.eq(eq);
                }
                self.indent -= 1;
            }
        }
    }

    fn call_args<'a>(&mut self, args: impl Iterator<Item = &'a Expr>) {
        self.out.push('(');
        for (i, a) in args.enumerate() {
            if i > 0 {
                self.out.push_str(", ");
            }
            self.expr(a);
        }
        self.out.push(')');
    }

    fn eq(&mut self, eq: &Eq) {
        match eq {
            Eq::Init(x, e) => {
                write!(self.out, "init {x} = ").unwrap();
                self.expr_at(e, CTL);
            }
            Eq::Def(p, e) => {
                write!(self.out, "{} = ", pat(p)).unwrap();
                self.expr_at(e, CTL);
            }
        }
    }

    fn newline(&mut self) {
        self.out.push('\n');
        for _ in 0..self.indent {
            self.out.push_str("  ");
        }
    }
}

pub fn expr(e: &Expr) -> String {
    let mut p = Printer { out: String::new(), indent: 0 };
    p.expr(e);
    p.out
}

pub fn decl(d: &Decl) -> String {
    let mut p = Printer { out: String::new(), indent: 0 };
    match d {
        Decl::Let { name, .. } => write!(p.out, "let {name} = ").unwrap(),
        Decl::Node { name, param, .. } => write!(p.out, "node {name}{} = ", param_text(param)).unwrap(),
        Decl::Proba { name, param, .. } => {
            write!(p.out, "proba {name}{} = ", param_text(param)).unwrap()
        }
    }
    p.expr(d.body());
    p.out
}

fn param_text(p: &Pat) -> String {
    match p {
        Pat::Pair(..) | Pat::Unit => pat(p),
        Pat::Var(x) => format!("({x})"),
    }
}

pub fn program(prog: &Program) -> String {
    let mut s = String::new();
    for d in &prog.decls {
        s.push_str(&decl(d));
        s.push_str("\n\n");
    }
    s
}
