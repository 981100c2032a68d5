//! Recursive-descent parser for the surface syntax.
//!
//! Precedence, loosest first: `where rec`, the control forms (`present`,
//! `reset`, `if`), `||`, `&&`, comparisons, additive, multiplicative, unary,
//! atoms. Equation right-hand sides stop before `where`, so a nested block
//! must be parenthesized.

use super::ast::*;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Kw(&'static str),
    Sym(&'static str),
    ApfInfer,
    Eof,
}

const KEYWORDS: &[&str] = &[
    "let", "node", "proba", "where", "rec", "and", "init", "last", "present", "else", "reset",
    "every", "sample", "observe", "factor", "infer", "true", "false", "if", "then", "not",
];

// Longest symbols first so that the scanner is greedy.
const SYMBOLS: &[&str] = &[
    "->", "<>", "<=", ">=", "&&", "||", "(", ")", "[", "]", ",", ";", "=", "<", ">", "+", "-", "*",
    "/",
];

struct Lexer<'s> {
    src: &'s str,
    at: usize,
    line: usize,
    col: usize,
}

impl<'s> Lexer<'s> {
    fn pos(&self) -> Pos {
        Pos { line: self.line, col: self.col }
    }

    fn bump(&mut self, n: usize) {
        for ch in self.src[self.at..self.at + n].chars() {
            if ch == '\n' {
                self.line += 1;
                self.col = 1;
            } else {
                self.col += 1;
            }
        }
        self.at += n;
    }

    fn rest(&self) -> &'s str {
        &self.src[self.at..]
    }

    fn skip_trivia(&mut self) {
        loop {
            let rest = self.rest();
            let ws = rest.len() - rest.trim_start().len();
            if ws > 0 {
                self.bump(ws);
                continue;
            }
            if self.rest().starts_with("--") {
                let n = self.rest().find('\n').unwrap_or(self.rest().len());
                self.bump(n);
                continue;
            }
            break;
        }
    }

    fn next(&mut self) -> Result<(Tok, Pos)> {
        self.skip_trivia();
        let pos = self.pos();
        let rest = self.rest();
        let Some(c) = rest.chars().next() else {
            return Ok((Tok::Eof, pos));
        };
        if rest.starts_with("APF.infer") {
            self.bump("APF.infer".len());
            return Ok((Tok::ApfInfer, pos));
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let n = rest
                .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_' || ch == '\''))
                .unwrap_or(rest.len());
            let word = &rest[..n];
            self.bump(n);
            let tok = match KEYWORDS.iter().find(|k| **k == word) {
                Some(k) => Tok::Kw(k),
                None => Tok::Ident(word.to_string()),
            };
            return Ok((tok, pos));
        }
        if c.is_ascii_digit() {
            let n = number_len(rest);
            let text = &rest[..n];
            let v: f64 = text.parse().map_err(|_| Error::Syntax {
                pos,
                msg: format!("malformed number `{text}`"),
            })?;
            self.bump(n);
            return Ok((Tok::Num(v), pos));
        }
        for s in SYMBOLS {
            if rest.starts_with(s) {
                self.bump(s.len());
                return Ok((Tok::Sym(s), pos));
            }
        }
        Err(Error::Syntax { pos, msg: format!("unexpected character `{c}`") })
    }
}

fn number_len(s: &str) -> usize {
    let b = s.as_bytes();
    let mut i = 0;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    if i < b.len() && b[i] == b'.' {
        i += 1;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut j = i + 1;
        if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
            j += 1;
        }
        if j < b.len() && b[j].is_ascii_digit() {
            while j < b.len() && b[j].is_ascii_digit() {
                j += 1;
            }
            i = j;
        }
    }
    i
}

fn tokenize(src: &str) -> Result<Vec<(Tok, Pos)>> {
    let mut lx = Lexer { src, at: 0, line: 1, col: 1 };
    let mut out = Vec::new();
    loop {
        let (t, p) = lx.next()?;
        let eof = t == Tok::Eof;
        out.push((t, p));
        if eof {
            return Ok(out);
        }
    }
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    i: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.i + k).min(self.toks.len() - 1)].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].1
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.i].0.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Syntax { pos: self.pos(), msg: msg.into() })
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Kw(w) if *w == k)
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(w) if *w == s)
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.is_kw(k) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, k: &str) -> Result<()> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            self.err(format!("expected `{k}`, found {}", describe(self.peek())))
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`, found {}", describe(self.peek())))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(x) => {
                self.advance();
                Ok(x)
            }
            t => self.err(format!("expected identifier, found {}", describe(&t))),
        }
    }

    fn program(&mut self) -> Result<Program> {
        let mut prog = Program::default();
        while *self.peek() != Tok::Eof {
            let pos = self.pos();
            prog.decls.push(self.decl()?);
            prog.positions.push(pos);
        }
        Ok(prog)
    }

    fn decl(&mut self) -> Result<Decl> {
        let is_let = self.eat_kw("let");
        if self.eat_kw("node") {
            let (name, param, body) = self.node_rest()?;
            return Ok(Decl::Node { name, param, body });
        }
        if self.eat_kw("proba") {
            let (name, param, body) = self.node_rest()?;
            return Ok(Decl::Proba { name, param, body });
        }
        if !is_let {
            return self.err(format!(
                "expected `let`, `node` or `proba`, found {}",
                describe(self.peek())
            ));
        }
        let name = self.ident()?;
        self.expect_sym("=")?;
        let body = self.expr()?;
        Ok(Decl::Let { name, body })
    }

    fn node_rest(&mut self) -> Result<(String, Pat, Expr)> {
        let name = self.ident()?;
        if Prim::by_name(&name).is_some() {
            return self.err(format!("`{name}` is a reserved intrinsic name"));
        }
        let param = if self.is_sym("(") { self.pat()? } else { Pat::Var(self.ident()?) };
        self.expect_sym("=")?;
        let body = self.expr()?;
        Ok((name, param, body))
    }

    fn pat(&mut self) -> Result<Pat> {
        if self.eat_sym("(") {
            if self.eat_sym(")") {
                return Ok(Pat::Unit);
            }
            let mut items = vec![self.pat()?];
            while self.eat_sym(",") {
                items.push(self.pat()?);
            }
            self.expect_sym(")")?;
            Ok(fold_pat(items))
        } else {
            Ok(Pat::Var(self.ident()?))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut e = self.ctl()?;
        while self.eat_kw("where") {
            self.expect_kw("rec")?;
            let eqs = self.eqs()?;
            e = Expr::Where(Box::new(e), eqs);
        }
        Ok(e)
    }

    fn eqs(&mut self) -> Result<Vec<Eq>> {
        if !(self.is_kw("init") || self.is_sym("(") || matches!(self.peek(), Tok::Ident(_))) {
            return self.err("empty equation set after `where rec`");
        }
        let mut eqs = vec![self.eq()?];
        while self.eat_kw("and") {
            eqs.push(self.eq()?);
        }
        Ok(eqs)
    }

    fn eq(&mut self) -> Result<Eq> {
        if self.eat_kw("init") {
            let x = self.ident()?;
            self.expect_sym("=")?;
            return Ok(Eq::Init(x, self.ctl()?));
        }
        let p = self.pat()?;
        self.expect_sym("=")?;
        Ok(Eq::Def(p, self.ctl()?))
    }

    fn ctl(&mut self) -> Result<Expr> {
        if self.eat_kw("present") {
            let c = self.or()?;
            self.expect_sym("->")?;
            let a = self.ctl()?;
            self.expect_kw("else")?;
            let b = self.ctl()?;
            return Ok(Expr::Present(Box::new(c), Box::new(a), Box::new(b)));
        }
        if self.eat_kw("reset") {
            let body = self.expr()?;
            self.expect_kw("every")?;
            let c = self.ctl()?;
            return Ok(Expr::Reset(Box::new(body), Box::new(c)));
        }
        if self.eat_kw("if") {
            let c = self.ctl()?;
            self.expect_kw("then")?;
            let a = self.ctl()?;
            self.expect_kw("else")?;
            let b = self.ctl()?;
            return Ok(Expr::Op(Prim::If, vec![c, a, b]));
        }
        self.or()
    }

    fn binary(
        &mut self,
        next: fn(&mut Self) -> Result<Expr>,
        ops: &[(&str, Prim)],
    ) -> Result<Expr> {
        let mut lhs = next(self)?;
        'outer: loop {
            for (s, p) in ops {
                if self.eat_sym(s) {
                    let rhs = next(self)?;
                    lhs = Expr::Op(*p, vec![lhs, rhs]);
                    continue 'outer;
                }
            }
            return Ok(lhs);
        }
    }

    fn or(&mut self) -> Result<Expr> {
        self.binary(Self::and, &[("||", Prim::Or)])
    }

    fn and(&mut self) -> Result<Expr> {
        self.binary(Self::cmp, &[("&&", Prim::And)])
    }

    fn cmp(&mut self) -> Result<Expr> {
        let lhs = self.add()?;
        let ops = [
            ("=", Prim::Eq),
            ("<>", Prim::Ne),
            ("<=", Prim::Le),
            (">=", Prim::Ge),
            ("<", Prim::Lt),
            (">", Prim::Gt),
        ];
        for (s, p) in ops {
            if self.eat_sym(s) {
                let rhs = self.add()?;
                return Ok(Expr::Op(p, vec![lhs, rhs]));
            }
        }
        Ok(lhs)
    }

    fn add(&mut self) -> Result<Expr> {
        self.binary(Self::mul, &[("+", Prim::Add), ("-", Prim::Sub)])
    }

    fn mul(&mut self) -> Result<Expr> {
        self.binary(Self::unary, &[("*", Prim::Mul), ("/", Prim::Div)])
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.is_sym("-") {
            if let Tok::Num(v) = *self.peek_at(1) {
                self.advance();
                self.advance();
                return Ok(Expr::real(-v));
            }
            self.advance();
            return Ok(Expr::Op(Prim::Neg, vec![self.unary()?]));
        }
        if self.eat_kw("not") {
            return Ok(Expr::Op(Prim::Not, vec![self.unary()?]));
        }
        self.atom()
    }

    fn args(&mut self) -> Result<Vec<Expr>> {
        self.expect_sym("(")?;
        if self.eat_sym(")") {
            return Ok(vec![]);
        }
        let mut v = vec![self.expr()?];
        while self.eat_sym(",") {
            v.push(self.expr()?);
        }
        self.expect_sym(")")?;
        Ok(v)
    }

    fn one_arg(&mut self, what: &str) -> Result<Expr> {
        let mut a = self.args()?;
        if a.len() != 1 {
            return self.err(format!("`{what}` takes one argument"));
        }
        Ok(a.pop().unwrap())
    }

    fn atom(&mut self) -> Result<Expr> {
        let pos = self.pos();
        match self.advance() {
            Tok::Num(v) => Ok(Expr::real(v)),
            Tok::Kw("true") => Ok(Expr::Const(Const::Bool(true))),
            Tok::Kw("false") => Ok(Expr::Const(Const::Bool(false))),
            Tok::Kw("last") => Ok(Expr::Last(self.ident()?)),
            Tok::Kw("sample") => Ok(Expr::Sample(Box::new(self.one_arg("sample")?))),
            Tok::Kw("factor") => Ok(Expr::Factor(Box::new(self.one_arg("factor")?))),
            Tok::Kw("infer") => Ok(Expr::Infer(Box::new(self.one_arg("infer")?))),
            Tok::Kw("observe") => {
                let mut a = self.args()?;
                if a.len() != 2 {
                    return Err(Error::Syntax { pos, msg: "`observe` takes two arguments".into() });
                }
                let x = a.pop().unwrap();
                let d = a.pop().unwrap();
                Ok(Expr::Factor(Box::new(Expr::Op(Prim::Pdf, vec![d, x]))))
            }
            Tok::ApfInfer => {
                self.expect_sym("(")?;
                let model = self.ident()?;
                self.expect_sym(",")?;
                let prior = self.ident()?;
                self.expect_sym(",")?;
                let arg = self.expr()?;
                self.expect_sym(")")?;
                Ok(Expr::ApfInfer { model, prior, arg: Box::new(arg) })
            }
            Tok::Sym("(") => {
                if self.eat_sym(")") {
                    return Ok(Expr::Const(Const::Unit));
                }
                let mut items = vec![self.expr()?];
                while self.eat_sym(",") {
                    items.push(self.expr()?);
                }
                self.expect_sym(")")?;
                Ok(fold_tuple(items))
            }
            Tok::Sym("[") => {
                let mut items = vec![self.expr()?];
                while self.eat_sym(";") {
                    items.push(self.expr()?);
                }
                self.expect_sym("]")?;
                Ok(Expr::Op(Prim::Vector, items))
            }
            Tok::Ident(name) => {
                if !self.is_sym("(") {
                    return Ok(Expr::Var(name));
                }
                if let Some(p) = Prim::by_name(&name) {
                    let args = self.args()?;
                    if let Some(n) = p.arity() {
                        if args.len() != n {
                            return Err(Error::Syntax {
                                pos,
                                msg: format!("`{name}` expects {n} argument(s), got {}", args.len()),
                            });
                        }
                    }
                    return Ok(Expr::Op(p, args));
                }
                let args = self.args()?;
                Ok(Expr::App { func: name, inst: String::new(), arg: Box::new(fold_tuple(args)) })
            }
            t => Err(Error::Syntax { pos, msg: format!("unexpected {}", describe(&t)) }),
        }
    }
}

fn fold_tuple(mut items: Vec<Expr>) -> Expr {
    let last = items.pop().unwrap_or(Expr::Const(Const::Unit));
    items.into_iter().rev().fold(last, |acc, e| Expr::pair(e, acc))
}

fn fold_pat(mut items: Vec<Pat>) -> Pat {
    let last = items.pop().unwrap_or(Pat::Unit);
    items.into_iter().rev().fold(last, |acc, p| Pat::Pair(Box::new(p), Box::new(acc)))
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(x) => format!("identifier `{x}`"),
        Tok::Num(v) => format!("number `{v}`"),
        Tok::Kw(k) => format!("keyword `{k}`"),
        Tok::Sym(s) => format!("`{s}`"),
        Tok::ApfInfer => "`APF.infer`".into(),
        Tok::Eof => "end of input".into(),
    }
}

pub fn parse_program(src: &str) -> Result<Program> {
    let mut p = Parser { toks: tokenize(src)?, i: 0 };
    p.program()
}

pub fn parse_expr(src: &str) -> Result<Expr> {
    let mut p = Parser { toks: tokenize(src)?, i: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::Eof {
        return p.err(format!("trailing input: {}", describe(p.peek())));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observe_desugars_to_factor_pdf() {
        let e = parse_expr("observe(gaussian(y, 1.0), 2.0)").unwrap();
        assert_eq!(
            e,
            Expr::Factor(Box::new(Expr::Op(
                Prim::Pdf,
                vec![Expr::Op(Prim::Gaussian, vec![Expr::var("y"), Expr::real(1.0)]), Expr::real(2.0)]
            )))
        );
    }

    #[test]
    fn empty_equation_set_is_rejected() {
        let err = parse_program("node f(x) = x where").unwrap_err();
        assert!(matches!(err, Error::Syntax { .. }), "{err}");
        let err = parse_program("node f(x) = x where rec").unwrap_err();
        assert!(matches!(err, Error::Syntax { .. }), "{err}");
    }

    #[test]
    fn tuples_nest_to_the_right() {
        let e = parse_expr("(a, b, c)").unwrap();
        assert_eq!(e, Expr::pair(Expr::var("a"), Expr::pair(Expr::var("b"), Expr::var("c"))));
    }

    #[test]
    fn negative_literal_folds() {
        assert_eq!(parse_expr("-1.5").unwrap(), Expr::real(-1.5));
        assert_eq!(
            parse_expr("-x").unwrap(),
            Expr::Op(Prim::Neg, vec![Expr::var("x")])
        );
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_program("let a = 1\nlet b = )").unwrap_err();
        match err {
            Error::Syntax { pos, .. } => assert_eq!(pos, Pos { line: 2, col: 9 }),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn comments_and_let_prefix() {
        let p = parse_program(
            "-- drift\nlet proba f(pre_x) = pre_x + theta where\n  rec init theta = sample(gaussian(0.0, 1.0))\n  and theta = last theta",
        )
        .unwrap();
        assert_eq!(p.decls.len(), 1);
        assert!(matches!(p.decls[0], Decl::Proba { .. }));
    }
}
