use serde::{Deserialize, Serialize};

/// Literal constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Const {
    Unit,
    Bool(bool),
    Real(f64),
}

/// Built-in operators and intrinsics. All of them are strict in every argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Prim {
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Not,
    And,
    Or,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    If,
    Fst,
    Snd,
    Vector,
    Gaussian,
    Uniform,
    Bernoulli,
    Pdf,
    Mean,
    Exp,
    Log,
    Sqrt,
    Abs,
    Sin,
    Cos,
    Min,
    Max,
}

impl Prim {
    /// Intrinsics written with call syntax, e.g. `gaussian(m, s)`.
    pub const NAMED: &'static [(&'static str, Prim)] = &[
        ("gaussian", Prim::Gaussian),
        ("uniform", Prim::Uniform),
        ("bernoulli", Prim::Bernoulli),
        ("pdf", Prim::Pdf),
        ("mean", Prim::Mean),
        ("fst", Prim::Fst),
        ("snd", Prim::Snd),
        ("exp", Prim::Exp),
        ("log", Prim::Log),
        ("sqrt", Prim::Sqrt),
        ("abs", Prim::Abs),
        ("sin", Prim::Sin),
        ("cos", Prim::Cos),
        ("min", Prim::Min),
        ("max", Prim::Max),
    ];

    pub fn by_name(name: &str) -> Option<Prim> {
        Self::NAMED.iter().find(|(n, _)| *n == name).map(|(_, p)| *p)
    }

    pub fn name(self) -> Option<&'static str> {
        Self::NAMED.iter().find(|(_, p)| *p == self).map(|(n, _)| *n)
    }

    /// Expected argument count; `None` for the variadic vector literal.
    pub fn arity(self) -> Option<usize> {
        use Prim::*;
        match self {
            Neg | Not | Fst | Snd | Mean | Exp | Log | Sqrt | Abs | Sin | Cos | Bernoulli => Some(1),
            If => Some(3),
            Vector => None,
            _ => Some(2),
        }
    }
}

/// Binding patterns for node parameters and equation left-hand sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Pat {
    Unit,
    Var(String),
    Pair(Box<Pat>, Box<Pat>),
}

impl Pat {
    pub fn vars(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Pat::Unit => {}
            Pat::Var(x) => out.push(x),
            Pat::Pair(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Right-nested tuple pattern over `names`; a single name stays a variable.
    pub fn tuple(names: &[String]) -> Pat {
        match names {
            [] => Pat::Unit,
            [x] => Pat::Var(x.clone()),
            [x, rest @ ..] => Pat::Pair(Box::new(Pat::Var(x.clone())), Box::new(Pat::tuple(rest))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Const(Const),
    Var(String),
    Last(String),
    Pair(Box<Expr>, Box<Expr>),
    Op(Prim, Vec<Expr>),
    /// Node application. `inst` is the instance identifier assigned by uniquification.
    App { func: String, inst: String, arg: Box<Expr> },
    Where(Box<Expr>, Vec<Eq>),
    Present(Box<Expr>, Box<Expr>, Box<Expr>),
    Reset(Box<Expr>, Box<Expr>),
    Sample(Box<Expr>),
    Factor(Box<Expr>),
    Infer(Box<Expr>),
    ApfInfer { model: String, prior: String, arg: Box<Expr> },
}

/// Equations of a `where rec` block; the list is the `and`-conjunction in source order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Eq {
    Def(Pat, Expr),
    Init(String, Expr),
}

impl Eq {
    /// Variables bound by this equation. `init x` binds none; it only provides `last x`.
    pub fn defined(&self) -> Vec<&str> {
        match self {
            Eq::Def(p, _) => p.vars(),
            Eq::Init(_, _) => Vec::new(),
        }
    }

    pub fn expr(&self) -> &Expr {
        match self {
            Eq::Def(_, e) | Eq::Init(_, e) => e,
        }
    }

    pub fn expr_mut(&mut self) -> &mut Expr {
        match self {
            Eq::Def(_, e) | Eq::Init(_, e) => e,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kind {
    Det,
    Proba,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decl")]
pub enum Decl {
    Let { name: String, body: Expr },
    Node { name: String, param: Pat, body: Expr },
    Proba { name: String, param: Pat, body: Expr },
}

impl Decl {
    pub fn name(&self) -> &str {
        match self {
            Decl::Let { name, .. } | Decl::Node { name, .. } | Decl::Proba { name, .. } => name,
        }
    }

    pub fn body(&self) -> &Expr {
        match self {
            Decl::Let { body, .. } | Decl::Node { body, .. } | Decl::Proba { body, .. } => body,
        }
    }

    pub fn param(&self) -> Option<&Pat> {
        match self {
            Decl::Let { .. } => None,
            Decl::Node { param, .. } | Decl::Proba { param, .. } => Some(param),
        }
    }

    /// Kind of a node declaration; `None` for global constants.
    pub fn kind(&self) -> Option<Kind> {
        match self {
            Decl::Let { .. } => None,
            Decl::Node { .. } => Some(Kind::Det),
            Decl::Proba { .. } => Some(Kind::Proba),
        }
    }
}

/// Source position (1-based line and column).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl std::fmt::Display for Pos {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Program {
    pub decls: Vec<Decl>,
    /// Start position of each declaration, when parsed from source.
    #[serde(skip)]
    pub positions: Vec<Pos>,
}

impl PartialEq for Program {
    fn eq(&self, other: &Self) -> bool {
        self.decls == other.decls
    }
}

impl Program {
    pub fn new(decls: Vec<Decl>) -> Self {
        Program { decls, positions: Vec::new() }
    }

    pub fn get(&self, name: &str) -> Option<&Decl> {
        self.decls.iter().find(|d| d.name() == name)
    }

    pub fn position_of(&self, name: &str) -> Option<Pos> {
        let i = self.decls.iter().position(|d| d.name() == name)?;
        self.positions.get(i).copied()
    }

    pub fn kind_of(&self, name: &str) -> Option<Kind> {
        self.get(name).and_then(Decl::kind)
    }
}

impl Expr {
    pub fn real(x: f64) -> Expr {
        Expr::Const(Const::Real(x))
    }

    pub fn var(x: &str) -> Expr {
        Expr::Var(x.to_string())
    }

    pub fn pair(a: Expr, b: Expr) -> Expr {
        Expr::Pair(Box::new(a), Box::new(b))
    }

    pub fn app(func: &str, arg: Expr) -> Expr {
        Expr::App { func: func.to_string(), inst: String::new(), arg: Box::new(arg) }
    }

    /// Right-nested tuple of expressions; a single element stays as is.
    pub fn tuple(mut items: Vec<Expr>) -> Expr {
        match items.len() {
            0 => Expr::Const(Const::Unit),
            1 => items.pop().unwrap(),
            _ => {
                let first = items.remove(0);
                Expr::pair(first, Expr::tuple(items))
            }
        }
    }

    /// Immediate sub-expressions, in seed-split order.
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Const(_) | Expr::Var(_) | Expr::Last(_) => vec![],
            Expr::Pair(a, b) => vec![a, b],
            Expr::Op(_, args) => args.iter().collect(),
            Expr::App { arg, .. } | Expr::ApfInfer { arg, .. } => vec![arg],
            Expr::Where(body, eqs) => {
                let mut v: Vec<&Expr> = vec![body];
                v.extend(eqs.iter().map(Eq::expr));
                v
            }
            Expr::Present(c, a, b) => vec![c, a, b],
            Expr::Reset(a, c) => vec![a, c],
            Expr::Sample(e) | Expr::Factor(e) | Expr::Infer(e) => vec![e],
        }
    }

    /// Whether this expression or any sub-expression satisfies `pred`.
    pub fn visits(&self, pred: &mut dyn FnMut(&Expr) -> bool) -> bool {
        if pred(self) {
            return true;
        }
        self.children().into_iter().any(|c| c.visits(pred))
    }
}
