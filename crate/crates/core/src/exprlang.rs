//! A small arithmetic language for the right-hand side `ψ̃(x, u, Du)` and the
//! Neumann data `φ(x, u)`.
//!
//! Identifiers: `x1..xn`, `u`, `p1..pn` (gradient components), `r = |x|`,
//! `q = |p|`, and `nu1..nun` (outward unit normal, boundary data only).
//! Functions: `exp log sqrt sin cos abs`. Operators: `+ - * / ^`, where the
//! exponent of `^` must be a constant expression.
//!
//! Derivatives are exact forward-mode: one dual-number pass per direction.
//! `abs`, `r` and `q` use the zero subgradient at their kinks.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier '{name}' at offset {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("exponent at offset {offset} is not a constant expression")]
    NonConstantExponent { offset: usize },
    #[error("domain error at offset {offset}: {message}")]
    Domain { offset: usize, message: String },
    #[error("evaluation point has dimension {got}, expression was parsed for n={expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    X(usize),
    U,
    P(usize),
    R,
    Q,
    Nu(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Abs,
}

impl UnaryOp {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "abs" => UnaryOp::Abs,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Abs => "abs",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }
}

#[derive(Clone, Debug)]
pub enum ExprKind {
    Const(f64),
    Var(Var),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, f64),
}

/// AST node with the byte offset it was parsed from.
#[derive(Clone, Debug)]
pub struct Expr {
    pub kind: ExprKind,
    pub offset: usize,
}

/// Structural equality; source offsets are ignored.
impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        match (&self.kind, &other.kind) {
            (ExprKind::Const(a), ExprKind::Const(b)) => a == b,
            (ExprKind::Var(a), ExprKind::Var(b)) => a == b,
            (ExprKind::Unary(o1, a), ExprKind::Unary(o2, b)) => o1 == o2 && a == b,
            (ExprKind::Binary(o1, a1, b1), ExprKind::Binary(o2, a2, b2)) => o1 == o2 && a1 == a2 && b1 == b2,
            (ExprKind::Pow(a, e1), ExprKind::Pow(b, e2)) => e1 == e2 && a == b,
            _ => false,
        }
    }
}

impl Expr {
    fn new(kind: ExprKind, offset: usize) -> Self {
        Expr { kind, offset }
    }

    fn any_var(&self, pred: &impl Fn(Var) -> bool) -> bool {
        match &self.kind {
            ExprKind::Const(_) => false,
            ExprKind::Var(v) => pred(*v),
            ExprKind::Unary(_, a) | ExprKind::Pow(a, _) => a.any_var(pred),
            ExprKind::Binary(_, a, b) => a.any_var(pred) || b.any_var(pred),
        }
    }

    fn const_value(&self) -> Option<f64> {
        match &self.kind {
            ExprKind::Const(c) => Some(*c),
            ExprKind::Var(_) => None,
            ExprKind::Unary(op, a) => {
                let a = a.const_value()?;
                Some(match op {
                    UnaryOp::Neg => -a,
                    UnaryOp::Exp => a.exp(),
                    UnaryOp::Log => a.ln(),
                    UnaryOp::Sqrt => a.sqrt(),
                    UnaryOp::Sin => a.sin(),
                    UnaryOp::Cos => a.cos(),
                    UnaryOp::Abs => a.abs(),
                })
            }
            ExprKind::Binary(op, a, b) => {
                let (a, b) = (a.const_value()?, b.const_value()?);
                Some(match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                })
            }
            ExprKind::Pow(a, e) => Some(a.const_value()?.powf(*e)),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Const(c) => write!(f, "{c:?}"),
            ExprKind::Var(v) => match v {
                Var::X(i) => write!(f, "x{}", i + 1),
                Var::U => write!(f, "u"),
                Var::P(i) => write!(f, "p{}", i + 1),
                Var::R => write!(f, "r"),
                Var::Q => write!(f, "q"),
                Var::Nu(i) => write!(f, "nu{}", i + 1),
            },
            ExprKind::Unary(UnaryOp::Neg, a) => write!(f, "-({a})"),
            ExprKind::Unary(op, a) => write!(f, "{}({a})", op.name()),
            ExprKind::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            ExprKind::Pow(a, e) => write!(f, "({a})^({e:?})"),
        }
    }
}

/// A parsed expression bound to a spatial dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct ExprAst {
    pub root: Expr,
    pub n: usize,
}

impl fmt::Display for ExprAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

/// Evaluation state `(x, u, p)`; `nu` is the outward normal when evaluating
/// boundary data, empty otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalPoint {
    pub x: Vec<f64>,
    pub u: f64,
    pub p: Vec<f64>,
    pub nu: Vec<f64>,
}

impl EvalPoint {
    pub fn new(x: Vec<f64>, u: f64, p: Vec<f64>) -> Self {
        EvalPoint { x, u, p, nu: Vec::new() }
    }

    pub fn with_normal(mut self, nu: Vec<f64>) -> Self {
        self.nu = nu;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Partials {
    pub value: f64,
    pub d_u: f64,
    pub d_p: Vec<f64>,
    pub d_x: Vec<f64>,
}

// ---------------------------------------------------------------- lexer

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let s = &text[start..i];
            let v: f64 = s.parse().map_err(|_| ExprError::Syntax {
                offset: start,
                message: format!("malformed number '{s}'"),
            })?;
            out.push((Tok::Num(v), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
        } else if "+-*/^()".contains(c) {
            out.push((Tok::Sym(c), i));
            i += 1;
        } else {
            return Err(ExprError::Syntax {
                offset: i,
                message: format!("unexpected character '{}'", text[i..].chars().next().unwrap()),
            });
        }
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

// ---------------------------------------------------------------- parser

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    n: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn expect(&mut self, c: char) -> Result<(), ExprError> {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            Ok(())
        } else {
            self.syntax(format!("expected '{c}'"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            let (_, off) = self.bump();
            let rhs = self.term()?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), off);
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            let (_, off) = self.bump();
            let rhs = self.unary()?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), off);
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Tok::Sym('-') => {
                let (_, off) = self.bump();
                let a = self.unary()?;
                Ok(Expr::new(ExprKind::Unary(UnaryOp::Neg, Box::new(a)), off))
            }
            Tok::Sym('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if *self.peek() != Tok::Sym('^') {
            return Ok(base);
        }
        let (_, off) = self.bump();
        let exp_off = self.offset();
        // right-associative; a signed exponent is allowed
        let e = self.unary()?;
        let Some(v) = e.const_value() else {
            return Err(ExprError::NonConstantExponent { offset: exp_off });
        };
        if !v.is_finite() {
            return Err(ExprError::Syntax {
                offset: exp_off,
                message: "exponent is not finite".into(),
            });
        }
        Ok(Expr::new(ExprKind::Pow(Box::new(base), v), off))
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let (tok, off) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Expr::new(ExprKind::Const(v), off)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(op) = UnaryOp::from_name(&name) {
                    self.expect('(')?;
                    let a = self.expr()?;
                    self.expect(')')?;
                    return Ok(Expr::new(ExprKind::Unary(op, Box::new(a)), off));
                }
                let var = self.identifier(&name).ok_or(ExprError::UnknownIdentifier {
                    offset: off,
                    name: name.clone(),
                })?;
                Ok(Expr::new(ExprKind::Var(var), off))
            }
            Tok::End => Err(ExprError::Syntax {
                offset: off,
                message: "unexpected end of input".into(),
            }),
            Tok::Sym(c) => Err(ExprError::Syntax {
                offset: off,
                message: format!("unexpected '{c}'"),
            }),
        }
    }

    fn identifier(&self, name: &str) -> Option<Var> {
        let indexed = |prefix: &str| -> Option<usize> {
            let rest = name.strip_prefix(prefix)?;
            if rest.starts_with('0') {
                return None;
            }
            let i: usize = rest.parse().ok()?;
            (1..=self.n).contains(&i).then_some(i - 1)
        };
        match name {
            "u" => Some(Var::U),
            "r" => Some(Var::R),
            "q" => Some(Var::Q),
            _ => indexed("nu")
                .map(Var::Nu)
                .or_else(|| indexed("x").map(Var::X))
                .or_else(|| indexed("p").map(Var::P)),
        }
    }
}

/// Parses `text` for spatial dimension `n`.
pub fn parse(text: &str, n: usize) -> Result<ExprAst, ExprError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        n,
    };
    let root = p.expr()?;
    if *p.peek() != Tok::End {
        return p.syntax("unexpected trailing input");
    }
    Ok(ExprAst { root, n })
}

// ---------------------------------------------------------------- evaluation

#[derive(Clone, Copy, Debug)]
struct Dual {
    v: f64,
    d: f64,
}

#[derive(Clone, Copy, PartialEq)]
enum Dir {
    None,
    U,
    P(usize),
    X(usize),
}

fn domain(offset: usize, message: impl Into<String>) -> ExprError {
    ExprError::Domain {
        offset,
        message: message.into(),
    }
}

fn norm_dual(v: &[f64], seed: Option<usize>) -> Dual {
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let d = match seed {
        Some(i) if n > 0.0 => v[i] / n,
        _ => 0.0,
    };
    Dual { v: n, d }
}

fn eval_dual(e: &Expr, pt: &EvalPoint, dir: Dir) -> Result<Dual, ExprError> {
    let out = match &e.kind {
        ExprKind::Const(c) => Dual { v: *c, d: 0.0 },
        ExprKind::Var(var) => match *var {
            Var::X(i) => Dual {
                v: pt.x[i],
                d: (dir == Dir::X(i)) as u8 as f64,
            },
            Var::U => Dual {
                v: pt.u,
                d: (dir == Dir::U) as u8 as f64,
            },
            Var::P(i) => Dual {
                v: pt.p[i],
                d: (dir == Dir::P(i)) as u8 as f64,
            },
            Var::R => norm_dual(&pt.x, if let Dir::X(i) = dir { Some(i) } else { None }),
            Var::Q => norm_dual(&pt.p, if let Dir::P(i) = dir { Some(i) } else { None }),
            Var::Nu(i) => match pt.nu.get(i) {
                Some(&v) => Dual { v, d: 0.0 },
                None => return Err(domain(e.offset, "outward normal is only defined for boundary data")),
            },
        },
        ExprKind::Unary(op, a) => {
            let a = eval_dual(a, pt, dir)?;
            match op {
                UnaryOp::Neg => Dual { v: -a.v, d: -a.d },
                UnaryOp::Exp => {
                    let v = a.v.exp();
                    Dual { v, d: v * a.d }
                }
                UnaryOp::Log => {
                    if a.v <= 0.0 {
                        return Err(domain(e.offset, format!("log of non-positive value {}", a.v)));
                    }
                    Dual {
                        v: a.v.ln(),
                        d: a.d / a.v,
                    }
                }
                UnaryOp::Sqrt => {
                    if a.v < 0.0 {
                        return Err(domain(e.offset, format!("sqrt of negative value {}", a.v)));
                    }
                    let v = a.v.sqrt();
                    let d = if a.d == 0.0 { 0.0 } else { a.d / (2.0 * v) };
                    Dual { v, d }
                }
                UnaryOp::Sin => Dual {
                    v: a.v.sin(),
                    d: a.v.cos() * a.d,
                },
                UnaryOp::Cos => Dual {
                    v: a.v.cos(),
                    d: -a.v.sin() * a.d,
                },
                UnaryOp::Abs => {
                    let s = if a.v > 0.0 {
                        1.0
                    } else if a.v < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    Dual { v: a.v.abs(), d: s * a.d }
                }
            }
        }
        ExprKind::Binary(op, a, b) => {
            let a = eval_dual(a, pt, dir)?;
            let b = eval_dual(b, pt, dir)?;
            match op {
                BinOp::Add => Dual { v: a.v + b.v, d: a.d + b.d },
                BinOp::Sub => Dual { v: a.v - b.v, d: a.d - b.d },
                BinOp::Mul => Dual {
                    v: a.v * b.v,
                    d: a.d * b.v + a.v * b.d,
                },
                BinOp::Div => {
                    if b.v == 0.0 {
                        return Err(domain(e.offset, "division by zero"));
                    }
                    Dual {
                        v: a.v / b.v,
                        d: (a.d * b.v - a.v * b.d) / (b.v * b.v),
                    }
                }
            }
        }
        ExprKind::Pow(a, ex) => {
            let a = eval_dual(a, pt, dir)?;
            let ex = *ex;
            let integral = ex.fract() == 0.0;
            if a.v < 0.0 && !integral {
                return Err(domain(e.offset, format!("non-integer power of negative value {}", a.v)));
            }
            if a.v == 0.0 && ex < 0.0 {
                return Err(domain(e.offset, "negative power of zero"));
            }
            let v = if integral && ex.abs() <= i32::MAX as f64 {
                a.v.powi(ex as i32)
            } else {
                a.v.powf(ex)
            };
            let d = if a.d == 0.0 || ex == 0.0 {
                0.0
            } else if ex == 1.0 {
                a.d
            } else {
                ex * a.v.powf(ex - 1.0) * a.d
            };
            Dual { v, d }
        }
    };
    if !out.v.is_finite() || !out.d.is_finite() {
        return Err(domain(e.offset, "result is not finite"));
    }
    Ok(out)
}

impl ExprAst {
    fn check_point(&self, pt: &EvalPoint) -> Result<(), ExprError> {
        for len in [pt.x.len(), pt.p.len()] {
            if len != self.n {
                return Err(ExprError::DimensionMismatch {
                    expected: self.n,
                    got: len,
                });
            }
        }
        Ok(())
    }

    pub fn eval(&self, pt: &EvalPoint) -> Result<f64, ExprError> {
        self.check_point(pt)?;
        Ok(eval_dual(&self.root, pt, Dir::None)?.v)
    }

    /// Value plus `∂/∂u`, `∂/∂p_i` and `∂/∂x_i`.
    pub fn eval_with_partials(&self, pt: &EvalPoint) -> Result<Partials, ExprError> {
        self.check_point(pt)?;
        let n = self.n;
        let value = eval_dual(&self.root, pt, Dir::None)?.v;
        let d_u = if self.depends_on_u() {
            eval_dual(&self.root, pt, Dir::U)?.d
        } else {
            0.0
        };
        let mut d_p = vec![0.0; n];
        if self.depends_on_gradient() {
            for (i, d) in d_p.iter_mut().enumerate() {
                *d = eval_dual(&self.root, pt, Dir::P(i))?.d;
            }
        }
        let mut d_x = vec![0.0; n];
        if self.depends_on_x() {
            for (i, d) in d_x.iter_mut().enumerate() {
                *d = eval_dual(&self.root, pt, Dir::X(i))?.d;
            }
        }
        Ok(Partials { value, d_u, d_p, d_x })
    }

    pub fn depends_on_u(&self) -> bool {
        self.root.any_var(&|v| v == Var::U)
    }

    /// Uses any of `p1..pn` or `q`.
    pub fn depends_on_gradient(&self) -> bool {
        self.root.any_var(&|v| matches!(v, Var::P(_) | Var::Q))
    }

    /// Uses any of `x1..xn` or `r`.
    pub fn depends_on_x(&self) -> bool {
        self.root.any_var(&|v| matches!(v, Var::X(_) | Var::R))
    }

    pub fn depends_on_normal(&self) -> bool {
        self.root.any_var(&|v| matches!(v, Var::Nu(_)))
    }

    /// Uses only `r`, `u` and `q` (radially symmetric data).
    pub fn is_radial(&self) -> bool {
        !self.root.any_var(&|v| matches!(v, Var::X(_) | Var::P(_) | Var::Nu(_)))
    }

    /// `self^e`.
    pub fn powf(self, e: f64) -> ExprAst {
        let off = self.root.offset;
        ExprAst {
            root: Expr::new(ExprKind::Pow(Box::new(self.root), e), off),
            n: self.n,
        }
    }
}
