//! Formula language for web functions, Cauchy data and metric components.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (("+"|"-") term)*
//! term   := factor (("*"|"/") factor)*
//! factor := "-" factor | power
//! power  := atom ("^" number)?
//! atom   := number | "x" | "y" | name "(" expr ")" | "(" expr ")"
//! name   := "sqrt" | "exp" | "ln" | "sin" | "cos" | "tan"
//! number := digits ("." digits)? (("e"|"E") ("+"|"-")? digits)?
//! ```
//!
//! Exponents are numeric literals only, so `f^g` with non-constant `g` is
//! rejected at parse time.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::taylor::{pow_real, Axis, Elementary, Jet, JetError};
use crate::Point;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sqrt,
    Exp,
    Ln,
    Sin,
    Cos,
    Tan,
}

impl Func {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Sqrt => "sqrt",
            Self::Exp => "exp",
            Self::Ln => "ln",
            Self::Sin => "sin",
            Self::Cos => "cos",
            Self::Tan => "tan",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sqrt" => Self::Sqrt,
            "exp" => Self::Exp,
            "ln" => Self::Ln,
            "sin" => Self::Sin,
            "cos" => Self::Cos,
            "tan" => Self::Tan,
            _ => return None,
        })
    }

    fn elementary(self) -> Elementary {
        match self {
            Self::Sqrt => Elementary::Sqrt,
            Self::Exp => Elementary::Exp,
            Self::Ln => Elementary::Ln,
            Self::Sin => Elementary::Sin,
            Self::Cos => Elementary::Cos,
            Self::Tan => Elementary::Tan,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(&self) -> char {
        match self {
            Self::Add => '+',
            Self::Sub => '-',
            Self::Mul => '*',
            Self::Div => '/',
        }
    }
}

/// Abstract syntax tree of a formula in `x` and `y`.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Axis),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    /// Power with a constant exponent.
    Pow(Box<Expr>, f64),
    Call(Func, Box<Expr>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    /// Byte offset of the offending token in the input.
    pub position: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "parse error at offset {}: {}",
            self.position, self.message
        )
    }
}

impl core::error::Error for ParseError {}

/// Evaluation failure, carrying the subexpression where it happened.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalError {
    pub subexpression: String,
    pub kind: EvalErrorKind,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EvalErrorKind {
    /// A function or power evaluated outside its domain.
    Domain {
        function: &'static str,
        argument: f64,
    },
    DivisionByZero,
    NonFinite,
    Jet(JetError),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            EvalErrorKind::Domain { function, argument } => write!(
                f,
                "{function} undefined at {argument} in `{}`",
                self.subexpression
            ),
            EvalErrorKind::DivisionByZero => {
                write!(f, "division by zero in `{}`", self.subexpression)
            }
            EvalErrorKind::NonFinite => {
                write!(f, "non-finite value in `{}`", self.subexpression)
            }
            EvalErrorKind::Jet(e) => write!(f, "{e} in `{}`", self.subexpression),
        }
    }
}

impl core::error::Error for EvalError {}

impl Expr {
    pub const X: Expr = Expr::Var(Axis::X);
    pub const Y: Expr = Expr::Var(Axis::Y);

    pub fn constant(v: f64) -> Self {
        Self::Const(v)
    }

    pub fn call(func: Func, arg: Expr) -> Self {
        Self::Call(func, Box::new(arg))
    }

    pub fn powf(self, p: f64) -> Self {
        Self::Pow(Box::new(self), p)
    }

    /// Returns true when the tree is the bare coordinate `axis`.
    pub fn is_variable(&self, axis: Axis) -> bool {
        matches!(self, Expr::Var(a) if *a == axis)
    }

    fn error(&self, kind: EvalErrorKind) -> EvalError {
        EvalError {
            subexpression: self.to_string(),
            kind,
        }
    }

    /// IEEE double evaluation at `p`.
    pub fn eval(&self, p: Point) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var(Axis::X) => p.x,
            Expr::Var(Axis::Y) => p.y,
            Expr::Neg(e) => -e.eval(p)?,
            Expr::Binary(op, l, r) => {
                let a = l.eval(p)?;
                let b = r.eval(p)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(self.error(EvalErrorKind::DivisionByZero));
                        }
                        a / b
                    }
                }
            }
            Expr::Pow(base, e) => {
                let a = base.eval(p)?;
                pow_real(a, *e).ok_or_else(|| {
                    self.error(EvalErrorKind::Domain {
                        function: "pow",
                        argument: a,
                    })
                })?
            }
            Expr::Call(func, arg) => {
                let a = arg.eval(p)?;
                let domain = |ok: bool| {
                    if ok {
                        Ok(())
                    } else {
                        Err(self.error(EvalErrorKind::Domain {
                            function: func.name(),
                            argument: a,
                        }))
                    }
                };
                match func {
                    Func::Sqrt => {
                        domain(a > 0.0)?;
                        libm::sqrt(a)
                    }
                    Func::Ln => {
                        domain(a > 0.0)?;
                        libm::log(a)
                    }
                    Func::Exp => libm::exp(a),
                    Func::Sin => libm::sin(a),
                    Func::Cos => libm::cos(a),
                    Func::Tan => {
                        domain(libm::cos(a) != 0.0)?;
                        libm::tan(a)
                    }
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.error(EvalErrorKind::NonFinite))
        }
    }

    /// Taylor jet of the formula at `p`, truncated at `order`.
    pub fn jet(&self, p: Point, order: usize) -> Result<Jet, EvalError> {
        let wrap = |e: JetError| match e {
            JetError::DivisionByZero => self.error(EvalErrorKind::DivisionByZero),
            JetError::Domain { function, value } => self.error(EvalErrorKind::Domain {
                function,
                argument: value,
            }),
            JetError::NonFinite => self.error(EvalErrorKind::NonFinite),
            other => self.error(EvalErrorKind::Jet(other)),
        };
        match self {
            Expr::Const(c) => Jet::constant(p, order, *c).map_err(wrap),
            Expr::Var(axis) => Jet::variable(p, *axis, order).map_err(wrap),
            Expr::Neg(e) => Ok(e.jet(p, order)?.neg()),
            Expr::Binary(op, l, r) => {
                let a = l.jet(p, order)?;
                let b = r.jet(p, order)?;
                match op {
                    BinOp::Add => a.try_add(&b),
                    BinOp::Sub => a.try_sub(&b),
                    BinOp::Mul => a.try_mul(&b),
                    BinOp::Div => a.try_div(&b),
                }
                .map_err(wrap)
            }
            Expr::Pow(base, e) => base.jet(p, order)?.powf(*e).map_err(wrap),
            Expr::Call(func, arg) => arg
                .jet(p, order)?
                .elementary(func.elementary())
                .map_err(wrap),
        }
    }
}

macro_rules! expr_binop {
    ($trait:ident, $method:ident, $op:expr) => {
        impl core::ops::$trait for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::Binary($op, Box::new(self), Box::new(rhs))
            }
        }
    };
}

expr_binop!(Add, add, BinOp::Add);
expr_binop!(Sub, sub, BinOp::Sub);
expr_binop!(Mul, mul, BinOp::Mul);
expr_binop!(Div, div, BinOp::Div);

impl core::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

/// Fully parenthesized form; parsing it back gives the same tree for any
/// parsed expression.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) if *c < 0.0 => write!(f, "(-{})", -c),
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(Axis::X) => f.write_str("x"),
            Expr::Var(Axis::Y) => f.write_str("y"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expr::Pow(b, e) => write!(f, "({b}^{e})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Tok<'a> {
    Num(f64),
    Ident(&'a str),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn err(position: usize, message: impl Into<String>) -> ParseError {
        ParseError {
            position,
            message: message.into(),
        }
    }

    fn tokens(mut self) -> Result<Vec<(usize, Tok<'a>)>, ParseError> {
        let bytes = self.src.as_bytes();
        let mut out = Vec::new();
        while self.pos < bytes.len() {
            let start = self.pos;
            let c = bytes[start];
            if c.is_ascii_whitespace() {
                self.pos += 1;
                continue;
            }
            let tok = match c {
                b'+' => Tok::Plus,
                b'-' => Tok::Minus,
                b'*' => Tok::Star,
                b'/' => Tok::Slash,
                b'^' => Tok::Caret,
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                b'0'..=b'9' => {
                    let t = self.number()?;
                    out.push((start, t));
                    continue;
                }
                c if c.is_ascii_alphabetic() || c == b'_' => {
                    while self.pos < bytes.len()
                        && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_')
                    {
                        self.pos += 1;
                    }
                    out.push((start, Tok::Ident(&self.src[start..self.pos])));
                    continue;
                }
                _ => {
                    let ch = self.src[start..].chars().next().unwrap_or('?');
                    return Err(Self::err(start, format!("unexpected character '{ch}'")));
                }
            };
            self.pos += 1;
            out.push((start, tok));
        }
        Ok(out)
    }

    fn digits(&mut self) -> usize {
        let bytes = self.src.as_bytes();
        let start = self.pos;
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        self.pos - start
    }

    fn number(&mut self) -> Result<Tok<'a>, ParseError> {
        let bytes = self.src.as_bytes();
        let start = self.pos;
        self.digits();
        if self.pos < bytes.len() && bytes[self.pos] == b'.' {
            self.pos += 1;
            if self.digits() == 0 {
                return Err(Self::err(self.pos, "expected digits after '.'"));
            }
        }
        if self.pos < bytes.len() && (bytes[self.pos] == b'e' || bytes[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < bytes.len() && (bytes[self.pos] == b'+' || bytes[self.pos] == b'-') {
                self.pos += 1;
            }
            if self.digits() == 0 {
                // Not an exponent; the letter starts a separate token.
                self.pos = save;
            }
        }
        let text = &self.src[start..self.pos];
        let v: f64 = text
            .parse()
            .map_err(|_| Self::err(start, format!("invalid number '{text}'")))?;
        if !v.is_finite() {
            return Err(Self::err(start, format!("number '{text}' is out of range")));
        }
        Ok(Tok::Num(v))
    }
}

struct Parser<'a> {
    toks: Vec<(usize, Tok<'a>)>,
    idx: usize,
    end: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<Tok<'a>> {
        self.toks.get(self.idx).map(|t| t.1)
    }

    fn position(&self) -> usize {
        self.toks.get(self.idx).map_or(self.end, |t| t.0)
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            position: self.position(),
            message: message.into(),
        })
    }

    fn describe(&self) -> String {
        match self.peek() {
            None => "end of input".into(),
            Some(Tok::Num(v)) => format!("number {v}"),
            Some(Tok::Ident(s)) => format!("'{s}'"),
            Some(t) => format!("'{}'", token_text(t)),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.idx += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.idx += 1;
            let rhs = self.factor()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(Tok::Minus) {
            self.idx += 1;
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek() != Some(Tok::Caret) {
            return Ok(base);
        }
        self.idx += 1;
        match self.peek() {
            Some(Tok::Num(v)) => {
                self.idx += 1;
                Ok(Expr::Pow(Box::new(base), v))
            }
            _ => self.fail(format!(
                "exponent must be a numeric literal, found {}",
                self.describe()
            )),
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(Tok::Num(v)) => {
                self.idx += 1;
                Ok(Expr::Const(v))
            }
            Some(Tok::Ident(name)) => {
                if name == "x" {
                    self.idx += 1;
                    return Ok(Expr::X);
                }
                if name == "y" {
                    self.idx += 1;
                    return Ok(Expr::Y);
                }
                let Some(func) = Func::from_name(name) else {
                    return self.fail(format!("unknown identifier '{name}'"));
                };
                self.idx += 1;
                if self.peek() != Some(Tok::LParen) {
                    return self.fail(format!("expected '(' after {name}"));
                }
                self.idx += 1;
                let arg = self.expr()?;
                self.close()?;
                Ok(Expr::Call(func, Box::new(arg)))
            }
            Some(Tok::LParen) => {
                self.idx += 1;
                let inner = self.expr()?;
                self.close()?;
                Ok(inner)
            }
            _ => self.fail(format!("expected an operand, found {}", self.describe())),
        }
    }

    fn close(&mut self) -> Result<(), ParseError> {
        if self.peek() == Some(Tok::RParen) {
            self.idx += 1;
            Ok(())
        } else {
            self.fail(format!("expected ')', found {}", self.describe()))
        }
    }
}

fn token_text(t: Tok<'_>) -> &'static str {
    match t {
        Tok::Plus => "+",
        Tok::Minus => "-",
        Tok::Star => "*",
        Tok::Slash => "/",
        Tok::Caret => "^",
        Tok::LParen => "(",
        Tok::RParen => ")",
        Tok::Num(_) | Tok::Ident(_) => "",
    }
}

/// Parses a formula in `x` and `y`.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let toks = Lexer { src: text, pos: 0 }.tokens()?;
    let mut p = Parser {
        toks,
        idx: 0,
        end: text.len(),
    };
    let e = p.expr()?;
    if p.idx < p.toks.len() {
        return p.fail(format!("unexpected {}", p.describe()));
    }
    Ok(e)
}

/// Parses a `;`-separated list of formulas. Error positions refer to the
/// whole input.
pub fn parse_list(text: &str) -> Result<Vec<Expr>, ParseError> {
    let mut out = Vec::new();
    let mut offset = 0;
    for piece in text.split(';') {
        let e = parse(piece).map_err(|mut err| {
            err.position += offset;
            err
        })?;
        out.push(e);
        offset += piece.len() + 1;
    }
    Ok(out)
}
