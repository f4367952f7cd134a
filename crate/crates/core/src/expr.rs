//! Coefficient expression language.
//!
//! Expressions are real-valued functions of the two variables `x` and `t`,
//! built from numeric literals, the constant `pi`, the binary operators
//! `+ - * / ^`, unary minus and the functions `sin cos exp sqrt abs`.
//!
//! Precedence, from tightest to loosest: `^` (right associative), unary
//! minus, `* /`, `+ -`. Thus `-x^2` is `-(x^2)` and `2^3^2` is `2^(3^2)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Independent variable of an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Var {
    X,
    T,
}

impl Var {
    fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::T => "t",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

const NEG_PRECEDENCE: u8 = 3;
const ATOM_PRECEDENCE: u8 = 5;

/// Expression tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Const(f64),
    Pi,
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn constant(value: f64) -> Self {
        Expr::Const(value)
    }

    pub fn x() -> Self {
        Expr::Var(Var::X)
    }

    pub fn t() -> Self {
        Expr::Var(Var::T)
    }

    pub fn parse(src: &str) -> Result<Self> {
        Parser::new(src).parse_complete()
    }

    /// Evaluates at `(x, t)`. Division by zero and square roots of negative
    /// numbers are reported together with the offending subexpression.
    pub fn eval(&self, x: f64, t: f64) -> Result<f64> {
        let value = match self {
            Expr::Const(c) => *c,
            Expr::Pi => std::f64::consts::PI,
            Expr::Var(Var::X) => x,
            Expr::Var(Var::T) => t,
            Expr::Neg(e) => -e.eval(x, t)?,
            Expr::Binary(op, lhs, rhs) => {
                let a = lhs.eval(x, t)?;
                let b = rhs.eval(x, t)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(Error::Eval {
                                expr: self.to_string(),
                                x,
                                t,
                                reason: "division by zero".into(),
                            });
                        }
                        a / b
                    }
                    BinOp::Pow => a.powf(b),
                }
            }
            Expr::Call(f, arg) => {
                let a = arg.eval(x, t)?;
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Abs => a.abs(),
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(Error::Eval {
                                expr: self.to_string(),
                                x,
                                t,
                                reason: "square root of a negative number".into(),
                            });
                        }
                        a.sqrt()
                    }
                }
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::Eval {
                expr: self.to_string(),
                x,
                t,
                reason: "non-finite result".into(),
            })
        }
    }

    pub fn depends_on(&self, var: Var) -> bool {
        match self {
            Expr::Const(_) | Expr::Pi => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(e) | Expr::Call(_, e) => e.depends_on(var),
            Expr::Binary(_, a, b) => a.depends_on(var) || b.depends_on(var),
        }
    }

    /// Returns the constant value if the expression has no free variables.
    pub fn as_constant(&self) -> Option<f64> {
        if self.depends_on(Var::X) || self.depends_on(Var::T) {
            None
        } else {
            self.eval(0.0, 0.0).ok()
        }
    }

    /// Replaces every occurrence of `var` by `with`.
    pub fn substitute(&self, var: Var, with: &Expr) -> Expr {
        match self {
            Expr::Var(v) if *v == var => with.clone(),
            Expr::Const(_) | Expr::Pi | Expr::Var(_) => self.clone(),
            Expr::Neg(e) => Expr::Neg(Box::new(e.substitute(var, with))),
            Expr::Call(f, e) => Expr::Call(*f, Box::new(e.substitute(var, with))),
            Expr::Binary(op, a, b) => Expr::Binary(
                *op,
                Box::new(a.substitute(var, with)),
                Box::new(b.substitute(var, with)),
            ),
        }
    }

    /// Symbolic partial derivative. `abs` and exponents that depend on the
    /// differentiation variable are rejected.
    pub fn derivative(&self, var: Var) -> Result<Expr> {
        if !self.depends_on(var) {
            return Ok(Expr::Const(0.0));
        }
        let d = match self {
            Expr::Const(_) | Expr::Pi => Expr::Const(0.0),
            Expr::Var(v) => Expr::Const(if *v == var { 1.0 } else { 0.0 }),
            Expr::Neg(e) => neg(e.derivative(var)?),
            Expr::Binary(op, a, b) => {
                let da = a.derivative(var)?;
                let db = b.derivative(var)?;
                let (a, b) = (a.as_ref().clone(), b.as_ref().clone());
                match op {
                    BinOp::Add => add(da, db),
                    BinOp::Sub => sub(da, db),
                    BinOp::Mul => add(mul(da, b), mul(a, db)),
                    BinOp::Div => div(sub(mul(da, b.clone()), mul(a, db)), mul(b.clone(), b)),
                    BinOp::Pow => {
                        if b.depends_on(var) {
                            return Err(Error::NotDifferentiable {
                                expr: self.to_string(),
                                reason: format!("exponent depends on {}", var.name()),
                            });
                        }
                        let reduced = sub(b.clone(), Expr::Const(1.0));
                        mul(mul(b, pow(a, reduced)), da)
                    }
                }
            }
            Expr::Call(f, arg) => {
                let da = arg.derivative(var)?;
                let arg = arg.as_ref().clone();
                let outer = match f {
                    Func::Sin => call(Func::Cos, arg),
                    Func::Cos => neg(call(Func::Sin, arg)),
                    Func::Exp => call(Func::Exp, arg),
                    Func::Sqrt => div(Expr::Const(1.0), mul(Expr::Const(2.0), call(Func::Sqrt, arg))),
                    Func::Abs => {
                        return Err(Error::NotDifferentiable {
                            expr: self.to_string(),
                            reason: "abs is not differentiable".into(),
                        })
                    }
                };
                mul(outer, da)
            }
        };
        Ok(d)
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Const(c) if c.is_sign_negative() => NEG_PRECEDENCE,
            Expr::Binary(op, _, _) => op.precedence(),
            Expr::Neg(_) => NEG_PRECEDENCE,
            _ => ATOM_PRECEDENCE,
        }
    }
}

// Smart constructors with light constant folding; keep generated trees small.

pub fn add(a: Expr, b: Expr) -> Expr {
    match (a.as_constant(), b.as_constant()) {
        (Some(x), Some(y)) => Expr::Const(x + y),
        (Some(z), _) if z == 0.0 => b,
        (_, Some(z)) if z == 0.0 => a,
        _ => Expr::Binary(BinOp::Add, Box::new(a), Box::new(b)),
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (a.as_constant(), b.as_constant()) {
        (Some(x), Some(y)) => Expr::Const(x - y),
        (_, Some(z)) if z == 0.0 => a,
        (Some(z), _) if z == 0.0 => neg(b),
        _ => Expr::Binary(BinOp::Sub, Box::new(a), Box::new(b)),
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (a.as_constant(), b.as_constant()) {
        (Some(x), Some(y)) => Expr::Const(x * y),
        (Some(z), _) | (_, Some(z)) if z == 0.0 => Expr::Const(0.0),
        (Some(o), _) if o == 1.0 => b,
        (_, Some(o)) if o == 1.0 => a,
        _ => Expr::Binary(BinOp::Mul, Box::new(a), Box::new(b)),
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    match (a.as_constant(), b.as_constant()) {
        (Some(x), Some(y)) if y != 0.0 => Expr::Const(x / y),
        (Some(z), _) if z == 0.0 => Expr::Const(0.0),
        (_, Some(o)) if o == 1.0 => a,
        _ => Expr::Binary(BinOp::Div, Box::new(a), Box::new(b)),
    }
}

pub fn pow(a: Expr, b: Expr) -> Expr {
    match b.as_constant() {
        Some(z) if z == 0.0 => Expr::Const(1.0),
        Some(o) if o == 1.0 => a,
        _ => Expr::Binary(BinOp::Pow, Box::new(a), Box::new(b)),
    }
}

pub fn neg(a: Expr) -> Expr {
    match a.as_constant() {
        Some(c) => Expr::Const(-c),
        None => match a {
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        },
    }
}

pub fn call(f: Func, a: Expr) -> Expr {
    Expr::Call(f, Box::new(a))
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if c.is_sign_negative() {
                    write!(f, "-{}", -c)
                } else {
                    write!(f, "{c}")
                }
            }
            Expr::Pi => f.write_str("pi"),
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Neg(e) => {
                f.write_str("-")?;
                // A negation's operand binds at least as tightly as unary minus;
                // `^` is tighter so `-x^2` needs no parentheses.
                write_operand(f, e, e.precedence() < NEG_PRECEDENCE)
            }
            Expr::Call(func, e) => write!(f, "{}({})", func.name(), e),
            Expr::Binary(op, a, b) => {
                let p = op.precedence();
                let (paren_l, paren_r) = match op {
                    // right associative: a^b^c == a^(b^c)
                    BinOp::Pow => (a.precedence() <= p, b.precedence() < NEG_PRECEDENCE),
                    BinOp::Add | BinOp::Mul => (a.precedence() < p, b.precedence() <= p),
                    BinOp::Sub | BinOp::Div => (a.precedence() < p, b.precedence() <= p),
                };
                write_operand(f, a, paren_l)?;
                write!(f, " {} ", op.symbol())?;
                write_operand(f, b, paren_r)
            }
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl std::str::FromStr for Expr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Expr::parse(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<(usize, Token)>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            src,
            tokens: Vec::new(),
            pos: 0,
        }
    }

    fn error(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            src: self.src.to_string(),
            offset,
            message: message.into(),
        }
    }

    fn tokenize(&mut self) -> Result<()> {
        let bytes = self.src.as_bytes();
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
                let text = &self.src[start..i];
                let value: f64 = text
                    .parse()
                    .map_err(|_| self.error(start, format!("malformed number `{text}`")))?;
                self.tokens.push((start, Token::Num(value)));
            } else if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                self.tokens
                    .push((start, Token::Ident(self.src[start..i].to_string())));
            } else {
                let tok = match c {
                    '+' | '-' | '*' | '/' | '^' => Token::Op(c),
                    '(' => Token::LParen,
                    ')' => Token::RParen,
                    _ => {
                        // report the full character, which may be multi-byte
                        let ch = self.src[i..].chars().next().unwrap_or(c);
                        return Err(self.error(i, format!("unexpected character `{ch}`")));
                    }
                };
                self.tokens.push((i, tok));
                i += 1;
            }
        }
        Ok(())
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|(o, _)| *o)
            .unwrap_or(self.src.len())
    }

    fn parse_complete(mut self) -> Result<Expr> {
        self.tokenize()?;
        if self.tokens.is_empty() {
            return Err(self.error(0, "empty expression"));
        }
        let e = self.parse_sum()?;
        if self.pos < self.tokens.len() {
            return Err(self.error(self.offset(), "unexpected trailing input"));
        }
        Ok(e)
    }

    fn parse_sum(&mut self) -> Result<Expr> {
        let mut lhs = self.parse_product()?;
        while let Some(Token::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinOp::Add } else { BinOp::Sub };
            self.pos += 1;
            let rhs = self.parse_product()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_product(&mut self) -> Result<Expr> {
        let mut lhs = self.parse_unary()?;
        while let Some(Token::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinOp::Mul } else { BinOp::Div };
            self.pos += 1;
            let rhs = self.parse_unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Expr> {
        if let Some(Token::Op('-')) = self.peek() {
            self.pos += 1;
            let inner = self.parse_unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        if let Some(Token::Op('+')) = self.peek() {
            self.pos += 1;
            return self.parse_unary();
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Expr> {
        let base = self.parse_atom()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.pos += 1;
            // exponent may carry its own sign: 2^-x
            let exponent = self.parse_unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn parse_atom(&mut self) -> Result<Expr> {
        let offset = self.offset();
        let Some((_, tok)) = self.tokens.get(self.pos).cloned() else {
            return Err(self.error(offset, "unexpected end of input"));
        };
        self.pos += 1;
        match tok {
            Token::Num(v) => Ok(Expr::Const(v)),
            Token::LParen => {
                let e = self.parse_sum()?;
                self.expect_rparen(offset)?;
                Ok(e)
            }
            Token::Ident(name) => match name.as_str() {
                "x" => Ok(Expr::Var(Var::X)),
                "t" => Ok(Expr::Var(Var::T)),
                "pi" => Ok(Expr::Pi),
                _ => {
                    let Some(func) = Func::from_name(&name) else {
                        return Err(self.error(offset, format!("unknown identifier `{name}`")));
                    };
                    if self.peek() != Some(&Token::LParen) {
                        return Err(self.error(self.offset(), format!("expected `(` after `{name}`")));
                    }
                    let open = self.offset();
                    self.pos += 1;
                    let arg = self.parse_sum()?;
                    self.expect_rparen(open)?;
                    Ok(Expr::Call(func, Box::new(arg)))
                }
            },
            Token::Op(c) => Err(self.error(offset, format!("unexpected operator `{c}`"))),
            Token::RParen => Err(self.error(offset, "unexpected `)`")),
        }
    }

    fn expect_rparen(&mut self, open: usize) -> Result<()> {
        if self.peek() == Some(&Token::RParen) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(
                self.offset(),
                format!("missing `)` for `(` at offset {open}"),
            ))
        }
    }
}
