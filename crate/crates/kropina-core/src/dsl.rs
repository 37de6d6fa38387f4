//! A small expression language for metric and wind entries in JSON space
//! documents, plus the document loader itself.
//!
//! Grammar (binding weakest to tightest): `+ -`, `* /`, unary `-`,
//! right-associative `^`, atoms. Variables are `x1 .. xn`; `sin cos exp log
//! sqrt` are the unary functions; any other identifier is a named constant
//! (`pi` is built in).

pub mod document;

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, ParseErrorKind, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl UnaryOp {
    fn function_name(self) -> Option<&'static str> {
        match self {
            UnaryOp::Neg => None,
            UnaryOp::Sin => Some("sin"),
            UnaryOp::Cos => Some("cos"),
            UnaryOp::Exp => Some("exp"),
            UnaryOp::Log => Some("log"),
            UnaryOp::Sqrt => Some("sqrt"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
            BinaryOp::Pow => '^',
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinaryOp::Add | BinaryOp::Sub => 1,
            BinaryOp::Mul | BinaryOp::Div => 2,
            BinaryOp::Pow => 4,
        }
    }
}

/// Parsed expression tree.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Literal(f64),
    /// 0-based variable index; `x1` is index 0.
    Variable(usize),
    Constant(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

const UNARY_PREC: u8 = 3;

impl Expr {
    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Unary(UnaryOp::Neg, _) => UNARY_PREC,
            _ => 5,
        }
    }

    /// Variables referenced by the expression (0-based indices).
    pub fn variables(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_variables(&mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    fn collect_variables(&self, out: &mut Vec<usize>) {
        match self {
            Expr::Variable(i) => out.push(*i),
            Expr::Unary(_, e) => e.collect_variables(out),
            Expr::Binary(_, a, b) => {
                a.collect_variables(out);
                b.collect_variables(out);
            }
            _ => {}
        }
    }

    /// Named constants referenced by the expression, excluding `pi`.
    pub fn constants(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_constants(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_constants(&self, out: &mut Vec<String>) {
        match self {
            Expr::Constant(name) if name != "pi" => out.push(name.clone()),
            Expr::Unary(_, e) => e.collect_constants(out),
            Expr::Binary(_, a, b) => {
                a.collect_constants(out);
                b.collect_constants(out);
            }
            _ => {}
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Literal(v) => {
                if *v == v.trunc() && v.abs() < 1e15 {
                    write!(f, "{v:.0}")
                } else {
                    write!(f, "{v}")
                }
            }
            Expr::Variable(i) => write!(f, "x{}", i + 1),
            Expr::Constant(name) => write!(f, "{name}"),
            Expr::Unary(op, e) => match op.function_name() {
                Some(name) => write!(f, "{name}({e})"),
                None => {
                    if e.precedence() < UNARY_PREC {
                        write!(f, "-({e})")
                    } else {
                        write!(f, "-{e}")
                    }
                }
            },
            Expr::Binary(op, a, b) => {
                let prec = op.precedence();
                // Left child needs parens when strictly weaker; for the
                // non-commutative -, /, ^ the right child also needs them at
                // equal precedence ( ^ is right-associative, so the LEFT
                // child needs them there instead).
                let left_parens = match op {
                    BinaryOp::Pow => a.precedence() <= prec,
                    _ => a.precedence() < prec,
                };
                let right_parens = match op {
                    BinaryOp::Add | BinaryOp::Mul => b.precedence() < prec,
                    BinaryOp::Sub | BinaryOp::Div => b.precedence() <= prec,
                    BinaryOp::Pow => b.precedence() < prec,
                };
                if left_parens {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
                write!(f, "{}", op.symbol())?;
                if right_parens {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

/// Parse a single expression; the whole input must be consumed.
pub fn parse_expression(src: &str) -> Result<Expr> {
    let mut p = Parser { src, bytes: src.as_bytes(), pos: 0 };
    p.skip_ws();
    let expr = p.expression()?;
    p.skip_ws();
    if p.pos < p.bytes.len() {
        return Err(Error::Parse {
            kind: ParseErrorKind::TrailingInput(p.rest_snippet()),
            offset: p.pos,
        });
    }
    Ok(expr)
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn rest_snippet(&self) -> String {
        self.src[self.pos..].chars().take(12).collect()
    }

    fn error(&self, kind: ParseErrorKind) -> Error {
        Error::Parse { kind, offset: self.pos }
    }

    fn expression(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    self.skip_ws();
                    let rhs = self.term()?;
                    lhs = Expr::Binary(BinaryOp::Add, Box::new(lhs), Box::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    self.skip_ws();
                    let rhs = self.term()?;
                    lhs = Expr::Binary(BinaryOp::Sub, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    self.skip_ws();
                    let rhs = self.unary()?;
                    lhs = Expr::Binary(BinaryOp::Mul, Box::new(lhs), Box::new(rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    self.skip_ws();
                    let rhs = self.unary()?;
                    lhs = Expr::Binary(BinaryOp::Div, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        self.skip_ws();
        if self.peek() == Some(b'-') {
            self.pos += 1;
            self.skip_ws();
            let inner = self.unary()?;
            return Ok(Expr::Unary(UnaryOp::Neg, Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        self.skip_ws();
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            // Right-associative; the exponent may carry a unary minus.
            let exponent = self.unary_or_power()?;
            return Ok(Expr::Binary(BinaryOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn unary_or_power(&mut self) -> Result<Expr> {
        self.skip_ws();
        if self.peek() == Some(b'-') {
            self.pos += 1;
            self.skip_ws();
            let inner = self.unary_or_power()?;
            return Ok(Expr::Unary(UnaryOp::Neg, Box::new(inner)));
        }
        self.power()
    }

    fn atom(&mut self) -> Result<Expr> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.error(ParseErrorKind::UnexpectedEnd)),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expression()?;
                self.skip_ws();
                if self.peek() == Some(b')') {
                    self.pos += 1;
                    Ok(inner)
                } else {
                    Err(self.error(ParseErrorKind::UnbalancedParenthesis))
                }
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(c) => Err(self.error(ParseErrorKind::UnexpectedChar(c as char))),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || c == b'.' {
                self.pos += 1;
            } else if (c == b'e' || c == b'E') && self.pos > start {
                // scientific notation with optional sign
                let save = self.pos;
                self.pos += 1;
                if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                    self.pos += 1;
                }
                if matches!(self.peek(), Some(d) if d.is_ascii_digit()) {
                    while matches!(self.peek(), Some(d) if d.is_ascii_digit()) {
                        self.pos += 1;
                    }
                } else {
                    self.pos = save;
                    break;
                }
            } else {
                break;
            }
        }
        let text = &self.src[start..self.pos];
        text.parse::<f64>().map(Expr::Literal).map_err(|_| Error::Parse {
            kind: ParseErrorKind::BadNumber(text.to_string()),
            offset: start,
        })
    }

    fn identifier(&mut self) -> Result<Expr> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == b'_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        let name = &self.src[start..self.pos];
        let func = match name {
            "sin" => Some(UnaryOp::Sin),
            "cos" => Some(UnaryOp::Cos),
            "exp" => Some(UnaryOp::Exp),
            "log" => Some(UnaryOp::Log),
            "sqrt" => Some(UnaryOp::Sqrt),
            _ => None,
        };
        if let Some(op) = func {
            self.skip_ws();
            if self.peek() != Some(b'(') {
                return Err(self.error(ParseErrorKind::Expected("(".into())));
            }
            self.pos += 1;
            let arg = self.expression()?;
            self.skip_ws();
            if self.peek() != Some(b')') {
                return Err(self.error(ParseErrorKind::UnbalancedParenthesis));
            }
            self.pos += 1;
            return Ok(Expr::Unary(op, Box::new(arg)));
        }
        if let Some(rest) = name.strip_prefix('x') {
            if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                let idx: usize = rest.parse().map_err(|_| Error::Parse {
                    kind: ParseErrorKind::BadNumber(name.to_string()),
                    offset: start,
                })?;
                if idx == 0 {
                    return Err(Error::Parse {
                        kind: ParseErrorKind::Expected("variable index >= 1".into()),
                        offset: start,
                    });
                }
                return Ok(Expr::Variable(idx - 1));
            }
        }
        Ok(Expr::Constant(name.to_string()))
    }
}

/// Evaluate an expression at a point, resolving named constants.
///
/// IEEE double arithmetic throughout; `log`/`sqrt` of a negative argument,
/// `log(0)`, and non-integer powers of negative bases are domain errors
/// rather than NaN.
pub fn evaluate(expr: &Expr, vars: &[f64], constants: &BTreeMap<String, f64>) -> Result<f64> {
    match expr {
        Expr::Literal(v) => Ok(*v),
        Expr::Variable(i) => vars.get(*i).copied().ok_or(Error::DimensionMismatch {
            expected: *i + 1,
            got: vars.len(),
        }),
        Expr::Constant(name) => {
            if let Some(v) = constants.get(name) {
                Ok(*v)
            } else if name == "pi" {
                Ok(std::f64::consts::PI)
            } else {
                Err(Error::UnknownSymbol { name: name.clone() })
            }
        }
        Expr::Unary(op, e) => {
            let v = evaluate(e, vars, constants)?;
            match op {
                UnaryOp::Neg => Ok(-v),
                UnaryOp::Sin => Ok(v.sin()),
                UnaryOp::Cos => Ok(v.cos()),
                UnaryOp::Exp => Ok(v.exp()),
                UnaryOp::Log => {
                    if v <= 0.0 {
                        Err(Error::Domain { op: "log", value: v })
                    } else {
                        Ok(v.ln())
                    }
                }
                UnaryOp::Sqrt => {
                    if v < 0.0 {
                        Err(Error::Domain { op: "sqrt", value: v })
                    } else {
                        Ok(v.sqrt())
                    }
                }
            }
        }
        Expr::Binary(op, a, b) => {
            let x = evaluate(a, vars, constants)?;
            let y = evaluate(b, vars, constants)?;
            match op {
                BinaryOp::Add => Ok(x + y),
                BinaryOp::Sub => Ok(x - y),
                BinaryOp::Mul => Ok(x * y),
                BinaryOp::Div => Ok(x / y),
                BinaryOp::Pow => {
                    if x < 0.0 && y.fract() != 0.0 {
                        return Err(Error::Domain { op: "pow", value: x });
                    }
                    if x == 0.0 && y < 0.0 {
                        return Err(Error::Domain { op: "pow", value: y });
                    }
                    if y.fract() == 0.0 && y.abs() < i32::MAX as f64 {
                        Ok(x.powi(y as i32))
                    } else {
                        Ok(x.powf(y))
                    }
                }
            }
        }
    }
}
