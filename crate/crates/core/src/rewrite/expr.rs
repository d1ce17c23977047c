//! Attribute expressions evaluated on the right-hand side of a rule.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := factor (('*' | '/') factor)*
//! factor  := '-' factor | primary
//! primary := number | string | 'true' | 'false'
//!          | ident '.' 'property' '(' string ')'
//!          | ident '(' expr (',' expr)* ')'
//!          | ident
//!          | '(' expr ')'
//! ```
//! Functions: `max(a, b)`, `min(a, b)`, `random(x)` drawing from `(0, x]`, and
//! `ratio_or(a, b, s)` which is `a / b`, or `0` / `s` when `b` is zero and `a`
//! is zero / nonzero. A bare identifier names a pattern variable.

use std::fmt;

use rand::{Rng, RngCore};

use crate::portgraph::{PropertyValue, ValueKind};

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

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Builtin {
    Max,
    Min,
    Random,
    RatioOr,
}

impl Builtin {
    fn name(self) -> &'static str {
        match self {
            Builtin::Max => "max",
            Builtin::Min => "min",
            Builtin::Random => "random",
            Builtin::RatioOr => "ratio_or",
        }
    }

    fn arity(self) -> usize {
        match self {
            Builtin::Max | Builtin::Min => 2,
            Builtin::Random => 1,
            Builtin::RatioOr => 3,
        }
    }

    fn lookup(name: &str) -> Option<Builtin> {
        [Builtin::Max, Builtin::Min, Builtin::Random, Builtin::RatioOr]
            .into_iter()
            .find(|b| b.name() == name)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Literal(PropertyValue),
    Property { elem: String, attr: String },
    Var(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Builtin, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("expression references unbound element `{0}`")]
    UnboundElement(String),
    #[error("expression references unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("element `{elem}` has no attribute `{attr}`")]
    MissingAttribute { elem: String, attr: String },
    #[error("`{op}` expects numeric operands, found {found}")]
    KindMismatch { op: String, found: ValueKind },
    #[error("division by zero")]
    DivisionByZero,
    #[error("integer overflow")]
    Overflow,
    #[error("non-finite result")]
    NonFinite,
    #[error("random({0}) needs a positive bound")]
    BadRandomBound(f64),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("expression syntax error at offset {offset}: {message}")]
pub struct ExprParseError {
    pub offset: usize,
    pub message: String,
}

/// Where an expression looks up element properties and variables.
pub trait EvalEnv {
    /// `Err` when `elem` is not bound; `Ok(None)` when the attribute is absent.
    fn property(&self, elem: &str, attr: &str) -> Result<Option<PropertyValue>, EvalError>;
    fn variable(&self, name: &str) -> Option<PropertyValue>;
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr, ExprParseError> {
        let mut p = Parser { src: text, pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos < text.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn literal(v: impl Into<PropertyValue>) -> Expr {
        Expr::Literal(v.into())
    }

    pub fn prop(elem: &str, attr: &str) -> Expr {
        Expr::Property {
            elem: elem.to_owned(),
            attr: attr.to_owned(),
        }
    }

    /// Element names referenced through `.property(...)`.
    pub fn elements(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Property { elem, .. } = e {
                out.push(elem.as_str());
            }
        });
        out
    }

    pub fn variables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Var(v) = e {
                out.push(v.as_str());
            }
        });
        out
    }

    fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Neg(e) => e.walk(f),
            Expr::Binary(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.walk(f)),
            _ => {}
        }
    }

    /// Evaluates the expression. Only `random` consumes the generator.
    pub fn eval(&self, env: &dyn EvalEnv, rng: &mut dyn RngCore) -> Result<PropertyValue, EvalError> {
        let v = match self {
            Expr::Literal(v) => v.clone(),
            Expr::Property { elem, attr } => env.property(elem, attr)?.ok_or_else(|| EvalError::MissingAttribute {
                elem: elem.clone(),
                attr: attr.clone(),
            })?,
            Expr::Var(name) => env
                .variable(name)
                .ok_or_else(|| EvalError::UnboundVariable(name.clone()))?,
            Expr::Neg(e) => match e.eval(env, rng)? {
                PropertyValue::Int(i) => PropertyValue::Int(i.checked_neg().ok_or(EvalError::Overflow)?),
                PropertyValue::Real(x) => PropertyValue::Real(-x),
                other => return Err(mismatch("-", &other)),
            },
            Expr::Binary(op, a, b) => {
                let a = a.eval(env, rng)?;
                let b = b.eval(env, rng)?;
                arith(*op, &a, &b)?
            }
            Expr::Call(f, args) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(a.eval(env, rng)?);
                }
                call(*f, &vals, rng)?
            }
        };
        if let PropertyValue::Real(x) = v {
            if !x.is_finite() {
                return Err(EvalError::NonFinite);
            }
        }
        Ok(v)
    }
}

fn mismatch(op: &str, v: &PropertyValue) -> EvalError {
    EvalError::KindMismatch {
        op: op.to_owned(),
        found: v.kind(),
    }
}

fn numeric(op: &str, v: &PropertyValue) -> Result<f64, EvalError> {
    v.as_real().ok_or_else(|| mismatch(op, v))
}

fn arith(op: BinOp, a: &PropertyValue, b: &PropertyValue) -> Result<PropertyValue, EvalError> {
    let sym = op.symbol().to_string();
    if let (PropertyValue::Int(x), PropertyValue::Int(y)) = (a, b) {
        if op != BinOp::Div {
            let r = match op {
                BinOp::Add => x.checked_add(*y),
                BinOp::Sub => x.checked_sub(*y),
                BinOp::Mul => x.checked_mul(*y),
                BinOp::Div => unreachable!(),
            };
            return r.map(PropertyValue::Int).ok_or(EvalError::Overflow);
        }
    }
    let (x, y) = (numeric(&sym, a)?, numeric(&sym, b)?);
    let r = match op {
        BinOp::Add => x + y,
        BinOp::Sub => x - y,
        BinOp::Mul => x * y,
        BinOp::Div => {
            if y == 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            x / y
        }
    };
    Ok(PropertyValue::Real(r))
}

fn call(f: Builtin, args: &[PropertyValue], rng: &mut dyn RngCore) -> Result<PropertyValue, EvalError> {
    let name = f.name();
    match f {
        Builtin::Max | Builtin::Min => {
            let pick_first = |x: f64, y: f64| if f == Builtin::Max { x >= y } else { x <= y };
            match (&args[0], &args[1]) {
                (PropertyValue::Int(x), PropertyValue::Int(y)) => {
                    Ok(PropertyValue::Int(if pick_first(*x as f64, *y as f64) { *x } else { *y }))
                }
                (a, b) => {
                    let (x, y) = (numeric(name, a)?, numeric(name, b)?);
                    Ok(PropertyValue::Real(if pick_first(x, y) { x } else { y }))
                }
            }
        }
        Builtin::Random => {
            let bound = numeric(name, &args[0])?;
            if bound.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
                return Err(EvalError::BadRandomBound(bound));
            }
            let u: f64 = rng.gen();
            Ok(PropertyValue::Real(bound * (1.0 - u)))
        }
        Builtin::RatioOr => {
            let (a, b, s) = (numeric(name, &args[0])?, numeric(name, &args[1])?, numeric(name, &args[2])?);
            let r = if b != 0.0 {
                a / b
            } else if a == 0.0 {
                0.0
            } else {
                s
            };
            Ok(PropertyValue::Real(r))
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Literal(PropertyValue::Real(x)) => write!(f, "{x:?}"),
            Expr::Literal(PropertyValue::Text(s)) => write!(f, "{s:?}"),
            Expr::Literal(v) => write!(f, "{v}"),
            Expr::Property { elem, attr } => write!(f, "{elem}.property({attr:?})"),
            Expr::Var(v) => f.write_str(v),
            Expr::Neg(e) => write!(f, "-{e}"),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(b, args) => {
                write!(f, "{}(", b.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: impl Into<String>) -> ExprParseError {
        ExprParseError {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn rest(&self) -> &str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.rest().chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ExprParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{c}`")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some('+') => BinOp::Add,
                Some('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ExprParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Some('*') => BinOp::Mul,
                Some('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Expr, ExprParseError> {
        if self.eat('-') {
            let inner = self.factor()?;
            return Ok(match inner {
                Expr::Literal(PropertyValue::Int(i)) => Expr::Literal(PropertyValue::Int(-i)),
                Expr::Literal(PropertyValue::Real(x)) => Expr::Literal(PropertyValue::Real(-x)),
                other => Expr::Neg(Box::new(other)),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ExprParseError> {
        match self.peek() {
            None => Err(self.error("unexpected end of expression")),
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some('"') => Ok(Expr::Literal(PropertyValue::Text(self.string()?))),
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_alphabetic() || c == '_' => {
                let ident = self.ident();
                match ident.as_str() {
                    "true" => return Ok(Expr::literal(true)),
                    "false" => return Ok(Expr::literal(false)),
                    _ => {}
                }
                if self.eat('.') {
                    let start = self.pos;
                    if self.ident() != "property" {
                        self.pos = start;
                        return Err(self.error("expected `property`"));
                    }
                    self.expect('(')?;
                    if self.peek() != Some('"') {
                        return Err(self.error("expected a quoted attribute name"));
                    }
                    let attr = self.string()?;
                    self.expect(')')?;
                    Ok(Expr::Property { elem: ident, attr })
                } else if self.peek() == Some('(') {
                    let at = self.pos;
                    let f = Builtin::lookup(&ident).ok_or_else(|| ExprParseError {
                        offset: at,
                        message: format!("unknown function `{ident}`"),
                    })?;
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while self.eat(',') {
                        args.push(self.expr()?);
                    }
                    self.expect(')')?;
                    if args.len() != f.arity() {
                        return Err(ExprParseError {
                            offset: at,
                            message: format!("`{ident}` takes {} argument(s), got {}", f.arity(), args.len()),
                        });
                    }
                    Ok(Expr::Call(f, args))
                } else {
                    Ok(Expr::Var(ident))
                }
            }
            Some(c) => Err(self.error(format!("unexpected character `{c}`"))),
        }
    }

    fn ident(&mut self) -> String {
        self.skip_ws();
        let len = self
            .rest()
            .find(|c: char| !(c.is_alphanumeric() || c == '_' || c == '\''))
            .unwrap_or(self.rest().len());
        let s = self.rest()[..len].to_owned();
        self.pos += len;
        s
    }

    fn number(&mut self) -> Result<Expr, ExprParseError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut end = start;
        let mut real = false;
        while end < bytes.len() {
            match bytes[end] {
                b'0'..=b'9' => end += 1,
                b'.' => {
                    real = true;
                    end += 1;
                }
                b'e' | b'E' => {
                    real = true;
                    end += 1;
                    if end < bytes.len() && (bytes[end] == b'+' || bytes[end] == b'-') {
                        end += 1;
                    }
                }
                _ => break,
            }
        }
        let text = &self.src[start..end];
        self.pos = end;
        let lit = if real {
            text.parse::<f64>().map(PropertyValue::Real).ok()
        } else {
            text.parse::<i64>().map(PropertyValue::Int).ok()
        };
        lit.map(Expr::Literal).ok_or(ExprParseError {
            offset: start,
            message: format!("invalid number `{text}`"),
        })
    }

    fn string(&mut self) -> Result<String, ExprParseError> {
        let start = self.pos;
        self.pos += 1;
        let mut out = String::new();
        let mut chars = self.rest().char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '"' => {
                    self.pos += i + 1;
                    return Ok(out);
                }
                '\\' => match chars.next() {
                    Some((_, e)) => out.push(e),
                    None => break,
                },
                c => out.push(c),
            }
        }
        Err(ExprParseError {
            offset: start,
            message: "unterminated string".into(),
        })
    }
}
