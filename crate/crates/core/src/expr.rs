//! Scalar coefficient expressions in `x` and `y`, used for material
//! properties and boundary curves in mesh files.
//!
//! Grammar (recursive descent, lowest to highest precedence):
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?          right associative, constant exponent
//! primary := number | 'x' | 'y' | func '(' sum ')' | '(' sum ')'
//! func    := exp | sin | cos | sqrt | log
//! ```

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }

    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Sqrt,
    Log,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Func::Exp,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            "log" => Func::Log,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Log => "log",
        }
    }
}

const UNARY_PRECEDENCE: u8 = 3;

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at byte {offset}: {message}")]
pub struct SyntaxError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("log of non-positive value {0}")]
    LogDomain(f64),
    #[error("sqrt of negative value {0}")]
    SqrtDomain(f64),
    #[error("negative base {base} raised to non-integer power {exponent}")]
    PowDomain { base: f64, exponent: f64 },
    #[error("non-finite result")]
    NonFinite,
}

impl Expr {
    pub fn parse(text: &str) -> Result<Self, SyntaxError> {
        let mut parser = Parser { src: text, pos: 0 };
        let expr = parser.sum()?;
        parser.skip_ws();
        if parser.pos < text.len() {
            return Err(parser.error("unexpected trailing input"));
        }
        Ok(expr)
    }

    pub fn constant(value: f64) -> Self {
        Expr::Const(value)
    }

    pub fn has_vars(&self) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(_) => true,
            Expr::Neg(e) | Expr::Call(_, e) => e.has_vars(),
            Expr::Binary(_, a, b) => a.has_vars() || b.has_vars(),
        }
    }

    pub fn eval<S: Scalar>(&self, x: S, y: S) -> Result<S, EvalError> {
        let v = self.eval_inner(x, y)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    fn eval_inner<S: Scalar>(&self, x: S, y: S) -> Result<S, EvalError> {
        Ok(match self {
            Expr::Const(c) => S::lit(*c),
            Expr::Var(Var::X) => x,
            Expr::Var(Var::Y) => y,
            Expr::Neg(e) => -e.eval_inner(x, y)?,
            Expr::Binary(op, a, b) => {
                let a = a.eval_inner(x, y)?;
                let b = b.eval_inner(x, y)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == S::zero() {
                            return Err(EvalError::DivisionByZero);
                        }
                        a / b
                    }
                    BinOp::Pow => pow(a, b)?,
                }
            }
            Expr::Call(f, e) => {
                let a = e.eval_inner(x, y)?;
                match f {
                    Func::Exp => a.exp(),
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Sqrt => {
                        if a < S::zero() {
                            return Err(EvalError::SqrtDomain(a.as_f64()));
                        }
                        a.sqrt()
                    }
                    Func::Log => {
                        if a <= S::zero() {
                            return Err(EvalError::LogDomain(a.as_f64()));
                        }
                        a.ln()
                    }
                }
            }
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Neg(_) => UNARY_PRECEDENCE,
            _ => u8::MAX,
        }
    }
}

fn pow<S: Scalar>(base: S, exponent: S) -> Result<S, EvalError> {
    if exponent.fract() == S::zero() && exponent.abs() <= S::lit(i32::MAX as f64) {
        if base == S::zero() && exponent < S::zero() {
            return Err(EvalError::DivisionByZero);
        }
        return Ok(base.powi(exponent.to_i32().unwrap_or_default()));
    }
    if base < S::zero() {
        return Err(EvalError::PowDomain {
            base: base.as_f64(),
            exponent: exponent.as_f64(),
        });
    }
    if base == S::zero() {
        return if exponent > S::zero() {
            Ok(S::zero())
        } else {
            Err(EvalError::DivisionByZero)
        };
    }
    Ok((exponent * base.ln()).exp())
}

impl FromStr for Expr {
    type Err = SyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expr::parse(s)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(Var::X) => f.write_str("x"),
            Expr::Var(Var::Y) => f.write_str("y"),
            Expr::Neg(e) => {
                f.write_str("-")?;
                write_operand(f, e, e.precedence() < UNARY_PRECEDENCE)
            }
            Expr::Binary(op, a, b) => {
                let p = op.precedence();
                let (left_parens, right_parens) = if *op == BinOp::Pow {
                    (a.precedence() <= p, b.precedence() < UNARY_PRECEDENCE)
                } else {
                    (a.precedence() < p, b.precedence() <= p)
                };
                write_operand(f, a, left_parens)?;
                write!(f, "{}", op.symbol())?;
                write_operand(f, b, right_parens)
            }
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
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

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, message: impl Into<String>) -> SyntaxError {
        SyntaxError {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn sum(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Some('+') => BinOp::Add,
                Some('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.product()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some('*') => BinOp::Mul,
                Some('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, SyntaxError> {
        let base = self.primary()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let at = self.pos;
        let exponent = self.unary()?;
        if exponent.has_vars() {
            return Err(SyntaxError {
                offset: at,
                message: "exponent must be a constant".into(),
            });
        }
        Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)))
    }

    fn primary(&mut self) -> Result<Expr, SyntaxError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some('(') => {
                self.pos += 1;
                let inner = self.sum()?;
                if !self.eat(')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.identifier(),
            Some(c) => Err(self.error(format!("unexpected '{c}'"))),
        }
    }

    fn number(&mut self) -> Result<Expr, SyntaxError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut end = start;
        while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
            end += 1;
        }
        if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
            let mut k = end + 1;
            if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                k += 1;
            }
            if k < bytes.len() && bytes[k].is_ascii_digit() {
                while k < bytes.len() && bytes[k].is_ascii_digit() {
                    k += 1;
                }
                end = k;
            }
        }
        let value = self.src[start..end]
            .parse::<f64>()
            .map_err(|_| SyntaxError {
                offset: start,
                message: format!("malformed number '{}'", &self.src[start..end]),
            })?;
        self.pos = end;
        Ok(Expr::Const(value))
    }

    fn identifier(&mut self) -> Result<Expr, SyntaxError> {
        let start = self.pos;
        let len = self.src[start..]
            .find(|c: char| !c.is_ascii_alphanumeric() && c != '_')
            .unwrap_or(self.src.len() - start);
        let name = &self.src[start..start + len];
        self.pos += len;
        match name {
            "x" => return Ok(Expr::Var(Var::X)),
            "y" => return Ok(Expr::Var(Var::Y)),
            _ => {}
        }
        let func = Func::from_name(name).ok_or(SyntaxError {
            offset: start,
            message: format!("unknown identifier '{name}'"),
        })?;
        if !self.eat('(') {
            return Err(self.error(format!("expected '(' after {name}")));
        }
        let arg = self.sum()?;
        if !self.eat(')') {
            return Err(self.error("expected ')'"));
        }
        Ok(Expr::Call(func, Box::new(arg)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bx(e: Expr) -> Box<Expr> {
        Box::new(e)
    }

    #[test]
    fn parses_permittivity() {
        use BinOp::*;
        let ast = Expr::parse("2*exp(x+y+2)").unwrap();
        let want = Expr::Binary(
            Mul,
            bx(Expr::Const(2.0)),
            bx(Expr::Call(
                Func::Exp,
                bx(Expr::Binary(
                    Add,
                    bx(Expr::Binary(
                        Add,
                        bx(Expr::Var(Var::X)),
                        bx(Expr::Var(Var::Y)),
                    )),
                    bx(Expr::Const(2.0)),
                )),
            )),
        );
        assert_eq!(ast, want);
    }

    #[test]
    fn parses_boundary_curve() {
        let g = Expr::parse("0.2*(y^2-1)^2+1").unwrap();
        assert_relative_eq!(g.eval(0.0, 0.0).unwrap(), 1.2);
        assert_relative_eq!(g.eval(0.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn dangling_operator_offset() {
        let err = Expr::parse("x+*y").unwrap_err();
        assert_eq!(err.offset, 2);
    }

    #[test]
    fn syntax_errors() {
        assert_eq!(Expr::parse("(x+1").unwrap_err().offset, 4);
        assert_eq!(Expr::parse("x+z").unwrap_err().offset, 2);
        assert_eq!(Expr::parse("foo(x)").unwrap_err().offset, 0);
        assert_eq!(Expr::parse("x-").unwrap_err().offset, 2);
        assert_eq!(Expr::parse("x)").unwrap_err().offset, 1);
        assert!(Expr::parse("2x").is_err());
        assert!(Expr::parse("x^y").is_err());
        assert!(Expr::parse("").is_err());
    }

    #[test]
    fn precedence_and_associativity() {
        let e = |s: &str| Expr::parse(s).unwrap().eval(2.0, 3.0).unwrap();
        assert_eq!(e("-x^2"), -4.0);
        assert_eq!(e("2^3^2"), 512.0);
        assert_eq!(e("8-3-2"), 3.0);
        assert_eq!(e("8/4/2"), 1.0);
        assert_eq!(e("1+2*3^2"), 19.0);
        assert_eq!(e("x^-1"), 0.5);
        assert_eq!(e("1.5e1+x"), 17.0);
    }

    #[test]
    fn evaluation_examples() {
        let eps = Expr::parse("2*exp(x+y+2)").unwrap();
        assert_eq!(eps.eval(-1.0, -1.0).unwrap(), 2.0);
        assert_relative_eq!(
            eps.eval(0.0, 0.0).unwrap(),
            14.7781121978613,
            epsilon = 1e-13
        );
        assert_eq!(Expr::parse("x*y").unwrap().eval(3.0, 4.0).unwrap(), 12.0);
    }

    #[test]
    fn domain_errors() {
        let ev = |s: &str, x: f64| Expr::parse(s).unwrap().eval(x, 0.0);
        assert_eq!(ev("1/x", 0.0), Err(EvalError::DivisionByZero));
        assert_eq!(ev("log(x)", 0.0), Err(EvalError::LogDomain(0.0)));
        assert_eq!(ev("sqrt(x)", -1.0), Err(EvalError::SqrtDomain(-1.0)));
        assert!(matches!(
            ev("x^0.5", -4.0),
            Err(EvalError::PowDomain { .. })
        ));
        assert_eq!(ev("x^0.5", 4.0), Ok(2.0));
        assert_eq!(ev("exp(x)", 1000.0), Err(EvalError::NonFinite));
    }

    #[test]
    fn paper_curves_match_closures() {
        let eps = Expr::parse("2*exp(x+y+2)").unwrap();
        let f = Expr::parse("-0.2*(x^2-1)^2+1").unwrap();
        let g = Expr::parse("0.2*(y^2-1)^2+1").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let x: f64 = rng.gen_range(-1.5..1.5);
            let y: f64 = rng.gen_range(-1.5..1.5);
            let want_eps = 2.0 * (x + y + 2.0).exp();
            let want_f = -0.2 * (x * x - 1.0).powi(2) + 1.0;
            let want_g = 0.2 * (y * y - 1.0).powi(2) + 1.0;
            assert!((eps.eval(x, y).unwrap() - want_eps).abs() <= 1e-15 * want_eps.abs());
            assert!((f.eval(x, y).unwrap() - want_f).abs() <= 1e-15);
            assert!((g.eval(x, y).unwrap() - want_g).abs() <= 1e-15);
        }
    }

    fn random_expr(rng: &mut ChaCha8Rng, depth: u32) -> Expr {
        if depth == 0 || rng.gen_bool(0.25) {
            return match rng.gen_range(0..3) {
                0 => Expr::Var(Var::X),
                1 => Expr::Var(Var::Y),
                _ => Expr::Const((rng.gen_range(0.0..10.0f64) * 100.0).round() / 100.0),
            };
        }
        match rng.gen_range(0..4) {
            0 => Expr::Neg(bx(random_expr(rng, depth - 1))),
            1 => {
                let f =
                    [Func::Exp, Func::Sin, Func::Cos, Func::Sqrt, Func::Log][rng.gen_range(0..5)];
                Expr::Call(f, bx(random_expr(rng, depth - 1)))
            }
            2 => Expr::Binary(
                BinOp::Pow,
                bx(random_expr(rng, depth - 1)),
                bx(Expr::Const(rng.gen_range(0..4) as f64)),
            ),
            _ => {
                let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div][rng.gen_range(0..4)];
                Expr::Binary(
                    op,
                    bx(random_expr(rng, depth - 1)),
                    bx(random_expr(rng, depth - 1)),
                )
            }
        }
    }

    #[test]
    fn display_round_trips_corpus() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut corpus: Vec<Expr> = [
            "2*exp(x+y+2)",
            "-0.2*(x^2-1)^2+1",
            "0.2*(y^2-1)^2+1",
            "-(x-y)",
            "(-x)^2",
            "2^3^2",
            "(2^3)^2",
            "x-(y-1)",
            "x/(y*2)",
            "x^-2",
        ]
        .iter()
        .map(|s| Expr::parse(s).unwrap())
        .collect();
        while corpus.len() < 50 {
            corpus.push(random_expr(&mut rng, 5));
        }
        for e in &corpus {
            let printed = e.to_string();
            let back = Expr::parse(&printed).unwrap_or_else(|err| panic!("{printed}: {err}"));
            assert_eq!(&back, e, "{printed}");
        }
    }

    proptest! {
        #[test]
        fn parse_never_panics(s in "[xy0-9.+*/^() e-]{0,24}") {
            let _ = Expr::parse(&s);
        }
    }
}
