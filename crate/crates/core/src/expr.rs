//! Arithmetic expression parser/evaluator for user-defined coefficient fields.
//!
//! Grammar:
//!   expr   := term (('+'|'-') term)*
//!   term   := factor (('*'|'/') factor)*
//!   factor := base ('^' factor)?
//!   base   := number | ident | ident '(' expr ')' | '(' expr ')' | '-' base
//!
//! Variables: x1, x2, y1, y2. Constants: pi, e.
//! Functions: sin, cos, exp, arcsin, abs.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X1,
    X2,
    Y1,
    Y2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Arcsin,
    Abs,
}

#[derive(Debug, Clone)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::X1) => x[0],
            Expr::Var(Var::X2) => x[1],
            Expr::Var(Var::Y1) => y[0],
            Expr::Var(Var::Y2) => y[1],
            Expr::Neg(a) => -a.eval(x, y),
            Expr::Add(a, b) => a.eval(x, y) + b.eval(x, y),
            Expr::Sub(a, b) => a.eval(x, y) - b.eval(x, y),
            Expr::Mul(a, b) => a.eval(x, y) * b.eval(x, y),
            Expr::Div(a, b) => a.eval(x, y) / b.eval(x, y),
            Expr::Pow(a, b) => a.eval(x, y).powf(b.eval(x, y)),
            Expr::Call(f, a) => {
                let v = a.eval(x, y);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Arcsin => v.asin(),
                    Func::Abs => v.abs(),
                }
            }
        }
    }

    /// True if any subexpression references the given variable.
    pub fn uses(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(a) | Expr::Call(_, a) => a.uses(var),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.uses(var) || b.uses(var),
        }
    }
}

pub fn parse(input: &str) -> Result<Expr> {
    let mut p = Parser {
        input,
        bytes: input.as_bytes(),
        pos: 0,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    input: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, msg: &str) -> Error {
        Error::Parse {
            msg: msg.into(),
            offset: self.pos,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.base()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.factor()?; // right-associative
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.base()?)))
            }
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            _ => Err(self.error("expected number, identifier, or '('")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_digit() || self.bytes[self.pos] == b'.')
        {
            self.pos += 1;
        }
        // Exponent suffix like 1e-3.
        if self.pos < self.bytes.len()
            && (self.bytes[self.pos] == b'e' || self.bytes[self.pos] == b'E')
        {
            let mut probe = self.pos + 1;
            if probe < self.bytes.len() && (self.bytes[probe] == b'+' || self.bytes[probe] == b'-')
            {
                probe += 1;
            }
            if probe < self.bytes.len() && self.bytes[probe].is_ascii_digit() {
                self.pos = probe;
                while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        self.input[start..self.pos]
            .parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| Error::Parse {
                msg: format!("bad number {:?}", &self.input[start..self.pos]),
                offset: start,
            })
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = &self.input[start..self.pos];
        if self.peek() == Some(b'(') {
            let func = match name {
                "sin" => Func::Sin,
                "cos" => Func::Cos,
                "exp" => Func::Exp,
                "arcsin" => Func::Arcsin,
                "abs" => Func::Abs,
                _ => {
                    return Err(Error::Parse {
                        msg: format!("unknown function {:?}", name),
                        offset: start,
                    })
                }
            };
            self.pos += 1;
            let arg = self.expr()?;
            if self.peek() != Some(b')') {
                return Err(self.error("expected ')'"));
            }
            self.pos += 1;
            return Ok(Expr::Call(func, Box::new(arg)));
        }
        match name {
            "pi" => Ok(Expr::Num(std::f64::consts::PI)),
            "e" => Ok(Expr::Num(std::f64::consts::E)),
            "x1" => Ok(Expr::Var(Var::X1)),
            "x2" => Ok(Expr::Var(Var::X2)),
            "y1" => Ok(Expr::Var(Var::Y1)),
            "y2" => Ok(Expr::Var(Var::Y2)),
            _ => Err(Error::Parse {
                msg: format!("unknown identifier {:?}", name),
                offset: start,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: [f64; 2], y: [f64; 2]) -> f64 {
        parse(s).unwrap().eval(x, y)
    }

    #[test]
    fn basic_arithmetic() {
        assert_eq!(ev("1+2*3", [0.0; 2], [0.0; 2]), 7.0);
        assert_eq!(ev("(1+2)*3", [0.0; 2], [0.0; 2]), 9.0);
        assert_eq!(ev("2^3^2", [0.0; 2], [0.0; 2]), 512.0); // right-assoc
        assert_eq!(ev("-2^2", [0.0; 2], [0.0; 2]), 4.0); // (-2)^2 per grammar
        assert_eq!(ev("1/4", [0.0; 2], [0.0; 2]), 0.25);
    }

    #[test]
    fn variables_and_functions() {
        let v = ev("2+sin(pi*y1)^2", [0.0; 2], [0.5, 0.0]);
        assert!((v - 3.0).abs() < 1e-14);
        let v = ev("2+x2*cos(2*pi*y2+x1)", [0.0, 1.0], [0.7, 0.0]);
        assert!((v - 3.0).abs() < 1e-14);
        let v = ev("arcsin(sin(pi*y1)^2)", [0.0; 2], [0.25, 0.0]);
        assert!((v - 0.5f64.asin()).abs() < 1e-14);
        assert_eq!(ev("abs(-3)", [0.0; 2], [0.0; 2]), 3.0);
        assert!((ev("exp(1)", [0.0; 2], [0.0; 2]) - std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn scientific_notation() {
        assert_eq!(ev("1e-3", [0.0; 2], [0.0; 2]), 1e-3);
        assert_eq!(ev("2.5E2", [0.0; 2], [0.0; 2]), 250.0);
    }

    #[test]
    fn error_offsets() {
        match parse("1 + foo") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("expected parse error, got {:?}", other),
        }
        match parse("sin(1") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("expected parse error, got {:?}", other),
        }
        match parse("1 2") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("expected parse error, got {:?}", other),
        }
        match parse("bogus(1)") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("expected parse error, got {:?}", other),
        }
    }

    #[test]
    fn uses_detects_variables() {
        let e = parse("x1 + sin(y2)").unwrap();
        assert!(e.uses(Var::X1));
        assert!(e.uses(Var::Y2));
        assert!(!e.uses(Var::X2));
        assert!(!e.uses(Var::Y1));
    }
}
