//! Expression grammar for symbols and operator coefficients.
//!
//! Rational expressions in the space variables `x, x2, rho, rho2` and the
//! frequency variables `xi, xi2, eta, eta2`, plus `exp(..)` and `sqrt(..)`,
//! integer powers with `^`, and the usual arithmetic.  Whitespace is
//! ignored; input must be ASCII.  `x1`, `rho1`, `xi1`, `eta1` are accepted
//! as aliases of the unsuffixed names.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := '-' factor | primary ('^' int)?
//! primary:= number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! Frequency variables evaluate to complex numbers so that meromorphic
//! symbols can be probed off the real axis; space variables are real.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A variable slot: index into the space point or the frequency vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    Space(usize),
    Freq(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, i32),
    Exp(Box<Expr>),
    Sqrt(Box<Expr>),
}

/// Resolves variable names to slots for a grid signature with `n_tangential`
/// tangential and `n_normal` normal axes.  Space slots are ordered
/// tangential-then-normal, matching [`crate::grid::Grid`].
#[derive(Debug, Clone, Copy)]
pub struct Binding {
    pub n_tangential: usize,
    pub n_normal: usize,
}

impl Binding {
    pub fn new(n_tangential: usize, n_normal: usize) -> Self {
        Binding { n_tangential, n_normal }
    }

    fn resolve(&self, name: &str) -> Result<Var> {
        let (base, index) = split_name(name)?;
        let i = index.unwrap_or(1);
        if i == 0 {
            return Err(Error::Expr(format!("variable indices start at 1: {name}")));
        }
        let i = i - 1;
        let var = match base {
            "x" => {
                if i >= self.n_tangential {
                    return Err(Error::Expr(format!("no tangential axis for {name}")));
                }
                Var::Space(i)
            }
            "rho" => {
                if i >= self.n_normal {
                    return Err(Error::Expr(format!("no normal axis for {name}")));
                }
                Var::Space(self.n_tangential + i)
            }
            "xi" => {
                if i >= self.n_tangential {
                    return Err(Error::Expr(format!("no tangential axis for {name}")));
                }
                Var::Freq(i)
            }
            "eta" => {
                if i >= self.n_normal {
                    return Err(Error::Expr(format!("no normal axis for {name}")));
                }
                Var::Freq(self.n_tangential + i)
            }
            _ => return Err(Error::Expr(format!("unknown variable {name}"))),
        };
        Ok(var)
    }
}

fn split_name(name: &str) -> Result<(&str, Option<usize>)> {
    let split = name.find(|c: char| c.is_ascii_digit());
    match split {
        None => Ok((name, None)),
        Some(pos) => {
            let (base, digits) = name.split_at(pos);
            let idx: usize = digits
                .parse()
                .map_err(|_| Error::Expr(format!("bad variable index in {name}")))?;
            Ok((base, Some(idx)))
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    binding: Binding,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        Some(c)
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        match self.bump() {
            Some(got) if got == c => Ok(()),
            other => Err(Error::Expr(format!(
                "expected '{}' got {:?} at byte {}",
                c as char, other.map(|b| b as char), self.pos
            ))),
        }
    }

    fn parse_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.parse_term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.bump();
                    let rhs = self.parse_term()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(b'-') => {
                    self.bump();
                    let rhs = self.parse_term()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_term(&mut self) -> Result<Expr> {
        let mut lhs = self.parse_factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.bump();
                    let rhs = self.parse_factor()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some(b'/') => {
                    self.bump();
                    let rhs = self.parse_factor()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_factor(&mut self) -> Result<Expr> {
        if self.peek() == Some(b'-') {
            self.bump();
            let inner = self.parse_factor()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        let base = self.parse_primary()?;
        if self.peek() == Some(b'^') {
            self.bump();
            let mut neg = false;
            if self.peek() == Some(b'-') {
                self.bump();
                neg = true;
            }
            let digits = self.take_while(|c| c.is_ascii_digit());
            if digits.is_empty() {
                return Err(Error::Expr("expected integer exponent after '^'".into()));
            }
            let mut e: i32 = digits
                .parse()
                .map_err(|_| Error::Expr("exponent out of range".into()))?;
            if neg {
                e = -e;
            }
            return Ok(Expr::Pow(Box::new(base), e));
        }
        Ok(base)
    }

    fn take_while(&mut self, pred: impl Fn(u8) -> bool) -> String {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && pred(self.src[self.pos]) {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn parse_primary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.bump();
                let inner = self.parse_expr()?;
                self.expect(b')')?;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let num = self.take_while(|c| c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E');
                // allow exponent signs like 1e-3
                let mut text = num;
                if text.ends_with('e') || text.ends_with('E') {
                    if let Some(sign) = self.peek() {
                        if sign == b'+' || sign == b'-' {
                            self.bump();
                            text.push(sign as char);
                            text += &self.take_while(|c| c.is_ascii_digit());
                        }
                    }
                }
                let v: f64 = text
                    .parse()
                    .map_err(|_| Error::Expr(format!("bad number literal {text}")))?;
                Ok(Expr::Num(v))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let name = self.take_while(|c| c.is_ascii_alphanumeric());
                match name.as_str() {
                    "exp" | "sqrt" => {
                        self.expect(b'(')?;
                        let inner = self.parse_expr()?;
                        self.expect(b')')?;
                        Ok(match name.as_str() {
                            "exp" => Expr::Exp(Box::new(inner)),
                            _ => Expr::Sqrt(Box::new(inner)),
                        })
                    }
                    "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                    _ => Ok(Expr::Var(self.binding.resolve(&name)?)),
                }
            }
            other => Err(Error::Expr(format!(
                "unexpected input {:?} at byte {}",
                other.map(|b| b as char),
                self.pos
            ))),
        }
    }
}

/// Parse an expression against a grid signature.
pub fn parse(src: &str, binding: Binding) -> Result<Expr> {
    if !src.is_ascii() {
        return Err(Error::Expr("expressions must be ASCII".into()));
    }
    let mut p = Parser { src: src.as_bytes(), pos: 0, binding };
    let e = p.parse_expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(Error::Expr(format!("trailing input at byte {}", p.pos)));
    }
    Ok(e)
}

impl Expr {
    /// Evaluate with a real space point and complex frequencies.
    pub fn eval(&self, space: &[f64], freq: &[Complex64]) -> Complex64 {
        match self {
            Expr::Num(v) => Complex64::new(*v, 0.0),
            Expr::Var(Var::Space(i)) => Complex64::new(space[*i], 0.0),
            Expr::Var(Var::Freq(i)) => freq[*i],
            Expr::Add(a, b) => a.eval(space, freq) + b.eval(space, freq),
            Expr::Sub(a, b) => a.eval(space, freq) - b.eval(space, freq),
            Expr::Mul(a, b) => a.eval(space, freq) * b.eval(space, freq),
            Expr::Div(a, b) => a.eval(space, freq) / b.eval(space, freq),
            Expr::Neg(a) => -a.eval(space, freq),
            Expr::Pow(a, e) => a.eval(space, freq).powi(*e),
            Expr::Exp(a) => a.eval(space, freq).exp(),
            Expr::Sqrt(a) => a.eval(space, freq).sqrt(),
        }
    }

    /// Exact symbolic derivative with respect to a variable slot.
    pub fn derivative(&self, var: Var) -> Expr {
        use Expr::*;
        match self {
            Num(_) => Num(0.0),
            Var(v) => {
                if *v == var {
                    Num(1.0)
                } else {
                    Num(0.0)
                }
            }
            Add(a, b) => Add(Box::new(a.derivative(var)), Box::new(b.derivative(var))).simplify(),
            Sub(a, b) => Sub(Box::new(a.derivative(var)), Box::new(b.derivative(var))).simplify(),
            Mul(a, b) => Add(
                Box::new(Mul(Box::new(a.derivative(var)), b.clone()).simplify()),
                Box::new(Mul(a.clone(), Box::new(b.derivative(var))).simplify()),
            )
            .simplify(),
            Div(a, b) => Div(
                Box::new(
                    Sub(
                        Box::new(Mul(Box::new(a.derivative(var)), b.clone()).simplify()),
                        Box::new(Mul(a.clone(), Box::new(b.derivative(var))).simplify()),
                    )
                    .simplify(),
                ),
                Box::new(Pow(b.clone(), 2)),
            )
            .simplify(),
            Neg(a) => Neg(Box::new(a.derivative(var))).simplify(),
            Pow(a, e) => Mul(
                Box::new(Mul(Box::new(Num(*e as f64)), Box::new(Pow(a.clone(), e - 1))).simplify()),
                Box::new(a.derivative(var)),
            )
            .simplify(),
            Exp(a) => Mul(Box::new(a.derivative(var)), Box::new(Exp(a.clone()))).simplify(),
            Sqrt(a) => Div(
                Box::new(a.derivative(var)),
                Box::new(Mul(Box::new(Num(2.0)), Box::new(Sqrt(a.clone()))).simplify()),
            )
            .simplify(),
        }
    }

    fn simplify(self) -> Expr {
        use Expr::*;
        match self {
            Add(a, b) => match (*a, *b) {
                (Num(x), Num(y)) => Num(x + y),
                (Num(z), e) | (e, Num(z)) if z == 0.0 => e,
                (a, b) => Add(Box::new(a), Box::new(b)),
            },
            Sub(a, b) => match (*a, *b) {
                (Num(x), Num(y)) => Num(x - y),
                (e, Num(z)) if z == 0.0 => e,
                (a, b) => Sub(Box::new(a), Box::new(b)),
            },
            Mul(a, b) => match (*a, *b) {
                (Num(x), Num(y)) => Num(x * y),
                (Num(z), _) | (_, Num(z)) if z == 0.0 => Num(0.0),
                (Num(o), e) | (e, Num(o)) if o == 1.0 => e,
                (a, b) => Mul(Box::new(a), Box::new(b)),
            },
            Div(a, b) => match (*a, *b) {
                (Num(z), _) if z == 0.0 => Num(0.0),
                (e, Num(o)) if o == 1.0 => e,
                (a, b) => Div(Box::new(a), Box::new(b)),
            },
            Neg(a) => match *a {
                Num(x) => Num(-x),
                e => Neg(Box::new(e)),
            },
            Pow(a, e) => match (&*a, e) {
                (_, 0) => Num(1.0),
                (_, 1) => *a,
                _ => Pow(a, e),
            },
            e => e,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn parses_and_evaluates_rational_symbol() {
        let b = Binding::new(1, 1);
        let e = parse("1/(1+xi^2+eta^2)", b).unwrap();
        let v = e.eval(&[0.0, 0.0], &[c(1.0), c(1.0)]);
        assert!((v - c(1.0 / 3.0)).norm() < 1e-15);
    }

    #[test]
    fn whitespace_insensitive() {
        let b = Binding::new(1, 1);
        let e1 = parse("  eta / ( 1 + xi ^ 2 + eta ^ 2 )", b).unwrap();
        let e2 = parse("eta/(1+xi^2+eta^2)", b).unwrap();
        let p = [0.3, -0.2];
        let f = [c(0.7), Complex64::new(0.1, 0.4)];
        assert!((e1.eval(&p, &f) - e2.eval(&p, &f)).norm() < 1e-15);
    }

    #[test]
    fn exp_sqrt_and_negative_powers() {
        let b = Binding::new(1, 1);
        let e = parse("exp(-xi^2)*sqrt(1+eta^2)+2*(1+xi^2)^-1", b).unwrap();
        let v = e.eval(&[0.0, 0.0], &[c(0.0), c(0.0)]);
        assert!((v - c(3.0)).norm() < 1e-15);
    }

    #[test]
    fn wedge_variables_resolve() {
        let b = Binding::new(1, 2);
        let e = parse("rho1*rho2+x*eta2-eta1", b).unwrap();
        // space = [x, rho1, rho2], freq = [xi, eta1, eta2]
        let v = e.eval(&[2.0, 3.0, 4.0], &[c(0.0), c(5.0), c(7.0)]);
        assert!((v - c(3.0 * 4.0 + 2.0 * 7.0 - 5.0)).norm() < 1e-15);
    }

    #[test]
    fn rejects_unknown_and_out_of_range() {
        let b = Binding::new(1, 1);
        assert!(parse("foo+1", b).is_err());
        assert!(parse("eta2", b).is_err());
        assert!(parse("1+", b).is_err());
        assert!(parse("(1+xi", b).is_err());
    }

    #[test]
    fn symbolic_eta_derivative_matches_calculus() {
        // d/d eta of 1/(1+xi^2+eta^2) = -2 eta / (1+xi^2+eta^2)^2
        let b = Binding::new(1, 1);
        let e = parse("1/(1+xi^2+eta^2)", b).unwrap();
        let d = e.derivative(Var::Freq(1));
        let v = d.eval(&[0.0, 0.0], &[c(0.0), c(1.0)]);
        assert!((v - c(-2.0 / 4.0)).norm() < 1e-14);
    }

    #[test]
    fn derivative_of_eta_free_symbol_vanishes() {
        let b = Binding::new(1, 1);
        let e = parse("exp(-xi^2)*(1+x^2)", b).unwrap();
        let d = e.derivative(Var::Freq(1));
        let v = d.eval(&[1.3, 0.0], &[c(2.0), c(5.0)]);
        assert!(v.norm() < 1e-15);
    }
}
