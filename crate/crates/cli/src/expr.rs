//! Closed-form expressions for weight functions on the torus.
//!
//! The grammar is deliberately small so that test problems stay readable
//! inside configuration files:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary ('*' unary)*
//! unary  := '-' unary | atom
//! atom   := NUMBER | 'pi' | 'x' | 'y'
//!         | ('cos' | 'sin' | 'exp') '(' expr ')'
//!         | '(' expr ')'
//! ```
//!
//! `x` and `y` are the torus coordinates in `[0, 1)`; `pi` is the usual
//! constant, so `1 + 0.5*cos(2*pi*x)` is a one-mode weight.

use mfe_torus::{Result as TorusResult, TorusError, TorusField, TorusGrid};

/// A parsed expression tree.
#[derive(Debug, Clone)]
pub enum Expr {
    Num(f64),
    X,
    Y,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Cos(Box<Expr>),
    Sin(Box<Expr>),
    Exp(Box<Expr>),
}

impl Expr {
    /// Evaluate at a point of the unit torus.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Expr::Num(c) => *c,
            Expr::X => x,
            Expr::Y => y,
            Expr::Neg(e) => -e.eval(x, y),
            Expr::Add(a, b) => a.eval(x, y) + b.eval(x, y),
            Expr::Sub(a, b) => a.eval(x, y) - b.eval(x, y),
            Expr::Mul(a, b) => a.eval(x, y) * b.eval(x, y),
            Expr::Cos(e) => e.eval(x, y).cos(),
            Expr::Sin(e) => e.eval(x, y).sin(),
            Expr::Exp(e) => e.eval(x, y).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<Token>, String> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push(Token::Plus);
                i += 1;
            }
            '-' => {
                out.push(Token::Minus);
                i += 1;
            }
            '*' => {
                out.push(Token::Star);
                i += 1;
            }
            '(' => {
                out.push(Token::LParen);
                i += 1;
            }
            ')' => {
                out.push(Token::RParen);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                // Accept an exponent suffix like 1e-3.
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let lit: String = chars[start..i].iter().collect();
                let v: f64 = lit
                    .parse()
                    .map_err(|_| format!("malformed number `{lit}`"))?;
                out.push(Token::Num(v));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Token::Ident(chars[start..i].iter().collect()));
            }
            other => return Err(format!("unexpected character `{other}`")),
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: &Token, what: &str) -> Result<(), String> {
        match self.next() {
            Some(ref got) if got == t => Ok(()),
            Some(got) => Err(format!("expected {what}, found {got:?}")),
            None => Err(format!("expected {what}, found end of input")),
        }
    }

    fn expr(&mut self) -> Result<Expr, String> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.next();
                    let rhs = self.term()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(Token::Minus) => {
                    self.next();
                    let rhs = self.term()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, String> {
        let mut lhs = self.unary()?;
        while matches!(self.peek(), Some(Token::Star)) {
            self.next();
            let rhs = self.unary()?;
            lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, String> {
        if matches!(self.peek(), Some(Token::Minus)) {
            self.next();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, String> {
        match self.next() {
            Some(Token::Num(v)) => Ok(Expr::Num(v)),
            Some(Token::LParen) => {
                let inner = self.expr()?;
                self.expect(&Token::RParen, "`)`")?;
                Ok(inner)
            }
            Some(Token::Ident(name)) => match name.as_str() {
                "x" => Ok(Expr::X),
                "y" => Ok(Expr::Y),
                "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                "cos" | "sin" | "exp" => {
                    self.expect(&Token::LParen, "`(` after function name")?;
                    let arg = self.expr()?;
                    self.expect(&Token::RParen, "`)`")?;
                    Ok(match name.as_str() {
                        "cos" => Expr::Cos(Box::new(arg)),
                        "sin" => Expr::Sin(Box::new(arg)),
                        _ => Expr::Exp(Box::new(arg)),
                    })
                }
                other => Err(format!(
                    "unknown identifier `{other}` (expected x, y, pi, cos, sin, exp)"
                )),
            },
            Some(t) => Err(format!("unexpected token {t:?}")),
            None => Err("unexpected end of input".to_string()),
        }
    }
}

/// Parse an expression source string.
pub fn parse(src: &str) -> Result<Expr, String> {
    let tokens = tokenize(src)?;
    if tokens.is_empty() {
        return Err("empty expression".to_string());
    }
    let mut p = Parser { tokens, pos: 0 };
    let e = p.expr()?;
    if p.pos != p.tokens.len() {
        return Err(format!("trailing input after expression at token {}", p.pos));
    }
    Ok(e)
}

/// Sample an expression on a grid. Non-finite values are rejected so that
/// weight fields stay usable downstream.
pub fn field_from_expr(grid: TorusGrid, src: &str) -> TorusResult<TorusField> {
    let expr = parse(src).map_err(|e| TorusError::Format(format!("in `{src}`: {e}")))?;
    let field = TorusField::from_fn(grid, |x, y| expr.eval(x, y));
    if field.values().iter().any(|v| !v.is_finite()) {
        return Err(TorusError::Format(format!(
            "expression `{src}` evaluates to a non-finite value on the grid"
        )));
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(src: &str, x: f64, y: f64) -> f64 {
        parse(src).unwrap().eval(x, y)
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(eval("1+2*3", 0.0, 0.0), 7.0);
        assert_eq!(eval("(1+2)*3", 0.0, 0.0), 9.0);
        assert_eq!(eval("2-3-4", 0.0, 0.0), -5.0);
        assert_eq!(eval("-2*3", 0.0, 0.0), -6.0);
        assert_eq!(eval("1e-3", 0.0, 0.0), 1e-3);
    }

    #[test]
    fn coordinates_functions_and_pi() {
        assert!((eval("1+0.5*cos(2*pi*x)", 0.0, 0.3) - 1.5).abs() < 1e-15);
        assert!((eval("1+0.5*cos(2*pi*x)", 0.5, 0.3) - 0.5).abs() < 1e-15);
        assert!((eval("sin(2*pi*y)", 0.0, 0.25) - 1.0).abs() < 1e-15);
        let v = eval("exp(0.3*cos(2*pi*x)+0.2*cos(2*pi*y))", 0.0, 0.0);
        assert!((v - (0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        for bad in [
            "", "x+", "foo(x)", "(1+2", "1..2", "2x", "cos x", "x/y", "1 2",
        ] {
            assert!(parse(bad).is_err(), "`{bad}` should fail");
        }
    }

    #[test]
    fn sampling_rejects_non_finite_values() {
        let grid = TorusGrid::new(8).unwrap();
        assert!(field_from_expr(grid, "exp(exp(exp(exp(100))))").is_err());
        let f = field_from_expr(grid, "1+0.5*cos(2*pi*x)").unwrap();
        assert!((f.at(0, 0) - 1.5).abs() < 1e-15);
    }
}
