//! Budget formulas: expressions in `n` built from numeric literals, `+`, `*`,
//! `ln(...)` and parentheses, e.g. `500*n*ln(n)`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormulaError {
    #[error("unexpected {found} at offset {offset}")]
    Unexpected { found: String, offset: usize },
    #[error("bad number {0:?}")]
    BadNumber(String),
    #[error("formula evaluates to {value} at n = {n}; budgets must be positive and finite")]
    NotPositive { n: u64, value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
enum Expr {
    Num(f64),
    N,
    Ln(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
}

impl Expr {
    fn eval(&self, n: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::N => n,
            Expr::Ln(e) => e.eval(n).ln(),
            Expr::Add(a, b) => a.eval(n) + b.eval(n),
            Expr::Mul(a, b) => a.eval(n) * b.eval(n),
        }
    }
}

/// Parsed budget formula. Displays as the original text.
#[derive(Debug, Clone, PartialEq)]
pub struct Formula {
    text: String,
    expr: Expr,
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(String),
    N,
    Ln,
    Plus,
    Star,
    Open,
    Close,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, FormulaError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let ch = bytes[i];
        match ch {
            b' ' | b'\t' => i += 1,
            b'+' => {
                out.push((Tok::Plus, i));
                i += 1;
            }
            b'*' => {
                out.push((Tok::Star, i));
                i += 1;
            }
            b'(' => {
                out.push((Tok::Open, i));
                i += 1;
            }
            b')' => {
                out.push((Tok::Close, i));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                // Optional exponent such as 1e6.
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
                out.push((Tok::Num(text[start..i].to_string()), start));
            }
            b'n' if !text[i + 1..].starts_with(|c: char| c.is_ascii_alphanumeric()) => {
                out.push((Tok::N, i));
                i += 1;
            }
            b'l' if text[i..].starts_with("ln") => {
                out.push((Tok::Ln, i));
                i += 2;
            }
            _ => {
                let found = text[i..].chars().next().unwrap_or('?');
                return Err(FormulaError::Unexpected {
                    found: format!("{found:?}"),
                    offset: i,
                });
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn unexpected(&self) -> FormulaError {
        match self.toks.get(self.pos) {
            Some((t, off)) => FormulaError::Unexpected {
                found: format!("{t:?}"),
                offset: *off,
            },
            None => FormulaError::Unexpected {
                found: "end of formula".into(),
                offset: self.end,
            },
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), FormulaError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.unexpected())
        }
    }

    fn sum(&mut self) -> Result<Expr, FormulaError> {
        let mut e = self.product()?;
        while self.peek() == Some(&Tok::Plus) {
            self.pos += 1;
            e = Expr::Add(Box::new(e), Box::new(self.product()?));
        }
        Ok(e)
    }

    fn product(&mut self) -> Result<Expr, FormulaError> {
        let mut e = self.atom()?;
        while self.peek() == Some(&Tok::Star) {
            self.pos += 1;
            e = Expr::Mul(Box::new(e), Box::new(self.atom()?));
        }
        Ok(e)
    }

    fn atom(&mut self) -> Result<Expr, FormulaError> {
        match self.peek().cloned() {
            Some(Tok::Num(s)) => {
                self.pos += 1;
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(Expr::Num)
                    .ok_or(FormulaError::BadNumber(s))
            }
            Some(Tok::N) => {
                self.pos += 1;
                Ok(Expr::N)
            }
            Some(Tok::Ln) => {
                self.pos += 1;
                self.expect(Tok::Open)?;
                let inner = self.sum()?;
                self.expect(Tok::Close)?;
                Ok(Expr::Ln(Box::new(inner)))
            }
            Some(Tok::Open) => {
                self.pos += 1;
                let inner = self.sum()?;
                self.expect(Tok::Close)?;
                Ok(inner)
            }
            _ => Err(self.unexpected()),
        }
    }
}

impl Formula {
    pub fn parse(text: &str) -> Result<Self, FormulaError> {
        let mut p = Parser {
            toks: tokenize(text)?,
            pos: 0,
            end: text.len(),
        };
        let expr = p.sum()?;
        if p.pos != p.toks.len() {
            return Err(p.unexpected());
        }
        Ok(Formula {
            text: text.to_string(),
            expr,
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn eval(&self, n: u64) -> f64 {
        self.expr.eval(n as f64)
    }

    /// Value at a real argument.
    pub fn eval_at(&self, x: f64) -> f64 {
        self.expr.eval(x)
    }

    /// The budget at `n`: the formula value rounded up to an integer.
    pub fn budget(&self, n: u64) -> Result<u64, FormulaError> {
        let value = self.eval(n);
        if !(value > 0.0 && value.is_finite() && value < u64::MAX as f64) {
            return Err(FormulaError::NotPositive { n, value });
        }
        Ok(value.ceil() as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_common_budgets() {
        let f = Formula::parse("500*n*ln(n)").unwrap();
        assert!((f.eval(100) - 500.0 * 100.0 * 100f64.ln()).abs() < 1e-9);
        assert_eq!(Formula::parse("n*n").unwrap().budget(30).unwrap(), 900);
        assert_eq!(Formula::parse("2*(n+3)").unwrap().budget(4).unwrap(), 14);
        assert_eq!(Formula::parse("1e6").unwrap().budget(1).unwrap(), 1_000_000);
        assert_eq!(Formula::parse(" 10 * ln( n ) + 1.5").unwrap().budget(1).unwrap(), 2);
    }

    #[test]
    fn rejects_malformed_text() {
        for bad in ["", "n*", "n-1", "log(n)", "(n", "n n", "2*x", "nn", "ln n"] {
            assert!(Formula::parse(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn nonpositive_budgets_are_errors() {
        let f = Formula::parse("ln(n)").unwrap();
        assert!(matches!(f.budget(1), Err(FormulaError::NotPositive { .. })));
        assert_eq!(f.budget(3).unwrap(), 2);
    }
}
