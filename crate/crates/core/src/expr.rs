//! Minimal arithmetic expressions over rate constants.
//!
//! Grammar: `+ - * /`, parentheses, unary minus, decimal literals and the
//! identifiers `k1 … kr` (1-based, `k_1` also accepted).

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// 0-based rate constant index.
    K(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    K(usize),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let ch = bytes[i] as char;
        match ch {
            c if c.is_ascii_whitespace() => i += 1,
            '+' | '-' | '*' | '/' | '(' | ')' => {
                out.push(Token::Op(ch));
                i += 1;
            }
            'k' | 'K' => {
                i += 1;
                if i < bytes.len() && bytes[i] == b'_' {
                    i += 1;
                }
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let idx: usize = src[start..i]
                    .parse()
                    .map_err(|_| Error::Expression(format!("expected index after `k` at byte {start}")))?;
                if idx == 0 {
                    return Err(Error::Expression("rate constants are numbered from k1".into()));
                }
                out.push(Token::K(idx - 1));
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    i += 1;
                    if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
                        i += 1;
                    }
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let v: f64 = src[start..i]
                    .parse()
                    .map_err(|_| Error::Expression(format!("bad number `{}`", &src[start..i])))?;
                out.push(Token::Num(v));
            }
            other => return Err(Error::Expression(format!("unexpected character `{other}`"))),
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

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Token::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.tokens.get(self.pos).cloned() {
            Some(Token::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Token::K(i)) => {
                self.pos += 1;
                Ok(Expr::K(i))
            }
            Some(Token::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(Error::Expression("missing `)`".into()));
                }
                Ok(e)
            }
            Some(t) => Err(Error::Expression(format!("unexpected token {t:?}"))),
            None => Err(Error::Expression("unexpected end of expression".into())),
        }
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let mut p = Parser {
            tokens: tokenize(src)?,
            pos: 0,
        };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Expression(format!("trailing input in `{src}`")));
        }
        Ok(e)
    }

    /// Largest 0-based rate-constant index referenced, if any.
    pub fn max_k_index(&self) -> Option<usize> {
        match self {
            Expr::Num(_) => None,
            Expr::K(i) => Some(*i),
            Expr::Neg(a) => a.max_k_index(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.max_k_index().max(b.max_k_index())
            }
        }
    }

    pub fn eval(&self, k: &[f64]) -> Result<f64> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::K(i) => *k
                .get(*i)
                .ok_or_else(|| Error::Expression(format!("k{} out of range (r = {})", i + 1, k.len())))?,
            Expr::Neg(a) => -a.eval(k)?,
            Expr::Add(a, b) => a.eval(k)? + b.eval(k)?,
            Expr::Sub(a, b) => a.eval(k)? - b.eval(k)?,
            Expr::Mul(a, b) => a.eval(k)? * b.eval(k)?,
            Expr::Div(a, b) => a.eval(k)? / b.eval(k)?,
        })
    }
}
