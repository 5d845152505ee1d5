//! Expression parser for holomorphic self-maps of the disk.
//!
//! Grammar (precedence climbing): `^` binds tightest, then unary `-`, then
//! `* /`, then `+ -`; `*` and `/` and the additive operators are
//! left-associative. Literals are decimal reals, `i`, or an immediate
//! `<number>i` imaginary literal; the only identifiers are `z` and `i`.
//! `^` exponents must be non-negative integer literals.

use super::MapExpr;
use num_complex::Complex64;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("parse error at offset {position}: expected {expected}, found {found}")]
pub struct ParseError {
    pub position: usize,
    pub expected: String,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Imag(f64),
    Var,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Num(v) => write!(f, "number {v}"),
            Token::Imag(v) => write!(f, "imaginary literal {v}i"),
            Token::Var => write!(f, "z"),
            Token::Plus => write!(f, "'+'"),
            Token::Minus => write!(f, "'-'"),
            Token::Star => write!(f, "'*'"),
            Token::Slash => write!(f, "'/'"),
            Token::Caret => write!(f, "'^'"),
            Token::LParen => write!(f, "'('"),
            Token::RParen => write!(f, "')'"),
        }
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn next(&mut self) -> Result<Option<(usize, Token)>, ParseError> {
        self.skip_ws();
        if self.pos >= self.src.len() {
            return Ok(None);
        }
        let start = self.pos;
        let c = self.src[self.pos];
        let tok = match c {
            b'+' => Token::Plus,
            b'-' => Token::Minus,
            b'*' => Token::Star,
            b'/' => Token::Slash,
            b'^' => Token::Caret,
            b'(' => Token::LParen,
            b')' => Token::RParen,
            b'z' => Token::Var,
            b'i' => Token::Imag(1.0),
            b'0'..=b'9' | b'.' => {
                let mut end = self.pos;
                let mut seen_dot = false;
                let mut seen_exp = false;
                while end < self.src.len() {
                    match self.src[end] {
                        b'0'..=b'9' => end += 1,
                        b'.' if !seen_dot && !seen_exp => {
                            seen_dot = true;
                            end += 1;
                        }
                        b'e' | b'E' if !seen_exp && end > self.pos => {
                            // Exponent only if followed by digit or sign+digit.
                            let mut j = end + 1;
                            if j < self.src.len() && (self.src[j] == b'+' || self.src[j] == b'-') {
                                j += 1;
                            }
                            if j < self.src.len() && self.src[j].is_ascii_digit() {
                                seen_exp = true;
                                end = j;
                            } else {
                                break;
                            }
                        }
                        _ => break,
                    }
                }
                let text = std::str::from_utf8(&self.src[self.pos..end]).unwrap();
                let value: f64 = text.parse().map_err(|_| ParseError {
                    position: start,
                    expected: "a numeric literal".into(),
                    found: text.into(),
                })?;
                self.pos = end;
                // Immediate `i` suffix makes an imaginary literal.
                if self.pos < self.src.len() && self.src[self.pos] == b'i' {
                    self.pos += 1;
                    return Ok(Some((start, Token::Imag(value))));
                }
                return Ok(Some((start, Token::Num(value))));
            }
            other => {
                return Err(ParseError {
                    position: start,
                    expected: "one of z, i, number, + - * / ^ ( )".into(),
                    found: format!("'{}'", other as char),
                });
            }
        };
        self.pos += 1;
        Ok(Some((start, tok)))
    }
}

pub struct Parser {
    tokens: Vec<(usize, Token)>,
    cursor: usize,
    end: usize,
}

impl Parser {
    pub fn new(src: &str) -> Result<Self, ParseError> {
        let mut lexer = Lexer::new(src);
        let mut tokens = Vec::new();
        while let Some(t) = lexer.next()? {
            tokens.push(t);
        }
        Ok(Parser {
            tokens,
            cursor: 0,
            end: src.len(),
        })
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.cursor).map(|(_, t)| t)
    }

    fn position(&self) -> usize {
        self.tokens
            .get(self.cursor)
            .map(|&(p, _)| p)
            .unwrap_or(self.end)
    }

    fn advance(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.cursor).map(|(_, t)| t.clone());
        if t.is_some() {
            self.cursor += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> ParseError {
        ParseError {
            position: self.position(),
            expected: expected.into(),
            found: self
                .peek()
                .map(|t| t.to_string())
                .unwrap_or_else(|| "end of input".into()),
        }
    }

    pub fn parse_expr(&mut self) -> Result<MapExpr, ParseError> {
        let expr = self.parse_sum()?;
        if self.peek().is_some() {
            return Err(self.error("end of input or an operator"));
        }
        Ok(expr)
    }

    fn parse_sum(&mut self) -> Result<MapExpr, ParseError> {
        let mut lhs = self.parse_product()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.advance();
                    let rhs = self.parse_product()?;
                    lhs = MapExpr::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(Token::Minus) => {
                    self.advance();
                    let rhs = self.parse_product()?;
                    lhs = MapExpr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_product(&mut self) -> Result<MapExpr, ParseError> {
        let mut lhs = self.parse_unary()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.advance();
                    let rhs = self.parse_unary()?;
                    lhs = MapExpr::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some(Token::Slash) => {
                    self.advance();
                    let rhs = self.parse_unary()?;
                    lhs = MapExpr::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_unary(&mut self) -> Result<MapExpr, ParseError> {
        if matches!(self.peek(), Some(Token::Minus)) {
            self.advance();
            let inner = self.parse_unary()?;
            return Ok(MapExpr::Neg(Box::new(inner)));
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<MapExpr, ParseError> {
        let base = self.parse_atom()?;
        if matches!(self.peek(), Some(Token::Caret)) {
            self.advance();
            let pos = self.position();
            match self.advance() {
                Some(Token::Num(v)) => {
                    if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
                        return Err(ParseError {
                            position: pos,
                            expected: "a non-negative integer exponent".into(),
                            found: format!("{v}"),
                        });
                    }
                    Ok(MapExpr::IntPow(Box::new(base), v as u32))
                }
                Some(other) => Err(ParseError {
                    position: pos,
                    expected: "a non-negative integer exponent".into(),
                    found: other.to_string(),
                }),
                None => Err(ParseError {
                    position: pos,
                    expected: "a non-negative integer exponent".into(),
                    found: "end of input".into(),
                }),
            }
        } else {
            Ok(base)
        }
    }

    fn parse_atom(&mut self) -> Result<MapExpr, ParseError> {
        match self.peek() {
            Some(Token::Num(_)) => {
                if let Some(Token::Num(v)) = self.advance() {
                    Ok(MapExpr::Const(Complex64::new(v, 0.0)))
                } else {
                    unreachable!()
                }
            }
            Some(Token::Imag(_)) => {
                if let Some(Token::Imag(v)) = self.advance() {
                    Ok(MapExpr::Const(Complex64::new(0.0, v)))
                } else {
                    unreachable!()
                }
            }
            Some(Token::Var) => {
                self.advance();
                Ok(MapExpr::Var)
            }
            Some(Token::LParen) => {
                self.advance();
                let inner = self.parse_sum()?;
                if matches!(self.peek(), Some(Token::RParen)) {
                    self.advance();
                    Ok(inner)
                } else {
                    Err(self.error("')'"))
                }
            }
            _ => Err(self.error("z, i, a number, '-' or '('")),
        }
    }
}
