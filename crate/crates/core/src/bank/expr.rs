//! Answer expressions: a tiny arithmetic/string language over slot values.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := INTEGER | IDENT | 'text' | "text" | '(' expr ')'
//! ```
//!
//! `×`, `÷` and `−` are accepted as aliases. Division is integer division
//! and must be exact.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A bound slot value or an evaluated answer.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Str(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Str(s) => f.write_str(s),
        }
    }
}

pub type Bindings = BTreeMap<String, Value>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
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

    /// Checked integer application; `None` on overflow, zero or inexact division.
    pub fn apply(self, a: i64, b: i64) -> Option<i64> {
        match self {
            BinOp::Add => a.checked_add(b),
            BinOp::Sub => a.checked_sub(b),
            BinOp::Mul => a.checked_mul(b),
            BinOp::Div => {
                if b == 0 || a.checked_rem(b)? != 0 {
                    None
                } else {
                    a.checked_div(b)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnswerExpr {
    Int(i64),
    Str(String),
    Slot(String),
    Binary {
        op: BinOp,
        lhs: Box<AnswerExpr>,
        rhs: Box<AnswerExpr>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("slot `{0}` is not bound")]
    UnboundSlot(String),
    #[error("{0} / {1} is not an exact integer division")]
    InexactDivision(i64, i64),
    #[error("arithmetic on a non-integer value")]
    TypeMismatch,
    #[error("integer overflow")]
    Overflow,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("bad answer expression at byte {pos}: {reason}")]
pub struct ParseError {
    pub pos: usize,
    pub reason: String,
}

impl AnswerExpr {
    pub fn parse(src: &str) -> Result<Self, ParseError> {
        let tokens = lex(src)?;
        let mut p = Parser { tokens, at: 0 };
        let expr = p.expr()?;
        if let Some((pos, tok)) = p.tokens.get(p.at) {
            return Err(ParseError {
                pos: *pos,
                reason: format!("unexpected {tok:?}"),
            });
        }
        Ok(expr)
    }

    /// Slot names referenced anywhere in the expression, in first-seen order.
    pub fn slots(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_slots(&mut out);
        out
    }

    fn collect_slots<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            AnswerExpr::Slot(name) => {
                if !out.contains(&name.as_str()) {
                    out.push(name);
                }
            }
            AnswerExpr::Binary { lhs, rhs, .. } => {
                lhs.collect_slots(out);
                rhs.collect_slots(out);
            }
            AnswerExpr::Int(_) | AnswerExpr::Str(_) => {}
        }
    }
}

impl fmt::Display for AnswerExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnswerExpr::Int(n) => write!(f, "{n}"),
            AnswerExpr::Str(s) if s.contains('\'') => write!(f, "\"{s}\""),
            AnswerExpr::Str(s) => write!(f, "'{s}'"),
            AnswerExpr::Slot(name) => f.write_str(name),
            AnswerExpr::Binary { op, lhs, rhs } => write!(f, "({lhs} {} {rhs})", op.symbol()),
        }
    }
}

/// Evaluates `expr` with the given slot bindings.
pub fn eval_answer(expr: &AnswerExpr, bindings: &Bindings) -> Result<Value, EvalError> {
    match expr {
        AnswerExpr::Int(n) => Ok(Value::Int(*n)),
        AnswerExpr::Str(s) => Ok(Value::Str(s.clone())),
        AnswerExpr::Slot(name) => bindings
            .get(name)
            .cloned()
            .ok_or_else(|| EvalError::UnboundSlot(name.clone())),
        AnswerExpr::Binary { op, lhs, rhs } => {
            let (Value::Int(a), Value::Int(b)) = (eval_answer(lhs, bindings)?, eval_answer(rhs, bindings)?)
            else {
                return Err(EvalError::TypeMismatch);
            };
            op.apply(a, b).map(Value::Int).ok_or(match op {
                BinOp::Div => EvalError::InexactDivision(a, b),
                _ => EvalError::Overflow,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Int(i64),
    Ident(String),
    Str(String),
    Op(BinOp),
    LParen,
    RParen,
}

fn lex(src: &str) -> Result<Vec<(usize, Token)>, ParseError> {
    let mut out = Vec::new();
    let mut chars = src.char_indices().peekable();
    while let Some(&(pos, c)) = chars.peek() {
        let err = |reason: String| ParseError { pos, reason };
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '0'..='9' => {
                let mut n: i64 = 0;
                while let Some(&(_, d)) = chars.peek() {
                    let Some(v) = d.to_digit(10) else { break };
                    n = n
                        .checked_mul(10)
                        .and_then(|n| n.checked_add(v as i64))
                        .ok_or_else(|| err("integer literal overflows".into()))?;
                    chars.next();
                }
                out.push((pos, Token::Int(n)));
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&(_, d)) = chars.peek() {
                    if d.is_alphanumeric() || d == '_' {
                        s.push(d);
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push((pos, Token::Ident(s)));
            }
            '\'' | '"' => {
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some((_, d)) if d == c => break,
                        Some((_, d)) => s.push(d),
                        None => return Err(err("unterminated string literal".into())),
                    }
                }
                out.push((pos, Token::Str(s)));
            }
            '+' => {
                chars.next();
                out.push((pos, Token::Op(BinOp::Add)));
            }
            '-' | '−' => {
                chars.next();
                out.push((pos, Token::Op(BinOp::Sub)));
            }
            '*' | '×' => {
                chars.next();
                out.push((pos, Token::Op(BinOp::Mul)));
            }
            '/' | '÷' => {
                chars.next();
                out.push((pos, Token::Op(BinOp::Div)));
            }
            '(' => {
                chars.next();
                out.push((pos, Token::LParen));
            }
            ')' => {
                chars.next();
                out.push((pos, Token::RParen));
            }
            other => return Err(err(format!("unexpected character {other:?}"))),
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.at).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.tokens
            .get(self.at)
            .map(|(p, _)| *p)
            .unwrap_or_else(|| self.tokens.last().map(|(p, _)| p + 1).unwrap_or(0))
    }

    fn expr(&mut self) -> Result<AnswerExpr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(op @ (BinOp::Add | BinOp::Sub))) = self.peek() {
            let op = *op;
            self.at += 1;
            let rhs = self.term()?;
            lhs = AnswerExpr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<AnswerExpr, ParseError> {
        let mut lhs = self.factor()?;
        while let Some(Token::Op(op @ (BinOp::Mul | BinOp::Div))) = self.peek() {
            let op = *op;
            self.at += 1;
            let rhs = self.factor()?;
            lhs = AnswerExpr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<AnswerExpr, ParseError> {
        let pos = self.pos();
        let tok = self.tokens.get(self.at).map(|(_, t)| t.clone());
        self.at += 1;
        match tok {
            Some(Token::Int(n)) => Ok(AnswerExpr::Int(n)),
            Some(Token::Ident(name)) => Ok(AnswerExpr::Slot(name)),
            Some(Token::Str(s)) => Ok(AnswerExpr::Str(s)),
            Some(Token::LParen) => {
                let inner = self.expr()?;
                match self.peek() {
                    Some(Token::RParen) => {
                        self.at += 1;
                        Ok(inner)
                    }
                    _ => Err(ParseError {
                        pos: self.pos(),
                        reason: "expected `)`".into(),
                    }),
                }
            }
            Some(other) => Err(ParseError {
                pos,
                reason: format!("unexpected {other:?}"),
            }),
            None => Err(ParseError {
                pos,
                reason: "unexpected end of expression".into(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bind(pairs: &[(&str, Value)]) -> Bindings {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    #[test]
    fn eval_examples() {
        let e = AnswerExpr::parse("father_age / 3").unwrap();
        assert_eq!(eval_answer(&e, &bind(&[("father_age", Value::Int(45))])), Ok(Value::Int(15)));

        let e = AnswerExpr::parse("a − b").unwrap();
        let b = bind(&[("a", Value::Int(5)), ("b", Value::Int(3))]);
        assert_eq!(eval_answer(&e, &b), Ok(Value::Int(2)));

        let e = AnswerExpr::parse("remaining_fruit").unwrap();
        let b = bind(&[("remaining_fruit", Value::Str("mango".into()))]);
        assert_eq!(eval_answer(&e, &b), Ok(Value::Str("mango".into())));
    }

    #[test]
    fn eval_errors() {
        let e = AnswerExpr::parse("x ÷ 3").unwrap();
        assert_eq!(
            eval_answer(&e, &Bindings::new()),
            Err(EvalError::UnboundSlot("x".into()))
        );
        assert_eq!(
            eval_answer(&e, &bind(&[("x", Value::Int(44))])),
            Err(EvalError::InexactDivision(44, 3))
        );
        let e = AnswerExpr::parse("x + 1").unwrap();
        assert_eq!(
            eval_answer(&e, &bind(&[("x", Value::Str("a".into()))])),
            Err(EvalError::TypeMismatch)
        );
    }

    #[test]
    fn precedence_and_parentheses() {
        let b = Bindings::new();
        let v = |s| eval_answer(&AnswerExpr::parse(s).unwrap(), &b).unwrap();
        assert_eq!(v("2 + 3 * 4"), Value::Int(14));
        assert_eq!(v("(2 + 3) * 4"), Value::Int(20));
        assert_eq!(v("10 - 4 - 3"), Value::Int(3));
        assert_eq!(v("'the east'"), Value::Str("the east".into()));
        assert_eq!(v("\"east\""), Value::Str("east".into()));
    }

    #[test]
    fn parse_errors_carry_positions() {
        assert_eq!(AnswerExpr::parse("a +").unwrap_err().pos, 3);
        assert_eq!(AnswerExpr::parse("(a").unwrap_err().reason, "expected `)`");
        assert_eq!(AnswerExpr::parse("a $ b").unwrap_err().pos, 2);
        assert!(AnswerExpr::parse("'open").is_err());
        assert!(AnswerExpr::parse("a b").is_err());
    }

    #[test]
    fn slots_are_deduplicated() {
        let e = AnswerExpr::parse("a + b * a").unwrap();
        assert_eq!(e.slots(), vec!["a", "b"]);
    }
}
