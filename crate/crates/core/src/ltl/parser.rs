//! Recursive-descent parser for the concrete formula syntax.
//!
//! Precedence, loosest first:
//!
//! | level | operators        | associativity |
//! |-------|------------------|---------------|
//! | 1     | `<->`            | left          |
//! | 2     | `->`             | right         |
//! | 3     | `U` `W`          | right         |
//! | 4     | `\|`             | left          |
//! | 5     | `&`              | left          |
//! | 6     | `!` `X` `G` `F`  | prefix        |
//!
//! Atoms are identifiers; `var OP int` with `OP` in `< <= = >= >` is an
//! integer comparison.

use std::fmt;

use super::{is_keyword, CmpOp, Formula};
use crate::plan::Proposition;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct SyntaxError {
    /// Byte offset of the offending token (input length at end of input).
    pub offset: usize,
    pub expected: Vec<&'static str>,
    pub found: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "syntax error at offset {}: found {}, expected one of: {}",
            self.offset,
            self.found,
            self.expected.join(", ")
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    LParen,
    RParen,
    Not,
    And,
    Or,
    Implies,
    Iff,
    Cmp(CmpOp),
    Next,
    Globally,
    Finally,
    Until,
    WeakUntil,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(n) => format!("integer `{n}`"),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::Not => "!",
            Tok::And => "&",
            Tok::Or => "|",
            Tok::Implies => "->",
            Tok::Iff => "<->",
            Tok::Cmp(op) => op.symbol(),
            Tok::Next => "X",
            Tok::Globally => "G",
            Tok::Finally => "F",
            Tok::Until => "U",
            Tok::WeakUntil => "W",
            Tok::Ident(_) | Tok::Int(_) | Tok::Eof => "",
        }
    }
}

const EXPECT_OPERAND: &[&str] = &["identifier", "(", "!", "X", "G", "F"];
const BINARY_OPS: &[&str] = &["&", "|", "U", "W", "->", "<->"];

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>, SyntaxError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let rest = &src[i..];
        let (tok, len) = if rest.starts_with("<->") {
            (Tok::Iff, 3)
        } else if rest.starts_with("->") {
            (Tok::Implies, 2)
        } else if rest.starts_with("<=") {
            (Tok::Cmp(CmpOp::Le), 2)
        } else if rest.starts_with(">=") {
            (Tok::Cmp(CmpOp::Ge), 2)
        } else if c == b'<' {
            (Tok::Cmp(CmpOp::Lt), 1)
        } else if c == b'>' {
            (Tok::Cmp(CmpOp::Gt), 1)
        } else if c == b'=' {
            (Tok::Cmp(CmpOp::Eq), 1)
        } else if c == b'(' {
            (Tok::LParen, 1)
        } else if c == b')' {
            (Tok::RParen, 1)
        } else if c == b'!' {
            (Tok::Not, 1)
        } else if c == b'&' {
            (Tok::And, 1)
        } else if c == b'|' {
            (Tok::Or, 1)
        } else if c.is_ascii_digit()
            || (c == b'-' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit))
        {
            let mut j = i + 1;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            let value = src[i..j].parse::<i64>().map_err(|_| SyntaxError {
                offset: start,
                expected: vec!["integer within signed 64-bit range"],
                found: format!("`{}`", &src[i..j]),
            })?;
            (Tok::Int(value), j - i)
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let mut j = i + 1;
            while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                j += 1;
            }
            let word = &src[i..j];
            let tok = match word {
                "X" => Tok::Next,
                "G" => Tok::Globally,
                "F" => Tok::Finally,
                "U" => Tok::Until,
                "W" => Tok::WeakUntil,
                _ => Tok::Ident(word.to_string()),
            };
            (tok, j - i)
        } else {
            let ch = rest.chars().next().unwrap_or('?');
            return Err(SyntaxError {
                offset: start,
                expected: EXPECT_OPERAND.iter().chain(BINARY_OPS).copied().collect(),
                found: format!("character `{ch}`"),
            });
        };
        out.push((start, tok));
        i += len;
    }
    out.push((src.len(), Tok::Eof));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: Vec<&'static str>) -> SyntaxError {
        SyntaxError {
            offset: self.offset(),
            expected,
            found: self.peek().describe(),
        }
    }

    fn iff(&mut self) -> Result<Formula, SyntaxError> {
        let mut lhs = self.implies()?;
        while *self.peek() == Tok::Iff {
            self.bump();
            let rhs = self.implies()?;
            lhs = Formula::iff(lhs, rhs);
        }
        Ok(lhs)
    }

    fn implies(&mut self) -> Result<Formula, SyntaxError> {
        let lhs = self.until()?;
        if *self.peek() == Tok::Implies {
            self.bump();
            let rhs = self.implies()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Formula, SyntaxError> {
        let lhs = self.or()?;
        match self.peek() {
            Tok::Until => {
                self.bump();
                Ok(Formula::until(lhs, self.until()?))
            }
            Tok::WeakUntil => {
                self.bump();
                Ok(Formula::weak_until(lhs, self.until()?))
            }
            _ => Ok(lhs),
        }
    }

    fn or(&mut self) -> Result<Formula, SyntaxError> {
        let mut lhs = self.and()?;
        while *self.peek() == Tok::Or {
            self.bump();
            let rhs = self.and()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, SyntaxError> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::And {
            self.bump();
            let rhs = self.unary()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, SyntaxError> {
        let wrap: fn(Formula) -> Formula = match self.peek() {
            Tok::Not => Formula::not,
            Tok::Next => Formula::next,
            Tok::Globally => Formula::globally,
            Tok::Finally => Formula::finally,
            _ => return self.primary(),
        };
        self.bump();
        Ok(wrap(self.unary()?))
    }

    fn primary(&mut self) -> Result<Formula, SyntaxError> {
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let inner = self.iff()?;
                if *self.peek() != Tok::RParen {
                    let mut expected = vec![")"];
                    expected.extend_from_slice(BINARY_OPS);
                    return Err(self.error(expected));
                }
                self.bump();
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                if let Tok::Cmp(op) = *self.peek() {
                    self.bump();
                    match self.bump() {
                        Tok::Int(value) => Ok(Formula::Cmp {
                            var: name,
                            op,
                            value,
                        }),
                        _ => {
                            self.pos -= 1;
                            Err(self.error(vec!["integer"]))
                        }
                    }
                } else {
                    debug_assert!(!is_keyword(&name));
                    let prop = Proposition::new(name).expect("tokenizer yields identifiers");
                    Ok(Formula::Atom(prop))
                }
            }
            _ => Err(self.error(EXPECT_OPERAND.to_vec())),
        }
    }
}

pub fn parse_formula(text: &str) -> Result<Formula, SyntaxError> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks, pos: 0 };
    let f = p.iff()?;
    if *p.peek() != Tok::Eof {
        let mut expected = vec!["end of input"];
        expected.extend_from_slice(BINARY_OPS);
        return Err(p.error(expected));
    }
    Ok(f)
}
