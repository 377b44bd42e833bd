//! Minimal s-expression reader with line/column tracking.
//!
//! BDDL is a Lisp-ish surface: atoms are bare symbols (instance ids, predicate
//! names, `?variables`, integers), lists are parenthesized. `;` starts a
//! comment running to end of line.

use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sexp {
    Atom(String, Pos),
    List(Vec<Sexp>, Pos),
}

impl Sexp {
    pub fn pos(&self) -> Pos {
        match self {
            Sexp::Atom(_, p) | Sexp::List(_, p) => *p,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(s, _) => Some(s),
            Sexp::List(..) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(items, _) => Some(items),
            Sexp::Atom(..) => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SexpError {
    #[error("{pos}: unexpected closing parenthesis")]
    UnexpectedClose { pos: Pos },
    #[error("{pos}: unclosed parenthesis")]
    UnclosedParen { pos: Pos },
    #[error("{pos}: trailing content after top-level form")]
    TrailingContent { pos: Pos },
    #[error("empty input")]
    Empty,
}

struct Reader<'a> {
    src: &'a str,
    bytes: &'a [u8],
    i: usize,
    line: usize,
    col: usize,
}

impl<'a> Reader<'a> {
    fn new(src: &'a str) -> Self {
        Reader { src, bytes: src.as_bytes(), i: 0, line: 1, col: 1 }
    }

    fn pos(&self) -> Pos {
        Pos { line: self.line, col: self.col }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.i).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.i += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            match c {
                b' ' | b'\t' | b'\r' | b'\n' => {
                    self.bump();
                }
                b';' => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn read(&mut self) -> Result<Sexp, SexpError> {
        self.skip_ws();
        let pos = self.pos();
        match self.peek() {
            None => Err(SexpError::Empty),
            Some(b'(') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    match self.peek() {
                        None => return Err(SexpError::UnclosedParen { pos }),
                        Some(b')') => {
                            self.bump();
                            return Ok(Sexp::List(items, pos));
                        }
                        Some(_) => items.push(self.read()?),
                    }
                }
            }
            Some(b')') => Err(SexpError::UnexpectedClose { pos }),
            Some(_) => {
                let start = self.i;
                while let Some(c) = self.peek() {
                    if matches!(c, b' ' | b'\t' | b'\r' | b'\n' | b'(' | b')' | b';') {
                        break;
                    }
                    self.bump();
                }
                Ok(Sexp::Atom(self.src[start..self.i].to_string(), pos))
            }
        }
    }
}

/// Read a single top-level form; trailing whitespace/comments are allowed.
pub fn parse_one(src: &str) -> Result<Sexp, SexpError> {
    let mut r = Reader::new(src);
    let form = r.read()?;
    r.skip_ws();
    if r.peek().is_some() {
        return Err(SexpError::TrailingContent { pos: r.pos() });
    }
    Ok(form)
}
