//! A small shared lexer for the textual formats: expressions, frontend IR,
//! and the SDFG surface syntax. `//` comments run to end of line.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),
    Punct(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(v) => write!(f, "`{v}`"),
            Tok::Float(v) => write!(f, "`{v:?}`"),
            Tok::Str(_) => write!(f, "string literal"),
            Tok::Punct(p) => write!(f, "`{p}`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {msg}")]
pub struct LexError {
    pub line: u32,
    pub col: u32,
    pub msg: String,
}

const PUNCTS2: &[&str] = &["->", "<=", ">=", "==", "!="];
const PUNCTS1: &str = "+-*/%()[]{},:;<>=@?^.!";

pub fn lex(src: &str) -> Result<Vec<Token>, LexError> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;
    let err = |line, col, msg: String| LexError { line, col, msg };

    while i < bytes.len() {
        let c = bytes[i] as char;
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && i + 1 < bytes.len() && bytes[i + 1] == b'/' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let (tline, tcol) = (line, col);
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let text = &src[start..i];
            col += (i - start) as u32;
            out.push(Token { tok: Tok::Ident(text.to_string()), line: tline, col: tcol });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                i += 1;
            }
            let mut is_float = false;
            if i < bytes.len() && bytes[i] == b'.' && i + 1 < bytes.len() && (bytes[i + 1] as char).is_ascii_digit() {
                is_float = true;
                i += 1;
                while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                    is_float = true;
                    i = j;
                    while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            col += (i - start) as u32;
            let tok = if is_float {
                Tok::Float(text.parse::<f64>().map_err(|e| err(tline, tcol, format!("bad float literal `{text}`: {e}")))?)
            } else {
                Tok::Int(text.parse::<i64>().map_err(|_| err(tline, tcol, format!("integer literal `{text}` out of range")))?)
            };
            out.push(Token { tok, line: tline, col: tcol });
            continue;
        }
        if c == '"' {
            i += 1;
            col += 1;
            let mut s = String::new();
            loop {
                if i >= bytes.len() || bytes[i] == b'\n' {
                    return Err(err(tline, tcol, "unterminated string literal".into()));
                }
                let ch = bytes[i] as char;
                i += 1;
                col += 1;
                match ch {
                    '"' => break,
                    '\\' => {
                        if i >= bytes.len() {
                            return Err(err(tline, tcol, "unterminated string literal".into()));
                        }
                        let esc = bytes[i] as char;
                        i += 1;
                        col += 1;
                        match esc {
                            '"' => s.push('"'),
                            '\\' => s.push('\\'),
                            'n' => s.push('\n'),
                            _ => return Err(err(line, col, format!("unknown escape `\\{esc}`"))),
                        }
                    }
                    _ => s.push(ch),
                }
            }
            out.push(Token { tok: Tok::Str(s), line: tline, col: tcol });
            continue;
        }
        if i + 1 < bytes.len() {
            let two = &src[i..i + 2];
            if let Some(p) = PUNCTS2.iter().find(|p| **p == two) {
                i += 2;
                col += 2;
                out.push(Token { tok: Tok::Punct(p), line: tline, col: tcol });
                continue;
            }
        }
        if let Some(idx) = PUNCTS1.find(c) {
            i += 1;
            col += 1;
            out.push(Token { tok: Tok::Punct(&PUNCTS1[idx..idx + 1]), line: tline, col: tcol });
            continue;
        }
        return Err(err(line, col, format!("unexpected character `{c}`")));
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

/// Token cursor shared by the recursive-descent parsers.
pub struct Cursor {
    toks: Vec<Token>,
    pos: usize,
}

impl Cursor {
    pub fn new(toks: Vec<Token>) -> Cursor {
        Cursor { toks, pos: 0 }
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.pos.min(self.toks.len() - 1)].tok
    }

    pub fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].tok
    }

    pub fn here(&self) -> (u32, u32) {
        let t = &self.toks[self.pos.min(self.toks.len() - 1)];
        (t.line, t.col)
    }

    pub fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos.min(self.toks.len() - 1)].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    pub fn at_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    pub fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    pub fn eat_punct(&mut self, p: &str) -> bool {
        if self.at_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn is_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }
}
