//! Tokenizer shared by the OIL and task-body parsers.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(u64),
    Str(String),
    Punct(char),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Int(n) => write!(f, "integer `{n}`"),
            Tok::Str(s) => write!(f, "string \"{s}\""),
            Tok::Punct(c) => write!(f, "`{c}`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{pos}: {message}")]
pub struct LexError {
    pub pos: Pos,
    pub message: String,
}

/// Splits `src` into tokens. `/* ... */` comments and whitespace are skipped.
pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c.is_whitespace() {
            bump!();
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            bump!();
            bump!();
            loop {
                if i >= chars.len() {
                    return Err(LexError { pos, message: "unterminated comment".into() });
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump!();
                    bump!();
                    break;
                }
                bump!();
            }
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), pos });
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!();
            }
            let text: String = chars[start..i].iter().collect();
            let n =
                text.parse::<u64>().map_err(|_| LexError { pos, message: format!("integer `{text}` out of range") })?;
            out.push(Token { tok: Tok::Int(n), pos });
        } else if c == '"' {
            bump!();
            let start = i;
            while i < chars.len() && chars[i] != '"' {
                if chars[i] == '\n' {
                    return Err(LexError { pos, message: "unterminated string".into() });
                }
                bump!();
            }
            if i >= chars.len() {
                return Err(LexError { pos, message: "unterminated string".into() });
            }
            let s: String = chars[start..i].iter().collect();
            bump!();
            out.push(Token { tok: Tok::Str(s), pos });
        } else if "{}();=,".contains(c) {
            bump!();
            out.push(Token { tok: Tok::Punct(c), pos });
        } else {
            return Err(LexError { pos, message: format!("unexpected character `{c}`") });
        }
    }
    Ok(out)
}

/// Cursor over a token vector with the small set of helpers both parsers need.
pub(crate) struct Cursor {
    toks: Vec<Token>,
    idx: usize,
    end: Pos,
}

impl Cursor {
    pub(crate) fn new(toks: Vec<Token>, src: &str) -> Self {
        let line = src.lines().count().max(1);
        let col = src.lines().last().map(|l| l.chars().count() + 1).unwrap_or(1);
        Cursor { toks, idx: 0, end: Pos { line, col } }
    }

    pub(crate) fn peek(&self) -> Option<&Token> {
        self.toks.get(self.idx)
    }

    pub(crate) fn pos(&self) -> Pos {
        self.peek().map(|t| t.pos).unwrap_or(self.end)
    }

    pub(crate) fn at_end(&self) -> bool {
        self.idx >= self.toks.len()
    }

    pub(crate) fn next(&mut self) -> Option<Token> {
        let t = self.toks.get(self.idx).cloned();
        if t.is_some() {
            self.idx += 1;
        }
        t
    }

    pub(crate) fn is_punct(&self, c: char) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Punct(p), .. }) if *p == c)
    }

    pub(crate) fn eat_punct(&mut self, c: char) -> bool {
        if self.is_punct(c) {
            self.idx += 1;
            true
        } else {
            false
        }
    }

    pub(crate) fn expect_punct(&mut self, c: char) -> Result<Pos, LexError> {
        let pos = self.pos();
        match self.next() {
            Some(Token { tok: Tok::Punct(p), pos }) if p == c => Ok(pos),
            Some(t) => Err(LexError { pos, message: format!("expected `{c}`, found {}", t.tok) }),
            None => Err(LexError { pos, message: format!("expected `{c}`, found end of input") }),
        }
    }

    pub(crate) fn expect_ident(&mut self) -> Result<(String, Pos), LexError> {
        let pos = self.pos();
        match self.next() {
            Some(Token { tok: Tok::Ident(s), pos }) => Ok((s, pos)),
            Some(t) => Err(LexError { pos, message: format!("expected identifier, found {}", t.tok) }),
            None => Err(LexError { pos, message: "expected identifier, found end of input".into() }),
        }
    }
}
