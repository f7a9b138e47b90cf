//! Tokenizer and token cursor shared by the schema and rule parsers.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub struct Span {
    pub line: u32,
    pub column: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    /// Decimal literal, kept with its source text.
    Decimal(f64, String),
    Str(String),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(i) => write!(f, "`{i}`"),
            Tok::Decimal(_, s) => write!(f, "`{s}`"),
            Tok::Str(s) => write!(f, "'{s}'"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SyntaxError {
    #[error("{span}: {message}")]
    Lexical { span: Span, message: String },
    #[error("{span}: expected {}, found {found}", expected.join(" or "))]
    Unexpected { span: Span, expected: Vec<String>, found: String },
}

impl SyntaxError {
    pub fn span(&self) -> Span {
        match self {
            SyntaxError::Lexical { span, .. } | SyntaxError::Unexpected { span, .. } => *span,
        }
    }
}

const SYMBOLS: &[&str] = &[
    "///", "//", "<>", "<=", ">=", ".", ",", "[", "]", "(", ")", "{", "}", "=", "+", "-", "*", "/", ":", ";",
    "<", ">",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let mut last_end = Span { line: 1, column: 1 };
    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, column: col };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let frac = i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit();
            if frac {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let v = text.parse::<f64>().map_err(|e| SyntaxError::Lexical { span, message: e.to_string() })?;
                Tok::Decimal(v, text)
            } else {
                let text: String = chars[start..i].iter().collect();
                let v = text.parse::<i64>().map_err(|_| SyntaxError::Lexical {
                    span,
                    message: format!("integer literal {text} out of range"),
                })?;
                Tok::Int(v)
            }
        } else if c == '\'' {
            i += 1;
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None | Some('\n') => {
                        return Err(SyntaxError::Lexical { span, message: "unterminated string literal".into() })
                    }
                    Some('\'') if chars.get(i + 1) == Some(&'\'') => {
                        s.push('\'');
                        i += 2;
                    }
                    Some('\'') => {
                        i += 1;
                        break;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            Tok::Str(s)
        } else {
            let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
            match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
                Some(sym) => {
                    i += sym.len();
                    Tok::Sym(sym)
                }
                None => {
                    return Err(SyntaxError::Lexical { span, message: format!("unexpected character {c:?}") })
                }
            }
        };
        col += (i - start) as u32;
        last_end = Span { line, column: col };
        out.push(Token { tok, span });
    }
    out.push(Token { tok: Tok::Eof, span: last_end });
    Ok(out)
}

/// Recursive-descent helper over a token vector. Keywords match
/// case-insensitively.
pub struct Cursor {
    toks: Vec<Token>,
    pos: usize,
}

impl Cursor {
    pub fn new(toks: Vec<Token>) -> Self {
        Cursor { toks, pos: 0 }
    }

    pub fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    pub fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    pub fn span(&self) -> Span {
        self.peek().span
    }

    pub fn at_eof(&self) -> bool {
        self.peek().tok == Tok::Eof
    }

    pub fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub fn is_kw_at(&self, n: usize, kw: &str) -> bool {
        matches!(self.peek_at(n), Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    pub fn is_kw(&self, kw: &str) -> bool {
        self.is_kw_at(0, kw)
    }

    pub fn is_sym(&self, sym: &str) -> bool {
        matches!(self.peek_at(0), Tok::Sym(s) if *s == sym)
    }

    pub fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn eat_sym(&mut self, sym: &str) -> bool {
        if self.is_sym(sym) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn error(&self, expected: &[&str]) -> SyntaxError {
        SyntaxError::Unexpected {
            span: self.span(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().tok.to_string(),
        }
    }

    pub fn expect_kw(&mut self, kw: &str) -> Result<Span, SyntaxError> {
        let span = self.span();
        if self.eat_kw(kw) {
            Ok(span)
        } else {
            Err(self.error(&[&format!("`{kw}`")]))
        }
    }

    pub fn expect_sym(&mut self, sym: &str) -> Result<Span, SyntaxError> {
        let span = self.span();
        if self.eat_sym(sym) {
            Ok(span)
        } else {
            Err(self.error(&[&format!("`{sym}`")]))
        }
    }

    pub fn expect_ident(&mut self, what: &str) -> Result<(String, Span), SyntaxError> {
        match &self.peek().tok {
            Tok::Ident(s) => {
                let s = s.clone();
                let span = self.bump().span;
                Ok((s, span))
            }
            _ => Err(self.error(&[what])),
        }
    }

    pub fn expect_int(&mut self, what: &str) -> Result<i64, SyntaxError> {
        match self.peek().tok {
            Tok::Int(i) => {
                self.bump();
                Ok(i)
            }
            _ => Err(self.error(&[what])),
        }
    }
}
