//! Lexer for the game-description dialect.
//!
//! An identifier immediately followed by `(` lexes as a single functor
//! token, so `payoff('D','D',35,35).` is exactly ten tokens. `%` comments
//! are stripped; the C-style `//` delimiter is a lexical error, reported
//! with the stable message the repair prompt relies on.

use crate::number::Number;
use crate::term::Span;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Atom(String),
    /// Atom or quoted atom immediately followed by `(`; the paren is consumed.
    Functor(String),
    Var(String),
    Num(Number),
    Op(&'static str),
    Open,
    Close,
    OpenList,
    CloseList,
    Comma,
    Bar,
    /// Clause-terminating `.` (followed by whitespace, a comment, or EOF).
    Dot,
    /// Marks a spot where a lexical error was recorded; the parser treats it
    /// as an already-reported failure.
    Hole,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexError {
    pub message: String,
    pub span: Span,
}

const SYMBOLIC_OPS: &[&str] = &[
    ":-", "?-", ";", "->", "\\+", "=", "\\=", "==", "\\==", "<", ">", "=<", ">=", "+", "-", "*",
    "/",
];

fn is_symbol_char(b: u8) -> bool {
    matches!(
        b,
        b'+' | b'-' | b'*' | b'/' | b'\\' | b'=' | b'<' | b'>' | b':' | b'?' | b'@' | b'#' | b'&'
            | b'^' | b'~' | b'$'
    )
}

struct Lexer<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
    tokens: Vec<Token>,
    errors: Vec<LexError>,
}

/// Tokenizes the whole input. Lexical errors are recorded and lexing resumes
/// locally (after the offending run), leaving a `Hole` token so the parser
/// can discard the surrounding clause.
pub fn tokenize_lossy(text: &str) -> (Vec<Token>, Vec<LexError>) {
    let mut lexer = Lexer {
        text,
        bytes: text.as_bytes(),
        pos: 0,
        line: 1,
        col: 1,
        tokens: Vec::new(),
        errors: Vec::new(),
    };
    lexer.run();
    (lexer.tokens, lexer.errors)
}

/// Tokenizes the input, failing on the first lexical error.
pub fn tokenize(text: &str) -> Result<Vec<Token>, LexError> {
    let (tokens, errors) = tokenize_lossy(text);
    match errors.into_iter().next() {
        Some(err) => Err(err),
        None => Ok(tokens),
    }
}

impl<'a> Lexer<'a> {
    fn run(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            match b {
                b' ' | b'\t' | b'\r' | b'\n' => self.advance(),
                b'%' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.advance();
                    }
                }
                b'(' => self.punct(Tok::Open),
                b')' => self.punct(Tok::Close),
                b'[' => self.punct(Tok::OpenList),
                b']' => self.punct(Tok::CloseList),
                b',' => self.punct(Tok::Comma),
                b'|' => self.punct(Tok::Bar),
                b';' => self.punct(Tok::Op(";")),
                b'\'' => self.quoted_atom(),
                b'.' => self.dot(),
                b'0'..=b'9' => self.numeral(),
                b'a'..=b'z' => self.name(),
                b'A'..=b'Z' | b'_' => self.variable(),
                _ if is_symbol_char(b) => self.symbolic(),
                _ => {
                    let span = self.span_here(1);
                    let ch = self.text[self.pos..].chars().next().unwrap_or('?');
                    self.error(format!("unexpected character '{ch}'"), span);
                    self.advance_char();
                }
            }
        }
    }

    fn advance(&mut self) {
        if self.bytes[self.pos] == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        self.pos += 1;
    }

    fn advance_char(&mut self) {
        let len = self.text[self.pos..]
            .chars()
            .next()
            .map_or(1, char::len_utf8);
        for _ in 0..len {
            if self.pos < self.bytes.len() {
                self.advance();
            }
        }
    }

    fn span_here(&self, len: usize) -> Span {
        Span::new(self.line, self.col, self.pos, self.pos + len)
    }

    fn punct(&mut self, tok: Tok) {
        let span = self.span_here(1);
        self.advance();
        self.tokens.push(Token { tok, span });
    }

    fn error(&mut self, message: String, span: Span) {
        self.errors.push(LexError { message, span });
        self.tokens.push(Token {
            tok: Tok::Hole,
            span,
        });
    }

    /// `.` terminates a clause only before whitespace, a comment, or EOF.
    fn dot(&mut self) {
        let next = self.bytes.get(self.pos + 1).copied();
        match next {
            None | Some(b' ') | Some(b'\t') | Some(b'\r') | Some(b'\n') | Some(b'%') => {
                self.punct(Tok::Dot)
            }
            _ => {
                let span = self.span_here(1);
                self.error(
                    "'.' must end a clause (followed by whitespace or end of input)".to_string(),
                    span,
                );
                self.advance();
            }
        }
    }

    fn numeral(&mut self) {
        let start = self.pos;
        let (line, col) = (self.line, self.col);
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.advance();
        }
        // A decimal point only when digits follow directly.
        if self.bytes.get(self.pos) == Some(&b'.')
            && self
                .bytes
                .get(self.pos + 1)
                .is_some_and(|b| b.is_ascii_digit())
        {
            self.advance();
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.advance();
            }
        }
        let span = Span::new(line, col, start, self.pos);
        match Number::parse_literal(&self.text[start..self.pos]) {
            Some(n) => self.tokens.push(Token {
                tok: Tok::Num(n),
                span,
            }),
            None => self.error("number literal out of range".to_string(), span),
        }
    }

    fn ident_end(&mut self) {
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
        {
            self.advance();
        }
    }

    fn name(&mut self) {
        let start = self.pos;
        let (line, col) = (self.line, self.col);
        self.ident_end();
        let text = self.text[start..self.pos].to_string();
        let (tok, end) = if self.bytes.get(self.pos) == Some(&b'(') {
            self.advance();
            (Tok::Functor(text), self.pos)
        } else {
            (Tok::Atom(text), self.pos)
        };
        self.tokens.push(Token {
            tok,
            span: Span::new(line, col, start, end),
        });
    }

    fn variable(&mut self) {
        let start = self.pos;
        let (line, col) = (self.line, self.col);
        self.ident_end();
        self.tokens.push(Token {
            tok: Tok::Var(self.text[start..self.pos].to_string()),
            span: Span::new(line, col, start, self.pos),
        });
    }

    fn quoted_atom(&mut self) {
        let start = self.pos;
        let (line, col) = (self.line, self.col);
        self.advance(); // opening quote
        let mut content = String::new();
        loop {
            match self.bytes.get(self.pos).copied() {
                None | Some(b'\n') => {
                    let span = Span::new(line, col, start, self.pos);
                    self.error("unterminated quoted atom".to_string(), span);
                    return;
                }
                Some(b'\'') => {
                    // Doubled quote is an escaped quote.
                    if self.bytes.get(self.pos + 1) == Some(&b'\'') {
                        self.advance();
                        self.advance();
                        content.push('\'');
                        continue;
                    }
                    self.advance();
                    break;
                }
                Some(b'\\') => {
                    let esc = self.bytes.get(self.pos + 1).copied();
                    let Some(ch) = esc.and_then(|b| match b {
                        b'\\' => Some('\\'),
                        b'\'' => Some('\''),
                        b'n' => Some('\n'),
                        b't' => Some('\t'),
                        _ => None,
                    }) else {
                        let span = Span::new(self.line, self.col, self.pos, self.pos + 2);
                        self.error("invalid escape in quoted atom".to_string(), span);
                        self.advance();
                        continue;
                    };
                    self.advance();
                    self.advance();
                    content.push(ch);
                }
                Some(_) => {
                    let ch = self.text[self.pos..].chars().next().unwrap();
                    content.push(ch);
                    self.advance_char();
                }
            }
        }
        let (tok, end) = if self.bytes.get(self.pos) == Some(&b'(') {
            self.advance();
            (Tok::Functor(content), self.pos)
        } else {
            (Tok::Atom(content), self.pos)
        };
        self.tokens.push(Token {
            tok,
            span: Span::new(line, col, start, end),
        });
    }

    fn symbolic(&mut self) {
        let start = self.pos;
        let (line, col) = (self.line, self.col);
        while self.pos < self.bytes.len() && is_symbol_char(self.bytes[self.pos]) {
            self.advance();
        }
        let run = &self.text[start..self.pos];
        let span = Span::new(line, col, start, self.pos);
        if let Some(op) = SYMBOLIC_OPS.iter().find(|op| **op == run) {
            self.tokens.push(Token {
                tok: Tok::Op(op),
                span,
            });
        } else if run.starts_with("//") {
            self.error("unsupported comment delimiter '//'".to_string(), span);
            // Treat the rest of the line as the intended comment.
            while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                self.advance();
            }
        } else {
            self.error(format!("unknown operator '{run}'"), span);
        }
    }
}
