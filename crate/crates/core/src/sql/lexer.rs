//! SQLite tokenizer.

use super::SqlError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuoteStyle {
    Double,
    Backtick,
    Bracket,
}

impl QuoteStyle {
    pub fn wrap(self, content: &str) -> String {
        match self {
            QuoteStyle::Double => format!("\"{}\"", content.replace('"', "\"\"")),
            QuoteStyle::Backtick => format!("`{}`", content.replace('`', "``")),
            QuoteStyle::Bracket => format!("[{content}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    /// Bare word: keyword or identifier, as written.
    Word(String),
    /// Quoted identifier (or, for [`QuoteStyle::Double`], possibly a string literal).
    Quoted(String, QuoteStyle),
    /// Single-quoted string literal, unescaped content.
    String(String),
    /// Numeric literal as written.
    Number(String),
    /// Bind parameter as written (`?`, `?1`, `:name`, `@name`, `$name`).
    Param(String),
    /// Operator or punctuation.
    Symbol(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    /// Byte offset of the first character.
    pub pos: usize,
}

impl Token {
    pub fn is_word(&self, kw: &str) -> bool {
        matches!(&self.kind, TokenKind::Word(w) if w.eq_ignore_ascii_case(kw))
    }

    pub fn is_symbol(&self, sym: &str) -> bool {
        matches!(&self.kind, TokenKind::Symbol(s) if *s == sym)
    }
}

const SYMBOLS: &[&str] = &[
    "||", "<=", ">=", "<>", "!=", "==", "<<", ">>", "->>", "->", "=", "<", ">", "+", "-", "*", "/", "%", "&",
    "|", "~", "(", ")", ",", ".", ";",
];

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || (c as u32) > 0x7f
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$' || (c as u32) > 0x7f
}

pub fn tokenize(sql: &str) -> Result<Vec<Token>, SqlError> {
    let bytes = sql.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < sql.len() {
        let c = sql[i..].chars().next().unwrap();
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        if sql[i..].starts_with("--") {
            i = sql[i..].find('\n').map_or(sql.len(), |n| i + n + 1);
            continue;
        }
        if sql[i..].starts_with("/*") {
            i = sql[i + 2..].find("*/").map_or(sql.len(), |n| i + 2 + n + 2);
            continue;
        }
        let start = i;
        match c {
            '\'' => {
                let (content, end) = read_delimited(sql, i, '\'', '\'')?;
                tokens.push(Token { kind: TokenKind::String(content), pos: start });
                i = end;
            }
            '"' => {
                let (content, end) = read_delimited(sql, i, '"', '"')?;
                tokens.push(Token { kind: TokenKind::Quoted(content, QuoteStyle::Double), pos: start });
                i = end;
            }
            '`' => {
                let (content, end) = read_delimited(sql, i, '`', '`')?;
                tokens.push(Token { kind: TokenKind::Quoted(content, QuoteStyle::Backtick), pos: start });
                i = end;
            }
            '[' => {
                let close = sql[i + 1..].find(']').ok_or(SqlError::Parse {
                    pos: start,
                    message: "unterminated [identifier]".into(),
                })?;
                let content = sql[i + 1..i + 1 + close].to_string();
                tokens.push(Token { kind: TokenKind::Quoted(content, QuoteStyle::Bracket), pos: start });
                i = i + 1 + close + 1;
            }
            '0'..='9' => {
                i = read_number(sql, i);
                tokens.push(Token { kind: TokenKind::Number(sql[start..i].to_string()), pos: start });
            }
            '.' if bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => {
                i = read_number(sql, i);
                tokens.push(Token { kind: TokenKind::Number(sql[start..i].to_string()), pos: start });
            }
            '?' => {
                i += 1;
                while bytes.get(i).is_some_and(u8::is_ascii_digit) {
                    i += 1;
                }
                tokens.push(Token { kind: TokenKind::Param(sql[start..i].to_string()), pos: start });
            }
            ':' | '@' | '$' if sql[i + 1..].chars().next().is_some_and(is_ident_start) => {
                i += 1;
                i = read_word_end(sql, i);
                tokens.push(Token { kind: TokenKind::Param(sql[start..i].to_string()), pos: start });
            }
            c if is_ident_start(c) => {
                i = read_word_end(sql, i);
                tokens.push(Token { kind: TokenKind::Word(sql[start..i].to_string()), pos: start });
            }
            _ => {
                let sym = SYMBOLS
                    .iter()
                    .find(|s| sql[i..].starts_with(**s))
                    .ok_or_else(|| SqlError::Parse {
                        pos: start,
                        message: format!("unexpected character {c:?}"),
                    })?;
                i += sym.len();
                tokens.push(Token { kind: TokenKind::Symbol(sym), pos: start });
            }
        }
    }
    Ok(tokens)
}

fn read_word_end(sql: &str, mut i: usize) -> usize {
    while let Some(c) = sql[i..].chars().next() {
        if !is_ident_char(c) {
            break;
        }
        i += c.len_utf8();
    }
    i
}

/// Reads a literal delimited by `open`/`close` where a doubled `close` escapes itself.
fn read_delimited(sql: &str, start: usize, open: char, close: char) -> Result<(String, usize), SqlError> {
    debug_assert!(sql[start..].starts_with(open));
    let mut content = String::new();
    let mut i = start + open.len_utf8();
    loop {
        let Some(c) = sql[i..].chars().next() else {
            return Err(SqlError::Parse {
                pos: start,
                message: format!("unterminated {open}-quoted text"),
            });
        };
        i += c.len_utf8();
        if c == close {
            if sql[i..].starts_with(close) {
                content.push(close);
                i += close.len_utf8();
            } else {
                return Ok((content, i));
            }
        } else {
            content.push(c);
        }
    }
}

fn read_number(sql: &str, start: usize) -> usize {
    let b = sql.as_bytes();
    let mut i = start;
    if b[i] == b'0' && matches!(b.get(i + 1), Some(b'x' | b'X')) {
        i += 2;
        while b.get(i).is_some_and(u8::is_ascii_hexdigit) {
            i += 1;
        }
        return i;
    }
    while b.get(i).is_some_and(|c| c.is_ascii_digit() || *c == b'_') {
        i += 1;
    }
    if b.get(i) == Some(&b'.') {
        i += 1;
        while b.get(i).is_some_and(u8::is_ascii_digit) {
            i += 1;
        }
    }
    if matches!(b.get(i), Some(b'e' | b'E')) {
        let mut j = i + 1;
        if matches!(b.get(j), Some(b'+' | b'-')) {
            j += 1;
        }
        if b.get(j).is_some_and(u8::is_ascii_digit) {
            i = j;
            while b.get(i).is_some_and(u8::is_ascii_digit) {
                i += 1;
            }
        }
    }
    i
}
