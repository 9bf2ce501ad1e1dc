//! Whitespace and case normalization for `CREATE TABLE` statements.
//!
//! Column definitions and table constraints are kept as written apart from
//! case, runs of whitespace, comments, and redundant identifier quotes. Each
//! definition goes on its own line with no indentation.

use super::lexer::QuoteStyle;
use super::parser::is_reserved;
use super::SqlError;

#[derive(Debug, Clone, PartialEq)]
enum Piece {
    Text(String),
    Space,
    /// Single-quoted literal, rendered verbatim.
    Literal(String),
    Ident(String, QuoteStyle),
    Open,
    Close,
    Comma,
    Semi,
}

fn scan(ddl: &str) -> Result<Vec<Piece>, SqlError> {
    let mut out = Vec::new();
    let mut i = 0;
    let mut text = String::new();
    let flush = |text: &mut String, out: &mut Vec<Piece>| {
        if !text.is_empty() {
            out.push(Piece::Text(std::mem::take(text)));
        }
    };
    while let Some(c) = ddl[i..].chars().next() {
        if c.is_whitespace() {
            flush(&mut text, &mut out);
            if out.last() != Some(&Piece::Space) {
                out.push(Piece::Space);
            }
            i += c.len_utf8();
            continue;
        }
        if ddl[i..].starts_with("--") {
            flush(&mut text, &mut out);
            i = ddl[i..].find('\n').map_or(ddl.len(), |n| i + n);
            continue;
        }
        if ddl[i..].starts_with("/*") {
            flush(&mut text, &mut out);
            i = ddl[i + 2..].find("*/").map_or(ddl.len(), |n| i + 2 + n + 2);
            if out.last() != Some(&Piece::Space) {
                out.push(Piece::Space);
            }
            continue;
        }
        match c {
            '\'' | '"' | '`' => {
                flush(&mut text, &mut out);
                let end = find_close(ddl, i, c)?;
                let raw = &ddl[i..end];
                if c == '\'' {
                    out.push(Piece::Literal(raw.to_string()));
                } else {
                    let content = raw[1..raw.len() - 1].replace(&format!("{c}{c}"), &c.to_string());
                    let style = if c == '"' { QuoteStyle::Double } else { QuoteStyle::Backtick };
                    out.push(Piece::Ident(content, style));
                }
                i = end;
            }
            '[' => {
                flush(&mut text, &mut out);
                let close = ddl[i..].find(']').ok_or(SqlError::Parse {
                    pos: i,
                    message: "unterminated [identifier]".into(),
                })?;
                out.push(Piece::Ident(ddl[i + 1..i + close].to_string(), QuoteStyle::Bracket));
                i += close + 1;
            }
            '(' | ')' | ',' | ';' => {
                flush(&mut text, &mut out);
                out.push(match c {
                    '(' => Piece::Open,
                    ')' => Piece::Close,
                    ',' => Piece::Comma,
                    _ => Piece::Semi,
                });
                i += 1;
            }
            _ => {
                text.push(c);
                i += c.len_utf8();
            }
        }
    }
    flush(&mut text, &mut out);
    Ok(out)
}

fn find_close(s: &str, start: usize, q: char) -> Result<usize, SqlError> {
    let mut i = start + 1;
    loop {
        match s[i..].find(q) {
            None => {
                return Err(SqlError::Parse {
                    pos: start,
                    message: format!("unterminated {q}-quoted text"),
                })
            }
            Some(n) => {
                i += n + 1;
                if s[i..].starts_with(q) {
                    i += 1;
                } else {
                    return Ok(i);
                }
            }
        }
    }
}

fn render(pieces: &[Piece]) -> String {
    let mut out = String::new();
    for p in pieces {
        match p {
            Piece::Text(t) => out.push_str(&t.to_ascii_lowercase()),
            Piece::Space => out.push(' '),
            Piece::Literal(l) => out.push_str(l),
            Piece::Ident(content, style) => {
                let lower = content.to_ascii_lowercase();
                let plain = lower.chars().next().is_some_and(|c| c.is_ascii_lowercase() || c == '_')
                    && lower.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
                    && !is_reserved(&lower);
                if plain {
                    out.push_str(&lower);
                } else {
                    out.push_str(&style.wrap(&lower));
                }
            }
            Piece::Open => out.push('('),
            Piece::Close => out.push(')'),
            Piece::Comma => out.push(','),
            Piece::Semi => out.push(';'),
        }
    }
    out.trim().to_string()
}

fn render_statement(pieces: &[Piece], pos: usize) -> Result<String, SqlError> {
    let Some(open) = pieces.iter().position(|p| *p == Piece::Open) else {
        // No column list (e.g. CREATE TABLE ... AS SELECT): collapse onto one line.
        return Ok(format!("{};", render(pieces)));
    };
    let mut depth = 0usize;
    let mut close = None;
    let mut items = Vec::new();
    let mut item_start = open + 1;
    for (idx, p) in pieces.iter().enumerate().skip(open) {
        match p {
            Piece::Open => depth += 1,
            Piece::Close => {
                depth -= 1;
                if depth == 0 {
                    items.push(&pieces[item_start..idx]);
                    close = Some(idx);
                    break;
                }
            }
            Piece::Comma if depth == 1 => {
                items.push(&pieces[item_start..idx]);
                item_start = idx + 1;
            }
            _ => {}
        }
    }
    let Some(close) = close else {
        return Err(SqlError::Parse {
            pos,
            message: "unbalanced parentheses in CREATE TABLE".into(),
        });
    };
    let header = render(&pieces[..open]);
    let body = items.iter().map(|item| render(item)).collect::<Vec<_>>().join(",\n");
    let trailer = render(&pieces[close + 1..]);
    let trailer = if trailer.is_empty() {
        String::new()
    } else {
        format!(" {trailer}")
    };
    Ok(format!("{header} (\n{body}\n){trailer};"))
}

/// Normalizes one or more `CREATE TABLE` statements; statements are separated by a blank line.
pub fn normalize_ddl(ddl: &str) -> Result<String, SqlError> {
    let pieces = scan(ddl)?;
    let mut statements = Vec::new();
    let mut start = 0;
    let mut depth = 0i32;
    for (idx, p) in pieces.iter().enumerate() {
        match p {
            Piece::Open => depth += 1,
            Piece::Close => depth -= 1,
            Piece::Semi if depth == 0 => {
                statements.push(&pieces[start..idx]);
                start = idx + 1;
            }
            _ => {}
        }
    }
    statements.push(&pieces[start..]);

    let mut out = Vec::new();
    for stmt in statements {
        if stmt.iter().all(|p| *p == Piece::Space) {
            continue;
        }
        let first_word = stmt.iter().find_map(|p| match p {
            Piece::Text(t) => Some(t.as_str()),
            _ => None,
        });
        if !first_word.is_some_and(|w| w.eq_ignore_ascii_case("create")) {
            return Err(SqlError::Parse {
                pos: 0,
                message: "expected CREATE TABLE statement".into(),
            });
        }
        out.push(render_statement(stmt, 0)?);
    }
    if out.is_empty() {
        return Err(SqlError::Empty);
    }
    Ok(out.join("\n\n"))
}
