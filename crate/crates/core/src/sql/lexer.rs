use super::SqlError;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    /// Backtick or bracket quoted; always an identifier.
    QuotedIdent(String),
    /// SQLite reads `"x"` as an identifier when one resolves, else a string.
    DoubleQuoted(String),
    Str(String),
    Number(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Star,
    Plus,
    Minus,
    Slash,
    Percent,
    Eq,
    NotEq,
    Lt,
    Gt,
    LtEq,
    GtEq,
    Concat,
    Semicolon,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    /// Byte offset into the statement.
    pub pos: usize,
}

pub fn tokenize(sql: &str) -> Result<Vec<Token>, SqlError> {
    let bytes = sql.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let syntax = |pos: usize, message: &str| SqlError::Syntax {
        pos,
        message: message.to_string(),
    };
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let kind = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'-' if bytes.get(i + 1) == Some(&b'-') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            b'\'' | b'"' | b'`' => {
                let (text, end) = quoted(sql, i, c).ok_or_else(|| syntax(start, "unterminated quote"))?;
                i = end;
                match c {
                    b'\'' => TokenKind::Str(text),
                    b'"' => TokenKind::DoubleQuoted(text),
                    _ => TokenKind::QuotedIdent(text),
                }
            }
            b'[' => {
                let end = sql[i + 1..]
                    .find(']')
                    .ok_or_else(|| syntax(start, "unterminated bracket identifier"))?;
                let text = sql[i + 1..i + 1 + end].to_string();
                i += end + 2;
                TokenKind::QuotedIdent(text)
            }
            b'0'..=b'9' => {
                i = number_end(bytes, i);
                TokenKind::Number(sql[start..i].to_string())
            }
            b'.' if bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => {
                i = number_end(bytes, i);
                TokenKind::Number(sql[start..i].to_string())
            }
            b'(' => single(&mut i, TokenKind::LParen),
            b')' => single(&mut i, TokenKind::RParen),
            b',' => single(&mut i, TokenKind::Comma),
            b'.' => single(&mut i, TokenKind::Dot),
            b'*' => single(&mut i, TokenKind::Star),
            b'+' => single(&mut i, TokenKind::Plus),
            b'-' => single(&mut i, TokenKind::Minus),
            b'/' => single(&mut i, TokenKind::Slash),
            b'%' => single(&mut i, TokenKind::Percent),
            b';' => single(&mut i, TokenKind::Semicolon),
            b'=' => {
                i += if bytes.get(i + 1) == Some(&b'=') { 2 } else { 1 };
                TokenKind::Eq
            }
            b'!' if bytes.get(i + 1) == Some(&b'=') => {
                i += 2;
                TokenKind::NotEq
            }
            b'<' => match bytes.get(i + 1) {
                Some(b'=') => {
                    i += 2;
                    TokenKind::LtEq
                }
                Some(b'>') => {
                    i += 2;
                    TokenKind::NotEq
                }
                _ => single(&mut i, TokenKind::Lt),
            },
            b'>' => match bytes.get(i + 1) {
                Some(b'=') => {
                    i += 2;
                    TokenKind::GtEq
                }
                _ => single(&mut i, TokenKind::Gt),
            },
            b'|' if bytes.get(i + 1) == Some(&b'|') => {
                i += 2;
                TokenKind::Concat
            }
            _ => {
                let ch = sql[i..].chars().next().expect("in bounds");
                if ch.is_alphabetic() || ch == '_' {
                    let end = sql[i..]
                        .char_indices()
                        .find(|(_, c)| !(c.is_alphanumeric() || *c == '_' || *c == '$'))
                        .map_or(sql.len(), |(off, _)| i + off);
                    let text = sql[i..end].to_string();
                    i = end;
                    TokenKind::Ident(text)
                } else {
                    return Err(syntax(start, &format!("unexpected character {ch:?}")));
                }
            }
        };
        out.push(Token { kind, pos: start });
    }
    Ok(out)
}

fn single(i: &mut usize, kind: TokenKind) -> TokenKind {
    *i += 1;
    kind
}

fn number_end(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
        i += 1;
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        if j < bytes.len() && bytes[j].is_ascii_digit() {
            i = j;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
        }
    }
    i
}

/// Reads a quoted run starting at `start`; a doubled quote is an escape.
fn quoted(sql: &str, start: usize, quote: u8) -> Option<(String, usize)> {
    let bytes = sql.as_bytes();
    let mut i = start + 1;
    let mut text = String::new();
    let mut seg = i;
    while i < bytes.len() {
        if bytes[i] == quote {
            text.push_str(&sql[seg..i]);
            if bytes.get(i + 1) == Some(&quote) {
                text.push(quote as char);
                i += 2;
                seg = i;
                continue;
            }
            return Some((text, i + 1));
        }
        i += 1;
    }
    None
}
