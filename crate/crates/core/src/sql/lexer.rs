//! Hand-rolled SQL lexer. Identifiers are case-folded to lowercase;
//! backtick-quoted identifiers are accepted and stripped. Whitespace and
//! comments (`--`, `#`, `/* */`) are skipped.

use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    /// Lowercased identifier (keywords are just identifiers at this level).
    Ident(String),
    Number(String),
    StringLit(String),
    Comma,
    Dot,
    Star,
    LParen,
    RParen,
    Plus,
    Minus,
    Slash,
    Percent,
    Eq,
    NotEq,
    Lt,
    LtEq,
    Gt,
    GtEq,
    Semicolon,
    Eof,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub offset: usize,
}

pub fn lex(sql: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = sql.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0usize;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        // Comments.
        if c == '-' && bytes.get(i + 1) == Some(&b'-') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == '#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == '/' && bytes.get(i + 1) == Some(&b'*') {
            let start = i;
            i += 2;
            loop {
                if i + 1 >= bytes.len() {
                    return Err(ParseError::new(start, "unterminated block comment"));
                }
                if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                    i += 2;
                    break;
                }
                i += 1;
            }
            continue;
        }

        let start = i;
        let kind = match c {
            ',' => {
                i += 1;
                TokenKind::Comma
            }
            '.' => {
                i += 1;
                TokenKind::Dot
            }
            '*' => {
                i += 1;
                TokenKind::Star
            }
            '(' => {
                i += 1;
                TokenKind::LParen
            }
            ')' => {
                i += 1;
                TokenKind::RParen
            }
            '+' => {
                i += 1;
                TokenKind::Plus
            }
            '-' => {
                i += 1;
                TokenKind::Minus
            }
            '/' => {
                i += 1;
                TokenKind::Slash
            }
            '%' => {
                i += 1;
                TokenKind::Percent
            }
            ';' => {
                i += 1;
                TokenKind::Semicolon
            }
            '=' => {
                i += 1;
                TokenKind::Eq
            }
            '!' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    i += 2;
                    TokenKind::NotEq
                } else {
                    return Err(ParseError::new(start, "unexpected character '!'"));
                }
            }
            '<' => match bytes.get(i + 1) {
                Some(&b'=') => {
                    i += 2;
                    TokenKind::LtEq
                }
                Some(&b'>') => {
                    i += 2;
                    TokenKind::NotEq
                }
                _ => {
                    i += 1;
                    TokenKind::Lt
                }
            },
            '>' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    i += 2;
                    TokenKind::GtEq
                } else {
                    i += 1;
                    TokenKind::Gt
                }
            }
            '\'' | '"' => {
                let quote = bytes[i];
                i += 1;
                let mut text = String::new();
                loop {
                    if i >= bytes.len() {
                        return Err(ParseError::new(start, "unterminated string literal"));
                    }
                    if bytes[i] == quote {
                        // Doubled quote is an escaped quote character.
                        if bytes.get(i + 1) == Some(&quote) {
                            text.push(quote as char);
                            i += 2;
                            continue;
                        }
                        i += 1;
                        break;
                    }
                    text.push(bytes[i] as char);
                    i += 1;
                }
                TokenKind::StringLit(text)
            }
            '`' => {
                i += 1;
                let ident_start = i;
                while i < bytes.len() && bytes[i] != b'`' {
                    i += 1;
                }
                if i >= bytes.len() {
                    return Err(ParseError::new(start, "unterminated quoted identifier"));
                }
                let text = &sql[ident_start..i];
                i += 1;
                if text.is_empty() {
                    return Err(ParseError::new(start, "empty quoted identifier"));
                }
                TokenKind::Ident(text.to_lowercase())
            }
            _ if c.is_ascii_digit() => {
                while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
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
                        i = j;
                        while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                TokenKind::Number(sql[start..i].to_string())
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                while i < bytes.len() {
                    let ch = bytes[i] as char;
                    if ch.is_ascii_alphanumeric() || ch == '_' || ch == '$' {
                        i += 1;
                    } else {
                        break;
                    }
                }
                TokenKind::Ident(sql[start..i].to_lowercase())
            }
            _ => {
                return Err(ParseError::new(
                    start,
                    format!("unexpected character {c:?}"),
                ))
            }
        };
        tokens.push(Token {
            kind,
            offset: start,
        });
    }
    tokens.push(Token {
        kind: TokenKind::Eof,
        offset: sql.len(),
    });
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(sql: &str) -> Vec<TokenKind> {
        lex(sql).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn lexes_basic_tokens() {
        assert_eq!(
            kinds("SELECT a, b.c FROM t WHERE x >= 10"),
            vec![
                TokenKind::Ident("select".into()),
                TokenKind::Ident("a".into()),
                TokenKind::Comma,
                TokenKind::Ident("b".into()),
                TokenKind::Dot,
                TokenKind::Ident("c".into()),
                TokenKind::Ident("from".into()),
                TokenKind::Ident("t".into()),
                TokenKind::Ident("where".into()),
                TokenKind::Ident("x".into()),
                TokenKind::GtEq,
                TokenKind::Number("10".into()),
                TokenKind::Eof,
            ]
        );
    }

    #[test]
    fn skips_comments() {
        assert_eq!(
            kinds("SELECT a -- trailing\n/* block */ FROM t # hash"),
            kinds("SELECT a FROM t")
        );
    }

    #[test]
    fn string_escapes_and_backticks() {
        assert_eq!(
            kinds("'it''s' `Mixed`"),
            vec![
                TokenKind::StringLit("it's".into()),
                TokenKind::Ident("mixed".into()),
                TokenKind::Eof
            ]
        );
    }

    #[test]
    fn reports_offset_of_bad_character() {
        let err = lex("abc @").unwrap_err();
        assert_eq!(err.offset, 4);
    }
}
