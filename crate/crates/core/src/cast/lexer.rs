use std::sync::Arc;

use super::ast::SourceSpan;
use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i128),
    Float(f64),
    Punct(&'static str),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(name) => format!("identifier `{name}`"),
            Tok::Int(v) => format!("integer `{v}`"),
            Tok::Float(v) => format!("number `{v}`"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

// Longest first so that maximal munch works by linear scan.
const PUNCTS: &[&str] = &[
    "<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=",
    "-=", "*=", "/=", "%=", "&=", "|=", "^=", "+", "-", "*", "/", "%", "<", ">", "=", "!", "~",
    "&", "|", "^", "(", ")", "[", "]", "{", "}", ";", ",", ".", "?", ":",
];

pub fn tokenize(file: &Arc<str>, source: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = source.as_bytes();
    let mut out = Vec::new();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;
    let span = |line: u32, col: u32, len: usize| SourceSpan::new(file.clone(), line, col, len as u32);

    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
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
        if c == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'*') {
            let (start_line, start_col) = (line, col);
            i += 2;
            col += 2;
            loop {
                if i >= bytes.len() {
                    return Err(ParseError::Syntax {
                        span: span(start_line, start_col, 2),
                        expected: vec!["`*/`".into()],
                        found: "end of input".into(),
                    });
                }
                if bytes[i] == b'*' && bytes.get(i + 1) == Some(&b'/') {
                    i += 2;
                    col += 2;
                    break;
                }
                if bytes[i] == b'\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
            continue;
        }
        if c == b'#' {
            let start = i;
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            return Err(ParseError::Unsupported {
                span: span(line, col, i - start),
                construct: "preprocessor directive".into(),
            });
        }
        if c == b'"' || c == b'\'' {
            return Err(ParseError::Unsupported {
                span: span(line, col, 1),
                construct: if c == b'"' { "string literal" } else { "character literal" }.into(),
            });
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let text = &source[start..i];
            out.push(Token { tok: Tok::Ident(text.to_string()), span: span(line, col, i - start) });
            col += (i - start) as u32;
            continue;
        }
        if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit())) {
            let start = i;
            let (tok, len) = lex_number(&source[start..]).ok_or_else(|| ParseError::Syntax {
                span: span(line, col, 1),
                expected: vec!["number".into()],
                found: source[start..].chars().take(8).collect(),
            })?;
            i += len;
            out.push(Token { tok, span: span(line, col, len) });
            col += len as u32;
            continue;
        }
        let rest = &source[i..];
        match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                out.push(Token { tok: Tok::Punct(p), span: span(line, col, p.len()) });
                i += p.len();
                col += p.len() as u32;
            }
            None => {
                let ch = rest.chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    span: span(line, col, 1),
                    expected: vec!["token".into()],
                    found: format!("character `{ch}`"),
                });
            }
        }
    }
    out.push(Token { tok: Tok::Eof, span: span(line, col, 0) });
    Ok(out)
}

fn lex_number(text: &str) -> Option<(Tok, usize)> {
    let bytes = text.as_bytes();
    if text.starts_with("0x") || text.starts_with("0X") {
        let mut end = 2;
        while end < bytes.len() && bytes[end].is_ascii_hexdigit() {
            end += 1;
        }
        let value = i128::from_str_radix(&text[2..end], 16).ok()?;
        return Some((Tok::Int(value), end + int_suffix_len(&bytes[end..])));
    }
    let mut end = 0;
    while end < bytes.len() && bytes[end].is_ascii_digit() {
        end += 1;
    }
    let mut is_float = false;
    if end < bytes.len() && bytes[end] == b'.' {
        is_float = true;
        end += 1;
        while end < bytes.len() && bytes[end].is_ascii_digit() {
            end += 1;
        }
    }
    if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
        let mut probe = end + 1;
        if probe < bytes.len() && (bytes[probe] == b'+' || bytes[probe] == b'-') {
            probe += 1;
        }
        if probe < bytes.len() && bytes[probe].is_ascii_digit() {
            is_float = true;
            end = probe;
            while end < bytes.len() && bytes[end].is_ascii_digit() {
                end += 1;
            }
        }
    }
    if is_float {
        let value: f64 = text[..end].parse().ok()?;
        let suffix = usize::from(end < bytes.len() && matches!(bytes[end], b'f' | b'F'));
        Some((Tok::Float(value), end + suffix))
    } else {
        let value: i128 = text[..end].parse().ok()?;
        Some((Tok::Int(value), end + int_suffix_len(&bytes[end..])))
    }
}

fn int_suffix_len(rest: &[u8]) -> usize {
    rest.iter().take_while(|b| matches!(b, b'u' | b'U' | b'l' | b'L')).count().min(3)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        tokenize(&Arc::from("t.c"), src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn maximal_munch() {
        assert_eq!(
            toks("p->x <<= 2;"),
            vec![
                Tok::Ident("p".into()),
                Tok::Punct("->"),
                Tok::Ident("x".into()),
                Tok::Punct("<<="),
                Tok::Int(2),
                Tok::Punct(";"),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn numbers() {
        assert_eq!(toks("27.0 1e-7 0x1F 10UL")[..4], [Tok::Float(27.0), Tok::Float(1e-7), Tok::Int(31), Tok::Int(10)]);
    }

    #[test]
    fn comments_and_lines() {
        let t = tokenize(&Arc::from("t.c"), "// hi\n/* a\n b */ x").unwrap();
        assert_eq!(t[0].span.line, 3);
        assert_eq!(t[0].span.column, 7);
    }

    #[test]
    fn preprocessor_is_rejected() {
        let err = tokenize(&Arc::from("t.c"), "#include <x.h>\n").unwrap_err();
        assert!(err.to_string().contains("preprocessor"));
    }
}
