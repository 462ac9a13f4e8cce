use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Number(f64),
    Str(String),
    /// Unquoted month-day timestamp such as `Nov-11 0:00`.
    Stamp(String),
    Star,
    LParen,
    RParen,
    Comma,
    Semi,
    Op(CmpOp),
    End,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum CmpOp {
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub offset: usize,
}

const MONTHS: [&str; 12] = ["jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec"];

pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |offset: usize, message: &str| Error::Syntax { offset, message: message.to_string() };
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
                continue;
            }
            b'*' => Tok::Star,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b';' => Tok::Semi,
            b'=' => Tok::Op(CmpOp::Eq),
            b'<' | b'>' => {
                let next = bytes.get(i + 1).copied();
                if c == b'<' && next == Some(b'>') {
                    return Err(err(i, "`<>` is not supported; predicates must be conjunctive ranges"));
                }
                if next == Some(b'=') {
                    i += 1;
                    Tok::Op(if c == b'<' { CmpOp::Le } else { CmpOp::Ge })
                } else {
                    Tok::Op(if c == b'<' { CmpOp::Lt } else { CmpOp::Gt })
                }
            }
            b'!' => return Err(err(i, "`!=` is not supported; predicates must be conjunctive ranges")),
            b'\'' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match text[i..].chars().next() {
                        None => return Err(err(start, "unterminated string literal")),
                        Some('\'') if bytes.get(i + 1) == Some(&b'\'') => {
                            s.push('\'');
                            i += 2;
                        }
                        Some('\'') => break,
                        Some(ch) => {
                            s.push(ch);
                            i += ch.len_utf8();
                        }
                    }
                }
                Tok::Str(s)
            }
            b'0'..=b'9' | b'-' | b'+' | b'.' => {
                let mut j = i + 1;
                while j < bytes.len() && (bytes[j].is_ascii_digit() || bytes[j] == b'.') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                    let mut k = j + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        j = k;
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                    }
                }
                let lit = &text[i..j];
                let v: f64 = lit.parse().map_err(|_| err(i, &format!("malformed number `{lit}`")))?;
                if !v.is_finite() {
                    return Err(err(i, &format!("number `{lit}` is out of range")));
                }
                i = j - 1;
                Tok::Number(v)
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut j = i + 1;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_' || bytes[j] == b'.') {
                    j += 1;
                }
                let word = &text[i..j];
                if let Some(end) = month_day(text, i, j, word) {
                    i = end - 1;
                    Tok::Stamp(text[start..end].to_string())
                } else {
                    i = j - 1;
                    Tok::Ident(word.to_string())
                }
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(err(i, &format!("unexpected character `{ch}`")));
            }
        };
        out.push(Token { tok, offset: start });
        i += 1;
    }
    out.push(Token { tok: Tok::End, offset: text.len() });
    Ok(out)
}

/// End offset of a month-day literal starting with the word `text[i..j]`.
fn month_day(text: &str, i: usize, j: usize, word: &str) -> Option<usize> {
    let bytes = text.as_bytes();
    if !MONTHS.contains(&word.to_ascii_lowercase().as_str()) || bytes.get(j) != Some(&b'-') {
        return None;
    }
    let digits = |from: usize| (from..bytes.len()).take_while(|&k| bytes[k].is_ascii_digit()).count();
    let day = digits(j + 1);
    if day == 0 || day > 2 {
        return None;
    }
    let mut end = j + 1 + day;
    // Optional time of day: whitespace, H[H]:MM[:SS].
    let mut k = end;
    while k < bytes.len() && bytes[k] == b' ' {
        k += 1;
    }
    if k > end {
        let h = digits(k);
        if (1..=2).contains(&h) && bytes.get(k + h) == Some(&b':') && digits(k + h + 1) == 2 {
            let mut e = k + h + 3;
            if bytes.get(e) == Some(&b':') && digits(e + 1) == 2 {
                e += 3;
            }
            end = e;
        }
    }
    let _ = i;
    Some(end)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn operators_and_literals() {
        assert_eq!(
            toks("x>=2.5 AND y<'a''b'"),
            vec![
                Tok::Ident("x".into()),
                Tok::Op(CmpOp::Ge),
                Tok::Number(2.5),
                Tok::Ident("AND".into()),
                Tok::Ident("y".into()),
                Tok::Op(CmpOp::Lt),
                Tok::Str("a'b".into()),
                Tok::End
            ]
        );
    }

    #[test]
    fn month_day_stamps() {
        assert_eq!(toks("utc >= Nov-11 0:00 AND")[2], Tok::Stamp("Nov-11 0:00".into()));
        assert_eq!(toks("Nov-11;")[0], Tok::Stamp("Nov-11".into()));
        assert_eq!(toks("Nov-11x")[1], Tok::Ident("x".into()));
        assert!(tokenize("Nov - 11").is_err());
    }

    #[test]
    fn rejected_operators() {
        assert!(matches!(tokenize("a != 3"), Err(Error::Syntax { offset: 2, .. })));
        assert!(matches!(tokenize("a <> 3"), Err(Error::Syntax { offset: 2, .. })));
        assert!(matches!(tokenize("a = 'x"), Err(Error::Syntax { offset: 4, .. })));
    }
}
