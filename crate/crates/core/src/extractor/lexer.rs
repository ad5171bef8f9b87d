//! A forgiving Java tokenizer. It knows enough about literals and comments to
//! keep braces and parentheses honest, and nothing about the grammar.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    /// Decoded contents of a string literal or text block.
    Str(String),
    Char,
    Num,
    /// Raw text between `/**` and `*/`.
    Javadoc(String),
    Punct(char),
    Arrow,
    ColonColon,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
}

impl Token {
    pub fn is_punct(&self, c: char) -> bool {
        self.tok == Tok::Punct(c)
    }

    pub fn ident(&self) -> Option<&str> {
        match &self.tok {
            Tok::Ident(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_ident(&self, s: &str) -> bool {
        self.ident() == Some(s)
    }
}

fn unescape(c: char) -> char {
    match c {
        'n' => '\n',
        't' => '\t',
        'r' => '\r',
        'b' => '\u{8}',
        'f' => '\u{c}',
        '0' => '\0',
        's' => ' ',
        other => other,
    }
}

pub fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let at = |i: usize| chars.get(i).copied().unwrap_or('\0');

    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            line += 1;
            i += 1;
        } else if c.is_whitespace() {
            i += 1;
        } else if c == '/' && at(i + 1) == '/' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if c == '/' && at(i + 1) == '*' {
            let start_line = line;
            let javadoc = at(i + 2) == '*' && at(i + 3) != '/';
            let body_start = i + if javadoc { 3 } else { 2 };
            let mut j = body_start;
            while j < chars.len() && !(chars[j] == '*' && at(j + 1) == '/') {
                if chars[j] == '\n' {
                    line += 1;
                }
                j += 1;
            }
            if j >= chars.len() {
                return Err(Error::Extraction {
                    line: start_line,
                    message: "unterminated comment".into(),
                });
            }
            if javadoc {
                out.push(Token {
                    tok: Tok::Javadoc(chars[body_start..j].iter().collect()),
                    line: start_line,
                });
            }
            i = j + 2;
        } else if c == '"' && at(i + 1) == '"' && at(i + 2) == '"' {
            let start_line = line;
            let mut j = i + 3;
            let mut text = String::new();
            // skip the rest of the opening line
            while j < chars.len() && chars[j] != '\n' {
                j += 1;
            }
            loop {
                if j >= chars.len() {
                    return Err(Error::Extraction {
                        line: start_line,
                        message: "unterminated text block".into(),
                    });
                }
                if chars[j] == '"' && at(j + 1) == '"' && at(j + 2) == '"' {
                    break;
                }
                if chars[j] == '\\' {
                    text.push(unescape(at(j + 1)));
                    j += 2;
                    continue;
                }
                if chars[j] == '\n' {
                    line += 1;
                }
                text.push(chars[j]);
                j += 1;
            }
            let trimmed = text.strip_prefix('\n').unwrap_or(&text);
            out.push(Token {
                tok: Tok::Str(trimmed.lines().map(str::trim).collect::<Vec<_>>().join("\n")),
                line: start_line,
            });
            i = j + 3;
        } else if c == '"' || c == '\'' {
            let mut j = i + 1;
            let mut text = String::new();
            while j < chars.len() && chars[j] != c {
                if chars[j] == '\n' {
                    return Err(Error::Extraction {
                        line,
                        message: "unterminated literal".into(),
                    });
                }
                if chars[j] == '\\' {
                    text.push(unescape(at(j + 1)));
                    j += 2;
                } else {
                    text.push(chars[j]);
                    j += 1;
                }
            }
            if j >= chars.len() {
                return Err(Error::Extraction {
                    line,
                    message: "unterminated literal".into(),
                });
            }
            out.push(Token {
                tok: if c == '"' { Tok::Str(text) } else { Tok::Char },
                line,
            });
            i = j + 1;
        } else if c.is_ascii_digit() || (c == '.' && at(i + 1).is_ascii_digit()) {
            let mut j = i + 1;
            while j < chars.len() {
                let d = chars[j];
                let exponent_sign = (d == '+' || d == '-') && matches!(chars[j - 1], 'e' | 'E' | 'p' | 'P');
                if d.is_ascii_alphanumeric() || d == '_' || d == '.' || exponent_sign {
                    j += 1;
                } else {
                    break;
                }
            }
            out.push(Token { tok: Tok::Num, line });
            i = j;
        } else if c.is_alphabetic() || c == '_' || c == '$' {
            let mut j = i + 1;
            while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_' || chars[j] == '$') {
                j += 1;
            }
            out.push(Token {
                tok: Tok::Ident(chars[i..j].iter().collect()),
                line,
            });
            i = j;
        } else if c == '-' && at(i + 1) == '>' {
            out.push(Token { tok: Tok::Arrow, line });
            i += 2;
        } else if c == ':' && at(i + 1) == ':' {
            out.push(Token {
                tok: Tok::ColonColon,
                line,
            });
            i += 2;
        } else {
            out.push(Token {
                tok: Tok::Punct(c),
                line,
            });
            i += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn literals_and_comments() {
        let toks = kinds(
            r#"a("x\"y", 'c', 1.5e-3f) // gone
            /* gone */ /** kept */ b -> c::d"#,
        );
        assert_eq!(
            toks,
            vec![
                Tok::Ident("a".into()),
                Tok::Punct('('),
                Tok::Str("x\"y".into()),
                Tok::Punct(','),
                Tok::Char,
                Tok::Punct(','),
                Tok::Num,
                Tok::Punct(')'),
                Tok::Javadoc(" kept ".into()),
                Tok::Ident("b".into()),
                Tok::Arrow,
                Tok::Ident("c".into()),
                Tok::ColonColon,
                Tok::Ident("d".into()),
            ]
        );
    }

    #[test]
    fn braces_inside_strings_do_not_count() {
        let toks = kinds(r#"s = "{ } {"; '}'"#);
        assert_eq!(toks.iter().filter(|t| matches!(t, Tok::Punct('{' | '}'))).count(), 0);
    }

    #[test]
    fn text_block() {
        let toks = kinds("x = \"\"\"\n    AES/GCM/NoPadding\n    \"\"\";");
        assert_eq!(toks[2], Tok::Str("AES/GCM/NoPadding\n".into()));
    }

    #[test]
    fn line_numbers() {
        let toks = tokenize("a\n/* x\n y */\nb\n\"s\"").unwrap();
        let lines: Vec<usize> = toks.iter().map(|t| t.line).collect();
        assert_eq!(lines, vec![1, 4, 5]);
    }

    #[test]
    fn unterminated() {
        assert!(tokenize("\"abc").is_err());
        assert!(tokenize("/* abc").is_err());
        assert!(tokenize("/**/ x").unwrap().len() == 1);
    }
}
