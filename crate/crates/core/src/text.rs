//! Line tokenizer shared by the SLP and automaton text formats.

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Token {
    /// A bare whitespace-free word.
    Word(String),
    /// A single-quoted character such as `'a'` or `'\n'`.
    Quoted(char),
    /// A brace-delimited group such as `{open(x), close(y)}`, braces included.
    Braced(String),
}

/// Splits a line into tokens, returning each with its 1-based column.
pub(crate) fn tokenize(line: &str) -> Result<Vec<(usize, Token)>, (usize, String)> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let column = i + 1;
        match c {
            '\'' => {
                let (ch, used) = match chars.get(i + 1) {
                    Some('\\') => {
                        let e = chars
                            .get(i + 2)
                            .ok_or((column, "unterminated escape".to_owned()))?;
                        let ch = match e {
                            'n' => '\n',
                            't' => '\t',
                            'r' => '\r',
                            '0' => '\0',
                            '\\' => '\\',
                            '\'' => '\'',
                            other => return Err((column, format!("unknown escape `\\{other}`"))),
                        };
                        (ch, 2)
                    }
                    Some(&ch) => (ch, 1),
                    None => return Err((column, "unterminated quote".to_owned())),
                };
                if chars.get(i + 1 + used) != Some(&'\'') {
                    return Err((
                        column,
                        "a quoted terminal holds exactly one character".to_owned(),
                    ));
                }
                out.push((column, Token::Quoted(ch)));
                i += used + 2;
            }
            '{' => {
                let end = chars[i..]
                    .iter()
                    .position(|&c| c == '}')
                    .ok_or((column, "unterminated `{`".to_owned()))?;
                out.push((column, Token::Braced(chars[i..=i + end].iter().collect())));
                i += end + 1;
            }
            _ => {
                let start = i;
                while i < chars.len() && !chars[i].is_whitespace() {
                    i += 1;
                }
                out.push((column, Token::Word(chars[start..i].iter().collect())));
            }
        }
    }
    Ok(out)
}

/// Renders a terminal, quoting when the bare form would not tokenize back.
pub(crate) fn quote_char(c: char) -> String {
    match c {
        '\n' => "'\\n'".into(),
        '\t' => "'\\t'".into(),
        '\r' => "'\\r'".into(),
        '\0' => "'\\0'".into(),
        '\\' => "'\\\\'".into(),
        '\'' => "'\\''".into(),
        c => format!("'{c}'"),
    }
}

/// Bare form when unambiguous, quoted otherwise.
pub(crate) fn bare_or_quoted(c: char) -> String {
    if c.is_whitespace() || c.is_control() || matches!(c, '\'' | '{' | '\\') {
        quote_char(c)
    } else {
        c.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens() {
        let t = tokenize("A -> B 'a' ' ' '\\'' {open(x), close(y)}").unwrap();
        assert_eq!(t[0], (1, Token::Word("A".into())));
        assert_eq!(t[3].1, Token::Quoted('a'));
        assert_eq!(t[4].1, Token::Quoted(' '));
        assert_eq!(t[5].1, Token::Quoted('\''));
        assert_eq!(t[6].1, Token::Braced("{open(x), close(y)}".into()));
        assert!(tokenize("'ab'").is_err());
        for c in ['a', ' ', '\n', '\'', '\\', '{'] {
            let rendered = bare_or_quoted(c);
            let back = tokenize(&rendered).unwrap();
            let got = match &back[0].1 {
                Token::Quoted(q) => *q,
                Token::Word(w) => w.chars().next().unwrap(),
                Token::Braced(_) => unreachable!(),
            };
            assert_eq!(got, c);
        }
    }
}
