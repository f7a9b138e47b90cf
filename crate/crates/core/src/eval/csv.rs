//! Minimal CSV reader that keeps the quoting distinction the dataset
//! format relies on: an empty unquoted field is NULL, `""` is empty text.

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct CsvError {
    pub line: usize,
    pub message: String,
}

/// One record with the line it starts on. `None` fields were empty and
/// unquoted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub line: usize,
    pub fields: Vec<Option<String>>,
}

/// Parses RFC 4180 text: comma separated, double-quote quoting with `""`
/// escapes, LF or CRLF line ends. Blank lines are skipped.
pub fn parse_csv(text: &str) -> Result<Vec<Record>, CsvError> {
    let mut records = Vec::new();
    let mut chars = text.chars().peekable();
    let mut line = 1;
    while chars.peek().is_some() {
        let start = line;
        let mut fields = Vec::new();
        loop {
            let mut value = String::new();
            let mut quoted = false;
            if chars.peek() == Some(&'"') {
                chars.next();
                quoted = true;
                loop {
                    match chars.next() {
                        None => return Err(CsvError { line: start, message: "unterminated quoted field".into() }),
                        Some('"') if chars.peek() == Some(&'"') => {
                            chars.next();
                            value.push('"');
                        }
                        Some('"') => break,
                        Some(c) => {
                            if c == '\n' {
                                line += 1;
                            }
                            value.push(c);
                        }
                    }
                }
            }
            while let Some(&c) = chars.peek() {
                if c == ',' || c == '\n' || c == '\r' {
                    break;
                }
                if quoted {
                    return Err(CsvError { line, message: format!("unexpected {c:?} after closing quote") });
                }
                value.push(c);
                chars.next();
            }
            fields.push(if quoted || !value.is_empty() { Some(value) } else { None });
            match chars.next() {
                Some(',') => continue,
                Some('\r') => {
                    if chars.next_if_eq(&'\n').is_some() {
                        line += 1;
                    }
                    break;
                }
                Some('\n') => {
                    line += 1;
                    break;
                }
                _ => break,
            }
        }
        if !(fields.len() == 1 && fields[0].is_none()) {
            records.push(Record { line: start, fields });
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_versus_empty_text() {
        let recs = parse_csv("a,,\"\",b\n").unwrap();
        let f: Vec<Option<&str>> = recs[0].fields.iter().map(|f| f.as_deref()).collect();
        assert_eq!(f, [Some("a"), None, Some(""), Some("b")]);
    }

    #[test]
    fn quotes_commas_and_newlines() {
        let recs = parse_csv("x,\"a,b\"\r\n\"he said \"\"hi\"\"\",\"two\nlines\"\n3,4").unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[0].fields[1].as_deref(), Some("a,b"));
        assert_eq!(recs[1].fields[0].as_deref(), Some("he said \"hi\""));
        assert_eq!(recs[1].fields[1].as_deref(), Some("two\nlines"));
        assert_eq!(recs[2].line, 4);
    }

    #[test]
    fn blank_lines_skipped() {
        assert_eq!(parse_csv("a\n\nb\n").unwrap().len(), 2);
    }

    #[test]
    fn unterminated_quote() {
        assert_eq!(parse_csv("a\n\"oops").unwrap_err(), CsvError { line: 2, message: "unterminated quoted field".into() });
    }

    #[test]
    fn text_after_quote() {
        assert!(parse_csv("\"a\"b").is_err());
    }
}
