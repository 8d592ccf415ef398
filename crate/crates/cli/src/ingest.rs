//! Line-oriented set files: one set per line, elements split by a delimiter.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read};

use log::warn;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedSets {
    pub sets: Vec<Vec<String>>,
    /// 1-based source line of each set.
    pub lines: Vec<usize>,
    pub skipped: usize,
}

/// True for tokens such as `42`, `-3.5` or `1,000`.
pub fn is_numeric(token: &str) -> bool {
    let body = token.strip_prefix(['-', '+']).unwrap_or(token);
    body.chars().any(|c| c.is_ascii_digit())
        && body
            .chars()
            .all(|c| c.is_ascii_digit() || c == '.' || c == ',')
}

/// Splits one line into distinct, trimmed, non-empty tokens in first-seen order.
pub fn split_line(line: &str, delimiter: &str, drop_numeric: bool) -> Vec<String> {
    let mut seen = HashSet::new();
    line.split(delimiter)
        .map(str::trim)
        .filter(|t| !t.is_empty() && !(drop_numeric && is_numeric(t)))
        .filter(|t| seen.insert(*t))
        .map(str::to_owned)
        .collect()
}

pub fn parse_sets(
    reader: impl Read,
    delimiter: &str,
    drop_numeric: bool,
) -> Result<ParsedSets, CliError> {
    let mut out = ParsedSets {
        sets: Vec::new(),
        lines: Vec::new(),
        skipped: 0,
    };
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData => {
                CliError::Data(format!("line {}: not valid UTF-8", i + 1))
            }
            _ => CliError::Io(e),
        })?;
        let tokens = split_line(line.trim_end_matches('\r'), delimiter, drop_numeric);
        if tokens.is_empty() {
            warn!("line {}: empty set skipped", i + 1);
            out.skipped += 1;
            continue;
        }
        out.sets.push(tokens);
        out.lines.push(i + 1);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_collapse() {
        assert_eq!(
            split_line("LA\tSeattle\tLA", "\t", false),
            vec!["LA", "Seattle"]
        );
    }

    #[test]
    fn numeric_tokens() {
        assert!(is_numeric("42"));
        assert!(is_numeric("-3.5"));
        assert!(is_numeric("1,000"));
        assert!(!is_numeric("a1"));
        assert!(!is_numeric("-"));
        assert!(!is_numeric("inf"));
        assert_eq!(split_line("a\t12\tb", "\t", true), vec!["a", "b"]);
    }

    #[test]
    fn empty_lines_are_skipped() {
        let p = parse_sets("a\tb\n\n\t\nc\n".as_bytes(), "\t", false).unwrap();
        assert_eq!(p.sets, vec![vec!["a", "b"], vec!["c"]]);
        assert_eq!(p.lines, vec![1, 4]);
        assert_eq!(p.skipped, 2);
    }

    #[test]
    fn invalid_utf8_is_a_data_error() {
        let err = parse_sets(&b"a\t\xff\n"[..], "\t", false).unwrap_err();
        assert!(matches!(err, CliError::Data(_)));
    }
}
