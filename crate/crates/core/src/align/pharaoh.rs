//! Pharaoh alignment lines: whitespace-separated `i-j` pairs, 0-based.

use thiserror::Error;

use super::AlignmentSet;
use crate::text::TokenSequence;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PharaohError {
    #[error("malformed alignment pair {token:?} at column {column}")]
    Malformed { token: String, column: usize },
    #[error("alignment pair {pair:?} out of range for {src_len} source and {tgt_len} target tokens")]
    OutOfRange {
        pair: String,
        src_len: usize,
        tgt_len: usize,
    },
}

/// Parses one Pharaoh line. `column` in errors is the 1-based character
/// column where the offending pair starts.
pub fn parse_pharaoh(line: &str, src: &TokenSequence, tgt: &TokenSequence) -> Result<AlignmentSet, PharaohError> {
    let mut pairs = Vec::new();
    let mut token_start = None;
    let mut tokens = Vec::new();
    for (pos, c) in line.chars().chain(std::iter::once(' ')).enumerate() {
        if c.is_whitespace() {
            if let Some(start) = token_start.take() {
                tokens.push((start, pos));
            }
        } else if token_start.is_none() {
            token_start = Some(pos);
        }
    }
    let chars: Vec<char> = line.chars().collect();
    for (start, end) in tokens {
        let token: String = chars[start..end].iter().collect();
        let column = start + 1;
        let parsed = token
            .split_once('-')
            .and_then(|(i, j)| Some((parse_index(i)?, parse_index(j)?)));
        let Some((i, j)) = parsed else {
            return Err(PharaohError::Malformed { token, column });
        };
        if i >= src.len() || j >= tgt.len() {
            return Err(PharaohError::OutOfRange {
                pair: token,
                src_len: src.len(),
                tgt_len: tgt.len(),
            });
        }
        pairs.push((i, j));
    }
    Ok(AlignmentSet::from_pairs(pairs, src, tgt).expect("indices checked above"))
}

fn parse_index(s: &str) -> Option<usize> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// Canonical Pharaoh rendering: pairs sorted by `(src, tgt)`, single spaces.
pub fn format_pharaoh(set: &AlignmentSet) -> String {
    set.pairs()
        .map(|(i, j)| format!("{i}-{j}"))
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(tokens: &[&str]) -> TokenSequence {
        TokenSequence::from_pretokenized(tokens, "xx").unwrap()
    }

    #[test]
    fn parses_pairs_with_surface_forms() {
        let set = parse_pharaoh("0-0 1-2", &seq(&["a", "b"]), &seq(&["x", "y", "z"])).unwrap();
        let got: Vec<_> = set
            .links()
            .iter()
            .map(|l| (l.src_idx, l.tgt_idx, l.src_word.as_str(), l.tgt_word.as_str()))
            .collect();
        assert_eq!(got, [(0, 0, "a", "x"), (1, 2, "b", "z")]);
    }

    #[test]
    fn empty_line_is_empty_set() {
        assert!(parse_pharaoh("", &seq(&["a"]), &seq(&["b"])).unwrap().is_empty());
        assert!(parse_pharaoh("   ", &seq(&["a"]), &seq(&["b"])).unwrap().is_empty());
    }

    #[test]
    fn out_of_range_names_pair() {
        let err = parse_pharaoh("5-0", &seq(&["a", "b"]), &seq(&["x"])).unwrap_err();
        assert_eq!(
            err,
            PharaohError::OutOfRange {
                pair: "5-0".into(),
                src_len: 2,
                tgt_len: 1
            }
        );
    }

    #[test]
    fn malformed_reports_column() {
        let err = parse_pharaoh("0-0  1x2", &seq(&["a", "b"]), &seq(&["x", "y", "z"])).unwrap_err();
        assert_eq!(
            err,
            PharaohError::Malformed {
                token: "1x2".into(),
                column: 6
            }
        );
        for bad in ["-1", "1-", "a-b", "1--2", "+1-2"] {
            assert!(matches!(
                parse_pharaoh(bad, &seq(&["a", "b"]), &seq(&["x", "y"])),
                Err(PharaohError::Malformed { .. })
            ));
        }
    }

    #[test]
    fn format_is_canonical() {
        let s = seq(&["a", "b"]);
        let t = seq(&["x", "y", "z"]);
        let set = parse_pharaoh("1-2  0-0 1-2", &s, &t).unwrap();
        assert_eq!(format_pharaoh(&set), "0-0 1-2");
    }
}
