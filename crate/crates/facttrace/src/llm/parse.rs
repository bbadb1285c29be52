//! Parsers for the `#keywords` and `#analysis`/`#scores` response contracts.
//!
//! All parsers are pure functions. Keyword extraction reads the first
//! `#keywords:` marker; score extraction reads the *last* `#scores:` marker,
//! because responses may echo the few-shot examples that already contain
//! one.

use thiserror::Error;

pub const KEYWORDS_MARKER: &str = "#keywords:";
pub const SCORES_MARKER: &str = "#scores:";
pub const ANALYSIS_MARKER: &str = "#analysis:";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("response has no {marker} marker")]
    MissingMarker { marker: &'static str },
    #[error("score token {token:?} is not 0 or 1")]
    BadScoreToken { token: String },
    #[error("expected {expected} scores, got {got}")]
    ScoreCount { expected: usize, got: usize },
}

/// Binary supportiveness scores for one batch, with the raw analysis text
/// that accompanied them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreVector {
    pub scores: Vec<u8>,
    pub analysis: String,
}

/// Byte offset of the first ASCII-case-insensitive occurrence of `needle`.
fn find_ci(haystack: &str, needle: &str) -> Option<usize> {
    let h = haystack.as_bytes();
    let n = needle.as_bytes();
    if n.is_empty() || h.len() < n.len() {
        return None;
    }
    h.windows(n.len()).position(|w| w.eq_ignore_ascii_case(n))
}

/// Byte offset of the last ASCII-case-insensitive occurrence of `needle`.
fn rfind_ci(haystack: &str, needle: &str) -> Option<usize> {
    let h = haystack.as_bytes();
    let n = needle.as_bytes();
    if n.is_empty() || h.len() < n.len() {
        return None;
    }
    (0..=h.len() - n.len())
        .rev()
        .find(|&i| h[i..i + n.len()].eq_ignore_ascii_case(n))
}

/// Lowercases, trims, and collapses inner whitespace. Empty results are
/// dropped by the callers.
pub fn normalize_keyword(raw: &str) -> String {
    raw.split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Extracts the comma-separated phrases after the first `#keywords:` marker,
/// normalized. Accepts any positive number of phrases; the 5-10 policy is
/// enforced by the labeling stage.
pub fn parse_keywords(raw: &str) -> Result<Vec<String>, ParseError> {
    let at = find_ci(raw, KEYWORDS_MARKER).ok_or(ParseError::MissingMarker {
        marker: KEYWORDS_MARKER,
    })?;
    let rest = &raw[at + KEYWORDS_MARKER.len()..];
    let line = rest.lines().next().unwrap_or("");
    let line = line.trim().trim_end_matches('.');
    let keywords: Vec<String> = line
        .split(',')
        .map(normalize_keyword)
        .filter(|k| !k.is_empty())
        .collect();
    if keywords.is_empty() {
        return Err(ParseError::MissingMarker {
            marker: KEYWORDS_MARKER,
        });
    }
    Ok(keywords)
}

/// Reads the integers after the last `#scores:` marker, accepting comma or
/// whitespace separators, and captures the `#analysis:` text when present.
///
/// The expected length comes from the batch being scored, never from the
/// response itself.
pub fn parse_scores(raw: &str, expected_len: usize) -> Result<ScoreVector, ParseError> {
    let at = rfind_ci(raw, SCORES_MARKER).ok_or(ParseError::MissingMarker {
        marker: SCORES_MARKER,
    })?;
    let rest = &raw[at + SCORES_MARKER.len()..];
    let line = rest.lines().next().unwrap_or("");
    let mut scores = Vec::new();
    for token in line.split(|c: char| c == ',' || c.is_whitespace()) {
        let token = token.trim();
        if token.is_empty() {
            continue;
        }
        match token {
            "0" => scores.push(0),
            "1" => scores.push(1),
            other => {
                return Err(ParseError::BadScoreToken {
                    token: other.to_string(),
                })
            }
        }
    }
    if scores.len() != expected_len {
        return Err(ParseError::ScoreCount {
            expected: expected_len,
            got: scores.len(),
        });
    }
    let analysis = rfind_ci(&raw[..at], ANALYSIS_MARKER)
        .map(|a| raw[a + ANALYSIS_MARKER.len()..at].trim().to_string())
        .unwrap_or_default();
    Ok(ScoreVector { scores, analysis })
}

/// Renders a score vector in the response contract's own format, so that
/// `parse_scores(format_scores(v), v.len()) == v`.
pub fn format_scores(scores: &[u8]) -> String {
    let rendered: Vec<String> = scores.iter().map(|s| s.to_string()).collect();
    format!("{SCORES_MARKER} {}", rendered.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn keywords_are_normalized() {
        let parsed = parse_keywords("#keywords: apple, banana pie , cherry").unwrap();
        assert_eq!(parsed, vec!["apple", "banana pie", "cherry"]);
    }

    #[test]
    fn keywords_marker_found_after_noise() {
        let parsed = parse_keywords("noise\n#keywords: a, b").unwrap();
        assert_eq!(parsed, vec!["a", "b"]);
    }

    #[test]
    fn keywords_missing_marker_is_error() {
        assert_eq!(
            parse_keywords("no marker here"),
            Err(ParseError::MissingMarker {
                marker: KEYWORDS_MARKER
            })
        );
    }

    #[test]
    fn keywords_trailing_period_and_case_handled() {
        let parsed = parse_keywords("#Keywords: Taiwan,  Executive   Yuan, premier.").unwrap();
        assert_eq!(parsed, vec!["taiwan", "executive yuan", "premier"]);
    }

    #[test]
    fn scores_with_analysis_block() {
        let raw = "#analysis: first text supports, others do not\n#scores: 1, 0, 0";
        let parsed = parse_scores(raw, 3).unwrap();
        assert_eq!(parsed.scores, vec![1, 0, 0]);
        assert_eq!(parsed.analysis, "first text supports, others do not");
    }

    #[test]
    fn scores_accept_whitespace_separators() {
        let parsed = parse_scores("#scores: 1 0 1 1", 4).unwrap();
        assert_eq!(parsed.scores, vec![1, 0, 1, 1]);
    }

    #[test]
    fn scores_length_mismatch_is_error() {
        assert_eq!(
            parse_scores("#scores: 1, 0", 3),
            Err(ParseError::ScoreCount {
                expected: 3,
                got: 2
            })
        );
    }

    #[test]
    fn scores_bad_token_is_error() {
        assert_eq!(
            parse_scores("#scores: 1, 2, 0", 3),
            Err(ParseError::BadScoreToken {
                token: "2".to_string()
            })
        );
    }

    #[test]
    fn scores_missing_marker_is_error() {
        assert_eq!(
            parse_scores("#analysis: something", 2),
            Err(ParseError::MissingMarker {
                marker: SCORES_MARKER
            })
        );
    }

    #[test]
    fn last_scores_marker_wins() {
        let raw = "#scores: 1, 1\nsome echo\n#analysis: real\n#scores: 0, 1";
        let parsed = parse_scores(raw, 2).unwrap();
        assert_eq!(parsed.scores, vec![0, 1]);
        assert_eq!(parsed.analysis, "real");
    }

    proptest! {
        #[test]
        fn format_then_parse_is_identity(
            scores in proptest::collection::vec(0u8..=1, 1..=15)
        ) {
            let rendered = format_scores(&scores);
            let parsed = parse_scores(&rendered, scores.len()).unwrap();
            prop_assert_eq!(parsed.scores, scores);
        }
    }
}
