//! Text preprocessing for vulnerability descriptions and source code.

mod code;
mod porter;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use code::{code_line_mask, strip_noncode_lines, tokenize_code, tokenize_code_checked, CodeTokens};
pub use porter::porter_stem;

use crate::error::{Error, Result};

const BUNDLED_STOPWORDS: &str = include_str!("../../data/stopwords.txt");

/// Parses a stopword file: one token per line, lowercased, blanks ignored.
pub fn parse_stopwords(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect()
}

pub fn bundled_stopwords() -> BTreeSet<String> {
    parse_stopwords(BUNDLED_STOPWORDS)
}

pub fn load_stopwords(path: impl AsRef<Path>) -> Result<BTreeSet<String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_stopwords(&text))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrepConfig {
    pub stopwords: BTreeSet<String>,
    pub lowercase: bool,
    pub stem: bool,
    /// Keep punctuation inside tokens (`input.c`, `cross-site`). When off,
    /// every punctuation character splits tokens.
    pub keep_inner_punct: bool,
}

impl Default for PrepConfig {
    fn default() -> Self {
        PrepConfig {
            stopwords: bundled_stopwords(),
            lowercase: true,
            stem: true,
            keep_inner_punct: true,
        }
    }
}

impl PrepConfig {
    /// No stopwords, no stemming; only lowercasing and punctuation handling.
    pub fn minimal() -> Self {
        PrepConfig {
            stopwords: BTreeSet::new(),
            lowercase: true,
            stem: false,
            keep_inner_punct: true,
        }
    }
}

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

/// Lowercases, strips punctuation, drops stopwords and stems.
///
/// Punctuation is removed only where it is followed by whitespace or ends
/// the text, i.e. at the tail of a whitespace-delimited token, so terms such
/// as `input.c` and `man-in-the-middle` survive intact.
pub fn preprocess_text(text: &str, config: &PrepConfig) -> Vec<String> {
    let text = if config.lowercase {
        text.to_lowercase()
    } else {
        text.to_string()
    };
    let raw: Vec<String> = if config.keep_inner_punct {
        text.split_whitespace()
            .map(|t| t.trim_end_matches(is_punct).to_string())
            .collect()
    } else {
        text.split(|c: char| c.is_whitespace() || is_punct(c))
            .map(str::to_string)
            .collect()
    };
    raw.into_iter()
        .filter(|t| !t.is_empty())
        .filter(|t| !config.stopwords.contains(t.as_str()))
        .map(|t| if config.stem { porter_stem(&t) } else { t })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems_plural_verb() {
        assert_eq!(preprocess_text("allows", &PrepConfig::default()), ["allow"]);
    }

    #[test]
    fn keeps_dotted_filename() {
        assert_eq!(
            preprocess_text("input.c is vulnerable", &PrepConfig::default()),
            ["input.c", "vulner"]
        );
    }

    #[test]
    fn strips_trailing_punctuation() {
        assert_eq!(
            preprocess_text("Hello, World.", &PrepConfig::default()),
            ["hello", "world"]
        );
    }

    #[test]
    fn empty_text() {
        assert!(preprocess_text("", &PrepConfig::default()).is_empty());
        assert!(preprocess_text(" ... ", &PrepConfig::default()).is_empty());
    }

    #[test]
    fn hyphenated_terms_survive() {
        let out = preprocess_text("a man-in-the-middle attack via cross-site scripting.", &PrepConfig::default());
        assert_eq!(out, ["man-in-the-middle", "attack", "cross-site", "script"]);
    }

    #[test]
    fn inner_punct_off_splits() {
        let cfg = PrepConfig {
            keep_inner_punct: false,
            ..PrepConfig::minimal()
        };
        assert_eq!(preprocess_text("input.c", &cfg), ["input", "c"]);
    }

    #[test]
    fn bundled_list_is_lowercase() {
        let words = bundled_stopwords();
        assert!(words.contains("the") && words.contains("is"));
        assert!(words.iter().all(|w| *w == w.to_lowercase()));
        assert!(!words.contains("allow"));
    }
}
