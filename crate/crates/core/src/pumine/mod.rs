//! Mining security posts from Q&A sites: keyword content filtering,
//! positive-unlabeled learning and topic aggregation.

mod pu;
mod topics;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use pu::{
    cosine_distance, is_reliable_negative, mean_vector, pu_train, reliable_negatives, update_centroid, EmbeddedPost,
    LsaEmbedder, PuConfig, PuModel,
};
pub use topics::{assign_topics, specific_expertise, topic_share, Expertise, ThetaMatrix};

use crate::corpus::{QaPost, Site};
use crate::error::{Error, Result};
use crate::textprep::porter_stem;

const BUNDLED_KEYWORDS: &str = include_str!("../../data/sv_keywords.txt");

#[derive(Clone, Debug, PartialEq, Eq)]
enum Matcher {
    Exact(String),
    Substring(String),
}

/// Security keywords. Keywords of up to three characters must equal a
/// word; longer ones are stemmed and matched anywhere inside a word.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeywordSet {
    keywords: BTreeSet<String>,
    matchers: Vec<Matcher>,
}

impl KeywordSet {
    pub fn new<I, S>(keywords: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let keywords: BTreeSet<String> = keywords
            .into_iter()
            .map(|k| k.as_ref().trim().to_lowercase())
            .filter(|k| !k.is_empty())
            .collect();
        if keywords.is_empty() {
            return Err(Error::invalid("keyword set is empty"));
        }
        let mut matchers = Vec::new();
        for k in &keywords {
            if k.chars().count() <= 3 {
                matchers.push(Matcher::Exact(k.clone()));
            } else {
                // multi-word keywords match on each of their words
                let stem: Vec<String> = k.split_whitespace().map(porter_stem).collect();
                matchers.extend(stem.into_iter().map(Matcher::Substring));
            }
        }
        matchers.dedup();
        Ok(KeywordSet { keywords, matchers })
    }

    /// One keyword per line.
    pub fn parse(text: &str) -> Result<Self> {
        KeywordSet::new(text.lines())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        KeywordSet::parse(&text)
    }

    pub fn bundled() -> Self {
        KeywordSet::parse(BUNDLED_KEYWORDS).expect("bundled keyword list is non-empty")
    }

    pub fn keywords(&self) -> &BTreeSet<String> {
        &self.keywords
    }

    pub fn matches(&self, word: &str) -> bool {
        let bare = word.trim_matches(|c: char| !c.is_alphanumeric());
        self.matchers.iter().any(|m| match m {
            Matcher::Exact(k) => bare == k,
            Matcher::Substring(k) => word.contains(k.as_str()),
        })
    }
}

/// Keyword count and the share of words that are keyword hits.
pub fn keyword_metrics(text: &str, keywords: &KeywordSet) -> Result<(usize, f64)> {
    let lower = text.to_lowercase();
    let words: Vec<&str> = lower.split_whitespace().collect();
    if words.is_empty() {
        return Err(Error::invalid("keyword metrics of an empty post"));
    }
    let count = words.iter().filter(|w| keywords.matches(w)).count();
    Ok((count, count as f64 / words.len() as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub min_count: usize,
    pub min_ratio: f64,
}

/// Minimum keyword count and ratio per site and filtering step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContentFilterConfig {
    pub so: [Threshold; 2],
    pub sse: [Threshold; 2],
}

impl Default for ContentFilterConfig {
    fn default() -> Self {
        let t = |min_count, min_ratio| Threshold { min_count, min_ratio };
        ContentFilterConfig {
            so: [t(1, 0.011), t(3, 0.017)],
            sse: [t(2, 0.017), t(3, 0.025)],
        }
    }
}

impl ContentFilterConfig {
    pub fn threshold(&self, site: Site, step: usize) -> Result<Threshold> {
        let row = match site {
            Site::StackOverflow => &self.so,
            Site::SecurityStackExchange => &self.sse,
        };
        match step {
            1 | 2 => Ok(row[step - 1]),
            _ => Err(Error::Config(format!("content filter step {step} does not exist (1 or 2)"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for t in self.so.iter().chain(&self.sse) {
            if !(0.0..=1.0).contains(&t.min_ratio) {
                return Err(Error::Config(format!("keyword ratio threshold {} outside [0, 1]", t.min_ratio)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilteredPost {
    #[serde(flatten)]
    pub post: QaPost,
    pub kw_count: usize,
    pub kw_ratio: f64,
}

/// Posts meeting both thresholds (inclusive) for the site and step.
/// Posts with no words are dropped.
pub fn content_filter(
    posts: &[QaPost],
    site: Site,
    step: usize,
    config: &ContentFilterConfig,
    keywords: &KeywordSet,
) -> Result<Vec<FilteredPost>> {
    let t = config.threshold(site, step)?;
    let mut kept = Vec::new();
    for p in posts {
        if p.site != site {
            return Err(Error::invalid(format!(
                "post {} is from {}, not {}",
                p.id,
                p.site.code(),
                site.code()
            )));
        }
        let Ok((kw_count, kw_ratio)) = keyword_metrics(&p.full_text(), keywords) else {
            continue;
        };
        if kw_count >= t.min_count && kw_ratio >= t.min_ratio {
            kept.push(FilteredPost {
                post: p.clone(),
                kw_count,
                kw_ratio,
            });
        }
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PostLabel;

    fn kw(list: &[&str]) -> KeywordSet {
        KeywordSet::new(list).unwrap()
    }

    fn post(site: Site, text: &str) -> QaPost {
        QaPost {
            id: "p".into(),
            site,
            title: String::new(),
            body: text.into(),
            answers: String::new(),
            tags: BTreeSet::new(),
            word_count: text.split_whitespace().count(),
            label: PostLabel::Unlabeled,
        }
    }

    fn words(n: usize, hits: usize) -> String {
        let mut w = vec!["word"; n];
        for slot in w.iter_mut().take(hits) {
            *slot = "exploit";
        }
        w.join(" ")
    }

    #[test]
    fn counts_and_ratio() {
        let (c, r) = keyword_metrics(&words(100, 3), &kw(&["exploit"])).unwrap();
        assert_eq!((c, r), (3, 0.03));
        assert!(keyword_metrics("  ", &kw(&["exploit"])).is_err());
    }

    #[test]
    fn matching_modes() {
        let k = kw(&["inject", "xss", "injection"]);
        assert!(k.matches("sql-injection"));
        assert!(k.matches("xss,"));
        assert!(!k.matches("xssless"));
    }

    #[test]
    fn inclusive_thresholds() {
        let cfg = ContentFilterConfig::default();
        let k = kw(&["exploit"]);
        // 1 hit in 90 words is 0.0111 >= 0.011
        let keep = post(Site::StackOverflow, &words(90, 1));
        assert_eq!(content_filter(&[keep], Site::StackOverflow, 1, &cfg, &k).unwrap().len(), 1);
        let drop_ratio = post(Site::StackOverflow, &words(5000, 5));
        assert!(content_filter(&[drop_ratio], Site::StackOverflow, 1, &cfg, &k).unwrap().is_empty());
        let drop_count = post(Site::StackOverflow, &words(2, 0));
        assert!(content_filter(&[drop_count], Site::StackOverflow, 1, &cfg, &k).unwrap().is_empty());
        assert!(cfg.threshold(Site::StackOverflow, 3).is_err());
    }

    #[test]
    fn exact_boundary() {
        let cfg = ContentFilterConfig {
            so: [Threshold { min_count: 1, min_ratio: 0.25 }; 2],
            ..Default::default()
        };
        let p = post(Site::StackOverflow, &words(4, 1));
        assert_eq!(content_filter(&[p], Site::StackOverflow, 2, &cfg, &kw(&["exploit"])).unwrap().len(), 1);
    }

    #[test]
    fn site_mismatch() {
        let cfg = ContentFilterConfig::default();
        let p = post(Site::SecurityStackExchange, "exploit");
        assert!(content_filter(&[p], Site::StackOverflow, 1, &cfg, &kw(&["exploit"])).is_err());
    }

    #[test]
    fn bundled_list_loads() {
        assert!(KeywordSet::bundled().keywords().contains("xss"));
    }
}
