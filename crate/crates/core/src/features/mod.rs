//! N-gram vocabularies, the char-word feature aggregation and sparse transforms.

mod vocab;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use vocab::{
    build_char_vocab, build_subtoken_vocab, build_token_vocab, build_word_vocab, char_ngrams,
    subtokens, word_ngrams, VocabKind, Vocabulary,
};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Tf,
    Tfidf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NlpConfig {
    pub word_ngram_min: usize,
    pub word_ngram_max: usize,
    pub weighting: Weighting,
    /// A word n-gram is kept when it appears in more than this fraction of documents.
    pub word_min_doc_fraction: f64,
    pub char_min: usize,
    pub char_max: usize,
    /// Words feeding the char vocabulary must appear in more than this fraction.
    pub char_word_doc_fraction: f64,
    pub l2_normalize: bool,
}

impl Default for NlpConfig {
    fn default() -> Self {
        NlpConfig::table(1).expect("configuration 1 exists")
    }
}

impl NlpConfig {
    /// The eight model-selection configurations: word n-gram range 1, 1, 1-2,
    /// 1-3, 1-4, 1-2, 1-3, 1-4 with term frequency for 1 and 3-5 and tf-idf
    /// for 2 and 6-8.
    pub fn table(number: usize) -> Result<Self> {
        let (max, weighting) = match number {
            1 => (1, Weighting::Tf),
            2 => (1, Weighting::Tfidf),
            3 => (2, Weighting::Tf),
            4 => (3, Weighting::Tf),
            5 => (4, Weighting::Tf),
            6 => (2, Weighting::Tfidf),
            7 => (3, Weighting::Tfidf),
            8 => (4, Weighting::Tfidf),
            other => {
                return Err(Error::Config(format!(
                    "NLP configuration {other} does not exist (1..=8)"
                )))
            }
        };
        Ok(NlpConfig {
            word_ngram_min: 1,
            word_ngram_max: max,
            weighting,
            word_min_doc_fraction: 0.001,
            char_min: 2,
            char_max: 6,
            char_word_doc_fraction: 0.10,
            l2_normalize: weighting == Weighting::Tfidf,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.word_ngram_min == 0 || self.word_ngram_min > self.word_ngram_max || self.word_ngram_max > 4 {
            return Err(Error::Config(format!(
                "word n-gram range {}..={} must lie within 1..=4",
                self.word_ngram_min, self.word_ngram_max
            )));
        }
        if self.char_min == 0 || self.char_min > self.char_max {
            return Err(Error::Config(format!(
                "char n-gram range {}..={} is inconsistent",
                self.char_min, self.char_max
            )));
        }
        for (name, f) in [
            ("word_min_doc_fraction", self.word_min_doc_fraction),
            ("char_word_doc_fraction", self.char_word_doc_fraction),
        ] {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Config(format!("{name} = {f} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

/// (index, value) pairs sorted by strictly increasing index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    width: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn empty(width: usize) -> Self {
        SparseVector {
            width,
            entries: Vec::new(),
        }
    }

    /// Builds from arbitrary pairs: sorts, sums duplicates, drops zeros.
    pub fn from_pairs(width: usize, pairs: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, v) in pairs {
            if i >= width {
                return Err(Error::Dimension {
                    expected: width,
                    actual: i + 1,
                });
            }
            if !v.is_finite() {
                return Err(Error::invalid(format!("non-finite value at index {i}")));
            }
            *acc.entry(i).or_insert(0.0) += v;
        }
        Ok(SparseVector {
            width,
            entries: acc.into_iter().filter(|(_, v)| *v != 0.0).collect(),
        })
    }

    pub fn from_dense(values: &[f64]) -> Self {
        SparseVector {
            width: values.len(),
            entries: values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i, *v))
                .collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |(i, _)| *i)
            .map(|p| self.entries[p].1)
            .unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.width];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| v * dense[i]).sum()
    }

    /// Horizontal concatenation: `other`'s indices are shifted by `self.width`.
    pub fn concat(&self, other: &SparseVector) -> SparseVector {
        let mut entries = self.entries.clone();
        entries.extend(other.entries.iter().map(|&(i, v)| (i + self.width, v)));
        SparseVector {
            width: self.width + other.width,
            entries,
        }
    }

    fn scale(&mut self, factor: f64) {
        for (_, v) in &mut self.entries {
            *v *= factor;
        }
    }
}

/// Fitted word + char transformer. Columns are the word vocabulary followed
/// by the char vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureModel {
    pub config: NlpConfig,
    pub word_vocab: Vocabulary,
    pub char_vocab: Vocabulary,
    /// Per-column idf, present when the weighting is tf-idf.
    pub idf: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct FeatureModelRepr {
    config: NlpConfig,
    word_vocab: Vec<String>,
    char_vocab: Vec<String>,
    idf: Option<Vec<f64>>,
}

/// Smoothed inverse document frequency.
pub fn smoothed_idf(n_docs: usize, df: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

impl FeatureModel {
    /// Assembles a model from explicit term lists; idf is fitted on `docs`
    /// when the configuration asks for tf-idf.
    pub fn from_terms(
        config: NlpConfig,
        word_terms: impl IntoIterator<Item = String>,
        char_terms: impl IntoIterator<Item = String>,
        docs: &[Vec<String>],
    ) -> Result<Self> {
        config.validate()?;
        let mut model = FeatureModel {
            config,
            word_vocab: Vocabulary::from_terms(VocabKind::Word, word_terms),
            char_vocab: Vocabulary::from_terms(VocabKind::Char, char_terms),
            idf: None,
        };
        if model.config.weighting == Weighting::Tfidf {
            model.idf = Some(model.fit_idf(docs));
        }
        Ok(model)
    }

    /// Word-only model over the configured n-gram range.
    pub fn fit_word(docs: &[Vec<String>], config: &NlpConfig) -> Result<Self> {
        let vocab = build_word_vocab(docs, config)?;
        Self::from_terms(config.clone(), vocab.terms().to_vec(), Vec::new(), docs)
    }

    /// Char-only model: the single-word char grams of the corpus.
    pub fn fit_char(docs: &[Vec<String>], config: &NlpConfig) -> Result<Self> {
        let chars = build_char_vocab(docs, config)?;
        Self::from_terms(config.clone(), Vec::new(), select_char_terms(&chars), docs)
    }

    /// Word and char vocabularies built on `docs`, then aggregated.
    pub fn fit_char_word(docs: &[Vec<String>], config: &NlpConfig) -> Result<Self> {
        let words = build_word_vocab(docs, config)?;
        let chars = build_char_vocab(docs, config)?;
        let (model, _) =
            aggregate_char_word(docs, &words, &chars, config.char_min, config.char_max, config)?;
        Ok(model)
    }

    pub fn width(&self) -> usize {
        self.word_vocab.len() + self.char_vocab.len()
    }

    fn raw_counts(&self, tokens: &[String]) -> BTreeMap<usize, f64> {
        let mut counts = BTreeMap::new();
        if !self.word_vocab.is_empty() {
            for gram in word_ngrams(tokens, self.config.word_ngram_min, self.config.word_ngram_max) {
                if let Some(i) = self.word_vocab.index_of(&gram) {
                    *counts.entry(i).or_insert(0.0) += 1.0;
                }
            }
        }
        if !self.char_vocab.is_empty() {
            let offset = self.word_vocab.len();
            let text = tokens.join(" ");
            let low = self.config.char_min.saturating_sub(1).max(1);
            for gram in char_ngrams(&text, low, self.config.char_max) {
                if let Some(i) = self.char_vocab.index_of(&gram) {
                    *counts.entry(offset + i).or_insert(0.0) += 1.0;
                }
            }
        }
        counts
    }

    fn fit_idf(&self, docs: &[Vec<String>]) -> Vec<f64> {
        let mut df = vec![0usize; self.width()];
        for doc in docs {
            for i in self.raw_counts(doc).into_keys() {
                df[i] += 1;
            }
        }
        df.into_iter().map(|d| smoothed_idf(docs.len(), d)).collect()
    }

    /// Transforms one preprocessed document. Terms outside both vocabularies
    /// contribute nothing.
    pub fn transform(&self, tokens: &[String]) -> SparseVector {
        let mut entries: Vec<(usize, f64)> = self.raw_counts(tokens).into_iter().collect();
        if let Some(idf) = &self.idf {
            for (i, v) in &mut entries {
                *v *= idf[*i];
            }
        }
        let mut out = SparseVector {
            width: self.width(),
            entries,
        };
        if self.config.l2_normalize {
            let norm = out.norm();
            if norm > 0.0 {
                out.scale(1.0 / norm);
            }
        }
        out
    }

    pub fn transform_all(&self, docs: &[Vec<String>]) -> Vec<SparseVector> {
        docs.iter().map(|d| self.transform(d)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let repr = FeatureModelRepr {
            config: self.config.clone(),
            word_vocab: self.word_vocab.terms().to_vec(),
            char_vocab: self.char_vocab.terms().to_vec(),
            idf: self.idf.clone(),
        };
        Ok(serde_json::to_string_pretty(&repr)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let repr: FeatureModelRepr = serde_json::from_str(text)?;
        repr.config.validate()?;
        let model = FeatureModel {
            config: repr.config,
            word_vocab: Vocabulary::from_terms(VocabKind::Word, repr.word_vocab),
            char_vocab: Vocabulary::from_terms(VocabKind::Char, repr.char_vocab),
            idf: repr.idf,
        };
        if let Some(idf) = &model.idf {
            if idf.len() != model.width() {
                return Err(Error::Dimension {
                    expected: model.width(),
                    actual: idf.len(),
                });
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Trimmed char grams that lie inside a single word and are longer than one character.
pub fn select_char_terms(char_vocab: &Vocabulary) -> BTreeSet<String> {
    char_vocab
        .terms()
        .iter()
        .filter_map(|gram| {
            let mut parts = gram.split_whitespace();
            match (parts.next(), parts.next()) {
                (Some(word), None) if word.chars().count() > 1 => Some(word.to_string()),
                _ => None,
            }
        })
        .collect()
}

/// Combines word and char vocabularies and transforms `docs`.
///
/// Char grams are trimmed; grams spanning more than one word and single
/// characters are discarded. Word terms equal to a kept char gram are
/// removed from the word side. The returned rows are the word features
/// followed by the char features.
pub fn aggregate_char_word(
    docs: &[Vec<String>],
    word_vocab: &Vocabulary,
    char_vocab: &Vocabulary,
    char_min: usize,
    char_max: usize,
    config: &NlpConfig,
) -> Result<(FeatureModel, Vec<SparseVector>)> {
    if char_min == 0 || char_min > char_max {
        return Err(Error::Config(format!(
            "char n-gram range {char_min}..={char_max} is inconsistent"
        )));
    }
    let selected = select_char_terms(char_vocab);
    let diff_words: Vec<String> = word_vocab
        .terms()
        .iter()
        .filter(|t| !selected.contains(*t))
        .cloned()
        .collect();
    let config = NlpConfig {
        char_min,
        char_max,
        ..config.clone()
    };
    let model = FeatureModel::from_terms(config, diff_words, selected, docs)?;
    let rows = model.transform_all(docs);
    Ok((model, rows))
}

/// Counts of every subtoken of every code token, over a fitted subtoken vocabulary.
pub fn bag_of_subtokens(vocab: &Vocabulary, tokens: &[String], min: usize, max: usize) -> SparseVector {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for token in tokens {
        for sub in subtokens(token, min, max) {
            if let Some(i) = vocab.index_of(&sub) {
                *counts.entry(i).or_insert(0.0) += 1.0;
            }
        }
    }
    SparseVector {
        width: vocab.len(),
        entries: counts.into_iter().collect(),
    }
}

/// Token counts over a fitted token vocabulary.
pub fn bag_of_tokens(vocab: &Vocabulary, tokens: &[String]) -> SparseVector {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for token in tokens {
        if let Some(i) = vocab.index_of(token) {
            *counts.entry(i).or_insert(0.0) += 1.0;
        }
    }
    SparseVector {
        width: vocab.len(),
        entries: counts.into_iter().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(texts: &[&str]) -> Vec<Vec<String>> {
        texts
            .iter()
            .map(|t| t.split_whitespace().map(str::to_string).collect())
            .collect()
    }

    fn unigram(fraction: f64) -> NlpConfig {
        NlpConfig {
            word_min_doc_fraction: fraction,
            ..NlpConfig::table(1).unwrap()
        }
    }

    #[test]
    fn word_vocab_threshold() {
        let d = docs(&["hello world", "hello there"]);
        let v = build_word_vocab(&d, &unigram(0.4)).unwrap();
        assert_eq!(v.terms(), ["hello", "there", "world"]);
        assert_eq!(v.df("hello"), Some(2));
        let v = build_word_vocab(&d, &unigram(0.6)).unwrap();
        assert_eq!(v.terms(), ["hello"]);
    }

    #[test]
    fn threshold_is_strict() {
        let d = docs(&["a b", "a c"]);
        // "b" has fraction exactly 0.5
        let v = build_word_vocab(&d, &unigram(0.5)).unwrap();
        assert_eq!(v.terms(), ["a"]);
    }

    #[test]
    fn empty_corpus_errors() {
        assert!(build_word_vocab(&[], &NlpConfig::default()).is_err());
        assert!(build_char_vocab(&[], &NlpConfig::default()).is_err());
    }

    #[test]
    fn bigram_of_hello_world() {
        let cfg = NlpConfig {
            word_ngram_max: 2,
            word_min_doc_fraction: 0.5,
            ..NlpConfig::default()
        };
        let v = build_word_vocab(&docs(&["hello world"]), &cfg).unwrap();
        assert!(v.contains("hello world"));
    }

    #[test]
    fn single_doc_char_bigram() {
        let cfg = NlpConfig {
            char_min: 2,
            char_max: 2,
            ..NlpConfig::default()
        };
        let v = build_char_vocab(&docs(&["ab"]), &cfg).unwrap();
        assert_eq!(v.terms(), ["ab"]);
    }

    #[test]
    fn tf_counts_and_oov() {
        let cfg = unigram(0.001);
        let model = FeatureModel::from_terms(cfg, ["hello".into(), "world".into()], [], &[]).unwrap();
        let v = model.transform(&docs(&["hello hello world"])[0]);
        assert_eq!(v.entries(), [(0, 2.0), (1, 1.0)]);
        assert!(model.transform(&docs(&["zzz"])[0]).is_empty());
    }

    #[test]
    fn smoothed_idf_value() {
        let cfg = NlpConfig {
            l2_normalize: false,
            word_min_doc_fraction: 0.1,
            ..NlpConfig::table(2).unwrap()
        };
        let d = docs(&["rare common", "common"]);
        let model = FeatureModel::fit_word(&d, &cfg).unwrap();
        let idf = model.idf.as_ref().unwrap();
        let rare = model.word_vocab.index_of("rare").unwrap();
        assert!((idf[rare] - ((3.0f64 / 2.0).ln() + 1.0)).abs() < 1e-15);
        assert!((idf[rare] - 1.405).abs() < 1e-3);
        let v = model.transform(&d[0]);
        assert!((v.get(rare) - idf[rare]).abs() < 1e-15);
    }

    #[test]
    fn attack_word_replaced_by_char_gram() {
        let cfg = NlpConfig {
            word_min_doc_fraction: 0.01,
            char_min: 2,
            char_max: 6,
            ..NlpConfig::default()
        };
        let words = Vocabulary::from_terms(VocabKind::Word, ["attack".to_string(), "attacker".to_string()]);
        let chars = Vocabulary::from_terms(VocabKind::Char, ["attack".to_string(), "ttacke".to_string()]);
        let d = docs(&["attacker attack"]);
        let (model, rows) = aggregate_char_word(&d, &words, &chars, 2, 6, &cfg).unwrap();
        assert_eq!(model.word_vocab.terms(), ["attacker"]);
        assert_eq!(rows[0].width(), 3);
    }

    #[test]
    fn empty_char_vocab_is_word_only() {
        let cfg = unigram(0.001);
        let d = docs(&["a b", "b c"]);
        let words = build_word_vocab(&d, &cfg).unwrap();
        let chars = Vocabulary::from_terms(VocabKind::Char, Vec::<String>::new());
        let (model, rows) = aggregate_char_word(&d, &words, &chars, 2, 6, &cfg).unwrap();
        let word_only = FeatureModel::fit_word(&d, &cfg).unwrap();
        assert_eq!(rows, word_only.transform_all(&d));
        assert_eq!(model.width(), words.len());
    }

    #[test]
    fn inconsistent_char_range() {
        let cfg = NlpConfig::default();
        let v = Vocabulary::from_terms(VocabKind::Word, Vec::<String>::new());
        assert!(aggregate_char_word(&[], &v, &v, 4, 2, &cfg).is_err());
    }

    #[test]
    fn subtoken_enumeration() {
        let mut got = subtokens("MyVar", 2, 3);
        got.sort();
        let mut want = vec!["My", "yV", "Va", "ar", "MyV", "yVa", "Var"];
        want.sort();
        assert_eq!(got, want);
        assert_eq!(subtokens("ab", 2, 6), ["ab"]);
        assert!(subtokens("a", 2, 6).is_empty());
    }

    #[test]
    fn subtoken_bag() {
        let d = docs(&["MyVar x"]);
        let vocab = build_subtoken_vocab(&d, 2, 3).unwrap();
        let v = bag_of_subtokens(&vocab, &d[0], 2, 3);
        assert_eq!(v.nnz(), 7);
    }

    #[test]
    fn json_roundtrip() {
        let d = docs(&["sql injection in login form", "xss in login page"]);
        let cfg = NlpConfig {
            word_min_doc_fraction: 0.1,
            ..NlpConfig::table(6).unwrap()
        };
        let model = FeatureModel::fit_char_word(&d, &cfg).unwrap();
        let again = FeatureModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(model.transform_all(&d), again.transform_all(&d));
    }
}
