use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::NlpConfig;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VocabKind {
    Word,
    Char,
    Subtoken,
}

/// Terms in lexicographic order; a term's position is its column index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    pub kind: VocabKind,
    terms: Vec<String>,
    df: Vec<usize>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    kind: VocabKind,
    terms: Vec<String>,
    df: Vec<usize>,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(repr: VocabularyRepr) -> Self {
        let mut vocab = Vocabulary {
            kind: repr.kind,
            terms: repr.terms,
            df: repr.df,
            index: HashMap::new(),
        };
        vocab.reindex();
        vocab
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(vocab: Vocabulary) -> Self {
        VocabularyRepr {
            kind: vocab.kind,
            terms: vocab.terms,
            df: vocab.df,
        }
    }
}

impl Vocabulary {
    /// Builds from (term, document frequency) pairs, ordering terms lexicographically.
    pub fn from_counts(kind: VocabKind, counts: BTreeMap<String, usize>) -> Self {
        let (terms, df): (Vec<_>, Vec<_>) = counts.into_iter().unzip();
        let mut vocab = Vocabulary {
            kind,
            terms,
            df,
            index: HashMap::new(),
        };
        vocab.reindex();
        vocab
    }

    /// A vocabulary whose document frequencies are unknown (each set to 1).
    pub fn from_terms<I: IntoIterator<Item = String>>(kind: VocabKind, terms: I) -> Self {
        Self::from_counts(kind, terms.into_iter().map(|t| (t, 1)).collect())
    }

    pub(crate) fn reindex(&mut self) {
        self.index = self
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.index.contains_key(term)
    }

    pub fn df(&self, term: &str) -> Option<usize> {
        self.index_of(term).map(|i| self.df[i])
    }

    pub fn doc_frequencies(&self) -> &[usize] {
        &self.df
    }
}

/// Word n-grams of a token sequence for every n in `min..=max`, joined by a space.
pub fn word_ngrams(tokens: &[String], min: usize, max: usize) -> Vec<String> {
    let mut out = Vec::new();
    for n in min.max(1)..=max {
        if n > tokens.len() {
            break;
        }
        out.extend(tokens.windows(n).map(|w| w.join(" ")));
    }
    out
}

/// Character n-grams of `text` for every n in `min..=max`, counted in chars.
/// Grams made only of whitespace are skipped.
pub fn char_ngrams(text: &str, min: usize, max: usize) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    for n in min.max(1)..=max {
        if n > chars.len() {
            break;
        }
        for w in chars.windows(n) {
            if w.iter().all(|c| c.is_whitespace()) {
                continue;
            }
            out.push(w.iter().collect());
        }
    }
    out
}

fn document_frequencies<I>(docs: I) -> BTreeMap<String, usize>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut df = BTreeMap::new();
    for grams in docs {
        let unique: BTreeSet<String> = grams.into_iter().collect();
        for g in unique {
            *df.entry(g).or_insert(0) += 1;
        }
    }
    df
}

/// Word n-grams whose document fraction strictly exceeds the configured minimum.
pub fn build_word_vocab(docs: &[Vec<String>], config: &NlpConfig) -> Result<Vocabulary> {
    if docs.is_empty() {
        return Err(Error::invalid("cannot build a vocabulary from an empty corpus"));
    }
    config.validate()?;
    let n = docs.len() as f64;
    let df = document_frequencies(
        docs.iter()
            .map(|d| word_ngrams(d, config.word_ngram_min, config.word_ngram_max)),
    );
    let kept = df
        .into_iter()
        .filter(|(_, count)| *count as f64 / n > config.word_min_doc_fraction)
        .collect();
    Ok(Vocabulary::from_counts(VocabKind::Word, kept))
}

/// Character n-grams (boundary spaces included) of the high-frequency words.
///
/// Source words are unigrams appearing in more than `char_word_doc_fraction`
/// of the documents. Each document is reduced to its source words, joined by
/// single spaces, and all grams of length `char_min..=char_max` are taken.
pub fn build_char_vocab(docs: &[Vec<String>], config: &NlpConfig) -> Result<Vocabulary> {
    if docs.is_empty() {
        return Err(Error::invalid("cannot build a vocabulary from an empty corpus"));
    }
    config.validate()?;
    let n = docs.len() as f64;
    let word_df = document_frequencies(docs.iter().cloned());
    let source: BTreeSet<&str> = word_df
        .iter()
        .filter(|(_, c)| **c as f64 / n > config.char_word_doc_fraction)
        .map(|(w, _)| w.as_str())
        .collect();
    let df = document_frequencies(docs.iter().map(|d| {
        let text = d
            .iter()
            .filter(|t| source.contains(t.as_str()))
            .map(String::as_str)
            .collect::<Vec<_>>()
            .join(" ");
        char_ngrams(&text, config.char_min, config.char_max)
    }));
    Ok(Vocabulary::from_counts(VocabKind::Char, df))
}

/// Every contiguous character substring of `token` with length in `min..=max`.
pub fn subtokens(token: &str, min: usize, max: usize) -> Vec<String> {
    char_ngrams(token, min, max)
}

/// Vocabulary of all subtokens seen in the code-token documents.
pub fn build_subtoken_vocab(docs: &[Vec<String>], min: usize, max: usize) -> Result<Vocabulary> {
    if docs.is_empty() {
        return Err(Error::invalid("cannot build a vocabulary from an empty corpus"));
    }
    let df = document_frequencies(
        docs.iter()
            .map(|d| d.iter().flat_map(|t| subtokens(t, min, max)).collect()),
    );
    Ok(Vocabulary::from_counts(VocabKind::Subtoken, df))
}

/// Vocabulary of every distinct token (bag of tokens).
pub fn build_token_vocab(docs: &[Vec<String>]) -> Result<Vocabulary> {
    if docs.is_empty() {
        return Err(Error::invalid("cannot build a vocabulary from an empty corpus"));
    }
    Ok(Vocabulary::from_counts(
        VocabKind::Word,
        document_frequencies(docs.iter().cloned()),
    ))
}
