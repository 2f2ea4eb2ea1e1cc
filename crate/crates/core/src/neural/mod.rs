//! Attention-based convolutional GRU with one softmax head per task.
//!
//! Each commit arrives as four token-id streams (deleted hunk lines, added
//! hunk lines and the enclosing scopes before and after the change). A
//! shared embedding feeds convolutions of several widths; each width has
//! its own GRU and attention pooling. The pooled vectors of all streams
//! form the commit vector that every task block reads.

mod net;
mod params;
mod train;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

pub use net::{backward, forward, multitask_loss, ForwardCache, Gradients};
pub use params::{Branch, Head, Mat, Network, Parameters, BUNDLE_FORMAT, BUNDLE_VERSION};
pub use train::{
    adam_step, gradcheck, predict_acgru, train_acgru, AdamState, BlockCheck, EpochStats, Sample, TrainOutcome,
};

use crate::error::{Error, Result};

/// Streams per commit.
pub const N_INPUTS: usize = 4;
pub const PAD_ID: usize = 0;
pub const UNKNOWN_ID: usize = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    /// Class names; the head's output `i` is `labels[i]`.
    pub labels: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcGruConfig {
    pub vocab_size: usize,
    pub input_len: usize,
    pub embed_dim: usize,
    pub filter_sizes: Vec<usize>,
    pub filters: usize,
    pub gru_hidden: usize,
    pub attention_hidden: usize,
    pub task_hidden: usize,
    pub tasks: Vec<TaskSpec>,
    pub dropout: f64,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for AcGruConfig {
    fn default() -> Self {
        AcGruConfig {
            vocab_size: 10_000,
            input_len: 1024,
            embed_dim: 300,
            filter_sizes: vec![1, 3, 5],
            filters: 128,
            gru_hidden: 128,
            attention_hidden: 128,
            task_hidden: 128,
            tasks: Vec::new(),
            dropout: 0.2,
            lr: 0.001,
            batch: 32,
            epochs: 50,
            patience: 5,
            seed: 0,
        }
    }
}

impl AcGruConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("input_len", self.input_len),
            ("embed_dim", self.embed_dim),
            ("filters", self.filters),
            ("gru_hidden", self.gru_hidden),
            ("attention_hidden", self.attention_hidden),
            ("task_hidden", self.task_hidden),
            ("batch", self.batch),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.vocab_size < 2 {
            return Err(Error::Config("vocab_size must leave room for the pad and unknown ids".into()));
        }
        if self.filter_sizes.is_empty() || self.filter_sizes.iter().any(|&k| k == 0 || k > self.input_len) {
            return Err(Error::Config(format!(
                "filter sizes {:?} must be within 1..={}",
                self.filter_sizes, self.input_len
            )));
        }
        if self.tasks.is_empty() {
            return Err(Error::Config("no tasks configured".into()));
        }
        if let Some(t) = self.tasks.iter().find(|t| t.labels.is_empty()) {
            return Err(Error::Config(format!("task {} has no labels", t.name)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.lr)));
        }
        Ok(())
    }

    /// Width of the commit vector: one GRU output per stream and filter size.
    pub fn commit_width(&self) -> usize {
        N_INPUTS * self.filter_sizes.len() * self.gru_hidden
    }

    /// Task specs from labelled records: each task's classes in sorted order.
    pub fn tasks_from_labels<'a>(
        task_names: &[String],
        labels: impl IntoIterator<Item = &'a BTreeMap<String, String>>,
    ) -> Vec<TaskSpec> {
        let mut seen: Vec<std::collections::BTreeSet<String>> = vec![Default::default(); task_names.len()];
        for l in labels {
            for (i, t) in task_names.iter().enumerate() {
                if let Some(v) = l.get(t) {
                    seen[i].insert(v.clone());
                }
            }
        }
        task_names
            .iter()
            .zip(seen)
            .map(|(name, set)| TaskSpec {
                name: name.clone(),
                labels: set.into_iter().collect(),
            })
            .collect()
    }

    /// Class indices of a labelled record, in task order.
    pub fn encode_labels(&self, labels: &BTreeMap<String, String>) -> Result<Vec<usize>> {
        self.tasks
            .iter()
            .map(|t| {
                let v = labels
                    .get(&t.name)
                    .ok_or_else(|| Error::invalid(format!("missing label for task {}", t.name)))?;
                t.labels
                    .iter()
                    .position(|l| l == v)
                    .ok_or_else(|| Error::invalid(format!("unknown {} class `{v}`", t.name)))
            })
            .collect()
    }
}

/// Token-to-id map; 0 pads, 1 stands for unknown tokens.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct CodeVocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for CodeVocabulary {
    fn from(tokens: Vec<String>) -> Self {
        CodeVocabulary::from_tokens(tokens)
    }
}

impl From<CodeVocabulary> for Vec<String> {
    fn from(v: CodeVocabulary) -> Self {
        v.tokens
    }
}

impl CodeVocabulary {
    /// The `size − 2` most frequent tokens, ties broken alphabetically.
    pub fn build<'a, I>(streams: I, size: usize) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for s in streams {
            for t in s {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let tokens: Vec<String> = ranked
            .into_iter()
            .take(size.saturating_sub(2))
            .map(|(t, _)| t.to_string())
            .collect();
        CodeVocabulary::from_tokens(tokens)
    }

    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i + 2)).collect();
        CodeVocabulary { tokens, index }
    }

    /// Ids in use, pad and unknown included.
    pub fn len(&self) -> usize {
        self.tokens.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNKNOWN_ID)
    }

    /// Ids truncated or zero-padded to exactly `len`.
    pub fn encode(&self, tokens: &[String], len: usize) -> Vec<usize> {
        let mut ids: Vec<usize> = tokens.iter().take(len).map(|t| self.id(t)).collect();
        ids.resize(len, PAD_ID);
        ids
    }
}

/// Four id streams of equal length.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitInput {
    pub streams: [Vec<usize>; N_INPUTS],
}

impl CommitInput {
    pub fn encode(vocab: &CodeVocabulary, streams: [&[String]; N_INPUTS], len: usize) -> Self {
        CommitInput {
            streams: streams.map(|s| vocab.encode(s, len)),
        }
    }
}

#[cfg(test)]
mod tests;
