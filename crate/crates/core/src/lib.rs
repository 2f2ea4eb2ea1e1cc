//! Software vulnerability assessment workbench.
//!
//! Predicts the seven CVSS base characteristics of a vulnerability at three
//! granularities: free-text reports, vulnerable functions, and
//! vulnerability-contributing commits. The crate also ships the supporting
//! machinery: time-ordered evaluation protocols, concept-drift diagnostics,
//! and a positive-unlabeled miner for security discussion posts.
//!
//! Module map:
//!
//! * [`corpus`] dataset schemas, JSONL ingest and unified-diff parsing
//! * [`textprep`] description preprocessing, Porter stemming, code tokenization
//! * [`features`] word/char n-gram vocabularies and the char-word aggregation
//! * [`reduce`] latent semantic analysis and embedding averaging
//! * [`models`] classical classifiers, k-means and the commit baselines
//! * [`neural`] the attention-based convolutional GRU multi-task network
//! * [`eval`] time-based splits, metrics and grid search
//! * [`drift`] out-of-vocabulary and new-term diagnostics
//! * [`scopes`] scope parsing, closest enclosing scopes and function contexts
//! * [`pumine`] keyword filtering, PU learning and topic aggregation
//! * [`pipeline`] end-to-end orchestration behind the `assess` binary

pub mod corpus;
pub mod drift;
pub mod error;
pub mod eval;
pub mod features;
pub mod models;
pub mod neural;
pub mod pipeline;
pub mod pumine;
pub mod reduce;
pub mod sampling;
pub mod scopes;
pub mod synth;
pub mod textprep;

pub use error::{Error, Result};
