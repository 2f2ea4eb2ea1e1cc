//! End-to-end runs behind the `assess` binary.
//!
//! Every run reads a [`PipelineConfig`], writes its artifacts under
//! `config.out` and leaves a `manifest.json` there (config hash, seed,
//! crate version, outcome). Outputs depend only on the config.

mod featurize;
mod report;
mod tasks;
mod train;

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use featurize::{FeatureSpec, Featurizer, NlpVariant};
pub use report::{evaluate, render_report, EvalReport, TaskRow};
pub use tasks::{
    assess_text, context, drift, featurize, gradcheck_toy, ingest, mine_filter, mine_pu, mine_topics,
    toy_acgru_config, IngestSummary, PuSummary,
};
pub use train::{fit_predictor, train, AssessModel, PredictionRow, Predictor, TaskGrid, TaskModel, TrainSummary};

use crate::corpus::{CommitRecord, Dataset, Dated, FunctionRecord, Labels, SvReport};
use crate::error::{Error, Result};
use crate::eval::{Policy, Protocol};
use crate::scopes::{build_input, commit_inputs, ContextConfig, InputMode};
use crate::textprep::{preprocess_text, PrepConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Report,
    Function,
    Commit,
}

impl Granularity {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "report" => Ok(Granularity::Report),
            "function" => Ok(Granularity::Function),
            "commit" => Ok(Granularity::Commit),
            other => Err(Error::Config(format!("unknown granularity `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Granularity::Report => "report",
            Granularity::Function => "function",
            Granularity::Commit => "commit",
        }
    }

    /// Feature grid used when the config names none.
    pub fn default_features(self) -> Vec<FeatureSpec> {
        match self {
            Granularity::Report => vec![
                FeatureSpec::Nlp {
                    config: 1,
                    variant: NlpVariant::CharWord,
                },
                FeatureSpec::Nlp {
                    config: 2,
                    variant: NlpVariant::CharWord,
                },
            ],
            Granularity::Function | Granularity::Commit => vec![
                FeatureSpec::BagOfTokens,
                FeatureSpec::BagOfSubtokens { min: 2, max: 6 },
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset: Option<PathBuf>,
    pub granularity: Granularity,
    /// Empty means the granularity's default grid.
    pub features: Vec<FeatureSpec>,
    /// Classifier kinds whose full grids are searched: nb, lr, svm, knn.
    pub classifiers: Vec<String>,
    pub protocol: Protocol,
    /// Validation years of the time-based k-fold.
    pub folds: usize,
    /// Most recent years held out for testing under time-based k-fold.
    pub test_years: usize,
    pub policy: Policy,
    /// Function-level input mode.
    pub mode: String,
    pub lsa_k: Option<usize>,
    /// Random oversampling of minority classes in every training set.
    pub oversample: bool,
    pub seed: u64,
    /// Threads for all parallel work; 0 uses every core.
    pub workers: usize,
    pub out: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            dataset: None,
            granularity: Granularity::Report,
            features: Vec::new(),
            classifiers: vec!["nb".into(), "lr".into()],
            protocol: Protocol::TimeKfold,
            folds: 5,
            test_years: 1,
            policy: Policy::Ch3,
            mode: "vuln_only".into(),
            lsa_k: None,
            oversample: false,
            seed: 0,
            workers: 0,
            out: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn feature_grid(&self) -> Vec<FeatureSpec> {
        if self.features.is_empty() {
            self.granularity.default_features()
        } else {
            self.features.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for f in self.feature_grid() {
            f.validate()?;
        }
        if self.classifiers.is_empty() {
            return Err(Error::Config("no classifiers configured".into()));
        }
        for c in &self.classifiers {
            crate::models::ClassifierSpec::grid(c)?;
        }
        if self.lsa_k == Some(0) {
            return Err(Error::Config("lsa_k must be at least 1".into()));
        }
        InputMode::parse(&self.mode, self.seed)?;
        Ok(())
    }

    /// The dataset path, which must exist.
    pub fn dataset_path(&self) -> Result<&Path> {
        let path = self
            .dataset
            .as_deref()
            .ok_or_else(|| Error::Config("no dataset given (--dataset or \"dataset\" in the config)".into()))?;
        if !path.is_file() {
            return Err(Error::Config(format!("dataset {} does not exist", path.display())));
        }
        Ok(path)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn threads(&self) -> usize {
        if self.workers == 0 {
            rayon::current_num_threads()
        } else {
            self.workers
        }
    }
}

/// A preprocessed, labelled, dated document of any granularity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub date: NaiveDate,
    pub tokens: Vec<String>,
    pub labels: Labels,
}

impl Dated for Sample {
    fn record_id(&self) -> &str {
        &self.id
    }
    fn record_date(&self) -> NaiveDate {
        self.date
    }
}

/// Description tokens as fed to the report-level models.
pub fn report_tokens(description: &str) -> Vec<String> {
    preprocess_text(description, &PrepConfig::default())
}

/// Code tokens of one function under an input mode; context tokens of a
/// double input get a `ctx:` prefix so they form their own features.
pub fn function_tokens(record: &FunctionRecord, mode: InputMode) -> Vec<String> {
    let built = build_input(record, mode, &ContextConfig::default());
    let mut tokens = built.tokens;
    if let Some(ctx) = built.context_tokens {
        tokens.extend(ctx.into_iter().map(|t| format!("ctx:{t}")));
    }
    tokens
}

/// Hunk and enclosing-scope tokens of a commit, concatenated.
pub fn commit_tokens(record: &CommitRecord) -> Vec<String> {
    commit_inputs(record).streams().concat()
}

/// Loads the configured dataset as samples plus its task list.
pub fn load_samples(config: &PipelineConfig) -> Result<(Vec<String>, Vec<Sample>)> {
    let path = config.dataset_path()?;
    Ok(match config.granularity {
        Granularity::Report => {
            let ds = Dataset::<SvReport>::load(path)?;
            let samples = ds
                .records
                .into_iter()
                .map(|r| Sample {
                    tokens: report_tokens(&r.description),
                    id: r.id,
                    date: r.published_date,
                    labels: r.labels,
                })
                .collect();
            (ds.tasks, samples)
        }
        Granularity::Function => {
            let ds = Dataset::<FunctionRecord>::load(path)?;
            let mode = InputMode::parse(&config.mode, config.seed)?;
            let samples = ds
                .records
                .iter()
                .map(|r| Sample {
                    id: r.id.clone(),
                    date: r.date,
                    tokens: function_tokens(r, mode),
                    labels: r.labels.clone(),
                })
                .collect();
            (ds.tasks, samples)
        }
        Granularity::Commit => {
            let ds = Dataset::<CommitRecord>::load(path)?;
            let samples = ds
                .records
                .iter()
                .map(|r| Sample {
                    id: r.id.clone(),
                    date: r.date,
                    tokens: commit_tokens(r),
                    labels: r.labels.clone(),
                })
                .collect();
            (ds.tasks, samples)
        }
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
    /// `ok` or the error message.
    pub status: String,
}

impl Manifest {
    pub fn new(command: &str, config: &PipelineConfig, outcome: std::result::Result<(), &Error>) -> Self {
        Manifest {
            command: command.into(),
            config_sha256: config.hash(),
            seed: config.seed,
            version: VERSION.into(),
            status: match outcome {
                Ok(()) => "ok".into(),
                Err(e) => format!("error: {e}"),
            },
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join("manifest.json"), self)
    }
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::output(dir, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    fs::write(path, text).map_err(|e| Error::output(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
