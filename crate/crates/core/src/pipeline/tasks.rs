//! Subcommands other than train and evaluate.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use super::featurize::Featurizer;
use super::train::AssessModel;
use super::{
    commit_tokens, ensure_dir, function_tokens, load_samples, read_text, report_tokens, write_json, write_text,
    Granularity, PipelineConfig,
};
use crate::corpus::{
    load_dataset, CommitRecord, Dataset, DatasetKind, FunctionRecord, Labels, PostLabel, QaPost, Site, SvReport,
};
use crate::drift::{drift_report, DatedDoc, DriftReport};
use crate::error::{Error, Result};
use crate::features::{NlpConfig, FeatureModel};
use crate::neural::{gradcheck, AcGruConfig, BlockCheck, CommitInput, Parameters, TaskSpec};
use crate::pumine::{
    content_filter, pu_train, topic_share, ContentFilterConfig, EmbeddedPost, KeywordSet, LsaEmbedder, PuConfig,
    ThetaMatrix,
};
use crate::sampling::seeded;
use crate::scopes::{build_input, ContextConfig, InputMode};
use crate::textprep::{preprocess_text, PrepConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub kind: DatasetKind,
    pub records: usize,
    pub records_per_year: BTreeMap<i32, usize>,
}

fn kind_of(g: Granularity) -> DatasetKind {
    match g {
        Granularity::Report => DatasetKind::Report,
        Granularity::Function => DatasetKind::Function,
        Granularity::Commit => DatasetKind::Commit,
    }
}

/// Validates the dataset and writes its normalized JSONL form.
pub fn ingest(config: &PipelineConfig) -> Result<IngestSummary> {
    let path = config.dataset_path()?;
    let ds = load_dataset(path, kind_of(config.granularity))?;
    let (_, samples) = load_samples(config)?;
    let mut per_year = BTreeMap::new();
    for s in &samples {
        *per_year.entry(s.date.year()).or_insert(0) += 1;
    }
    let summary = IngestSummary {
        kind: ds.kind(),
        records: ds.len(),
        records_per_year: per_year,
    };
    ensure_dir(&config.out)?;
    write_text(&config.out.join("dataset.jsonl"), &ds.to_jsonl())?;
    write_json(&config.out.join("ingest.json"), &summary)?;
    Ok(summary)
}

#[derive(Serialize)]
struct FeatureRow<'a> {
    id: &'a str,
    width: usize,
    entries: &'a [(usize, f64)],
}

/// Fits the first configured feature extractor on the whole dataset and
/// writes it with the transformed rows.
pub fn featurize(config: &PipelineConfig) -> Result<usize> {
    config.validate()?;
    let (_, samples) = load_samples(config)?;
    let docs: Vec<Vec<String>> = samples.iter().map(|s| s.tokens.clone()).collect();
    let spec = &config.feature_grid()[0];
    let fz = Featurizer::fit(spec, &docs, config.lsa_k, config.seed)?;
    let mut out = String::new();
    for (s, d) in samples.iter().zip(&docs) {
        let x = fz.transform(d)?;
        let row = FeatureRow {
            id: &s.id,
            width: x.width(),
            entries: x.entries(),
        };
        let _ = writeln!(out, "{}", serde_json::to_string(&row)?);
    }
    ensure_dir(&config.out)?;
    write_text(&config.out.join("features.jsonl"), &out)?;
    write_json(&config.out.join("featurizer.json"), &fz.to_value()?)?;
    Ok(fz.width())
}

impl AssessModel {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&read_text(path)?)?)
    }

    /// Labels for already preprocessed tokens.
    pub fn predict_tokens(&self, tokens: &[String]) -> Result<Labels> {
        let mut out = Labels::new();
        for t in &self.tasks {
            let fz = Featurizer::from_value(&t.featurizer)?;
            out.insert(t.task.clone(), t.predictor.predict(&fz.transform(tokens)?)?);
        }
        Ok(out)
    }

    /// Labels for one JSON record of the model's granularity; its own
    /// labels, if any, are ignored.
    pub fn predict_record(&self, json: &str) -> Result<Labels> {
        let tasks: Vec<String> = self.tasks.iter().map(|t| t.task.clone()).collect();
        let tokens = match self.granularity {
            Granularity::Report => {
                let ds = Dataset::<SvReport>::parse_jsonl(json, tasks)?;
                report_tokens(&single(ds.records)?.description)
            }
            Granularity::Function => {
                let ds = Dataset::<FunctionRecord>::parse_jsonl(json, tasks)?;
                function_tokens(&single(ds.records)?, InputMode::parse(&self.mode, 0)?)
            }
            Granularity::Commit => {
                let ds = Dataset::<CommitRecord>::parse_jsonl(json, tasks)?;
                commit_tokens(&single(ds.records)?)
            }
        };
        self.predict_tokens(&tokens)
    }
}

fn single<R>(mut records: Vec<R>) -> Result<R> {
    if records.len() != 1 {
        return Err(Error::invalid(format!("expected one record, found {}", records.len())));
    }
    Ok(records.remove(0))
}

/// Predicts the CVSS labels of a free-text description.
pub fn assess_text(model: &AssessModel, description: &str) -> Result<Labels> {
    if model.granularity != Granularity::Report {
        return Err(Error::Config(format!(
            "a {} model needs a record, not free text",
            model.granularity.name()
        )));
    }
    model.predict_tokens(&report_tokens(description))
}

/// New terms per year and coverage of later years under a model fitted on
/// earlier ones. Writes `drift.csv` and `drift.txt`.
pub fn drift(config: &PipelineConfig, from_year: Option<i32>) -> Result<DriftReport> {
    let path = config.dataset_path()?;
    let ds = Dataset::<SvReport>::load(path)?;
    let docs: Vec<DatedDoc> = ds
        .records
        .iter()
        .map(|r| DatedDoc {
            id: r.id.clone(),
            year: r.published_date.year(),
            tokens: report_tokens(&r.description),
        })
        .collect();
    let last = docs
        .iter()
        .map(|d| d.year)
        .max()
        .ok_or_else(|| Error::invalid("drift analysis of an empty dataset"))?;
    let from = from_year.unwrap_or(last);
    let earlier: Vec<Vec<String>> = docs.iter().filter(|d| d.year < from).map(|d| d.tokens.clone()).collect();
    if earlier.is_empty() {
        return Err(Error::invalid(format!("no records before {from} to fit on")));
    }
    let model = FeatureModel::fit_word(&earlier, &NlpConfig::table(1)?)?;
    let report = drift_report(&model, &docs, from);
    ensure_dir(&config.out)?;
    write_text(&config.out.join("drift.csv"), &report.to_csv())?;
    write_text(&config.out.join("drift.txt"), &report.to_table())?;
    write_json(&config.out.join("drift.json"), &report)?;
    Ok(report)
}

#[derive(Serialize)]
struct ContextRow<'a> {
    id: &'a str,
    indices: &'a [usize],
    tokens: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    context_tokens: Option<&'a Vec<String>>,
}

/// Writes the model inputs of every function under the configured mode.
pub fn context(config: &PipelineConfig) -> Result<usize> {
    let path = config.dataset_path()?;
    let ds = Dataset::<FunctionRecord>::load(path)?;
    let mode = InputMode::parse(&config.mode, config.seed)?;
    let cfg = ContextConfig::default();
    let mut out = String::new();
    for r in &ds.records {
        let b = build_input(r, mode, &cfg);
        let row = ContextRow {
            id: &r.id,
            indices: &b.indices,
            tokens: &b.tokens,
            context_tokens: b.context_tokens.as_ref(),
        };
        let _ = writeln!(out, "{}", serde_json::to_string(&row)?);
    }
    ensure_dir(&config.out)?;
    write_text(&config.out.join("contexts.jsonl"), &out)?;
    Ok(ds.records.len())
}

fn load_posts(path: &Path) -> Result<Vec<QaPost>> {
    Ok(Dataset::<QaPost>::load_with_tasks(path, Vec::new())?.records)
}

/// Keeps the posts of `site` that pass the keyword thresholds of `step`.
/// Writes `filtered.jsonl` and the thresholds used to `filter_config.json`.
pub fn mine_filter(
    posts: &Path,
    site: Site,
    step: usize,
    keywords: Option<&Path>,
    out: &Path,
) -> Result<usize> {
    let cfg = ContentFilterConfig::default();
    cfg.validate()?;
    let kws = match keywords {
        Some(p) => KeywordSet::load(p)?,
        None => KeywordSet::bundled(),
    };
    let posts: Vec<QaPost> = load_posts(posts)?.into_iter().filter(|p| p.site == site).collect();
    let kept = content_filter(&posts, site, step, &cfg, &kws)?;
    let mut text = String::new();
    for k in &kept {
        let _ = writeln!(text, "{}", serde_json::to_string(k)?);
    }
    ensure_dir(out)?;
    write_text(&out.join("filtered.jsonl"), &text)?;
    write_json(&out.join("filter_config.json"), &cfg)?;
    Ok(kept.len())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PuSummary {
    pub positives: usize,
    pub unlabeled: usize,
    pub reliable_negatives: usize,
    pub predicted_positive: Vec<String>,
}

/// Two-stage PU learning over LSA embeddings of the posts. Posts labelled
/// positive form P, the rest U; U posts predicted positive are reported.
pub fn mine_pu(posts: &Path, alpha: f64, dims: usize, seed: u64, out: &Path) -> Result<PuSummary> {
    let posts = load_posts(posts)?;
    let prep = PrepConfig::default();
    let docs: Vec<Vec<String>> = posts.iter().map(|p| preprocess_text(&p.full_text(), &prep)).collect();
    let embedder = LsaEmbedder::fit(&docs, dims, seed)?;
    let mut p = Vec::new();
    let mut u = Vec::new();
    for (post, d) in posts.iter().zip(&docs) {
        let e = EmbeddedPost::new(post.id.clone(), embedder.embed(d)?);
        match post.label {
            PostLabel::Positive => p.push(e),
            PostLabel::Unlabeled => u.push(e),
        }
    }
    let cfg = PuConfig {
        alpha,
        ..PuConfig::default()
    };
    let model = pu_train(&p, &u, &cfg, seed)?;
    let mut predicted_positive = Vec::new();
    for e in &u {
        if model.is_positive(&e.vector)? {
            predicted_positive.push(e.id.clone());
        }
    }
    let summary = PuSummary {
        positives: p.len(),
        unlabeled: u.len(),
        reliable_negatives: model.reliable_negative_ids.len(),
        predicted_positive,
    };
    ensure_dir(out)?;
    write_json(&out.join("pu_summary.json"), &summary)?;
    write_json(&out.join("pu_model.json"), &model)?;
    Ok(summary)
}

/// Share of every topic over an externally supplied θ matrix.
pub fn mine_topics(theta: &Path, out: &Path) -> Result<Vec<f64>> {
    let theta = ThetaMatrix::load(theta)?;
    let shares = topic_share(&theta)?;
    let mut csv = String::from("topic,share\n");
    for (k, s) in shares.iter().enumerate() {
        let _ = writeln!(csv, "{k},{s:.6}");
    }
    ensure_dir(out)?;
    write_text(&out.join("topic_share.csv"), &csv)?;
    Ok(shares)
}

/// The small two-task network used for gradient checking.
pub fn toy_acgru_config(seed: u64) -> AcGruConfig {
    AcGruConfig {
        vocab_size: 50,
        input_len: 12,
        embed_dim: 8,
        filter_sizes: vec![1, 3],
        filters: 4,
        gru_hidden: 6,
        attention_hidden: 6,
        task_hidden: 6,
        tasks: vec![
            TaskSpec {
                name: "a".into(),
                labels: vec!["x".into(), "y".into(), "z".into()],
            },
            TaskSpec {
                name: "b".into(),
                labels: vec!["p".into(), "q".into()],
            },
        ],
        dropout: 0.0,
        lr: 0.001,
        batch: 4,
        epochs: 1,
        patience: 1,
        seed,
        ..AcGruConfig::default()
    }
}

/// Central-difference gradient check on the toy network; writes
/// `gradcheck.csv`. Fails when any block exceeds `tolerance`.
pub fn gradcheck_toy(seed: u64, tolerance: f64, out: &Path) -> Result<Vec<BlockCheck>> {
    use rand::Rng;
    let config = toy_acgru_config(seed);
    let params = Parameters::init(&config)?;
    let mut rng = seeded(seed);
    let streams = std::array::from_fn(|_| (0..config.input_len).map(|_| rng.gen_range(0..config.vocab_size)).collect());
    let input = CommitInput { streams };
    let gold = vec![rng.gen_range(0..3), rng.gen_range(0..2)];
    let checks = gradcheck(&params, &input, &gold, 1e-5)?;
    let mut csv = String::from("block,entries,max_rel_error\n");
    for c in &checks {
        let _ = writeln!(csv, "{},{},{:.3e}", c.name, c.entries, c.max_rel_error);
    }
    ensure_dir(out)?;
    write_text(&out.join("gradcheck.csv"), &csv)?;
    if let Some(bad) = checks.iter().find(|c| !(c.max_rel_error < tolerance)) {
        return Err(Error::invalid(format!(
            "block {} has relative gradient error {:.3e} (tolerance {tolerance:e})",
            bad.name, bad.max_rel_error
        )));
    }
    Ok(checks)
}
