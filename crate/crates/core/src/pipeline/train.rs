use std::collections::BTreeSet;
use std::fmt::Write as _;

use chrono::Datelike;
use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::featurize::{FeatureSpec, Featurizer};
use super::{ensure_dir, load_samples, write_json, write_text, Granularity, PipelineConfig, Sample};
use crate::error::{Error, Result};
use crate::eval::{
    compute_metrics, grid_search, rounds10_wrap_splits, rounds12_splits, time_kfold_splits, Candidate, Evaluation,
    GridResult, GridRow, Policy, Protocol, SplitPlan,
};
use crate::features::SparseVector;
use crate::models::{random_oversample, train_classifier, ClassifierSpec, TrainedModel};
use crate::sampling::derive_seed;

/// A fitted per-task classifier, or a constant when training saw one class only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Predictor {
    Constant { label: String },
    Model { model: TrainedModel },
}

impl Predictor {
    pub fn predict(&self, x: &SparseVector) -> Result<String> {
        match self {
            Predictor::Constant { label } => Ok(label.clone()),
            Predictor::Model { model } => model.predict(x),
        }
    }
}

/// Fits `spec`, oversampling first when asked. Returns the predictor and its work units.
pub fn fit_predictor(
    spec: &ClassifierSpec,
    rows: &[SparseVector],
    labels: &[String],
    oversample: bool,
    seed: u64,
) -> Result<(Predictor, u64)> {
    let distinct: BTreeSet<&String> = labels.iter().collect();
    if distinct.len() == 1 {
        let label = labels[0].clone();
        return Ok((Predictor::Constant { label }, 0));
    }
    let (rows, labels) = if oversample {
        random_oversample(rows, labels, seed)
    } else {
        (rows.to_vec(), labels.to_vec())
    };
    let classes = labels.iter().collect::<BTreeSet<_>>().len();
    let cost = spec.work_units(&rows, classes);
    let model = train_classifier(spec, &rows, &labels, seed)?;
    Ok((Predictor::Model { model }, cost))
}

struct SplitFeatures {
    train: Vec<SparseVector>,
    validation: Vec<SparseVector>,
    test: Option<Vec<SparseVector>>,
}

fn pick<'a>(samples: &'a [Sample], idx: &[usize]) -> Vec<&'a Sample> {
    idx.iter().map(|&i| &samples[i]).collect()
}

fn docs(samples: &[&Sample]) -> Vec<Vec<String>> {
    samples.iter().map(|s| s.tokens.clone()).collect()
}

fn labels_of(samples: &[&Sample], task: &str) -> Result<Vec<String>> {
    samples
        .iter()
        .map(|s| {
            s.labels
                .get(task)
                .cloned()
                .ok_or_else(|| Error::invalid(format!("{}: no label for {task}", s.id)))
        })
        .collect()
}

/// Splits off the most recent `test_years` years.
fn holdout(samples: Vec<Sample>, config: &PipelineConfig) -> Result<(Vec<Sample>, Vec<Sample>)> {
    if config.protocol != Protocol::TimeKfold || config.test_years == 0 {
        return Ok((samples, Vec::new()));
    }
    let years: Vec<i32> = samples
        .iter()
        .map(|s| s.date.year())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if years.len() <= config.test_years {
        return Err(Error::invalid(format!(
            "holding out {} test years leaves no training data ({} distinct years)",
            config.test_years,
            years.len()
        )));
    }
    let cutoff = years[years.len() - config.test_years];
    Ok(samples.into_iter().partition(|s| s.date.year() < cutoff))
}

fn plan(dev: &[Sample], config: &PipelineConfig) -> Result<SplitPlan> {
    match config.protocol {
        Protocol::TimeKfold => time_kfold_splits(dev, config.folds),
        Protocol::Rounds12 => rounds12_splits(dev),
        Protocol::Rounds10Wrap => rounds10_wrap_splits(dev, config.seed),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    /// Test round; 0 for the single held-out set of the time-based k-fold.
    pub round: usize,
    pub task: String,
    pub id: String,
    pub gold: String,
    pub predicted: String,
}

/// Grid table and choice for one task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskGrid {
    pub task: String,
    pub selected: String,
    pub grid: GridResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub granularity: Granularity,
    pub protocol: Protocol,
    pub policy: Policy,
    pub seed: u64,
    pub development: usize,
    pub test: usize,
    pub splits: usize,
    pub tasks: Vec<TaskGrid>,
}

impl TrainSummary {
    pub fn selected_row(&self, task: usize) -> &GridRow {
        let g = &self.tasks[task].grid;
        &g.rows[g.best]
    }
}

/// Deployable per-task models fitted on every record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssessModel {
    pub granularity: Granularity,
    pub mode: String,
    pub tasks: Vec<TaskModel>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskModel {
    pub task: String,
    pub selected: String,
    pub featurizer: Value,
    pub predictor: Predictor,
}

fn candidates(features: &[FeatureSpec], classifiers: &[ClassifierSpec]) -> Vec<Candidate> {
    let mut out = Vec::new();
    for f in features {
        for c in classifiers {
            out.push(Candidate {
                name: format!("{}+{}", f.label(), c.label()),
                simplicity: c.simplicity(),
            });
        }
    }
    out
}

/// Grid search per task, test predictions and the deployable model.
///
/// Writes `train_metrics.json`, `grid/<task>.csv`, `predictions.jsonl` and
/// `model.json` under `config.out`.
pub fn train(config: &PipelineConfig) -> Result<TrainSummary> {
    config.validate()?;
    let (tasks, samples) = load_samples(config)?;
    let all = samples.clone();
    let (dev, test) = holdout(samples, config)?;
    let plan = plan(&dev, config)?;
    if plan.is_empty() {
        return Err(Error::invalid("the split protocol produced no splits"));
    }
    info!("{} development and {} test records, {} splits", dev.len(), test.len(), plan.len());
    let features = config.feature_grid();
    let classifiers: Vec<ClassifierSpec> = config
        .classifiers
        .iter()
        .map(|k| ClassifierSpec::grid(k))
        .collect::<Result<Vec<_>>>()?
        .concat();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads())
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;

    // Features per (feature spec, split), fitted on that split's training part.
    let jobs: Vec<(usize, usize)> = (0..features.len())
        .flat_map(|f| (0..plan.len()).map(move |s| (f, s)))
        .collect();
    let cache: Vec<SplitFeatures> = pool.install(|| {
        jobs.par_iter()
            .map(|&(f, s)| {
                let split = &plan.splits[s];
                let train_docs = docs(&pick(&dev, &split.train));
                let fz = Featurizer::fit(&features[f], &train_docs, config.lsa_k, config.seed)?;
                Ok(SplitFeatures {
                    train: fz.transform_all(&train_docs)?,
                    validation: fz.transform_all(&docs(&pick(&dev, &split.validation)))?,
                    test: match &split.test {
                        Some(t) => Some(fz.transform_all(&docs(&pick(&dev, t)))?),
                        None => None,
                    },
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let cached = |f: usize, s: usize| &cache[f * plan.len() + s];
    let cands = candidates(&features, &classifiers);
    let n_cls = classifiers.len();

    let mut grids = Vec::with_capacity(tasks.len());
    for (t, task) in tasks.iter().enumerate() {
        let grid = grid_search(&cands, plan.len(), config.policy, config.threads(), |c, s| {
            let split = &plan.splits[s];
            let sf = cached(c / n_cls, s);
            let y = labels_of(&pick(&dev, &split.train), task)?;
            let seed = derive_seed(config.seed, (t * 1000 + s) as u64);
            let (p, cost) = fit_predictor(&classifiers[c % n_cls], &sf.train, &y, config.oversample, seed)?;
            let gold = labels_of(&pick(&dev, &split.validation), task)?;
            let pred = sf.validation.iter().map(|x| p.predict(x)).collect::<Result<Vec<_>>>()?;
            if gold.is_empty() {
                return Err(Error::invalid(format!("split {s} has an empty validation fold")));
            }
            Ok(Evaluation {
                report: compute_metrics(&gold, &pred)?,
                cost,
            })
        })?;
        info!("{task}: selected {}", cands[grid.best].name);
        grids.push(TaskGrid {
            task: task.clone(),
            selected: cands[grid.best].name.clone(),
            grid,
        });
    }

    // Test predictions with the selected configuration of every task.
    let mut rows: Vec<PredictionRow> = Vec::new();
    for (t, task) in tasks.iter().enumerate() {
        let best = grids[t].grid.best;
        let (f, cls) = (best / n_cls, &classifiers[best % n_cls]);
        let seed = derive_seed(config.seed, (t * 1000 + 999) as u64);
        if !test.is_empty() {
            let dev_refs: Vec<&Sample> = dev.iter().collect();
            let dev_docs = docs(&dev_refs);
            let fz = Featurizer::fit(&features[f], &dev_docs, config.lsa_k, config.seed)?;
            let (p, _) = fit_predictor(cls, &fz.transform_all(&dev_docs)?, &labels_of(&dev_refs, task)?, config.oversample, seed)?;
            for s in &test {
                rows.push(PredictionRow {
                    round: 0,
                    task: task.clone(),
                    id: s.id.clone(),
                    gold: labels_of(&[s], task)?.remove(0),
                    predicted: p.predict(&fz.transform(&s.tokens)?)?,
                });
            }
        }
        for (s, split) in plan.splits.iter().enumerate() {
            let Some(test_idx) = &split.test else { continue };
            let sf = cached(f, s);
            let y = labels_of(&pick(&dev, &split.train), task)?;
            let (p, _) = fit_predictor(cls, &sf.train, &y, config.oversample, derive_seed(seed, s as u64))?;
            let xs = sf.test.as_ref().expect("cached alongside the split");
            for (&i, x) in test_idx.iter().zip(xs) {
                rows.push(PredictionRow {
                    round: s + 1,
                    task: task.clone(),
                    id: dev[i].id.clone(),
                    gold: labels_of(&[&dev[i]], task)?.remove(0),
                    predicted: p.predict(x)?,
                });
            }
        }
    }

    // Deployable model on every record.
    let all_refs: Vec<&Sample> = all.iter().collect();
    let all_docs = docs(&all_refs);
    let mut task_models = Vec::with_capacity(tasks.len());
    for (t, task) in tasks.iter().enumerate() {
        let best = grids[t].grid.best;
        let fz = Featurizer::fit(&features[best / n_cls], &all_docs, config.lsa_k, config.seed)?;
        let seed = derive_seed(config.seed, (t * 1000 + 998) as u64);
        let (p, _) = fit_predictor(
            &classifiers[best % n_cls],
            &fz.transform_all(&all_docs)?,
            &labels_of(&all_refs, task)?,
            config.oversample,
            seed,
        )?;
        task_models.push(TaskModel {
            task: task.clone(),
            selected: grids[t].selected.clone(),
            featurizer: fz.to_value()?,
            predictor: p,
        });
    }

    let summary = TrainSummary {
        granularity: config.granularity,
        protocol: config.protocol,
        policy: config.policy,
        seed: config.seed,
        development: dev.len(),
        test: test.len(),
        splits: plan.len(),
        tasks: grids,
    };
    let out = &config.out;
    ensure_dir(out)?;
    write_json(&out.join("train_metrics.json"), &summary)?;
    for g in &summary.tasks {
        write_text(&out.join("grid").join(format!("{}.csv", g.task)), &g.grid.to_csv())?;
    }
    let mut jsonl = String::new();
    for r in &rows {
        let _ = writeln!(jsonl, "{}", serde_json::to_string(r)?);
    }
    write_text(&out.join("predictions.jsonl"), &jsonl)?;
    write_json(
        &out.join("model.json"),
        &AssessModel {
            granularity: config.granularity,
            mode: config.mode.clone(),
            tasks: task_models,
        },
    )?;
    Ok(summary)
}
