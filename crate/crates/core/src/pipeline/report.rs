use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::train::{PredictionRow, TrainSummary};
use super::{read_text, write_json, write_text, Granularity};
use crate::error::{Error, Result};
use crate::eval::{compute_metrics, Policy, Protocol};

/// Test scores of one task, averaged over rounds; `None` when no round had
/// test records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRow {
    pub task: String,
    pub selected: String,
    pub rounds: usize,
    pub n: usize,
    pub accuracy: Option<f64>,
    pub macro_f1: Option<f64>,
    pub weighted_f1: Option<f64>,
    pub mcc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub granularity: Granularity,
    pub protocol: Protocol,
    pub policy: Policy,
    pub seed: u64,
    pub tasks: Vec<TaskRow>,
    /// Mean over the tasks that have scores.
    pub average: TaskRow,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

fn parse_predictions(text: &str) -> Result<Vec<PredictionRow>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Scores a finished training run in `dir`; writes `metrics.json` and
/// `report.txt` there.
pub fn evaluate(dir: &Path) -> Result<EvalReport> {
    let summary: TrainSummary = serde_json::from_str(&read_text(&dir.join("train_metrics.json"))?)?;
    let predictions = parse_predictions(&read_text(&dir.join("predictions.jsonl"))?)?;
    let mut by_task: BTreeMap<&str, BTreeMap<usize, (Vec<&str>, Vec<&str>)>> = BTreeMap::new();
    for p in &predictions {
        let e = by_task.entry(&p.task).or_default().entry(p.round).or_default();
        e.0.push(&p.gold);
        e.1.push(&p.predicted);
    }
    let mut tasks = Vec::with_capacity(summary.tasks.len());
    for g in &summary.tasks {
        let rounds = by_task.remove(g.task.as_str()).unwrap_or_default();
        let mut reports = Vec::new();
        let mut n = 0;
        for (gold, pred) in rounds.values() {
            n += gold.len();
            reports.push(compute_metrics(gold, pred)?);
        }
        tasks.push(TaskRow {
            task: g.task.clone(),
            selected: g.selected.clone(),
            rounds: reports.len(),
            n,
            accuracy: mean(reports.iter().map(|r| r.accuracy)),
            macro_f1: mean(reports.iter().map(|r| r.macro_f1)),
            weighted_f1: mean(reports.iter().map(|r| r.weighted_f1)),
            mcc: mean(reports.iter().map(|r| r.mcc)),
        });
    }
    if let Some(extra) = by_task.keys().next() {
        return Err(Error::Structural(format!("predictions for unknown task `{extra}`")));
    }
    let scored = || tasks.iter().filter(|t| t.accuracy.is_some());
    let average = TaskRow {
        task: "average".into(),
        selected: String::new(),
        rounds: scored().map(|t| t.rounds).max().unwrap_or(0),
        n: scored().map(|t| t.n).max().unwrap_or(0),
        accuracy: mean(scored().filter_map(|t| t.accuracy)),
        macro_f1: mean(scored().filter_map(|t| t.macro_f1)),
        weighted_f1: mean(scored().filter_map(|t| t.weighted_f1)),
        mcc: mean(scored().filter_map(|t| t.mcc)),
    };
    let report = EvalReport {
        granularity: summary.granularity,
        protocol: summary.protocol,
        policy: summary.policy,
        seed: summary.seed,
        tasks,
        average,
    };
    write_json(&dir.join("metrics.json"), &report)?;
    write_text(&dir.join("report.txt"), &render_report(&report))?;
    Ok(report)
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

/// Fixed-width table: one row per task and an average row.
pub fn render_report(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "granularity: {}  protocol: {}  policy: {}  seed: {}",
        report.granularity.name(),
        report.protocol.name(),
        match report.policy {
            Policy::Ch3 => "ch3",
            Policy::Mcc => "mcc",
        },
        report.seed
    );
    let width = report
        .tasks
        .iter()
        .map(|t| t.selected.len())
        .max()
        .unwrap_or(0)
        .max("selected".len());
    let _ = writeln!(
        out,
        "{:<18} {:<width$} {:>5} {:>9} {:>9} {:>11} {:>8}",
        "task", "selected", "n", "accuracy", "macro_f1", "weighted_f1", "mcc"
    );
    for t in report.tasks.iter().chain(std::iter::once(&report.average)) {
        let _ = writeln!(
            out,
            "{:<18} {:<width$} {:>5} {:>9} {:>9} {:>11} {:>8}",
            t.task,
            t.selected,
            t.n,
            cell(t.accuracy),
            cell(t.macro_f1),
            cell(t.weighted_f1),
            cell(t.mcc)
        );
    }
    out
}
