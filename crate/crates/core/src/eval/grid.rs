use std::cmp::Ordering;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::MetricReport;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Accuracy, then macro F1, then weighted F1.
    Ch3,
    /// Mean MCC.
    Mcc,
}

impl Policy {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "ch3" => Ok(Policy::Ch3),
            "mcc" => Ok(Policy::Mcc),
            other => Err(Error::Config(format!("unknown selection policy `{other}`"))),
        }
    }
}

/// A grid point as seen by the selection policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub name: String,
    /// Number of tuned hyperparameters; fewer wins ties.
    pub simplicity: usize,
}

/// Outcome of fitting one candidate on one split.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub report: MetricReport,
    /// Deterministic fitting cost, the final tiebreak before config order.
    pub cost: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub index: usize,
    pub name: String,
    pub simplicity: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub mcc: f64,
    pub cost: u64,
    /// `None` when every split succeeded.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub policy: Policy,
    pub best: usize,
    /// One row per candidate, in candidate order.
    pub rows: Vec<GridRow>,
}

fn rank(policy: Policy, a: &GridRow, b: &GridRow) -> Ordering {
    let desc = |x: f64, y: f64| y.total_cmp(&x);
    let primary = match policy {
        Policy::Ch3 => desc(a.accuracy, b.accuracy)
            .then(desc(a.macro_f1, b.macro_f1))
            .then(desc(a.weighted_f1, b.weighted_f1)),
        Policy::Mcc => desc(a.mcc, b.mcc),
    };
    primary
        .then(a.simplicity.cmp(&b.simplicity))
        .then(a.cost.cmp(&b.cost))
        .then(a.index.cmp(&b.index))
}

/// Index of the best successful row under `policy`.
pub fn select(policy: Policy, rows: &[GridRow]) -> Option<usize> {
    rows.iter()
        .filter(|r| r.error.is_none())
        .min_by(|a, b| rank(policy, a, b))
        .map(|r| r.index)
}

/// Scores every candidate on every split and picks the best.
///
/// `evaluate(candidate, split)` runs on a pool of `workers` threads; the
/// table is assembled in candidate order, so the result does not depend
/// on scheduling.
pub fn grid_search<F>(
    candidates: &[Candidate],
    n_splits: usize,
    policy: Policy,
    workers: usize,
    evaluate: F,
) -> Result<GridResult>
where
    F: Fn(usize, usize) -> Result<Evaluation> + Sync,
{
    if candidates.is_empty() {
        return Err(Error::Config("empty model grid".into()));
    }
    if n_splits == 0 {
        return Err(Error::Config("grid search needs at least one split".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let jobs: Vec<(usize, usize)> = (0..candidates.len())
        .flat_map(|c| (0..n_splits).map(move |s| (c, s)))
        .collect();
    let results: Vec<Result<Evaluation>> =
        pool.install(|| jobs.par_iter().map(|&(c, s)| evaluate(c, s)).collect());
    let rows: Vec<GridRow> = candidates
        .iter()
        .enumerate()
        .map(|(c, cand)| {
            let mine = &results[c * n_splits..(c + 1) * n_splits];
            let mut row = GridRow {
                index: c,
                name: cand.name.clone(),
                simplicity: cand.simplicity,
                accuracy: 0.0,
                macro_f1: 0.0,
                weighted_f1: 0.0,
                mcc: 0.0,
                cost: 0,
                error: None,
            };
            for r in mine {
                match r {
                    Ok(e) => {
                        row.accuracy += e.report.accuracy;
                        row.macro_f1 += e.report.macro_f1;
                        row.weighted_f1 += e.report.weighted_f1;
                        row.mcc += e.report.mcc;
                        row.cost += e.cost;
                    }
                    Err(err) => {
                        row.error.get_or_insert_with(|| err.to_string());
                    }
                }
            }
            let n = n_splits as f64;
            row.accuracy /= n;
            row.macro_f1 /= n;
            row.weighted_f1 /= n;
            row.mcc /= n;
            row
        })
        .collect();
    let best = select(policy, &rows).ok_or_else(|| {
        Error::invalid(format!(
            "every grid configuration failed; first error: {}",
            rows[0].error.as_deref().unwrap_or("unknown")
        ))
    })?;
    Ok(GridResult { policy, best, rows })
}

impl GridResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,name,simplicity,accuracy,macro_f1,weighted_f1,mcc,cost,status\n");
        for r in &self.rows {
            let status = match &r.error {
                None => "ok".to_string(),
                Some(e) => format!("\"failed: {}\"", e.replace('"', "'")),
            };
            let _ = writeln!(
                out,
                "{},\"{}\",{},{:.6},{:.6},{:.6},{:.6},{},{}",
                r.index, r.name, r.simplicity, r.accuracy, r.macro_f1, r.weighted_f1, r.mcc, r.cost, status
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::compute_metrics;

    fn cand(name: &str, simplicity: usize) -> Candidate {
        Candidate {
            name: name.into(),
            simplicity,
        }
    }

    fn eval_of(gold: &[&str], pred: &[&str], cost: u64) -> Result<Evaluation> {
        Ok(Evaluation {
            report: compute_metrics(gold, pred)?,
            cost,
        })
    }

    #[test]
    fn single_config() {
        let r = grid_search(&[cand("only", 1)], 2, Policy::Ch3, 2, |_, _| eval_of(&["a"], &["a"], 1)).unwrap();
        assert_eq!(r.best, 0);
    }

    #[test]
    fn weighted_f1_breaks_tie() {
        // equal accuracy and macro F1; weighted F1 differs
        let gold = ["a", "a", "a", "b", "b", "c"];
        let r = grid_search(&[cand("x", 1), cand("y", 1)], 1, Policy::Ch3, 1, |c, _| {
            if c == 0 {
                eval_of(&gold, &["a", "a", "a", "a", "c", "c"], 1)
            } else {
                eval_of(&gold, &["a", "a", "a", "b", "c", "a"], 1)
            }
        })
        .unwrap();
        assert_eq!(r.rows[0].accuracy, r.rows[1].accuracy);
        assert!((r.rows[0].macro_f1 - r.rows[1].macro_f1).abs() < 1e-12);
        assert!(r.rows[1].weighted_f1 > r.rows[0].weighted_f1);
        assert_eq!(r.best, 1);
    }

    #[test]
    fn simplicity_then_cost_then_order() {
        let same = |_: usize, _: usize| eval_of(&["a", "b"], &["a", "b"], 5);
        let r = grid_search(&[cand("knn", 3), cand("nb", 0)], 1, Policy::Mcc, 1, same).unwrap();
        assert_eq!(r.best, 1);
        let r = grid_search(&[cand("p", 1), cand("q", 1)], 1, Policy::Mcc, 1, |c, _| {
            eval_of(&["a"], &["a"], if c == 0 { 9 } else { 3 })
        })
        .unwrap();
        assert_eq!(r.best, 1);
        let r = grid_search(&[cand("p", 1), cand("q", 1)], 1, Policy::Mcc, 4, same).unwrap();
        assert_eq!(r.best, 0);
    }

    #[test]
    fn failures() {
        let r = grid_search(&[cand("bad", 0), cand("good", 1)], 1, Policy::Ch3, 1, |c, _| {
            if c == 0 {
                Err(Error::invalid("boom"))
            } else {
                eval_of(&["a"], &["b"], 1)
            }
        })
        .unwrap();
        assert_eq!(r.best, 1);
        assert!(r.to_csv().contains("failed: invalid input: boom"));
        assert!(grid_search(&[cand("bad", 0)], 1, Policy::Ch3, 1, |_, _| Err(Error::invalid("x"))).is_err());
        assert!(grid_search(&[], 1, Policy::Ch3, 1, |_, _| eval_of(&["a"], &["a"], 0)).is_err());
    }
}
