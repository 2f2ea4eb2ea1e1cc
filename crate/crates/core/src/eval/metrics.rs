use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub mcc: f64,
    pub per_class: Vec<ClassMetrics>,
    /// Rows are gold classes, columns predicted classes, both in `per_class` order.
    pub confusion: Vec<Vec<usize>>,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Accuracy, macro and weighted F1 and multi-class MCC.
///
/// Classes are the sorted union of gold and predicted labels. Undefined
/// precision, recall or F1 count as 0; MCC with a zero denominator is 0.
pub fn compute_metrics<S: AsRef<str>>(gold: &[S], predicted: &[S]) -> Result<MetricReport> {
    if gold.len() != predicted.len() {
        return Err(Error::Dimension {
            expected: gold.len(),
            actual: predicted.len(),
        });
    }
    if gold.is_empty() {
        return Err(Error::invalid("metrics need at least one sample"));
    }
    let classes: Vec<&str> = gold
        .iter()
        .chain(predicted)
        .map(AsRef::as_ref)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let k = classes.len();
    let index = |s: &str| classes.binary_search(&s).expect("class in union");
    let mut confusion = vec![vec![0usize; k]; k];
    for (g, p) in gold.iter().zip(predicted) {
        confusion[index(g.as_ref())][index(p.as_ref())] += 1;
    }
    let n = gold.len();
    let t: Vec<f64> = confusion.iter().map(|r| r.iter().sum::<usize>() as f64).collect();
    let p: Vec<f64> = (0..k)
        .map(|j| confusion.iter().map(|r| r[j]).sum::<usize>() as f64)
        .collect();
    let correct: f64 = (0..k).map(|i| confusion[i][i] as f64).sum();
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|i| {
            let tp = confusion[i][i] as f64;
            let precision = ratio(tp, p[i]);
            let recall = ratio(tp, t[i]);
            ClassMetrics {
                label: classes[i].to_string(),
                precision,
                recall,
                f1: ratio(2.0 * precision * recall, precision + recall),
                support: t[i] as usize,
            }
        })
        .collect();
    let s = n as f64;
    let macro_f1 = per_class.iter().map(|c| c.f1).sum::<f64>() / k as f64;
    let weighted_f1 = per_class.iter().map(|c| c.f1 * c.support as f64).sum::<f64>() / s;
    let cov_pt = correct * s - p.iter().zip(&t).map(|(a, b)| a * b).sum::<f64>();
    let cov_pp = s * s - p.iter().map(|a| a * a).sum::<f64>();
    let cov_tt = s * s - t.iter().map(|a| a * a).sum::<f64>();
    let den = (cov_pp * cov_tt).sqrt();
    Ok(MetricReport {
        n,
        accuracy: correct / s,
        macro_f1,
        weighted_f1,
        mcc: ratio(cov_pt, den),
        per_class,
        confusion,
    })
}

impl MetricReport {
    /// Aligned text table of the per-class rows followed by the summary.
    pub fn to_table(&self) -> String {
        let width = self
            .per_class
            .iter()
            .map(|c| c.label.len())
            .max()
            .unwrap_or(5)
            .max(5);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>9}  {:>9}  {:>9}  {:>7}", "class", "precision", "recall", "f1", "support");
        for c in &self.per_class {
            let _ = writeln!(
                out,
                "{:<width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>7}",
                c.label, c.precision, c.recall, c.f1, c.support
            );
        }
        let _ = writeln!(
            out,
            "accuracy {:.4}  macro_f1 {:.4}  weighted_f1 {:.4}  mcc {:.4}  n {}",
            self.accuracy, self.macro_f1, self.weighted_f1, self.mcc, self.n
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect() {
        let g = ["a", "b", "c", "a"];
        let m = compute_metrics(&g, &g).unwrap();
        assert_eq!((m.accuracy, m.macro_f1, m.mcc), (1.0, 1.0, 1.0));
    }

    #[test]
    fn balanced_binary_confusion() {
        // TP = FP = TN = FN = 1
        let m = compute_metrics(&["p", "p", "n", "n"], &["p", "n", "n", "p"]).unwrap();
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(m.mcc, 0.0);
    }

    #[test]
    fn constant_predictor_mcc_zero() {
        let m = compute_metrics(&["a", "b", "a"], &["a", "a", "a"]).unwrap();
        assert_eq!(m.mcc, 0.0);
        assert_eq!(m.per_class[1].f1, 0.0);
    }

    #[test]
    fn predicted_only_class_counts_in_macro() {
        let m = compute_metrics(&["a", "a"], &["a", "b"]).unwrap();
        assert_eq!(m.per_class.len(), 2);
        assert_eq!(m.per_class[1].support, 0);
        assert!((m.macro_f1 - (2.0 / 3.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(compute_metrics(&["a"], &["a", "b"]).is_err());
        assert!(compute_metrics::<&str>(&[], &[]).is_err());
    }

    #[test]
    fn table_has_all_rows() {
        let m = compute_metrics(&["x", "y"], &["x", "x"]).unwrap();
        let t = m.to_table();
        assert_eq!(t.lines().count(), 4);
    }
}
