//! Concept-drift diagnostics: new terms per year, all-zero feature vectors
//! and char-model coverage.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureModel;

/// A preprocessed document with its id and publication year.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatedDoc {
    pub id: String,
    pub year: i32,
    pub tokens: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub new_terms_by_year: BTreeMap<i32, usize>,
    /// Records whose feature vector is empty under a model fitted on earlier years.
    pub all_zero_ids: Vec<String>,
    pub coverage_by_year: BTreeMap<i32, f64>,
}

/// Number of distinct terms first seen in each year after the earliest one.
pub fn new_terms_by_year(docs: &[DatedDoc]) -> BTreeMap<i32, usize> {
    let mut first_seen: HashMap<&str, i32> = HashMap::new();
    for d in docs {
        for t in &d.tokens {
            first_seen
                .entry(t.as_str())
                .and_modify(|y| *y = (*y).min(d.year))
                .or_insert(d.year);
        }
    }
    let Some(first_year) = docs.iter().map(|d| d.year).min() else {
        return BTreeMap::new();
    };
    let mut out = BTreeMap::new();
    for &y in first_seen.values() {
        if y > first_year {
            *out.entry(y).or_insert(0) += 1;
        }
    }
    out
}

/// Ids of documents whose transform has no non-zero feature.
pub fn find_all_zero_cases(model: &FeatureModel, docs: &[DatedDoc]) -> Vec<String> {
    docs.iter()
        .filter(|d| model.transform(&d.tokens).is_empty())
        .map(|d| d.id.clone())
        .collect()
}

/// Fraction of documents with at least one non-zero feature.
pub fn char_coverage(model: &FeatureModel, docs: &[Vec<String>]) -> Result<f64> {
    if docs.is_empty() {
        return Err(Error::invalid("coverage of an empty document list"));
    }
    let covered = docs.iter().filter(|d| !model.transform(d).is_empty()).count();
    Ok(covered as f64 / docs.len() as f64)
}

/// Full report: new terms over all docs, all-zero cases and per-year
/// coverage of `docs_from_year` onward under `model`.
pub fn drift_report(model: &FeatureModel, docs: &[DatedDoc], from_year: i32) -> DriftReport {
    let later: Vec<DatedDoc> = docs.iter().filter(|d| d.year >= from_year).cloned().collect();
    let mut by_year: BTreeMap<i32, (usize, usize)> = BTreeMap::new();
    for d in &later {
        let e = by_year.entry(d.year).or_default();
        e.1 += 1;
        if !model.transform(&d.tokens).is_empty() {
            e.0 += 1;
        }
    }
    DriftReport {
        new_terms_by_year: new_terms_by_year(docs),
        all_zero_ids: find_all_zero_cases(model, &later),
        coverage_by_year: by_year
            .into_iter()
            .map(|(y, (c, n))| (y, c as f64 / n as f64))
            .collect(),
    }
}

impl DriftReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("year,new_terms\n");
        for (y, n) in &self.new_terms_by_year {
            let _ = writeln!(out, "{y},{n}");
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = String::from("year  new_terms  coverage\n");
        let mut years: Vec<i32> = self.new_terms_by_year.keys().copied().collect();
        years.extend(self.coverage_by_year.keys());
        years.sort_unstable();
        years.dedup();
        for y in years {
            let n = self.new_terms_by_year.get(&y).copied().unwrap_or(0);
            let cov = self
                .coverage_by_year
                .get(&y)
                .map_or("n/a".to_string(), |c| format!("{c:.4}"));
            let _ = writeln!(out, "{y:<4}  {n:>9}  {cov:>8}");
        }
        let _ = writeln!(out, "all-zero records: {}", self.all_zero_ids.len());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::NlpConfig;

    fn doc(id: &str, year: i32, text: &str) -> DatedDoc {
        DatedDoc {
            id: id.into(),
            year,
            tokens: text.split_whitespace().map(str::to_string).collect(),
        }
    }

    #[test]
    fn new_terms() {
        let d = [doc("1", 2000, "a b"), doc("2", 2001, "b c")];
        assert_eq!(new_terms_by_year(&d), BTreeMap::from([(2001, 1)]));
        assert!(new_terms_by_year(&d[..1]).is_empty());
        let d = [doc("1", 2000, "a"), doc("2", 2001, "b"), doc("3", 2002, "b a")];
        assert_eq!(new_terms_by_year(&d), BTreeMap::from([(2001, 1)]));
    }

    #[test]
    fn all_zero() {
        let cfg = NlpConfig::default();
        let m = FeatureModel::from_terms(cfg, ["a".to_string(), "b".to_string()], [], &[]).unwrap();
        let d = [doc("z", 2010, "zzz"), doc("s", 2010, "a q"), doc("e", 2010, "")];
        assert_eq!(find_all_zero_cases(&m, &d), ["z", "e"]);
    }

    #[test]
    fn coverage() {
        let cfg = NlpConfig::default();
        let m = FeatureModel::from_terms(cfg, [], ["ab".to_string()], &[]).unwrap();
        let toks = |s: &str| vec![s.to_string()];
        assert_eq!(char_coverage(&m, &[toks("cab")]).unwrap(), 1.0);
        assert_eq!(char_coverage(&m, &[toks("cab"), toks("xyz")]).unwrap(), 0.5);
        assert!(char_coverage(&m, &[]).is_err());
    }
}
