use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Document-topic proportions, one row per post or user.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaMatrix {
    pub ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ThetaMatrix {
    pub fn new(ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if ids.len() != rows.len() {
            return Err(Error::Dimension {
                expected: ids.len(),
                actual: rows.len(),
            });
        }
        let m = ThetaMatrix { ids, rows };
        m.validate()?;
        Ok(m)
    }

    pub fn topics(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// Rows must be non-negative and sum to one within 1e-6.
    pub fn validate(&self) -> Result<()> {
        let k = self.topics();
        for (id, row) in self.ids.iter().zip(&self.rows) {
            if row.len() != k {
                return Err(Error::Dimension {
                    expected: k,
                    actual: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::invalid(format!("row {id} has a negative or non-finite entry")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-6 {
                return Err(Error::invalid(format!("row {id} sums to {s}, not 1")));
            }
        }
        Ok(())
    }

    pub fn row(&self, id: &str) -> Option<&[f64]> {
        self.ids.iter().position(|i| i == id).map(|i| self.rows[i].as_slice())
    }

    /// CSV with a header; the first column is the id.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::invalid("theta CSV is empty"))?;
        let k = header.split(',').count().saturating_sub(1);
        if k == 0 {
            return Err(Error::Parse {
                line: 1,
                message: "header needs an id column and at least one topic".into(),
            });
        }
        let (mut ids, mut rows) = (Vec::new(), Vec::new());
        for (n, line) in lines {
            let mut cells = line.split(',');
            let id = cells.next().unwrap_or_default().trim().to_string();
            let row = cells
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Parse {
                    line: n + 1,
                    message: e.to_string(),
                })?;
            if row.len() != k {
                return Err(Error::Parse {
                    line: n + 1,
                    message: format!("expected {k} topic columns, found {}", row.len()),
                });
            }
            ids.push(id);
            rows.push(row);
        }
        ThetaMatrix::new(ids, rows)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ThetaMatrix::parse_csv(&text)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("id");
        for t in 0..self.topics() {
            let _ = write!(out, ",topic_{t}");
        }
        out.push('\n');
        for (id, row) in self.ids.iter().zip(&self.rows) {
            out.push_str(id);
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Mean topic proportion over posts.
pub fn topic_share(theta: &ThetaMatrix) -> Result<Vec<f64>> {
    theta.validate()?;
    if theta.rows.is_empty() {
        return Err(Error::invalid("topic share of no posts"));
    }
    let n = theta.rows.len() as f64;
    let mut out = vec![0.0; theta.topics()];
    for row in &theta.rows {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    Ok(out.into_iter().map(|v| v / n).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expertise {
    pub scores: Vec<f64>,
    /// Posts without an accepted answerer or without a knowledge row.
    pub skipped: usize,
}

/// Per topic, the sum over posts of the question's proportion times the
/// accepted answerer's knowledge proportion.
pub fn specific_expertise(
    questions: &ThetaMatrix,
    knowledge: &ThetaMatrix,
    accepted: &HashMap<String, String>,
) -> Result<Expertise> {
    questions.validate()?;
    knowledge.validate()?;
    let k = questions.topics();
    if !knowledge.rows.is_empty() && knowledge.topics() != k {
        return Err(Error::Dimension {
            expected: k,
            actual: knowledge.topics(),
        });
    }
    let by_user: HashMap<&str, &[f64]> = knowledge
        .ids
        .iter()
        .map(String::as_str)
        .zip(knowledge.rows.iter().map(Vec::as_slice))
        .collect();
    let mut scores = vec![0.0; k];
    let mut skipped = 0;
    for (post, q) in questions.ids.iter().zip(&questions.rows) {
        match accepted.get(post).and_then(|u| by_user.get(u.as_str())) {
            Some(know) => {
                for ((s, a), b) in scores.iter_mut().zip(q).zip(know.iter()) {
                    *s += a * b;
                }
            }
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        log::warn!("{skipped} post(s) skipped: no accepted answerer knowledge row");
    }
    Ok(Expertise { scores, skipped })
}

/// Topics holding at least `threshold` of a post.
pub fn assign_topics(row: &[f64], threshold: f64) -> Vec<usize> {
    row.iter()
        .enumerate()
        .filter(|(_, v)| **v >= threshold)
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn theta(rows: &[&[f64]]) -> ThetaMatrix {
        let ids = (0..rows.len()).map(|i| format!("q{i}")).collect();
        ThetaMatrix::new(ids, rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn shares() {
        let s = topic_share(&theta(&[&[0.6, 0.4], &[0.2, 0.8]])).unwrap();
        assert!((s[0] - 0.4).abs() < 1e-12 && (s[1] - 0.6).abs() < 1e-12);
        assert!(ThetaMatrix::new(vec!["x".into()], vec![vec![1.5, -0.5]]).is_err());
    }

    #[test]
    fn expertise() {
        let q = theta(&[&[1.0, 0.0]]);
        let k = ThetaMatrix::new(vec!["u".into()], vec![vec![0.3, 0.7]]).unwrap();
        let acc = HashMap::from([("q0".to_string(), "u".to_string())]);
        assert_eq!(specific_expertise(&q, &k, &acc).unwrap().scores, [0.3, 0.0]);
        let miss = specific_expertise(&q, &k, &HashMap::new()).unwrap();
        assert_eq!((miss.scores, miss.skipped), (vec![0.0, 0.0], 1));
    }

    #[test]
    fn topic_assignment() {
        assert_eq!(assign_topics(&[0.95, 0.05], 0.1), [0]);
        assert_eq!(assign_topics(&[0.5, 0.5], 0.1), [0, 1]);
        assert!(assign_topics(&[1.0 / 11.0; 11], 0.1).is_empty());
    }

    #[test]
    fn csv_round_trip() {
        let t = theta(&[&[0.25, 0.75], &[1.0, 0.0]]);
        assert_eq!(ThetaMatrix::parse_csv(&t.to_csv()).unwrap(), t);
        assert!(ThetaMatrix::parse_csv("id,a\nx,zz\n").is_err());
    }
}
