//! Classical classifiers, k-means clustering and the commit-level baselines.

mod cluster;
mod labels;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use cluster::{kmeans_fit, ucva_assign, KMeansModel, UcvaModel};
pub use labels::{random_oversample, xcva_decode, xcva_encode};

use crate::error::{Error, Result};
use crate::features::SparseVector;
use crate::sampling::seeded;

pub const C_GRID: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];
pub const KNN_K_GRID: [usize; 4] = [5, 11, 31, 51];

const SGD_EPOCHS: usize = 100;
const SGD_LR: f64 = 0.01;
const NB_ALPHA: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnnWeight {
    Uniform,
    Distance,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    NaiveBayes,
    LogisticRegression { c: f64 },
    LinearSvm { c: f64 },
    Knn { k: usize, weight: KnnWeight, p: u8 },
}

impl ClassifierSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ClassifierSpec::NaiveBayes => "naive_bayes",
            ClassifierSpec::LogisticRegression { .. } => "logistic_regression",
            ClassifierSpec::LinearSvm { .. } => "linear_svm",
            ClassifierSpec::Knn { .. } => "knn",
        }
    }

    /// Short label such as `lr(C=0.1)` used in tables.
    pub fn label(&self) -> String {
        match self {
            ClassifierSpec::NaiveBayes => "nb".into(),
            ClassifierSpec::LogisticRegression { c } => format!("lr(C={c})"),
            ClassifierSpec::LinearSvm { c } => format!("svm(C={c})"),
            ClassifierSpec::Knn { k, weight, p } => {
                let w = match weight {
                    KnnWeight::Uniform => "uniform",
                    KnnWeight::Distance => "distance",
                };
                format!("knn(k={k},{w},p={p})")
            }
        }
    }

    /// Number of tuned hyperparameters.
    pub fn simplicity(&self) -> usize {
        match self {
            ClassifierSpec::NaiveBayes => 0,
            ClassifierSpec::LogisticRegression { .. } | ClassifierSpec::LinearSvm { .. } => 1,
            ClassifierSpec::Knn { .. } => 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ClassifierSpec::LogisticRegression { c } | ClassifierSpec::LinearSvm { c } => {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(Error::Config(format!("C must be positive, got {c}")));
                }
            }
            ClassifierSpec::Knn { k, p, .. } => {
                if k == 0 {
                    return Err(Error::Config("knn needs k >= 1".into()));
                }
                if p != 1 && p != 2 {
                    return Err(Error::Config(format!("knn norm must be 1 or 2, got {p}")));
                }
            }
            ClassifierSpec::NaiveBayes => {}
        }
        Ok(())
    }

    /// Full tuning grid of one classifier kind.
    pub fn grid(kind: &str) -> Result<Vec<ClassifierSpec>> {
        Ok(match kind {
            "naive_bayes" | "nb" => vec![ClassifierSpec::NaiveBayes],
            "logistic_regression" | "lr" => C_GRID
                .iter()
                .map(|&c| ClassifierSpec::LogisticRegression { c })
                .collect(),
            "linear_svm" | "svm" => C_GRID.iter().map(|&c| ClassifierSpec::LinearSvm { c }).collect(),
            "knn" => {
                let mut out = Vec::new();
                for k in KNN_K_GRID {
                    for weight in [KnnWeight::Uniform, KnnWeight::Distance] {
                        for p in [1, 2] {
                            out.push(ClassifierSpec::Knn { k, weight, p });
                        }
                    }
                }
                out
            }
            other => return Err(Error::Config(format!("unknown classifier kind `{other}`"))),
        })
    }

    /// Deterministic cost of fitting on `rows`, in abstract work units.
    pub fn work_units(&self, rows: &[SparseVector], n_classes: usize) -> u64 {
        let nnz: u64 = rows.iter().map(|r| r.nnz() as u64 + 1).sum();
        match self {
            ClassifierSpec::NaiveBayes => nnz + (n_classes * rows.first().map_or(0, |r| r.width())) as u64,
            ClassifierSpec::LogisticRegression { .. } | ClassifierSpec::LinearSvm { .. } => {
                SGD_EPOCHS as u64 * nnz * n_classes as u64
            }
            ClassifierSpec::Knn { .. } => nnz,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearLoss {
    Log,
    Hinge,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelParams {
    NaiveBayes {
        log_prior: Vec<f64>,
        /// class × feature log likelihoods
        log_likelihood: Vec<Vec<f64>>,
    },
    Linear {
        loss: LinearLoss,
        weights: Vec<Vec<f64>>,
        bias: Vec<f64>,
    },
    Knn {
        k: usize,
        weight: KnnWeight,
        p: u8,
        points: Vec<SparseVector>,
        targets: Vec<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ClassifierSpec,
    /// Sorted label set; score column `i` belongs to `labels[i]`.
    pub labels: Vec<String>,
    pub width: usize,
    pub seed: u64,
    pub params: ModelParams,
}

fn check_training_input(features: &[SparseVector], labels: &[String]) -> Result<(usize, Vec<String>, Vec<usize>)> {
    if features.len() != labels.len() {
        return Err(Error::Dimension {
            expected: features.len(),
            actual: labels.len(),
        });
    }
    let width = features
        .first()
        .ok_or_else(|| Error::invalid("no training rows"))?
        .width();
    for (i, row) in features.iter().enumerate() {
        if row.width() != width {
            return Err(Error::Dimension {
                expected: width,
                actual: row.width(),
            });
        }
        if row.entries().iter().any(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!("row {i} has a non-finite feature")));
        }
    }
    let classes: Vec<String> = labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    if classes.len() < 2 {
        return Err(Error::invalid("training needs at least two distinct labels"));
    }
    let targets = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label drawn from the set"))
        .collect();
    Ok((width, classes, targets))
}

/// Fits a classifier. Labels are ordered lexicographically.
pub fn train_classifier(
    spec: &ClassifierSpec,
    features: &[SparseVector],
    labels: &[String],
    seed: u64,
) -> Result<TrainedModel> {
    spec.validate()?;
    let (width, classes, targets) = check_training_input(features, labels)?;
    let params = match *spec {
        ClassifierSpec::NaiveBayes => fit_naive_bayes(features, &targets, classes.len(), width)?,
        ClassifierSpec::LogisticRegression { c } => {
            fit_linear(features, &targets, classes.len(), width, c, LinearLoss::Log, seed)
        }
        ClassifierSpec::LinearSvm { c } => {
            fit_linear(features, &targets, classes.len(), width, c, LinearLoss::Hinge, seed)
        }
        ClassifierSpec::Knn { k, weight, p } => ModelParams::Knn {
            k,
            weight,
            p,
            points: features.to_vec(),
            targets,
        },
    };
    Ok(TrainedModel {
        spec: *spec,
        labels: classes,
        width,
        seed,
        params,
    })
}

fn fit_naive_bayes(features: &[SparseVector], targets: &[usize], n_classes: usize, width: usize) -> Result<ModelParams> {
    let mut counts = vec![vec![0.0; width]; n_classes];
    let mut class_n = vec![0usize; n_classes];
    for (row, &t) in features.iter().zip(targets) {
        class_n[t] += 1;
        for &(j, v) in row.entries() {
            if v < 0.0 {
                return Err(Error::invalid("multinomial naive Bayes needs non-negative features"));
            }
            counts[t][j] += v;
        }
    }
    let n = features.len() as f64;
    let log_prior = class_n.iter().map(|&c| (c as f64 / n).ln()).collect();
    let log_likelihood = counts
        .into_iter()
        .map(|row| {
            let total: f64 = row.iter().sum::<f64>() + NB_ALPHA * width as f64;
            row.into_iter().map(|c| ((c + NB_ALPHA) / total).ln()).collect()
        })
        .collect();
    Ok(ModelParams::NaiveBayes {
        log_prior,
        log_likelihood,
    })
}

/// One-vs-rest SGD. The weight vector is stored as `scale * v` so the L2
/// shrink step stays O(1) per sample.
fn fit_linear(
    features: &[SparseVector],
    targets: &[usize],
    n_classes: usize,
    width: usize,
    c: f64,
    loss: LinearLoss,
    seed: u64,
) -> ModelParams {
    let n = features.len();
    let lambda = 1.0 / (c * n as f64);
    let mut weights = Vec::with_capacity(n_classes);
    let mut bias = Vec::with_capacity(n_classes);
    for class in 0..n_classes {
        let mut rng = seeded(crate::sampling::derive_seed(seed, class as u64));
        let mut v = vec![0.0; width];
        let mut scale = 1.0;
        let mut b = 0.0;
        let mut order: Vec<usize> = (0..n).collect();
        for epoch in 0..SGD_EPOCHS {
            let lr = SGD_LR / (1.0 + epoch as f64);
            order.shuffle(&mut rng);
            for &i in &order {
                let x = &features[i];
                let y = if targets[i] == class { 1.0 } else { -1.0 };
                let margin = y * (scale * x.dot_dense(&v) + b);
                let g = match loss {
                    LinearLoss::Log => -y / (1.0 + margin.exp()),
                    LinearLoss::Hinge => {
                        if margin < 1.0 {
                            -y
                        } else {
                            0.0
                        }
                    }
                };
                scale *= 1.0 - lr * lambda;
                if g != 0.0 {
                    let step = -lr * g / scale;
                    for &(j, xv) in x.entries() {
                        v[j] += step * xv;
                    }
                    b -= lr * g;
                }
                if scale < 1e-9 {
                    for w in &mut v {
                        *w *= scale;
                    }
                    scale = 1.0;
                }
            }
        }
        weights.push(v.into_iter().map(|w| w * scale).collect());
        bias.push(b);
    }
    ModelParams::Linear { loss, weights, bias }
}

/// Minkowski distance between sparse vectors of equal width.
pub fn minkowski(a: &SparseVector, b: &SparseVector, p: u8) -> f64 {
    let (ea, eb) = (a.entries(), b.entries());
    let (mut i, mut j) = (0, 0);
    let mut acc = 0.0;
    let mut add = |d: f64| {
        acc += if p == 1 { d.abs() } else { d * d };
    };
    while i < ea.len() || j < eb.len() {
        match (ea.get(i), eb.get(j)) {
            (Some(&(ia, va)), Some(&(ib, vb))) if ia == ib => {
                add(va - vb);
                i += 1;
                j += 1;
            }
            (Some(&(ia, va)), Some(&(ib, _))) if ia < ib => {
                add(va);
                i += 1;
            }
            (Some(&(ia, va)), None) => {
                let _ = ia;
                add(va);
                i += 1;
            }
            (_, Some(&(_, vb))) => {
                add(vb);
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    if p == 1 {
        acc
    } else {
        acc.sqrt()
    }
}

/// Index of the maximum; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl TrainedModel {
    /// Per-class scores: log posteriors (NB), margins (linear) or neighbour votes (KNN).
    pub fn scores(&self, x: &SparseVector) -> Result<Vec<f64>> {
        if x.width() != self.width {
            return Err(Error::Dimension {
                expected: self.width,
                actual: x.width(),
            });
        }
        Ok(match &self.params {
            ModelParams::NaiveBayes {
                log_prior,
                log_likelihood,
            } => log_prior
                .iter()
                .zip(log_likelihood)
                .map(|(p, ll)| p + x.dot_dense(ll))
                .collect(),
            ModelParams::Linear { weights, bias, .. } => weights
                .iter()
                .zip(bias)
                .map(|(w, b)| x.dot_dense(w) + b)
                .collect(),
            ModelParams::Knn {
                k,
                weight,
                p,
                points,
                targets,
            } => {
                let mut dist: Vec<(f64, usize)> = points
                    .iter()
                    .enumerate()
                    .map(|(i, q)| (minkowski(x, q, *p), i))
                    .collect();
                dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let nearest = &dist[..(*k).min(dist.len())];
                let mut votes = vec![0.0; self.labels.len()];
                let exact = nearest.iter().any(|(d, _)| *d == 0.0);
                for &(d, i) in nearest {
                    let w = match weight {
                        KnnWeight::Uniform => 1.0,
                        KnnWeight::Distance if exact => f64::from(d == 0.0),
                        KnnWeight::Distance => 1.0 / d,
                    };
                    votes[targets[i]] += w;
                }
                votes
            }
        })
    }

    pub fn predict_index(&self, x: &SparseVector) -> Result<usize> {
        Ok(argmax(&self.scores(x)?))
    }

    pub fn predict(&self, x: &SparseVector) -> Result<String> {
        Ok(self.labels[self.predict_index(x)?].clone())
    }

    pub fn predict_all(&self, rows: &[SparseVector]) -> Result<Vec<String>> {
        rows.iter().map(|r| self.predict(r)).collect()
    }

    /// Class probabilities: softmax of NB log posteriors or of linear margins,
    /// normalised votes for KNN.
    pub fn predict_proba(&self, x: &SparseVector) -> Result<Vec<f64>> {
        let s = self.scores(x)?;
        Ok(match self.params {
            ModelParams::Knn { .. } => {
                let total: f64 = s.iter().sum();
                s.iter().map(|v| v / total).collect()
            }
            _ => softmax(&s),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(rows: &[[f64; 2]]) -> Vec<SparseVector> {
        rows.iter().map(|r| SparseVector::from_dense(r)).collect()
    }

    fn strings(s: &[&str]) -> Vec<String> {
        s.iter().map(|x| x.to_string()).collect()
    }

    fn toy() -> (Vec<SparseVector>, Vec<String>) {
        (
            dense(&[[2.0, 0.1], [3.0, 0.5], [2.5, 0.2], [0.1, 2.0], [0.3, 3.0], [0.2, 2.2]]),
            strings(&["a", "a", "a", "b", "b", "b"]),
        )
    }

    #[test]
    fn separable_training_accuracy() {
        let (x, y) = toy();
        for spec in [
            ClassifierSpec::NaiveBayes,
            ClassifierSpec::LogisticRegression { c: 1.0 },
            ClassifierSpec::LinearSvm { c: 1.0 },
            ClassifierSpec::Knn {
                k: 1,
                weight: KnnWeight::Uniform,
                p: 2,
            },
        ] {
            let m = train_classifier(&spec, &x, &y, 3).unwrap();
            assert_eq!(m.predict_all(&x).unwrap(), y, "{}", spec.label());
        }
    }

    #[test]
    fn single_class_rejected() {
        let x = dense(&[[1.0, 0.0], [0.0, 1.0]]);
        assert!(train_classifier(&ClassifierSpec::NaiveBayes, &x, &strings(&["a", "a"]), 0).is_err());
    }

    #[test]
    fn nan_rejected() {
        let x = vec![SparseVector::from_dense(&[f64::NAN, 0.0]), SparseVector::from_dense(&[0.0, 1.0])];
        assert!(train_classifier(&ClassifierSpec::NaiveBayes, &x, &strings(&["a", "b"]), 0).is_err());
    }

    #[test]
    fn nb_symmetry() {
        let x = dense(&[[1.0, 1.0], [1.0, 1.0]]);
        let m = train_classifier(&ClassifierSpec::NaiveBayes, &x, &strings(&["a", "b"]), 0).unwrap();
        let p = m.predict_proba(&SparseVector::from_dense(&[1.0, 1.0])).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn nb_empty_support_uses_priors() {
        let x = dense(&[[1.0, 0.0], [2.0, 0.0], [0.0, 1.0]]);
        let m = train_classifier(&ClassifierSpec::NaiveBayes, &x, &strings(&["a", "a", "b"]), 0).unwrap();
        let s = m.scores(&SparseVector::empty(2)).unwrap();
        assert!((s[0] - (2.0f64 / 3.0).ln()).abs() < 1e-12);
        assert_eq!(m.predict(&SparseVector::empty(2)).unwrap(), "a");
    }

    #[test]
    fn tie_goes_to_first_label() {
        assert_eq!(argmax(&[1.0, 1.0, 0.5]), 0);
        let x = dense(&[[1.0, 0.0], [0.0, 1.0]]);
        let m = train_classifier(
            &ClassifierSpec::Knn {
                k: 2,
                weight: KnnWeight::Uniform,
                p: 2,
            },
            &x,
            &strings(&["b", "a"]),
            0,
        )
        .unwrap();
        assert_eq!(m.predict(&SparseVector::from_dense(&[0.5, 0.5])).unwrap(), "a");
    }

    #[test]
    fn width_mismatch() {
        let (x, y) = toy();
        let m = train_classifier(&ClassifierSpec::NaiveBayes, &x, &y, 0).unwrap();
        assert!(m.predict(&SparseVector::empty(3)).is_err());
    }

    #[test]
    fn minkowski_norms() {
        let a = SparseVector::from_dense(&[1.0, 0.0, 3.0]);
        let b = SparseVector::from_dense(&[0.0, 4.0, 3.0]);
        assert!((minkowski(&a, &b, 1) - 5.0).abs() < 1e-12);
        assert!((minkowski(&a, &b, 2) - 17f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn grids() {
        assert_eq!(ClassifierSpec::grid("lr").unwrap().len(), 5);
        assert_eq!(ClassifierSpec::grid("knn").unwrap().len(), 16);
        assert!(ClassifierSpec::grid("xgb").is_err());
    }

    #[test]
    fn json_roundtrip() {
        let (x, y) = toy();
        let m = train_classifier(&ClassifierSpec::LogisticRegression { c: 0.1 }, &x, &y, 5).unwrap();
        let again = TrainedModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m.predict_all(&x).unwrap(), again.predict_all(&x).unwrap());
    }

    #[test]
    fn deterministic_sgd() {
        let (x, y) = toy();
        let spec = ClassifierSpec::LinearSvm { c: 10.0 };
        let a = train_classifier(&spec, &x, &y, 9).unwrap();
        let b = train_classifier(&spec, &x, &y, 9).unwrap();
        assert_eq!(a, b);
    }
}
