use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureModel, NlpConfig, SparseVector};
use crate::models::{train_classifier, ClassifierSpec, TrainedModel};
use crate::reduce::{lsa_fit, LsaModel};

pub const POSITIVE: &str = "positive";
pub const NEGATIVE: &str = "negative";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedPost {
    pub id: String,
    pub vector: Vec<f64>,
}

impl EmbeddedPost {
    pub fn new(id: impl Into<String>, vector: Vec<f64>) -> Self {
        EmbeddedPost { id: id.into(), vector }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PuConfig {
    pub alpha: f64,
    /// Name of the embedding the vectors came from, kept with the model.
    pub embedding: String,
    pub classifier: ClassifierSpec,
}

impl Default for PuConfig {
    fn default() -> Self {
        PuConfig {
            alpha: 1.0,
            embedding: "lsa-tfidf".into(),
            classifier: ClassifierSpec::LogisticRegression { c: 1.0 },
        }
    }
}

impl PuConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(Error::Config(format!("alpha = {} must be finite and >= 0", self.alpha)));
        }
        self.classifier.validate()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// 1 − cosine similarity, in [0, 2].
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::invalid("cosine distance with a zero vector"));
    }
    let cos = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb);
    Ok((1.0 - cos).clamp(0.0, 2.0))
}

/// Reliable-negative test: closer to the unlabeled centroid than `alpha`
/// times the distance to the positive one.
pub fn is_reliable_negative(x: &[f64], centroid_p: &[f64], centroid_u: &[f64], alpha: f64) -> Result<bool> {
    Ok(cosine_distance(x, centroid_u)? < alpha * cosine_distance(x, centroid_p)?)
}

pub fn mean_vector(rows: &[&[f64]]) -> Result<Vec<f64>> {
    let first = rows.first().ok_or_else(|| Error::invalid("mean of no vectors"))?;
    update_centroid(&vec![0.0; first.len()], 0, rows)
}

/// Running mean: folds `new` into a centroid of `n` vectors.
pub fn update_centroid(old: &[f64], n: usize, new: &[&[f64]]) -> Result<Vec<f64>> {
    let mut sum: Vec<f64> = old.iter().map(|v| v * n as f64).collect();
    for v in new {
        if v.len() != old.len() {
            return Err(Error::Dimension {
                expected: old.len(),
                actual: v.len(),
            });
        }
        for (s, x) in sum.iter_mut().zip(v.iter()) {
            *s += x;
        }
    }
    let total = n + new.len();
    if total == 0 {
        return Ok(old.to_vec());
    }
    Ok(sum.into_iter().map(|s| s / total as f64).collect())
}

fn check_nonzero(set: &[EmbeddedPost], name: &str) -> Result<()> {
    if set.is_empty() {
        return Err(Error::invalid(format!("{name} set is empty")));
    }
    let dim = set[0].vector.len();
    for p in set {
        if p.vector.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                actual: p.vector.len(),
            });
        }
        if norm(&p.vector) == 0.0 {
            return Err(Error::invalid(format!("post {} has a zero-norm embedding", p.id)));
        }
    }
    Ok(())
}

/// Indices into `u` of the reliable negatives. Only unlabeled posts are
/// eligible; positives never become negatives.
pub fn reliable_negatives(p: &[EmbeddedPost], u: &[EmbeddedPost], alpha: f64) -> Result<Vec<usize>> {
    check_nonzero(p, "positive")?;
    check_nonzero(u, "unlabeled")?;
    let cp = mean_vector(&p.iter().map(|e| e.vector.as_slice()).collect::<Vec<_>>())?;
    let cu = mean_vector(&u.iter().map(|e| e.vector.as_slice()).collect::<Vec<_>>())?;
    if norm(&cp) == 0.0 || norm(&cu) == 0.0 {
        return Err(Error::invalid("a centroid has zero norm"));
    }
    let mut out = Vec::new();
    for (i, x) in u.iter().enumerate() {
        if is_reliable_negative(&x.vector, &cp, &cu, alpha)? {
            out.push(i);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PuModel {
    pub alpha: f64,
    pub embedding: String,
    pub reliable_negative_ids: Vec<String>,
    pub model: TrainedModel,
}

impl PuModel {
    pub fn is_positive(&self, vector: &[f64]) -> Result<bool> {
        Ok(self.model.predict(&SparseVector::from_dense(vector))? == POSITIVE)
    }
}

/// Two-stage PU learning: reliable negatives from `u`, then a binary
/// classifier of `p` against them.
pub fn pu_train(p: &[EmbeddedPost], u: &[EmbeddedPost], config: &PuConfig, seed: u64) -> Result<PuModel> {
    config.validate()?;
    let rn = reliable_negatives(p, u, config.alpha)?;
    if rn.is_empty() {
        return Err(Error::invalid(format!(
            "no reliable negatives at alpha = {}; try a larger alpha",
            config.alpha
        )));
    }
    let mut rows = Vec::with_capacity(p.len() + rn.len());
    let mut labels = Vec::with_capacity(rows.capacity());
    for e in p {
        rows.push(SparseVector::from_dense(&e.vector));
        labels.push(POSITIVE.to_string());
    }
    for &i in &rn {
        rows.push(SparseVector::from_dense(&u[i].vector));
        labels.push(NEGATIVE.to_string());
    }
    let model = train_classifier(&config.classifier, &rows, &labels, seed)?;
    Ok(PuModel {
        alpha: config.alpha,
        embedding: config.embedding.clone(),
        reliable_negative_ids: rn.iter().map(|&i| u[i].id.clone()).collect(),
        model,
    })
}

/// Tf-idf word features reduced by LSA, the default post embedding.
#[derive(Clone, Debug, PartialEq)]
pub struct LsaEmbedder {
    pub features: FeatureModel,
    pub lsa: LsaModel,
}

impl LsaEmbedder {
    /// `k` is capped at the largest rank the data allows.
    pub fn fit(docs: &[Vec<String>], k: usize, seed: u64) -> Result<Self> {
        let features = FeatureModel::fit_word(docs, &NlpConfig::table(2)?)?;
        let rows = features.transform_all(docs);
        let k = k.min(rows.len()).min(features.width());
        let lsa = lsa_fit(&rows, k, seed)?;
        Ok(LsaEmbedder { features, lsa })
    }

    pub fn embed(&self, tokens: &[String]) -> Result<Vec<f64>> {
        self.lsa.transform(&self.features.transform(tokens))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{gaussian, seeded};

    #[test]
    fn distance_range() {
        assert!(cosine_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap() < 1e-12);
        assert!((cosine_distance(&[1.0, 2.0], &[-1.0, -2.0]).unwrap() - 2.0).abs() < 1e-12);
        assert!(cosine_distance(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn rn_condition() {
        let (cp, cu) = ([1.0, 0.0], [-1.0, 0.0]);
        assert!(is_reliable_negative(&[-0.9, 0.1], &cp, &cu, 1.0).unwrap());
        assert!(!is_reliable_negative(&[0.9, 0.1], &cp, &cu, 1.0).unwrap());
        assert!(!is_reliable_negative(&[-0.9, 0.1], &cp, &cu, 0.0).unwrap());
        assert!(is_reliable_negative(&cu, &cp, &cu, 0.5).unwrap());
    }

    #[test]
    fn centroid_update() {
        let c = update_centroid(&[1.0, 1.0], 2, &[&[4.0, 4.0]]).unwrap();
        assert_eq!(c, [2.0, 2.0]);
        assert_eq!(update_centroid(&[1.0, 1.0], 2, &[]).unwrap(), [1.0, 1.0]);
        assert!(update_centroid(&[1.0], 1, &[&[1.0, 2.0]]).is_err());
    }

    #[test]
    fn zero_vector_named() {
        let p = [EmbeddedPost::new("ok", vec![1.0, 0.0])];
        let u = [EmbeddedPost::new("bad-7", vec![0.0, 0.0])];
        let err = reliable_negatives(&p, &u, 1.0).unwrap_err().to_string();
        assert!(err.contains("bad-7"));
    }

    #[test]
    fn empty_rn_is_an_error() {
        let p = [EmbeddedPost::new("p", vec![1.0, 0.1])];
        let u = [EmbeddedPost::new("u", vec![-1.0, 0.1])];
        let cfg = PuConfig {
            alpha: 0.0,
            ..Default::default()
        };
        assert!(pu_train(&p, &u, &cfg, 0).unwrap_err().to_string().contains("larger alpha"));
    }

    #[test]
    fn lsa_embedder_dims() {
        let mut rng = seeded(1);
        let docs: Vec<Vec<String>> = (0..12)
            .map(|i| {
                let extra = if gaussian(&mut rng) > 0.0 { "heap" } else { "stack" };
                vec![format!("w{}", i % 4), "overflow".into(), extra.into()]
            })
            .collect();
        let e = LsaEmbedder::fit(&docs, 50, 3).unwrap();
        assert_eq!(e.lsa.k, e.features.width().min(12));
        assert_eq!(e.embed(&docs[0]).unwrap().len(), e.lsa.k);
    }
}
