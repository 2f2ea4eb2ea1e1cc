use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Labels;
use crate::error::{Error, Result};
use crate::sampling::seeded;

const MAX_ITERATIONS: usize = 300;
const TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub centroids: Vec<Vec<f64>>,
    /// Inertia after each assignment step.
    pub inertia_history: Vec<f64>,
    pub seed: u64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KMeansModel {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn inertia(&self) -> f64 {
        self.inertia_history.last().copied().unwrap_or(0.0)
    }

    /// Nearest centroid by Euclidean distance; the lowest index wins ties.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.centroids.iter().enumerate() {
            let d = sq_dist(x, c);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }
}

/// k-means++ seeding followed by Lloyd iterations.
pub fn kmeans_fit(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeansModel> {
    if k == 0 || k > points.len() {
        return Err(Error::invalid(format!(
            "k = {k} must lie in 1..={}",
            points.len()
        )));
    }
    let dim = points[0].len();
    if let Some(bad) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            actual: bad.len(),
        });
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("k-means input has a non-finite value"));
    }
    let mut rng = seeded(seed);
    let mut chosen = vec![rng.gen_range(0..points.len())];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 {
                    if target < d {
                        pick = Some(i);
                        break;
                    }
                    target -= d;
                }
            }
            // rounding can run past the end; take the last positive weight
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).expect("total > 0"))
        } else {
            (0..points.len())
                .find(|i| !chosen.contains(i))
                .expect("k <= number of points")
        };
        chosen.push(next);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &points[next]));
        }
    }
    let mut model = KMeansModel {
        centroids: chosen.iter().map(|&i| points[i].clone()).collect(),
        inertia_history: Vec::new(),
        seed,
    };
    let mut assignment = vec![0usize; points.len()];
    for _ in 0..MAX_ITERATIONS {
        let mut inertia = 0.0;
        for (a, p) in assignment.iter_mut().zip(points) {
            *a = model.nearest(p);
            inertia += sq_dist(p, &model.centroids[*a]);
        }
        let converged = model
            .inertia_history
            .last()
            .is_some_and(|prev| (prev - inertia).abs() < TOLERANCE);
        model.inertia_history.push(inertia);
        if converged {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&a, p) in assignment.iter().zip(points) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            // an empty cluster keeps its previous centroid
            if counts[c] > 0 {
                model.centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    Ok(model)
}

/// Clustering baseline: each cluster predicts the modal training labels of its members.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UcvaModel {
    pub kmeans: KMeansModel,
    pub tasks: Vec<String>,
    /// Per cluster, the modal class of each task; `None` for clusters without members.
    pub cluster_modes: Vec<Option<Labels>>,
    pub global_mode: Labels,
}

fn modes<'a>(tasks: &[String], members: impl Iterator<Item = &'a Labels> + Clone) -> Labels {
    tasks
        .iter()
        .filter_map(|task| {
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for labels in members.clone() {
                if let Some(c) = labels.get(task) {
                    *counts.entry(c.as_str()).or_default() += 1;
                }
            }
            // BTreeMap iterates lexicographically; keep the first maximum
            let mut best: Option<(&str, usize)> = None;
            for (c, n) in counts {
                if best.map_or(true, |(_, b)| n > b) {
                    best = Some((c, n));
                }
            }
            best.map(|(c, _)| (task.clone(), c.to_string()))
        })
        .collect()
}

impl UcvaModel {
    pub fn fit(kmeans: KMeansModel, points: &[Vec<f64>], labels: &[Labels], tasks: &[String]) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::Dimension {
                expected: points.len(),
                actual: labels.len(),
            });
        }
        let assignment: Vec<usize> = points.iter().map(|p| kmeans.nearest(p)).collect();
        let cluster_modes = (0..kmeans.k())
            .map(|c| {
                let members = assignment
                    .iter()
                    .zip(labels)
                    .filter(move |(a, _)| **a == c)
                    .map(|(_, l)| l);
                if members.clone().next().is_none() {
                    None
                } else {
                    Some(modes(tasks, members))
                }
            })
            .collect();
        Ok(UcvaModel {
            global_mode: modes(tasks, labels.iter()),
            kmeans,
            tasks: tasks.to_vec(),
            cluster_modes,
        })
    }

    pub fn assign(&self, x: &[f64]) -> Labels {
        let cluster = self.kmeans.nearest(x);
        let mut out = self.global_mode.clone();
        if let Some(m) = &self.cluster_modes[cluster] {
            out.extend(m.iter().map(|(k, v)| (k.clone(), v.clone())));
        }
        out
    }
}

pub fn ucva_assign(model: &UcvaModel, x: &[f64]) -> Labels {
    model.assign(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> Vec<Vec<f64>> {
        let mut pts = Vec::new();
        for i in 0..10 {
            let d = i as f64 * 0.01;
            pts.push(vec![0.0 + d, 0.0 - d]);
            pts.push(vec![10.0 - d, 10.0 + d]);
        }
        pts
    }

    #[test]
    fn two_blobs() {
        let m = kmeans_fit(&blobs(), 2, 4).unwrap();
        let mut c = m.centroids.clone();
        c.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert!((c[0][0] - 0.045).abs() < 0.1 && (c[1][0] - 9.955).abs() < 0.1);
    }

    #[test]
    fn k_equals_rows() {
        let pts = vec![vec![0.0], vec![1.0], vec![5.0]];
        let m = kmeans_fit(&pts, 3, 1).unwrap();
        assert_eq!(m.inertia(), 0.0);
    }

    #[test]
    fn duplicates_single_cluster() {
        let pts = vec![vec![2.0, 2.0]; 4];
        let m = kmeans_fit(&pts, 1, 1).unwrap();
        assert_eq!(m.centroids[0], [2.0, 2.0]);
        assert!(kmeans_fit(&pts, 5, 1).is_err());
    }

    #[test]
    fn inertia_non_increasing() {
        let pts: Vec<Vec<f64>> = (0..50).map(|i| vec![(i * 7 % 13) as f64, (i * 3 % 11) as f64]).collect();
        let m = kmeans_fit(&pts, 4, 2).unwrap();
        for w in m.inertia_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn ucva_modes_and_fallback() {
        let tasks = vec!["severity".to_string()];
        let pts = vec![vec![0.0], vec![0.1], vec![10.0]];
        let lab = |s: &str| Labels::from([("severity".to_string(), s.to_string())]);
        let labels = vec![lab("High"), lab("Low"), lab("Low")];
        let km = KMeansModel {
            centroids: vec![vec![0.0], vec![10.0], vec![100.0]],
            inertia_history: vec![],
            seed: 0,
        };
        let m = UcvaModel::fit(km, &pts, &labels, &tasks).unwrap();
        // cluster 0 has a High/Low tie -> lexicographically first
        assert_eq!(m.assign(&[0.0])["severity"], "High");
        assert_eq!(m.assign(&[10.0])["severity"], "Low");
        // cluster 2 is empty -> global mode
        assert_eq!(m.assign(&[100.0])["severity"], "Low");
        // equidistant -> lowest-index cluster
        assert_eq!(m.assign(&[5.0])["severity"], "High");
    }
}
