//! Latent semantic analysis and averaged token embeddings.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::SparseVector;
use crate::sampling::{gaussian, seeded};

const OVERSAMPLING: usize = 8;
const POWER_ITERATIONS: usize = 10;

/// Truncated SVD projection onto the top `k` right singular vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LsaModel {
    pub k: usize,
    pub width: usize,
    /// `k` rows of length `width`; row `j` is the j-th right singular vector.
    pub components: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
}

fn check_rows(rows: &[SparseVector]) -> Result<usize> {
    let first = rows
        .first()
        .ok_or_else(|| Error::invalid("LSA needs at least one row"))?;
    let width = first.width();
    if width == 0 {
        return Err(Error::invalid("LSA needs at least one column"));
    }
    for r in rows {
        if r.width() != width {
            return Err(Error::Dimension {
                expected: width,
                actual: r.width(),
            });
        }
    }
    Ok(width)
}

/// A · M for sparse A (m × n) and dense M (n × l).
fn sparse_mul(rows: &[SparseVector], m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rows.len(), m.ncols());
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row.entries() {
            for c in 0..m.ncols() {
                out[(i, c)] += v * m[(j, c)];
            }
        }
    }
    out
}

/// Aᵀ · M for sparse A (m × n) and dense M (m × l).
fn sparse_tmul(rows: &[SparseVector], width: usize, m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(width, m.ncols());
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row.entries() {
            for c in 0..m.ncols() {
                out[(j, c)] += v * m[(i, c)];
            }
        }
    }
    out
}

fn orthonormal_basis(y: DMatrix<f64>) -> DMatrix<f64> {
    y.qr().q()
}

/// Fits a rank-`k` LSA model with a seeded randomized range finder.
pub fn lsa_fit(rows: &[SparseVector], k: usize, seed: u64) -> Result<LsaModel> {
    let width = check_rows(rows)?;
    let limit = rows.len().min(width);
    if k == 0 || k > limit {
        return Err(Error::invalid(format!(
            "k = {k} must lie in 1..={limit} for a {}x{width} matrix",
            rows.len()
        )));
    }
    let l = (k + OVERSAMPLING).min(limit);
    let mut rng = seeded(seed);
    let omega = DMatrix::from_fn(width, l, |_, _| gaussian(&mut rng));
    let mut q = orthonormal_basis(sparse_mul(rows, &omega));
    for _ in 0..POWER_ITERATIONS {
        let z = orthonormal_basis(sparse_tmul(rows, width, &q));
        q = orthonormal_basis(sparse_mul(rows, &z));
    }
    // B = Qᵀ A, computed as (Aᵀ Q)ᵀ
    let b = sparse_tmul(rows, width, &q).transpose();
    let svd = b.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let components = (0..k)
        .map(|j| v_t.row(j).iter().copied().collect())
        .collect();
    Ok(LsaModel {
        k,
        width,
        components,
        singular_values: svd.singular_values.iter().take(k).copied().collect(),
    })
}

impl LsaModel {
    /// x · V_k.
    pub fn transform(&self, x: &SparseVector) -> Result<Vec<f64>> {
        if x.width() != self.width {
            return Err(Error::Dimension {
                expected: self.width,
                actual: x.width(),
            });
        }
        Ok(self.components.iter().map(|c| x.dot_dense(c)).collect())
    }

    pub fn transform_all(&self, rows: &[SparseVector]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.transform(r)).collect()
    }

    /// Maps a projected vector back into the input space.
    pub fn inverse(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.width];
        for (c, &w) in self.components.iter().zip(z) {
            for (o, v) in out.iter_mut().zip(c) {
                *o += w * v;
            }
        }
        out
    }

    /// Frobenius norm of A − A V_k V_kᵀ.
    pub fn reconstruction_error(&self, rows: &[SparseVector]) -> Result<f64> {
        let mut total = 0.0;
        for r in rows {
            let back = self.inverse(&self.transform(r)?);
            let dense = r.to_dense();
            total += dense
                .iter()
                .zip(&back)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        }
        Ok(total.sqrt())
    }
}

pub fn lsa_transform(model: &LsaModel, x: &SparseVector) -> Result<Vec<f64>> {
    model.transform(x)
}

/// Fixed-length token vectors loaded from a text file.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("embedding entries must be finite"));
        }
        self.vectors.insert(token.into(), vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Parses lines of the form `token v1 v2 ... vL`; blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut table: Option<EmbeddingTable> = None;
        for (n, line) in text.lines().enumerate() {
            let mut parts = line.split_whitespace();
            let Some(token) = parts.next() else { continue };
            let values = parts
                .map(|p| p.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    line: n + 1,
                    message: e.to_string(),
                })?;
            if values.is_empty() {
                return Err(Error::Parse {
                    line: n + 1,
                    message: format!("token `{token}` has no vector"),
                });
            }
            let t = table.get_or_insert_with(|| EmbeddingTable::new(values.len()));
            t.insert(token, values).map_err(|e| Error::Parse {
                line: n + 1,
                message: e.to_string(),
            })?;
        }
        table.ok_or_else(|| Error::invalid("embedding file is empty"))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Mean vector of the in-table tokens; zero vector when none are known.
pub fn average_embedding(table: &EmbeddingTable, tokens: &[String]) -> Vec<f64> {
    let mut sum = vec![0.0; table.dim];
    let mut n = 0usize;
    for t in tokens {
        if let Some(v) = table.get(t) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            n += 1;
        }
    }
    if n > 0 {
        for s in &mut sum {
            *s /= n as f64;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(n: usize) -> Vec<SparseVector> {
        (0..n)
            .map(|i| SparseVector::from_pairs(n, [(i, 1.0)]).unwrap())
            .collect()
    }

    #[test]
    fn identity_singular_values() {
        let m = lsa_fit(&identity(3), 3, 1).unwrap();
        for s in &m.singular_values {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_one_exact() {
        let rows: Vec<_> = (1..=5)
            .map(|i| SparseVector::from_dense(&[i as f64, 2.0 * i as f64, -(i as f64)]))
            .collect();
        let m = lsa_fit(&rows, 1, 7).unwrap();
        assert!(m.reconstruction_error(&rows).unwrap() < 1e-9);
    }

    #[test]
    fn bad_k() {
        assert!(lsa_fit(&identity(3), 4, 0).is_err());
        assert!(lsa_fit(&identity(3), 0, 0).is_err());
        assert!(lsa_fit(&[], 1, 0).is_err());
    }

    #[test]
    fn transform_basics() {
        let m = lsa_fit(&identity(4), 2, 3).unwrap();
        assert_eq!(m.transform(&SparseVector::empty(4)).unwrap(), [0.0, 0.0]);
        let e1 = SparseVector::from_pairs(4, [(1, 1.0)]).unwrap();
        let z = m.transform(&e1).unwrap();
        assert_eq!(z, [m.components[0][1], m.components[1][1]]);
        assert!(m.transform(&SparseVector::empty(5)).is_err());
    }

    #[test]
    fn averaging() {
        let mut t = EmbeddingTable::new(2);
        t.insert("a", vec![1.0, 0.0]).unwrap();
        t.insert("b", vec![0.0, 1.0]).unwrap();
        let toks = |s: &[&str]| s.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        assert_eq!(average_embedding(&t, &toks(&["a", "b"])), [0.5, 0.5]);
        assert_eq!(average_embedding(&t, &toks(&["zz"])), [0.0, 0.0]);
        assert_eq!(average_embedding(&t, &toks(&["a"])), [1.0, 0.0]);
    }

    #[test]
    fn parse_table() {
        let t = EmbeddingTable::parse("a 1 2\n\nb 3 4\n").unwrap();
        assert_eq!(t.dim(), 2);
        assert_eq!(t.get("b"), Some(&[3.0, 4.0][..]));
        assert!(EmbeddingTable::parse("a 1 2\nb 3\n").is_err());
        assert!(EmbeddingTable::parse("a x\n").is_err());
    }
}
