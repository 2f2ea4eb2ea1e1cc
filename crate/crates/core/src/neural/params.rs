use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::AcGruConfig;
use crate::error::{Error, Result};
use crate::sampling::{seeded, SeededRng};

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    fn uniform(rows: usize, cols: usize, limit: f64, rng: &mut SeededRng) -> Self {
        let data = (0..rows * cols).map(|_| rng.gen_range(-limit..=limit)).collect();
        Mat { rows, cols, data }
    }

    fn glorot(rows: usize, cols: usize, fan_in: usize, fan_out: usize, rng: &mut SeededRng) -> Self {
        Mat::uniform(rows, cols, (6.0 / (fan_in + fan_out) as f64).sqrt(), rng)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `self · x`
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `out += selfᵀ · y`
    pub fn add_matvec_t(&self, y: &[f64], out: &mut [f64]) {
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(self.row(i)) {
                *o += w * yi;
            }
        }
    }

    /// `self += y · xᵀ`
    pub fn add_outer(&mut self, y: &[f64], x: &[f64]) {
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            for (o, xj) in self.row_mut(i).iter_mut().zip(x) {
                *o += yi * xj;
            }
        }
    }

    pub fn add_row(&mut self, y: &[f64]) {
        for (o, v) in self.data.iter_mut().zip(y) {
            *o += v;
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
}

/// One filter size: convolution, GRU and attention.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub size: usize,
    /// `F × (K·L)`; a window is the K embedding rows laid end to end.
    pub conv_w: Mat,
    pub conv_b: Mat,
    pub w_z: Mat,
    pub w_r: Mat,
    pub w_h: Mat,
    pub u_z: Mat,
    pub u_r: Mat,
    pub u_h: Mat,
    pub b_z: Mat,
    pub b_r: Mat,
    pub b_h: Mat,
    pub w_a: Mat,
    pub b_a: Mat,
    /// Row vector scoring each time step.
    pub w_s: Mat,
}

/// Task-specific block and softmax layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Head {
    pub w_t: Mat,
    pub b_t: Mat,
    pub w_p: Mat,
    pub b_p: Mat,
}

/// Everything except the embedding table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub branches: Vec<Branch>,
    pub heads: Vec<Head>,
}

const BRANCH_BLOCKS: [&str; 14] = [
    "conv_w", "conv_b", "w_z", "w_r", "w_h", "u_z", "u_r", "u_h", "b_z", "b_r", "b_h", "w_a", "b_a", "w_s",
];
const HEAD_BLOCKS: [&str; 4] = ["w_t", "b_t", "w_p", "b_p"];

impl Branch {
    fn blocks(&self) -> [&Mat; 14] {
        [
            &self.conv_w, &self.conv_b, &self.w_z, &self.w_r, &self.w_h, &self.u_z, &self.u_r, &self.u_h,
            &self.b_z, &self.b_r, &self.b_h, &self.w_a, &self.b_a, &self.w_s,
        ]
    }

    fn blocks_mut(&mut self) -> [&mut Mat; 14] {
        [
            &mut self.conv_w, &mut self.conv_b, &mut self.w_z, &mut self.w_r, &mut self.w_h, &mut self.u_z,
            &mut self.u_r, &mut self.u_h, &mut self.b_z, &mut self.b_r, &mut self.b_h, &mut self.w_a,
            &mut self.b_a, &mut self.w_s,
        ]
    }
}

impl Head {
    fn blocks(&self) -> [&Mat; 4] {
        [&self.w_t, &self.b_t, &self.w_p, &self.b_p]
    }

    fn blocks_mut(&mut self) -> [&mut Mat; 4] {
        [&mut self.w_t, &mut self.b_t, &mut self.w_p, &mut self.b_p]
    }
}

impl Network {
    pub fn zeros(config: &AcGruConfig) -> Self {
        Network::build(config, |r, c, _, _| Mat::zeros(r, c))
    }

    fn build(config: &AcGruConfig, mut make: impl FnMut(usize, usize, usize, usize) -> Mat) -> Self {
        let (l, f, h, a, t) = (
            config.embed_dim,
            config.filters,
            config.gru_hidden,
            config.attention_hidden,
            config.task_hidden,
        );
        let branches = config
            .filter_sizes
            .iter()
            .map(|&k| Branch {
                size: k,
                conv_w: make(f, k * l, k * l, k * f),
                conv_b: Mat::zeros(1, f),
                w_z: make(h, f, f, h),
                w_r: make(h, f, f, h),
                w_h: make(h, f, f, h),
                u_z: make(h, h, h, h),
                u_r: make(h, h, h, h),
                u_h: make(h, h, h, h),
                b_z: Mat::zeros(1, h),
                b_r: Mat::zeros(1, h),
                b_h: Mat::zeros(1, h),
                w_a: make(a, h, h, a),
                b_a: Mat::zeros(1, a),
                w_s: make(1, a, a, 1),
            })
            .collect();
        let d = config.commit_width();
        let heads = config
            .tasks
            .iter()
            .map(|task| {
                let c = task.labels.len();
                Head {
                    w_t: make(t, d, d, t),
                    b_t: Mat::zeros(1, t),
                    w_p: make(c, t, t, c),
                    b_p: Mat::zeros(1, c),
                }
            })
            .collect();
        Network { branches, heads }
    }

    /// Named blocks in a fixed order.
    pub fn blocks(&self) -> Vec<(String, &Mat)> {
        let mut out = Vec::new();
        for b in &self.branches {
            for (name, m) in BRANCH_BLOCKS.iter().zip(b.blocks()) {
                out.push((format!("branch{}.{name}", b.size), m));
            }
        }
        for (i, h) in self.heads.iter().enumerate() {
            for (name, m) in HEAD_BLOCKS.iter().zip(h.blocks()) {
                out.push((format!("task{i}.{name}"), m));
            }
        }
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut Mat> {
        let mut out: Vec<&mut Mat> = Vec::new();
        for b in &mut self.branches {
            out.extend(b.blocks_mut());
        }
        for h in &mut self.heads {
            out.extend(h.blocks_mut());
        }
        out
    }

    /// `self += other`, block by block.
    pub fn accumulate(&mut self, other: &Network) {
        for (dst, (_, src)) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (a, b) in dst.data.iter_mut().zip(&src.data) {
                *a += b;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for m in self.blocks_mut() {
            m.data.iter_mut().for_each(|v| *v *= factor);
        }
    }
}

/// Model weights. `version` increases with every optimizer step so a
/// forward cache from older weights can be detected.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameters {
    pub embedding: Mat,
    pub net: Network,
    pub version: u64,
}

pub const BUNDLE_FORMAT: &str = "acgru-parameters";
pub const BUNDLE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Bundle {
    format: String,
    format_version: u32,
    config: AcGruConfig,
    arrays: BTreeMap<String, Mat>,
}

impl Parameters {
    /// Embedding uniform in ±0.05, other weights Glorot-uniform, biases zero.
    pub fn init(config: &AcGruConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = seeded(config.seed);
        let embedding = Mat::uniform(config.vocab_size, config.embed_dim, 0.05, &mut rng);
        let net = Network::build(config, |r, c, fi, fo| Mat::glorot(r, c, fi, fo, &mut rng));
        Ok(Parameters {
            embedding,
            net,
            version: 0,
        })
    }

    pub fn zeros(config: &AcGruConfig) -> Self {
        Parameters {
            embedding: Mat::zeros(config.vocab_size, config.embed_dim),
            net: Network::zeros(config),
            version: 0,
        }
    }

    pub fn named_arrays(&self) -> Vec<(String, &Mat)> {
        let mut out = vec![("embedding".to_string(), &self.embedding)];
        out.extend(self.net.blocks());
        out
    }

    pub fn to_json(&self, config: &AcGruConfig) -> Result<String> {
        let bundle = Bundle {
            format: BUNDLE_FORMAT.into(),
            format_version: BUNDLE_VERSION,
            config: config.clone(),
            arrays: self
                .named_arrays()
                .into_iter()
                .map(|(n, m)| (n, m.clone()))
                .collect(),
        };
        Ok(serde_json::to_string(&bundle)?)
    }

    pub fn from_json(text: &str) -> Result<(AcGruConfig, Self)> {
        let mut bundle: Bundle = serde_json::from_str(text)?;
        if bundle.format != BUNDLE_FORMAT || bundle.format_version != BUNDLE_VERSION {
            return Err(Error::Structural(format!(
                "unsupported parameter bundle {} v{}",
                bundle.format, bundle.format_version
            )));
        }
        let config = bundle.config;
        config.validate()?;
        let mut params = Parameters::zeros(&config);
        let names: Vec<String> = params.named_arrays().into_iter().map(|(n, _)| n).collect();
        let mut slots: Vec<&mut Mat> = vec![&mut params.embedding];
        slots.extend(params.net.blocks_mut());
        for (name, slot) in names.iter().zip(slots) {
            let m = bundle
                .arrays
                .remove(name)
                .ok_or_else(|| Error::Structural(format!("parameter bundle lacks `{name}`")))?;
            if m.shape() != slot.shape() || m.data.len() != m.rows * m.cols {
                return Err(Error::Structural(format!(
                    "`{name}` has shape {:?}, expected {:?}",
                    m.shape(),
                    slot.shape()
                )));
            }
            *slot = m;
        }
        if let Some(extra) = bundle.arrays.keys().next() {
            return Err(Error::Structural(format!("unexpected array `{extra}` in bundle")));
        }
        Ok((config, params))
    }

    pub fn save(&self, config: &AcGruConfig, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json(config)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(AcGruConfig, Self)> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Parameters::from_json(&text)
    }
}
