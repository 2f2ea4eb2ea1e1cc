use std::fmt::Write as _;

use log::{debug, info};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::net::{backward, forward, multitask_loss, Gradients};
use super::params::{Mat, Network, Parameters};
use super::{AcGruConfig, CommitInput};
use crate::error::{Error, Result};
use crate::eval::compute_metrics;
use crate::models::argmax;
use crate::sampling::{derive_seed, seeded};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;
/// Samples whose gradients are computed concurrently before being summed in order.
const GROUP: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub t: u64,
    m_emb: Mat,
    v_emb: Mat,
    touched: Vec<bool>,
    m: Network,
    v: Network,
}

impl AdamState {
    pub fn new(params: &Parameters) -> Self {
        let mut m = params.net.clone();
        for b in m.blocks_mut() {
            b.data.iter_mut().for_each(|x| *x = 0.0);
        }
        AdamState {
            t: 0,
            m_emb: Mat::zeros(params.embedding.rows, params.embedding.cols),
            v_emb: Mat::zeros(params.embedding.rows, params.embedding.cols),
            touched: vec![false; params.embedding.rows],
            v: m.clone(),
            m,
        }
    }
}

fn adam_update(theta: &mut [f64], g: Option<&[f64]>, m: &mut [f64], v: &mut [f64], lr: f64, c1: f64, c2: f64) {
    for i in 0..theta.len() {
        let gi = g.map_or(0.0, |g| g[i]);
        m[i] = BETA1 * m[i] + (1.0 - BETA1) * gi;
        v[i] = BETA2 * v[i] + (1.0 - BETA2) * gi * gi;
        theta[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + EPSILON);
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(params: &mut Parameters, grads: &Gradients, state: &mut AdamState, lr: f64) {
    state.t += 1;
    let c1 = 1.0 - BETA1.powi(state.t as i32);
    let c2 = 1.0 - BETA2.powi(state.t as i32);
    for row in grads.embedding.keys() {
        state.touched[*row] = true;
    }
    let cols = params.embedding.cols;
    for row in 0..params.embedding.rows {
        if !state.touched[row] {
            continue;
        }
        let range = row * cols..(row + 1) * cols;
        adam_update(
            &mut params.embedding.data[range.clone()],
            grads.embedding.get(&row).map(Vec::as_slice),
            &mut state.m_emb.data[range.clone()],
            &mut state.v_emb.data[range],
            lr,
            c1,
            c2,
        );
    }
    let ms = state.m.blocks_mut();
    let vs = state.v.blocks_mut();
    let gs = grads.net.blocks();
    for (((theta, m), v), (_, g)) in params.net.blocks_mut().into_iter().zip(ms).zip(vs).zip(gs) {
        adam_update(&mut theta.data, Some(&g.data), &mut m.data, &mut v.data, lr, c1, c2);
    }
    params.version += 1;
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub input: CommitInput,
    /// Gold class index per task.
    pub gold: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mcc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    /// Weights of the epoch with the best validation MCC.
    pub params: Parameters,
    pub best_epoch: usize,
    pub history: Vec<EpochStats>,
}

impl TrainOutcome {
    pub fn history_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_mcc\n");
        for e in &self.history {
            let mcc = e.val_mcc.map_or(String::new(), |v| format!("{v:.6}"));
            let _ = writeln!(out, "{},{:.6},{mcc}", e.epoch, e.train_loss);
        }
        out
    }
}

/// Most probable class per task with the probabilities; dropout off.
pub fn predict_acgru(params: &Parameters, input: &CommitInput) -> Result<Vec<(usize, Vec<f64>)>> {
    let cache = forward(params, input, None)?;
    Ok(cache.probs.into_iter().map(|p| (argmax(&p), p)).collect())
}

/// Mean over tasks of the MCC on `samples`.
fn mean_mcc(params: &Parameters, samples: &[Sample]) -> Result<f64> {
    let preds: Vec<Vec<(usize, Vec<f64>)>> = samples
        .par_iter()
        .map(|s| predict_acgru(params, &s.input))
        .collect::<Result<_>>()?;
    let n_tasks = params.net.heads.len();
    let mut total = 0.0;
    for t in 0..n_tasks {
        let gold: Vec<String> = samples.iter().map(|s| s.gold[t].to_string()).collect();
        let pred: Vec<String> = preds.iter().map(|p| p[t].0.to_string()).collect();
        total += compute_metrics(&gold, &pred)?.mcc;
    }
    Ok(total / n_tasks as f64)
}

fn sample_gradient(params: &Parameters, sample: &Sample, rate: f64, seed: u64) -> Result<(f64, Gradients)> {
    let mut rng = seeded(seed);
    let cache = forward(params, &sample.input, Some((rate, &mut rng)))?;
    let loss = multitask_loss(&cache.probs, &sample.gold)?;
    Ok((loss, backward(params, &cache, &sample.gold)?))
}

fn check_samples(config: &AcGruConfig, samples: &[Sample]) -> Result<()> {
    for (i, s) in samples.iter().enumerate() {
        if s.gold.len() != config.tasks.len() {
            return Err(Error::Dimension {
                expected: config.tasks.len(),
                actual: s.gold.len(),
            });
        }
        for (t, (&y, task)) in s.gold.iter().zip(&config.tasks).enumerate() {
            if y >= task.labels.len() {
                return Err(Error::invalid(format!("sample {i}: class {y} out of range for task {t}")));
            }
        }
    }
    Ok(())
}

/// Minibatch Adam with early stopping on validation MCC.
///
/// An epoch improves when its validation MCC beats the best so far; the
/// run stops once `patience` epochs in a row (at least one) have not
/// improved. Without validation data every epoch runs and the last
/// weights are kept. Results depend only on the seed, not on thread count.
pub fn train_acgru(config: &AcGruConfig, train: &[Sample], validation: &[Sample]) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    check_samples(config, train)?;
    check_samples(config, validation)?;
    let mut params = Parameters::init(config)?;
    let mut state = AdamState::new(&params);
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, Parameters)> = None;
    let mut wait = 0;
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=config.epochs {
        let epoch_seed = derive_seed(config.seed, epoch as u64);
        order.shuffle(&mut seeded(epoch_seed));
        let mut loss_sum = 0.0;
        for (b, batch) in order.chunks(config.batch).enumerate() {
            let mut total: Option<Gradients> = None;
            for (g, group) in batch.chunks(GROUP).enumerate() {
                let results: Vec<Result<(f64, Gradients)>> = group
                    .par_iter()
                    .enumerate()
                    .map(|(j, &i)| {
                        let pos = (b * config.batch + g * GROUP + j) as u64;
                        sample_gradient(&params, &train[i], config.dropout, derive_seed(epoch_seed, pos))
                    })
                    .collect();
                for r in results {
                    let (loss, grad) = r?;
                    loss_sum += loss;
                    match &mut total {
                        Some(t) => t.accumulate(&grad),
                        None => total = Some(grad),
                    }
                }
            }
            let mut total = total.expect("non-empty batch");
            total.scale(1.0 / batch.len() as f64);
            adam_step(&mut params, &total, &mut state, config.lr);
        }
        let train_loss = loss_sum / train.len() as f64;
        let val_mcc = if validation.is_empty() {
            None
        } else {
            Some(mean_mcc(&params, validation)?)
        };
        debug!("epoch {epoch}: loss {train_loss:.5} val_mcc {val_mcc:?}");
        history.push(EpochStats {
            epoch,
            train_loss,
            val_mcc,
        });
        let Some(mcc) = val_mcc else {
            best = Some((f64::NEG_INFINITY, epoch, params.clone()));
            continue;
        };
        match &best {
            Some((b, _, _)) if mcc <= *b => {
                wait += 1;
                if wait >= config.patience.max(1) {
                    info!("early stop after epoch {epoch}");
                    break;
                }
            }
            _ => {
                wait = 0;
                best = Some((mcc, epoch, params.clone()));
            }
        }
    }
    let (_, best_epoch, params) = best.unwrap_or((0.0, 0, params));
    Ok(TrainOutcome {
        params,
        best_epoch,
        history,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockCheck {
    pub name: String,
    pub entries: usize,
    pub max_rel_error: f64,
}

fn block_mut(params: &mut Parameters, index: usize) -> &mut Mat {
    if index == 0 {
        &mut params.embedding
    } else {
        params
            .net
            .blocks_mut()
            .into_iter()
            .nth(index - 1)
            .expect("block index in range")
    }
}

/// Central-difference check of every parameter entry against `backward`.
/// Relative error is |a − n| / max(|a|, |n|, 1e-6); dropout is off.
pub fn gradcheck(params: &Parameters, input: &CommitInput, gold: &[usize], h: f64) -> Result<Vec<BlockCheck>> {
    let cache = forward(params, input, None)?;
    let grads = backward(params, &cache, gold)?;
    let mut analytic = vec![(
        "embedding".to_string(),
        grads.embedding_dense(params.embedding.rows, params.embedding.cols),
    )];
    analytic.extend(grads.net.blocks().into_iter().map(|(n, m)| (n, m.clone())));
    let loss_at = |p: &Parameters| -> Result<f64> { multitask_loss(&forward(p, input, None)?.probs, gold) };
    let mut work = params.clone();
    let mut out = Vec::new();
    for (b, (name, a)) in analytic.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for i in 0..a.data.len() {
            let orig = block_mut(&mut work, b).data[i];
            block_mut(&mut work, b).data[i] = orig + h;
            let plus = loss_at(&work)?;
            block_mut(&mut work, b).data[i] = orig - h;
            let minus = loss_at(&work)?;
            block_mut(&mut work, b).data[i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let an = a.data[i];
            let rel = (an - numeric).abs() / an.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
        out.push(BlockCheck {
            name: name.clone(),
            entries: a.data.len(),
            max_rel_error: worst,
        });
    }
    Ok(out)
}
