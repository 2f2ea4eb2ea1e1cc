use std::collections::BTreeMap;

use rand::Rng;

use super::params::{Branch, Head, Mat, Network, Parameters};
use super::{CommitInput, N_INPUTS};
use crate::error::{Error, Result};
use crate::sampling::SeededRng;

const PROB_FLOOR: f64 = 1e-12;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn add(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

struct GruStep {
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    hh: Vec<f64>,
}

struct BranchCache {
    /// Conv pre-activations, one per window.
    conv_pre: Vec<Vec<f64>>,
    conv_out: Vec<Vec<f64>>,
    steps: Vec<GruStep>,
    hs: Vec<Vec<f64>>,
    att_u: Vec<Vec<f64>>,
    alpha: Vec<f64>,
}

struct HeadCache {
    pre: Vec<f64>,
    mask: Option<Vec<f64>>,
    out: Vec<f64>,
}

/// Intermediate values of one forward pass, needed by `backward`.
pub struct ForwardCache {
    version: u64,
    tokens: Vec<Vec<usize>>,
    branches: Vec<Vec<BranchCache>>,
    commit: Vec<f64>,
    commit_mask: Option<Vec<f64>>,
    commit_dropped: Vec<f64>,
    heads: Vec<HeadCache>,
    pub probs: Vec<Vec<f64>>,
}

fn dropout_mask(len: usize, rate: f64, rng: &mut SeededRng) -> Vec<f64> {
    let keep = 1.0 - rate;
    (0..len)
        .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
        .collect()
}

fn branch_forward(branch: &Branch, embedding: &Mat, tokens: &[usize]) -> (Vec<f64>, BranchCache) {
    let k = branch.size;
    let l = embedding.cols;
    let m = tokens.len() + 1 - k;
    let hdim = branch.b_z.cols;
    let mut cache = BranchCache {
        conv_pre: Vec::with_capacity(m),
        conv_out: Vec::with_capacity(m),
        steps: Vec::with_capacity(m),
        hs: Vec::with_capacity(m),
        att_u: Vec::with_capacity(m),
        alpha: Vec::new(),
    };
    let mut window = vec![0.0; k * l];
    let mut h = vec![0.0; hdim];
    for t in 0..m {
        for (j, &tok) in tokens[t..t + k].iter().enumerate() {
            window[j * l..(j + 1) * l].copy_from_slice(embedding.row(tok));
        }
        let mut pre = branch.conv_w.matvec(&window);
        add(&mut pre, &branch.conv_b.data);
        let x: Vec<f64> = pre.iter().map(|v| v.max(0.0)).collect();

        let mut az = branch.w_z.matvec(&x);
        add(&mut az, &branch.u_z.matvec(&h));
        add(&mut az, &branch.b_z.data);
        let z: Vec<f64> = az.into_iter().map(sigmoid).collect();
        let mut ar = branch.w_r.matvec(&x);
        add(&mut ar, &branch.u_r.matvec(&h));
        add(&mut ar, &branch.b_r.data);
        let r: Vec<f64> = ar.into_iter().map(sigmoid).collect();
        let rh: Vec<f64> = r.iter().zip(&h).map(|(a, b)| a * b).collect();
        let mut ah = branch.w_h.matvec(&x);
        add(&mut ah, &branch.u_h.matvec(&rh));
        add(&mut ah, &branch.b_h.data);
        let hh: Vec<f64> = ah.into_iter().map(f64::tanh).collect();
        let h_new: Vec<f64> = (0..hdim).map(|i| (1.0 - z[i]) * h[i] + z[i] * hh[i]).collect();

        let mut au = branch.w_a.matvec(&h_new);
        add(&mut au, &branch.b_a.data);
        cache.att_u.push(au.into_iter().map(f64::tanh).collect());
        cache.conv_pre.push(pre);
        cache.conv_out.push(x);
        cache.steps.push(GruStep {
            h_prev: std::mem::replace(&mut h, h_new.clone()),
            z,
            r,
            hh,
        });
        cache.hs.push(h_new);
    }
    let scores: Vec<f64> = cache
        .att_u
        .iter()
        .map(|u| u.iter().zip(&branch.w_s.data).map(|(a, b)| a * b).sum())
        .collect();
    cache.alpha = softmax(&scores);
    let mut out = vec![0.0; hdim];
    for (a, hv) in cache.alpha.iter().zip(&cache.hs) {
        for (o, v) in out.iter_mut().zip(hv) {
            *o += a * v;
        }
    }
    (out, cache)
}

fn check_input(params: &Parameters, input: &CommitInput, input_len: usize) -> Result<()> {
    for stream in &input.streams {
        if stream.len() != input_len {
            return Err(Error::Dimension {
                expected: input_len,
                actual: stream.len(),
            });
        }
        if let Some(&bad) = stream.iter().find(|&&t| t >= params.embedding.rows) {
            return Err(Error::invalid(format!(
                "token id {bad} outside the vocabulary of {}",
                params.embedding.rows
            )));
        }
    }
    Ok(())
}

/// Forward pass. Dropout applies only when `dropout` carries a rate and an rng.
pub fn forward(
    params: &Parameters,
    input: &CommitInput,
    dropout: Option<(f64, &mut SeededRng)>,
) -> Result<ForwardCache> {
    let input_len = input.streams[0].len();
    check_input(params, input, input_len)?;
    if params.net.branches.iter().any(|b| b.size > input_len) {
        return Err(Error::invalid("input shorter than the widest filter"));
    }
    let mut commit = Vec::new();
    let mut branch_caches = Vec::with_capacity(N_INPUTS);
    for stream in &input.streams {
        let mut per_input = Vec::with_capacity(params.net.branches.len());
        for b in &params.net.branches {
            let (out, cache) = branch_forward(b, &params.embedding, stream);
            commit.extend(out);
            per_input.push(cache);
        }
        branch_caches.push(per_input);
    }
    let (mut commit_mask, mut head_masks) = (None, Vec::new());
    if let Some((rate, rng)) = dropout {
        if rate > 0.0 {
            commit_mask = Some(dropout_mask(commit.len(), rate, rng));
            for h in &params.net.heads {
                head_masks.push(dropout_mask(h.b_t.cols, rate, rng));
            }
        }
    }
    let commit_dropped: Vec<f64> = match &commit_mask {
        Some(m) => commit.iter().zip(m).map(|(a, b)| a * b).collect(),
        None => commit.clone(),
    };
    let mut heads = Vec::with_capacity(params.net.heads.len());
    let mut probs = Vec::with_capacity(params.net.heads.len());
    for (i, h) in params.net.heads.iter().enumerate() {
        let mut pre = h.w_t.matvec(&commit_dropped);
        add(&mut pre, &h.b_t.data);
        let mask = head_masks.get(i).cloned();
        let out: Vec<f64> = match &mask {
            Some(m) => pre.iter().zip(m).map(|(v, k)| v.max(0.0) * k).collect(),
            None => pre.iter().map(|v| v.max(0.0)).collect(),
        };
        let mut logits = h.w_p.matvec(&out);
        add(&mut logits, &h.b_p.data);
        probs.push(softmax(&logits));
        heads.push(HeadCache { pre, mask, out });
    }
    Ok(ForwardCache {
        version: params.version,
        tokens: input.streams.to_vec(),
        branches: branch_caches,
        commit,
        commit_mask,
        commit_dropped,
        heads,
        probs,
    })
}

impl ForwardCache {
    /// Width of the commit feature vector.
    pub fn commit_vector(&self) -> &[f64] {
        &self.commit
    }

    pub fn gru_states(&self, input: usize, branch: usize) -> &[Vec<f64>] {
        &self.branches[input][branch].hs
    }

    pub fn conv_maps(&self, input: usize, branch: usize) -> &[Vec<f64>] {
        &self.branches[input][branch].conv_out
    }

    pub fn attention(&self, input: usize, branch: usize) -> &[f64] {
        &self.branches[input][branch].alpha
    }
}

/// Sum over tasks of the negative log probability of the gold class.
pub fn multitask_loss(probs: &[Vec<f64>], gold: &[usize]) -> Result<f64> {
    if probs.len() != gold.len() {
        return Err(Error::Dimension {
            expected: probs.len(),
            actual: gold.len(),
        });
    }
    let mut loss = 0.0;
    for (task, (p, &y)) in probs.iter().zip(gold).enumerate() {
        let py = *p.get(y).ok_or_else(|| Error::invalid(format!("class {y} out of range for task {task}")))?;
        if py < PROB_FLOOR {
            log::warn!("task {task}: gold probability {py:e} clamped");
        }
        loss -= py.max(PROB_FLOOR).ln();
    }
    Ok(loss)
}

/// Gradients: dense for the network, by row for the embedding.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub embedding: BTreeMap<usize, Vec<f64>>,
    pub net: Network,
}

impl Gradients {
    pub fn accumulate(&mut self, other: &Gradients) {
        self.net.accumulate(&other.net);
        for (row, g) in &other.embedding {
            match self.embedding.get_mut(row) {
                Some(dst) => add(dst, g),
                None => {
                    self.embedding.insert(*row, g.clone());
                }
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.net.scale(factor);
        for g in self.embedding.values_mut() {
            g.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// Dense gradient of the embedding table.
    pub fn embedding_dense(&self, rows: usize, cols: usize) -> Mat {
        let mut m = Mat::zeros(rows, cols);
        for (r, g) in &self.embedding {
            m.row_mut(*r).copy_from_slice(g);
        }
        m
    }
}

fn zero_like(net: &Network) -> Network {
    let mut z = net.clone();
    for m in z.blocks_mut() {
        m.data.iter_mut().for_each(|v| *v = 0.0);
    }
    z
}

#[allow(clippy::needless_range_loop)]
fn branch_backward(
    branch: &Branch,
    grad: &mut Branch,
    embedding: &Mat,
    emb_grad: &mut BTreeMap<usize, Vec<f64>>,
    cache: &BranchCache,
    tokens: &[usize],
    d_out: &[f64],
) {
    let m = cache.hs.len();
    let hdim = d_out.len();
    let l = embedding.cols;
    let k = branch.size;
    // attention
    let mut dh: Vec<Vec<f64>> = cache.alpha.iter().map(|a| d_out.iter().map(|g| a * g).collect()).collect();
    let d_alpha: Vec<f64> = cache
        .hs
        .iter()
        .map(|h| h.iter().zip(d_out).map(|(a, b)| a * b).sum())
        .collect();
    let mean: f64 = cache.alpha.iter().zip(&d_alpha).map(|(a, b)| a * b).sum();
    for t in 0..m {
        let ds = cache.alpha[t] * (d_alpha[t] - mean);
        let u = &cache.att_u[t];
        for (g, v) in grad.w_s.data.iter_mut().zip(u) {
            *g += ds * v;
        }
        let dau: Vec<f64> = u
            .iter()
            .zip(&branch.w_s.data)
            .map(|(ui, ws)| ds * ws * (1.0 - ui * ui))
            .collect();
        grad.w_a.add_outer(&dau, &cache.hs[t]);
        grad.b_a.add_row(&dau);
        branch.w_a.add_matvec_t(&dau, &mut dh[t]);
    }
    // GRU through time
    let mut carry = vec![0.0; hdim];
    let mut window = vec![0.0; k * l];
    for t in (0..m).rev() {
        let step = &cache.steps[t];
        let x = &cache.conv_out[t];
        let mut dht = dh[t].clone();
        add(&mut dht, &carry);
        let mut dhp: Vec<f64> = (0..hdim).map(|i| dht[i] * (1.0 - step.z[i])).collect();
        let daz: Vec<f64> = (0..hdim)
            .map(|i| dht[i] * (step.hh[i] - step.h_prev[i]) * step.z[i] * (1.0 - step.z[i]))
            .collect();
        let dah: Vec<f64> = (0..hdim)
            .map(|i| dht[i] * step.z[i] * (1.0 - step.hh[i] * step.hh[i]))
            .collect();
        let rh: Vec<f64> = step.r.iter().zip(&step.h_prev).map(|(a, b)| a * b).collect();
        let mut drh = vec![0.0; hdim];
        branch.u_h.add_matvec_t(&dah, &mut drh);
        let dar: Vec<f64> = (0..hdim)
            .map(|i| drh[i] * step.h_prev[i] * step.r[i] * (1.0 - step.r[i]))
            .collect();
        for i in 0..hdim {
            dhp[i] += drh[i] * step.r[i];
        }
        branch.u_z.add_matvec_t(&daz, &mut dhp);
        branch.u_r.add_matvec_t(&dar, &mut dhp);

        grad.w_h.add_outer(&dah, x);
        grad.u_h.add_outer(&dah, &rh);
        grad.b_h.add_row(&dah);
        grad.w_z.add_outer(&daz, x);
        grad.u_z.add_outer(&daz, &step.h_prev);
        grad.b_z.add_row(&daz);
        grad.w_r.add_outer(&dar, x);
        grad.u_r.add_outer(&dar, &step.h_prev);
        grad.b_r.add_row(&dar);

        let mut dx = vec![0.0; x.len()];
        branch.w_h.add_matvec_t(&dah, &mut dx);
        branch.w_z.add_matvec_t(&daz, &mut dx);
        branch.w_r.add_matvec_t(&dar, &mut dx);
        // ReLU and convolution
        let dpre: Vec<f64> = dx
            .iter()
            .zip(&cache.conv_pre[t])
            .map(|(g, p)| if *p > 0.0 { *g } else { 0.0 })
            .collect();
        if dpre.iter().any(|v| *v != 0.0) {
            for (j, &tok) in tokens[t..t + k].iter().enumerate() {
                window[j * l..(j + 1) * l].copy_from_slice(embedding.row(tok));
            }
            grad.conv_w.add_outer(&dpre, &window);
            grad.conv_b.add_row(&dpre);
            let mut dwin = vec![0.0; k * l];
            branch.conv_w.add_matvec_t(&dpre, &mut dwin);
            for (j, &tok) in tokens[t..t + k].iter().enumerate() {
                let row = emb_grad.entry(tok).or_insert_with(|| vec![0.0; l]);
                add(row, &dwin[j * l..(j + 1) * l]);
            }
        }
        carry = dhp;
    }
}

fn head_backward(head: &Head, grad: &mut Head, cache: &HeadCache, probs: &[f64], gold: usize, x: &[f64], dx: &mut [f64]) {
    let mut dlogits = probs.to_vec();
    dlogits[gold] -= 1.0;
    grad.w_p.add_outer(&dlogits, &cache.out);
    grad.b_p.add_row(&dlogits);
    let mut dout = vec![0.0; cache.out.len()];
    head.w_p.add_matvec_t(&dlogits, &mut dout);
    let dpre: Vec<f64> = (0..dout.len())
        .map(|i| {
            let keep = cache.mask.as_ref().map_or(1.0, |m| m[i]);
            if cache.pre[i] > 0.0 {
                dout[i] * keep
            } else {
                0.0
            }
        })
        .collect();
    grad.w_t.add_outer(&dpre, x);
    grad.b_t.add_row(&dpre);
    head.w_t.add_matvec_t(&dpre, dx);
}

/// Exact gradients of the summed task loss for the cached forward pass.
pub fn backward(params: &Parameters, cache: &ForwardCache, gold: &[usize]) -> Result<Gradients> {
    if cache.version != params.version {
        return Err(Error::invalid(format!(
            "stale forward cache: computed with parameters v{}, now v{}",
            cache.version, params.version
        )));
    }
    if gold.len() != params.net.heads.len() {
        return Err(Error::Dimension {
            expected: params.net.heads.len(),
            actual: gold.len(),
        });
    }
    let mut grads = Gradients {
        embedding: BTreeMap::new(),
        net: zero_like(&params.net),
    };
    let mut d_commit = vec![0.0; cache.commit.len()];
    for (i, head) in params.net.heads.iter().enumerate() {
        if gold[i] >= cache.probs[i].len() {
            return Err(Error::invalid(format!("class {} out of range for task {i}", gold[i])));
        }
        head_backward(
            head,
            &mut grads.net.heads[i],
            &cache.heads[i],
            &cache.probs[i],
            gold[i],
            &cache.commit_dropped,
            &mut d_commit,
        );
    }
    if let Some(mask) = &cache.commit_mask {
        for (d, k) in d_commit.iter_mut().zip(mask) {
            *d *= k;
        }
    }
    let hdim = params.net.branches.first().map_or(0, |b| b.b_z.cols);
    let n_branches = params.net.branches.len();
    for (input, per_input) in cache.branches.iter().enumerate() {
        for (bi, bc) in per_input.iter().enumerate() {
            let offset = (input * n_branches + bi) * hdim;
            branch_backward(
                &params.net.branches[bi],
                &mut grads.net.branches[bi],
                &params.embedding,
                &mut grads.embedding,
                bc,
                &cache.tokens[input],
                &d_commit[offset..offset + hdim],
            );
        }
    }
    Ok(grads)
}
