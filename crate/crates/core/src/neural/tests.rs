use super::*;
use crate::sampling::seeded;

fn toy(tasks: &[usize]) -> AcGruConfig {
    AcGruConfig {
        vocab_size: 12,
        input_len: 6,
        embed_dim: 3,
        filter_sizes: vec![1, 3, 5],
        filters: 2,
        gru_hidden: 3,
        attention_hidden: 2,
        task_hidden: 3,
        tasks: tasks
            .iter()
            .enumerate()
            .map(|(i, &n)| TaskSpec {
                name: format!("t{i}"),
                labels: (0..n).map(|c| format!("c{c}")).collect(),
            })
            .collect(),
        dropout: 0.2,
        lr: 0.01,
        batch: 4,
        epochs: 5,
        patience: 5,
        seed: 7,
    }
}

fn input(seed: usize) -> CommitInput {
    let s = |o: usize| (0..6).map(|i| (i * 7 + seed * 3 + o) % 12).collect();
    CommitInput {
        streams: [s(0), s(1), s(2), s(5)],
    }
}

fn zero_mat(m: &mut Mat) {
    m.data.iter_mut().for_each(|v| *v = 0.0);
}

#[test]
fn zero_gru_stays_at_zero() {
    let cfg = toy(&[2]);
    let mut p = Parameters::init(&cfg).unwrap();
    for b in &mut p.net.branches {
        for m in [&mut b.w_z, &mut b.w_r, &mut b.w_h, &mut b.u_z, &mut b.u_r, &mut b.u_h] {
            zero_mat(m);
        }
    }
    let c = forward(&p, &input(1), None).unwrap();
    for i in 0..N_INPUTS {
        for b in 0..3 {
            assert!(c.gru_states(i, b).iter().flatten().all(|v| *v == 0.0));
        }
    }
}

#[test]
fn single_step_attention_is_identity() {
    let mut cfg = toy(&[2]);
    cfg.filter_sizes = vec![6];
    let p = Parameters::init(&cfg).unwrap();
    let c = forward(&p, &input(2), None).unwrap();
    assert_eq!(c.attention(0, 0), [1.0]);
    assert_eq!(&c.commit_vector()[..3], c.gru_states(0, 0)[0].as_slice());
}

#[test]
fn shapes() {
    let cfg = toy(&[2, 3]);
    let p = Parameters::init(&cfg).unwrap();
    let c = forward(&p, &input(0), None).unwrap();
    for (b, k) in cfg.filter_sizes.iter().enumerate() {
        let maps = c.conv_maps(3, b);
        assert_eq!(maps.len(), cfg.input_len - k + 1);
        assert!(maps.iter().all(|r| r.len() == cfg.filters));
    }
    assert_eq!(c.commit_vector().len(), cfg.commit_width());
    assert_eq!(cfg.commit_width(), 4 * 3 * cfg.gru_hidden);
    for pr in &c.probs {
        assert!((pr.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn symmetric_head() {
    let cfg = toy(&[2]);
    let mut p = Parameters::init(&cfg).unwrap();
    zero_mat(&mut p.net.heads[0].w_p);
    let out = predict_acgru(&p, &input(0)).unwrap();
    assert_eq!(out[0].1, [0.5, 0.5]);
    assert_eq!(out[0].0, 0);
}

#[test]
fn softmax_shift_invariant() {
    let a = net::softmax(&[1.0, 2.0, 3.0]);
    let b = net::softmax(&[101.0, 102.0, 103.0]);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn loss_values() {
    let uniform = vec![vec![1.0 / 3.0; 3]; 7];
    assert!((multitask_loss(&uniform, &[0; 7]).unwrap() - 7.0 * 3f64.ln()).abs() < 1e-12);
    assert_eq!(multitask_loss(&[vec![0.0, 1.0]], &[1]).unwrap(), 0.0);
    assert!((multitask_loss(&[vec![0.5, 0.5]], &[0]).unwrap() - 2f64.ln()).abs() < 1e-15);
    assert!((multitask_loss(&[vec![0.0, 1.0]], &[0]).unwrap() - -(1e-12f64).ln()).abs() < 1e-9);
}

#[test]
fn head_bias_gradient_is_residual() {
    let cfg = toy(&[3]);
    let p = Parameters::init(&cfg).unwrap();
    let c = forward(&p, &input(4), None).unwrap();
    let g = backward(&p, &c, &[1]).unwrap();
    let mut expect = c.probs[0].clone();
    expect[1] -= 1.0;
    assert_eq!(g.net.heads[0].b_p.data, expect);
}

#[test]
fn saturated_head_gives_zero_gradients() {
    let cfg = toy(&[2]);
    let mut p = Parameters::init(&cfg).unwrap();
    zero_mat(&mut p.net.heads[0].w_p);
    p.net.heads[0].b_p.data = vec![0.0, 1000.0];
    let c = forward(&p, &input(0), None).unwrap();
    assert_eq!(multitask_loss(&c.probs, &[1]).unwrap(), 0.0);
    let g = backward(&p, &c, &[1]).unwrap();
    assert!(g.net.blocks().iter().all(|(_, m)| m.data.iter().all(|v| *v == 0.0)));
    assert!(g.embedding.values().flatten().all(|v| *v == 0.0));
}

#[test]
fn gradients_match_finite_differences() {
    let cfg = toy(&[2, 3]);
    let p = Parameters::init(&cfg).unwrap();
    let checks = gradcheck(&p, &input(3), &[1, 2], 1e-5).unwrap();
    assert_eq!(checks.len(), 1 + 3 * 14 + 2 * 4);
    for c in checks {
        assert!(c.max_rel_error < 1e-4, "{} {}", c.name, c.max_rel_error);
    }
}

#[test]
fn stale_cache_and_bad_tokens() {
    let cfg = toy(&[2]);
    let mut p = Parameters::init(&cfg).unwrap();
    let c = forward(&p, &input(0), None).unwrap();
    let g = backward(&p, &c, &[0]).unwrap();
    let mut st = AdamState::new(&p);
    adam_step(&mut p, &g, &mut st, 0.001);
    assert!(backward(&p, &c, &[0]).is_err());
    let mut bad = input(0);
    bad.streams[2][0] = 12;
    assert!(forward(&p, &bad, None).is_err());
    bad.streams[2].pop();
    assert!(forward(&p, &bad, None).is_err());
}

fn constant_grads(p: &Parameters, value: f64) -> Gradients {
    let mut net = p.net.clone();
    for m in net.blocks_mut() {
        m.data.iter_mut().for_each(|v| *v = value);
    }
    Gradients {
        embedding: (0..p.embedding.rows).map(|r| (r, vec![value; p.embedding.cols])).collect(),
        net,
    }
}

#[test]
fn adam_identities() {
    let cfg = toy(&[2]);
    let p0 = Parameters::init(&cfg).unwrap();
    let mut p = p0.clone();
    let mut st = AdamState::new(&p);
    adam_step(&mut p, &constant_grads(&p0, 0.0), &mut st, 0.001);
    assert_eq!(p.embedding, p0.embedding);
    assert_eq!(p.net, p0.net);

    let mut p = p0.clone();
    let mut st = AdamState::new(&p);
    adam_step(&mut p, &constant_grads(&p0, 0.37), &mut st, 0.001);
    for (a, b) in p.embedding.data.iter().zip(&p0.embedding.data) {
        assert!(((b - a) - 0.001).abs() < 1e-6);
    }
    adam_step(&mut p, &constant_grads(&p0, -0.37), &mut st, 0.001);
    for ((_, a), (_, b)) in p.net.blocks().iter().zip(p0.net.blocks()) {
        for (x, y) in a.data.iter().zip(&b.data) {
            assert!((x - y).abs() < 2.0 * 0.001);
        }
    }
}

fn random_input(seed: u64) -> CommitInput {
    use rand::Rng;
    let mut rng = seeded(seed);
    let mut s = || (0..6).map(|_| rng.gen_range(0..12)).collect();
    CommitInput {
        streams: [s(), s(), s(), s()],
    }
}

fn dataset(n: usize, cfg: &AcGruConfig) -> Vec<Sample> {
    (0..n)
        .map(|i| Sample {
            input: random_input(i as u64),
            gold: cfg.tasks.iter().enumerate().map(|(t, task)| (i + t) % task.labels.len()).collect(),
        })
        .collect()
}

#[test]
fn training_is_deterministic() {
    let cfg = toy(&[2, 3]);
    let data = dataset(10, &cfg);
    let a = train_acgru(&cfg, &data, &data[..4]).unwrap();
    let b = train_acgru(&cfg, &data, &data[..4]).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.params, b.params);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let c = pool.install(|| train_acgru(&cfg, &data, &data[..4])).unwrap();
    assert_eq!(a.history, c.history);
}

#[test]
fn patience_zero_stops_at_first_non_improvement() {
    let mut cfg = toy(&[2]);
    cfg.patience = 0;
    cfg.epochs = 30;
    let data = dataset(12, &cfg);
    let out = train_acgru(&cfg, &data, &data).unwrap();
    let h = &out.history;
    let last = h.len() - 1;
    for w in 1..last {
        let best_before = h[..w].iter().filter_map(|e| e.val_mcc).fold(f64::NEG_INFINITY, f64::max);
        assert!(h[w].val_mcc.unwrap() > best_before);
    }
    if h.len() < cfg.epochs {
        let best_before = h[..last].iter().filter_map(|e| e.val_mcc).fold(f64::NEG_INFINITY, f64::max);
        assert!(h[last].val_mcc.unwrap() <= best_before);
    }
}

#[test]
fn memorizes_small_set() {
    let mut cfg = toy(&[2, 3]);
    cfg.dropout = 0.0;
    cfg.epochs = 200;
    cfg.batch = 8;
    let data = dataset(40, &cfg);
    let out = train_acgru(&cfg, &data, &[]).unwrap();
    let mut hits = 0;
    let mut total = 0;
    for s in &data {
        for (t, (pred, _)) in predict_acgru(&out.params, &s.input).unwrap().iter().enumerate() {
            hits += usize::from(*pred == s.gold[t]);
            total += 1;
        }
    }
    let acc = hits as f64 / total as f64;
    assert!(acc >= 0.95, "train accuracy {acc}");
}

#[test]
fn empty_training_set() {
    assert!(train_acgru(&toy(&[2]), &[], &[]).is_err());
}

#[test]
fn bundle_round_trip() {
    let cfg = toy(&[2, 3]);
    let p = Parameters::init(&cfg).unwrap();
    let (cfg2, p2) = Parameters::from_json(&p.to_json(&cfg).unwrap()).unwrap();
    assert_eq!(cfg2, cfg);
    assert_eq!(p2.net, p.net);
    assert_eq!(p2.embedding, p.embedding);
    let broken = p.to_json(&cfg).unwrap().replace("\"branch1.w_s\"", "\"branch1.w_q\"");
    assert!(Parameters::from_json(&broken).is_err());
}

#[test]
fn vocabulary_ids() {
    let toks = |s: &str| s.split(' ').map(str::to_string).collect::<Vec<_>>();
    let a = toks("x y y z");
    let v = CodeVocabulary::build([a.as_slice()], 4);
    assert_eq!(v.tokens(), ["y", "x"]);
    assert_eq!(v.encode(&toks("y q"), 4), [2, UNKNOWN_ID, PAD_ID, PAD_ID]);
    assert_eq!(v.encode(&toks("x x x x x"), 2), [3, 3]);
    let json = serde_json::to_string(&v).unwrap();
    assert_eq!(serde_json::from_str::<CodeVocabulary>(&json).unwrap(), v);
}

#[test]
fn dropout_only_in_train_mode() {
    let cfg = toy(&[2]);
    let p = Parameters::init(&cfg).unwrap();
    let a = predict_acgru(&p, &input(5)).unwrap();
    let b = predict_acgru(&p, &input(5)).unwrap();
    assert_eq!(a, b);
    let mut rng = seeded(1);
    let t = forward(&p, &input(5), Some((0.5, &mut rng))).unwrap();
    assert_ne!(t.probs[0], a[0].1);
}
