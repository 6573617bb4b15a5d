//! Acceptance suite. Each test prints one PASS line for its criterion;
//! tolerances are pinned in the assertions.
//!
//! Criterion 7 (and the full-run half of criterion 8) needs the Adult
//! dataset, which is not distributable with the repository; that test is
//! `#[ignore]` and self-skips unless `ADULT_CSV` (or `data/adult.csv`)
//! points at the file. Run it with:
//! `cargo test -p fairsynth --test acceptance -- --ignored --nocapture`

use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use fairsynth::checkpoint::save_checkpoint;
use fairsynth::diff::graph::{Graph, NodeId};
use fairsynth::diff::ops::{
    self, batch_norm, gradient_penalty, gumbel_softmax, linear, mean_all, standard_normal,
    standard_uniform, BnMode, RunningStats, BN_EPS, BN_MOMENTUM,
};
use fairsynth::diff::tensor::Tensor;
use fairsynth::error::Error;
use fairsynth::eval::{auc_roc, dp_gap, evaluate_all, identifiability, EvalConfig};
use fairsynth::losses::{
    self, FairnessBindings, LossWeights, PrivacyBatch, PrivacyVariant,
};
use fairsynth::networks::{CriticArch, CriticNet, GeneratorArch, GeneratorNet};
use fairsynth::schema::{group_counts, Cell, ColumnKind, RawTable, SplitSpec, TableSchema};
use fairsynth::trainer::{
    self, feature_weights, precompute_privacy_reference, FeatureWeighting, TrainConfig, Trainer,
};
use fairsynth::transform::{self, DataMatrix, TransformModel};

// ---------------------------------------------------------------------
// shared helpers
// ---------------------------------------------------------------------

fn rand_generic<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    // Magnitudes in [0.3, 1.7] with random sign: generic points away from
    // activation kinks.
    let data = (0..rows * cols)
        .map(|_| {
            let mag = 0.3 + 1.4 * rng.gen::<f64>();
            if rng.gen::<bool>() {
                mag
            } else {
                -mag
            }
        })
        .collect();
    Tensor::from_vec(rows, cols, data)
}

fn fd_grads(f: &dyn Fn(&[Tensor]) -> f64, inputs: &[Tensor], h: f64) -> Vec<Tensor> {
    let mut grads = Vec::with_capacity(inputs.len());
    for i in 0..inputs.len() {
        let (r, c) = inputs[i].shape();
        let mut grad = Tensor::zeros(r, c);
        for e in 0..r * c {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[e] += h;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[e] -= h;
            grad.data_mut()[e] = (f(&plus) - f(&minus)) / (2.0 * h);
        }
        grads.push(grad);
    }
    grads
}

fn assert_rel(actual: &Tensor, expected: &Tensor, rel_tol: f64, context: &str) {
    assert_eq!(actual.shape(), expected.shape(), "{context}: shape");
    for (i, (&a, &b)) in actual.data().iter().zip(expected.data()).enumerate() {
        let scale = a.abs().max(b.abs()).max(1.0);
        assert!(
            (a - b).abs() <= rel_tol * scale,
            "{context}: entry {i}: {a} vs {b} (rel tol {rel_tol})"
        );
    }
}

/// Fixed random projection to a scalar so every output entry reaches the
/// objective with a distinct weight.
fn project(g: &mut Graph, y: NodeId, weights: &Tensor) -> NodeId {
    let w = g.leaf(weights.clone()).unwrap();
    let p = g.mul(y, w).unwrap();
    mean_all(g, p).unwrap()
}

// ---------------------------------------------------------------------
// criterion 1: gradient oracle suite
// ---------------------------------------------------------------------

#[test]
fn acceptance_1_gradient_oracles() {
    let start = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(0xC1);
    const POINTS: usize = 100;
    const H: f64 = 1e-5;

    // linear: gradients w.r.t. input, weight, bias.
    for _ in 0..POINTS {
        let (n, din, dout) = (3, 4, 2);
        let inputs = vec![
            rand_generic(n, din, &mut rng),
            rand_generic(din, dout, &mut rng),
            rand_generic(1, dout, &mut rng),
        ];
        let proj = rand_generic(n, dout, &mut rng);
        let f = |inp: &[Tensor]| {
            let mut g = Graph::new();
            let ids: Vec<NodeId> = inp.iter().map(|t| g.leaf(t.clone()).unwrap()).collect();
            let y = linear(&mut g, ids[0], ids[1], ids[2]).unwrap();
            let s = project(&mut g, y, &proj);
            g.scalar(s)
        };
        let expect = fd_grads(&f, &inputs, H);
        let mut g = Graph::new();
        let ids: Vec<NodeId> = inputs.iter().map(|t| g.leaf(t.clone()).unwrap()).collect();
        let y = linear(&mut g, ids[0], ids[1], ids[2]).unwrap();
        let s = project(&mut g, y, &proj);
        let grads = g.grad(s, &ids).unwrap();
        for (got, want) in grads.iter().zip(&expect) {
            assert_rel(got, want, 1e-5, "linear");
        }
    }

    // relu / leaky relu at generic (kink-free) points.
    for _ in 0..POINTS {
        let x = rand_generic(2, 5, &mut rng);
        let proj = rand_generic(2, 5, &mut rng);
        for slope in [0.0, 0.01] {
            let f = |inp: &[Tensor]| {
                let mut g = Graph::new();
                let xi = g.leaf(inp[0].clone()).unwrap();
                let y = if slope == 0.0 {
                    g.relu(xi).unwrap()
                } else {
                    g.leaky_relu(xi, slope).unwrap()
                };
                let s = project(&mut g, y, &proj);
                g.scalar(s)
            };
            let expect = fd_grads(&f, &[x.clone()], H);
            let mut g = Graph::new();
            let xi = g.leaf(x.clone()).unwrap();
            let y = if slope == 0.0 {
                g.relu(xi).unwrap()
            } else {
                g.leaky_relu(xi, slope).unwrap()
            };
            let s = project(&mut g, y, &proj);
            let grads = g.grad(s, &[xi]).unwrap();
            assert_rel(&grads[0], &expect[0], 1e-5, "relu family");
        }
    }

    // batch norm (train mode) w.r.t. input, gamma, beta.
    for _ in 0..POINTS {
        let inputs = vec![
            rand_generic(6, 2, &mut rng),
            rand_generic(1, 2, &mut rng),
            rand_generic(1, 2, &mut rng),
        ];
        let proj = rand_generic(6, 2, &mut rng);
        let f = |inp: &[Tensor]| {
            let mut g = Graph::new();
            let ids: Vec<NodeId> = inp.iter().map(|t| g.leaf(t.clone()).unwrap()).collect();
            let mut stats = RunningStats::identity(2);
            let y = batch_norm(
                &mut g, ids[0], ids[1], ids[2], BnMode::Train, &mut stats, BN_MOMENTUM, BN_EPS,
            )
            .unwrap();
            let s = project(&mut g, y, &proj);
            g.scalar(s)
        };
        let expect = fd_grads(&f, &inputs, H);
        let mut g = Graph::new();
        let ids: Vec<NodeId> = inputs.iter().map(|t| g.leaf(t.clone()).unwrap()).collect();
        let mut stats = RunningStats::identity(2);
        let y = batch_norm(
            &mut g, ids[0], ids[1], ids[2], BnMode::Train, &mut stats, BN_MOMENTUM, BN_EPS,
        )
        .unwrap();
        let s = project(&mut g, y, &proj);
        let grads = g.grad(s, &ids).unwrap();
        for (got, want) in grads.iter().zip(&expect) {
            assert_rel(got, want, 1e-5, "batch_norm");
        }
    }

    // gumbel softmax with frozen noise.
    for _ in 0..POINTS {
        let logits = rand_generic(3, 5, &mut rng);
        let noise = ops::gumbel_noise(3, 5, &mut rng);
        let blocks = Arc::new(vec![(0usize, 2usize), (2, 3)]);
        let proj = rand_generic(3, 5, &mut rng);
        let f = |inp: &[Tensor]| {
            let mut g = Graph::new();
            let li = g.leaf(inp[0].clone()).unwrap();
            let y = gumbel_softmax(&mut g, li, blocks.clone(), 0.7, &noise).unwrap();
            let s = project(&mut g, y, &proj);
            g.scalar(s)
        };
        let expect = fd_grads(&f, &[logits.clone()], H);
        let mut g = Graph::new();
        let li = g.leaf(logits).unwrap();
        let y = gumbel_softmax(&mut g, li, blocks, 0.7, &noise).unwrap();
        let s = project(&mut g, y, &proj);
        let grads = g.grad(s, &[li]).unwrap();
        assert_rel(&grads[0], &expect[0], 1e-5, "gumbel_softmax");
    }

    // Full MLP parameter gradients (matmul/bias/activation chains).
    for _ in 0..POINTS {
        let dims = [3usize, 5, 4, 1];
        let x = rand_generic(3, dims[0], &mut rng);
        let mut params: Vec<Tensor> = Vec::new();
        for w in dims.windows(2) {
            params.push(rand_generic(w[0], w[1], &mut rng));
            params.push(rand_generic(1, w[1], &mut rng));
        }
        let run = |g: &mut Graph, x: NodeId, ids: &[NodeId]| -> NodeId {
            let mut h = x;
            for layer in 0..3 {
                let y = linear(g, h, ids[2 * layer], ids[2 * layer + 1]).unwrap();
                h = if layer < 2 {
                    g.leaky_relu(y, 0.01).unwrap()
                } else {
                    y
                };
            }
            mean_all(g, h).unwrap()
        };
        let xc = x.clone();
        let f = |inp: &[Tensor]| {
            let mut g = Graph::new();
            let xi = g.leaf(xc.clone()).unwrap();
            let ids: Vec<NodeId> = inp.iter().map(|t| g.leaf(t.clone()).unwrap()).collect();
            let s = run(&mut g, xi, &ids);
            g.scalar(s)
        };
        let expect = fd_grads(&f, &params, H);
        let mut g = Graph::new();
        let xi = g.leaf(x).unwrap();
        let ids: Vec<NodeId> = params.iter().map(|t| g.leaf(t.clone()).unwrap()).collect();
        let s = run(&mut g, xi, &ids);
        let grads = g.grad(s, &ids).unwrap();
        for (got, want) in grads.iter().zip(&expect) {
            assert_rel(got, want, 1e-5, "mlp");
        }
    }

    // Loss terms: privacy (both variants) and fairness w.r.t. the fake
    // batch, plus the combined objective.
    for point in 0..POINTS {
        let real = rand_generic(4, 3, &mut rng).map(|v| v.abs() % 1.0);
        let d: Vec<f64> = (0..4).map(|_| 0.5 + rng.gen::<f64>()).collect();
        let fake = rand_generic(4, 3, &mut rng).map(|v| v.abs() % 1.0);
        let variant = if point % 2 == 0 {
            PrivacyVariant::PairedByIndex
        } else {
            PrivacyVariant::NearestNeighbor
        };
        let lw = LossWeights {
            lambda_privacy: 0.7,
            privacy_variant: variant,
            ..LossWeights::default()
        };
        let f = |inp: &[Tensor]| {
            let mut g = Graph::new();
            let fk = g.leaf(inp[0].clone()).unwrap();
            let batch = PrivacyBatch {
                real: &real,
                distances: &d,
            };
            let node = losses::privacy_loss(&mut g, fk, &batch, &lw).unwrap();
            g.scalar(node)
        };
        let expect = fd_grads(&f, &[fake.clone()], 1e-6);
        let mut g = Graph::new();
        let fk = g.leaf(fake).unwrap();
        let batch = PrivacyBatch {
            real: &real,
            distances: &d,
        };
        let node = losses::privacy_loss(&mut g, fk, &batch, &lw).unwrap();
        let grads = g.grad(node, &[fk]).unwrap();
        assert_rel(&grads[0], &expect[0], 1e-5, "privacy_loss");
    }

    let fb = FairnessBindings {
        privileged_col: 1,
        favorable_col: 3,
    };
    for _ in 0..POINTS {
        let soft = rand_generic(5, 4, &mut rng).map(|v| 1.0 / (1.0 + (-v).exp()));
        let lw = LossWeights::default();
        let f = |inp: &[Tensor]| {
            let mut g = Graph::new();
            let fk = g.leaf(inp[0].clone()).unwrap();
            let node = losses::fairness_loss(&mut g, fk, &fb, &lw).unwrap();
            g.scalar(node)
        };
        let expect = fd_grads(&f, &[soft.clone()], 1e-6);
        let mut g = Graph::new();
        let fk = g.leaf(soft).unwrap();
        let node = losses::fairness_loss(&mut g, fk, &fb, &lw).unwrap();
        let grads = g.grad(node, &[fk]).unwrap();
        assert_rel(&grads[0], &expect[0], 1e-5, "fairness_loss");
    }

    // Critic loss (score terms + penalty) w.r.t. critic parameters.
    for _ in 0..40 {
        let net = CriticNet::init(
            CriticArch {
                input_width: 3,
                hidden_dims: vec![4],
            },
            rng.gen(),
        );
        let real = rand_generic(4, 3, &mut rng);
        let fake = rand_generic(4, 3, &mut rng);
        let e = standard_uniform(4, 1, &mut rng);
        let params: Vec<Tensor> = net.store.params.iter().map(|p| p.value.clone()).collect();
        let f = |inp: &[Tensor]| {
            let mut net = net.clone();
            for (entry, t) in net.store.params.iter_mut().zip(inp) {
                entry.value = t.clone();
            }
            let mut g = Graph::new();
            let binding = net.bind(&mut g).unwrap();
            let r = g.leaf(real.clone()).unwrap();
            let fk = g.leaf(fake.clone()).unwrap();
            let terms = losses::critic_loss(&mut g, &net, &binding, r, fk, &e, 10.0).unwrap();
            g.scalar(terms.loss)
        };
        let expect = fd_grads(&f, &params, H);
        let mut g = Graph::new();
        let binding = net.bind(&mut g).unwrap();
        let r = g.leaf(real.clone()).unwrap();
        let fk = g.leaf(fake.clone()).unwrap();
        let terms = losses::critic_loss(&mut g, &net, &binding, r, fk, &e, 10.0).unwrap();
        let grads = g.grad(terms.loss, &binding.ids).unwrap();
        for (got, want) in grads.iter().zip(&expect) {
            assert_rel(got, want, 1e-4, "critic_loss params");
        }
    }

    // Gradient penalty: analytic linear-critic case to 1e-10.
    {
        let x = rand_generic(6, 2, &mut rng);
        let run = |a: Vec<f64>| -> (f64, Tensor) {
            let mut g = Graph::new();
            let w = g.leaf(Tensor::from_vec(2, 1, a)).unwrap();
            let b = g.leaf(Tensor::zeros(1, 1)).unwrap();
            let xi = g.leaf(x.clone()).unwrap();
            let p = gradient_penalty(&mut g, xi, |g, x| linear(g, x, w, b)).unwrap();
            let grads = g.grad(p, &[w]).unwrap();
            (g.scalar(p), grads[0].clone())
        };
        let (p_unit, _) = run(vec![0.6, 0.8]);
        assert!(p_unit.abs() <= 1e-10, "unit-norm penalty {p_unit}");
        let (p, ga) = run(vec![3.0, 4.0]);
        assert!((p - 16.0).abs() <= 1e-10);
        assert!((ga.get(0, 0) - 4.8).abs() <= 1e-10);
        assert!((ga.get(1, 0) - 6.4).abs() <= 1e-10);
    }

    // Gradient penalty parameter-gradients on random leaky critics.
    for _ in 0..POINTS {
        let (n, din, hidden) = (4, 3, 5);
        let x = rand_generic(n, din, &mut rng);
        let params = vec![
            rand_generic(din, hidden, &mut rng),
            rand_generic(1, hidden, &mut rng),
            rand_generic(hidden, 1, &mut rng),
            rand_generic(1, 1, &mut rng),
        ];
        let xc = x.clone();
        let f = |inp: &[Tensor]| {
            let mut g = Graph::new();
            let ids: Vec<NodeId> = inp.iter().map(|t| g.leaf(t.clone()).unwrap()).collect();
            let xi = g.leaf(xc.clone()).unwrap();
            let p = gradient_penalty(&mut g, xi, |g, x| {
                let h = linear(g, x, ids[0], ids[1])?;
                let a = g.leaky_relu(h, 0.01)?;
                linear(g, a, ids[2], ids[3])
            })
            .unwrap();
            g.scalar(p)
        };
        let expect = fd_grads(&f, &params, H);
        let mut g = Graph::new();
        let ids: Vec<NodeId> = params.iter().map(|t| g.leaf(t.clone()).unwrap()).collect();
        let xi = g.leaf(x).unwrap();
        let p = gradient_penalty(&mut g, xi, |g, x| {
            let h = linear(g, x, ids[0], ids[1])?;
            let a = g.leaky_relu(h, 0.01)?;
            linear(g, a, ids[2], ids[3])
        })
        .unwrap();
        let grads = g.grad(p, &ids).unwrap();
        for (got, want) in grads.iter().zip(&expect) {
            assert_rel(got, want, 1e-4, "gradient penalty params");
        }
    }

    println!(
        "ACCEPTANCE 1 (gradient oracle suite): PASS ({:.1}s)",
        start.elapsed().as_secs_f64()
    );
}

// ---------------------------------------------------------------------
// criterion 2: metric oracle suite
// ---------------------------------------------------------------------

fn brute_force_identifiability(real: &Tensor, synth: &Tensor, w: &[f64]) -> f64 {
    let dist_sq = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .zip(w)
            .map(|((x, y), wc)| {
                let d = wc * (x - y);
                d * d
            })
            .sum::<f64>()
    };
    let n = real.rows();
    let mut hits = 0usize;
    for i in 0..n {
        let mut d_i = f64::INFINITY;
        for j in 0..n {
            if i != j {
                d_i = d_i.min(dist_sq(real.row(i), real.row(j)));
            }
        }
        let mut d_hat = f64::INFINITY;
        for j in 0..synth.rows() {
            d_hat = d_hat.min(dist_sq(real.row(i), synth.row(j)));
        }
        if d_hat.sqrt() < d_i.sqrt() {
            hits += 1;
        }
    }
    hits as f64 / n as f64
}

#[test]
fn acceptance_2_metric_oracles() {
    let start = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(0xC2);

    // Identifiability vs exact brute force on 50 random instances.
    for trial in 0..50 {
        let (n_real, n_synth, width) = if trial < 2 {
            (2000, 1000, 64)
        } else {
            (
                20 + rng.gen_range(0..400),
                20 + rng.gen_range(0..400),
                2 + rng.gen_range(0..16),
            )
        };
        let mut real = standard_normal(n_real, width, &mut rng);
        // A few instances with duplicated real rows exercise the strict
        // inequality at d_i = 0.
        if trial % 7 == 0 && n_real > 4 {
            let dup = real.row(0).to_vec();
            for (c, v) in dup.iter().enumerate() {
                real.set(1, c, *v);
            }
        }
        let synth = match trial % 3 {
            0 => standard_normal(n_synth, width, &mut rng),
            1 => real.clone(), // exact copy
            _ => standard_normal(n_synth, width, &mut rng).scale(0.5),
        };
        let w: Vec<f64> = (0..width).map(|_| 0.5 + rng.gen::<f64>()).collect();
        let fast = identifiability(&real, &synth, &w, None).unwrap();
        let brute = brute_force_identifiability(&real, &synth, &w);
        assert_eq!(fast, brute, "identifiability trial {trial}");
    }

    // dp_gap vs direct counting on 100 random tables.
    let schema = TableSchema::new(
        vec![
            ("x".into(), ColumnKind::Numeric),
            ("s".into(), ColumnKind::Categorical),
            ("y".into(), ColumnKind::Categorical),
        ],
        ("s".into(), "priv".into()),
        ("y".into(), "good".into()),
    )
    .unwrap();
    for trial in 0..100 {
        let n = 5 + rng.gen_range(0..200);
        let rows: Vec<Vec<Cell>> = (0..n)
            .map(|_| {
                vec![
                    Cell::Number(rng.gen()),
                    Cell::Text(
                        ["priv", "other", "third"][rng.gen_range(0..3)].to_string(),
                    ),
                    Cell::Text(["good", "bad"][rng.gen_range(0..2)].to_string()),
                ]
            })
            .collect();
        let table = RawTable {
            schema: schema.clone(),
            rows,
        };
        // Direct-counting oracle, independent of group_counts.
        let mut s1 = 0usize;
        let mut s1y1 = 0usize;
        let mut s0 = 0usize;
        let mut s0y1 = 0usize;
        for row in &table.rows {
            let is_priv = row[1] == Cell::Text("priv".into());
            let is_good = row[2] == Cell::Text("good".into());
            if is_priv {
                s1 += 1;
                s1y1 += usize::from(is_good);
            } else {
                s0 += 1;
                s0y1 += usize::from(is_good);
            }
        }
        let r1 = if s1 > 0 { s1y1 as f64 / s1 as f64 } else { 0.0 };
        let r0 = if s0 > 0 { s0y1 as f64 / s0 as f64 } else { 0.0 };
        let expect = (r1 - r0).abs();
        let got = dp_gap(&table).gap;
        assert_eq!(got, expect, "dp_gap trial {trial}");
        assert!((0.0..=1.0).contains(&got));
        let counts = group_counts(&table);
        assert_eq!(counts.1 + counts.3, n);
    }

    // AUC rank-sum vs trapezoidal integration, ties included.
    for trial in 0..100 {
        let n = 20 + rng.gen_range(0..100);
        let granularity = 3 + rng.gen_range(0..20);
        let scores: Vec<f64> = (0..n)
            .map(|_| rng.gen_range(0..granularity) as f64 / granularity as f64)
            .collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
            continue;
        }
        let fast = auc_roc(&scores, &labels);
        let trapezoid = {
            let n_pos = labels.iter().filter(|&&l| l).count() as f64;
            let n_neg = labels.len() as f64 - n_pos;
            let mut order: Vec<usize> = (0..scores.len()).collect();
            order.sort_unstable_by(|&a, &b| scores[b].total_cmp(&scores[a]));
            let mut auc = 0.0;
            let (mut tp, mut fp) = (0.0f64, 0.0f64);
            let (mut prev_tpr, mut prev_fpr) = (0.0f64, 0.0f64);
            let mut k = 0usize;
            while k < order.len() {
                let mut end = k + 1;
                while end < order.len() && scores[order[end]] == scores[order[k]] {
                    end += 1;
                }
                for &idx in &order[k..end] {
                    if labels[idx] {
                        tp += 1.0;
                    } else {
                        fp += 1.0;
                    }
                }
                let tpr = tp / n_pos;
                let fpr = fp / n_neg;
                auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
                prev_tpr = tpr;
                prev_fpr = fpr;
                k = end;
            }
            auc
        };
        assert!(
            (fast - trapezoid).abs() < 1e-9,
            "auc trial {trial}: {fast} vs {trapezoid}"
        );
    }

    println!(
        "ACCEPTANCE 2 (metric oracle suite): PASS ({:.1}s)",
        start.elapsed().as_secs_f64()
    );
}

// ---------------------------------------------------------------------
// criterion 3: ablation identity
// ---------------------------------------------------------------------

fn cluster_table(n: usize, seed: u64) -> RawTable {
    let schema = TableSchema::new(
        vec![
            ("x0".into(), ColumnKind::Numeric),
            ("x1".into(), ColumnKind::Numeric),
            ("s".into(), ColumnKind::Categorical),
            ("y".into(), ColumnKind::Categorical),
        ],
        ("s".into(), "a".into()),
        ("y".into(), "pos".into()),
    )
    .unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|i| {
            let cluster = i % 2 == 0;
            let (cx, cy) = if cluster { (0.25, 0.30) } else { (0.75, 0.70) };
            vec![
                Cell::Number(cx + 0.05 * (rng.gen::<f64>() - 0.5)),
                Cell::Number(cy + 0.05 * (rng.gen::<f64>() - 0.5)),
                Cell::Text(if rng.gen_bool(0.5) { "a" } else { "b" }.into()),
                Cell::Text(if rng.gen_bool(0.5) { "pos" } else { "neg" }.into()),
            ]
        })
        .collect();
    RawTable { schema, rows }
}

fn prepare(
    table: &RawTable,
) -> (TransformModel, DataMatrix, losses::PrivacyReference) {
    let model = transform::fit(table).unwrap();
    let matrix = transform::encode(table, &model).unwrap();
    let w = feature_weights(&matrix.to_tensor(), FeatureWeighting::Uniform);
    let privacy = precompute_privacy_reference(&matrix.to_tensor(), &w).unwrap();
    (model, matrix, privacy)
}

fn checkpoint_bytes(cp: &fairsynth::checkpoint::Checkpoint) -> Vec<u8> {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cp.pfw");
    save_checkpoint(cp, &path).unwrap();
    std::fs::read(&path).unwrap()
}

#[test]
fn acceptance_3_ablation_identity() {
    let start = Instant::now();
    // 1k-row toy; 3 generator steps per epoch at batch 64 with
    // n_critic 4, so 17 epochs cover 51 generator steps.
    let table = cluster_table(1000, 0xC3);
    let (model, matrix, privacy) = prepare(&table);
    let epochs = 17;

    let base = TrainConfig {
        epochs,
        batch_size: 64,
        n_critic: 4,
        seed: 33,
        noise_dim: 8,
        generator_hidden: vec![16, 16],
        critic_hidden: vec![16, 16],
        deterministic: true,
        ..TrainConfig::default()
    };

    let mut zero_weights = base.clone();
    zero_weights.pf_start = Some(0);
    zero_weights.pf_end = Some(epochs);
    zero_weights.weights.lambda_privacy = 0.0;
    zero_weights.weights.lambda_fairness = 0.0;

    let mut plain = base;
    plain.pf_start = Some(epochs);
    plain.pf_end = Some(epochs);

    let (cp_a, log_a) =
        trainer::train_epochs(zero_weights, model.clone(), &matrix, &privacy, epochs, |_| {})
            .unwrap();
    let (cp_b, log_b) =
        trainer::train_epochs(plain, model, &matrix, &privacy, epochs, |_| {}).unwrap();

    assert!(cp_a.global_step >= 50, "covered {} steps", cp_a.global_step);
    assert_eq!(cp_a.generator, cp_b.generator, "generator trajectories differ");
    assert_eq!(cp_a.critic, cp_b.critic, "critic trajectories differ");
    for (ra, rb) in log_a.iter().zip(&log_b) {
        assert_eq!(ra.critic_loss, rb.critic_loss);
        assert_eq!(ra.adv_loss, rb.adv_loss);
        assert_eq!(ra.gradient_penalty, rb.gradient_penalty);
    }

    println!(
        "ACCEPTANCE 3 (ablation identity, {} steps): PASS ({:.1}s)",
        cp_a.global_step,
        start.elapsed().as_secs_f64()
    );
}

// ---------------------------------------------------------------------
// criterion 4: transform round trip on the four dataset shapes
// ---------------------------------------------------------------------

fn shaped_table(
    name: &str,
    n_numeric: usize,
    cat_cards: &[usize],
    rows: usize,
    seed: u64,
) -> RawTable {
    let mut columns: Vec<(String, ColumnKind)> = Vec::new();
    for i in 0..n_numeric {
        columns.push((format!("{name}_num{i}"), ColumnKind::Numeric));
    }
    for (i, _) in cat_cards.iter().enumerate() {
        columns.push((format!("{name}_cat{i}"), ColumnKind::Categorical));
    }
    let sensitive_col = format!("{name}_cat{}", cat_cards.len() - 2);
    let target_col = format!("{name}_cat{}", cat_cards.len() - 1);
    let schema = TableSchema::new(
        columns,
        (sensitive_col, "v0".into()),
        (target_col, "v1".into()),
    )
    .unwrap();

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let rows = (0..rows)
        .map(|_| {
            let mut row: Vec<Cell> = Vec::new();
            for i in 0..n_numeric {
                // Mix of heavy-tailed, discrete-ish, and uniform columns.
                let v = match i % 3 {
                    0 => rng.gen::<f64>() * 1e4,
                    1 => rng.gen_range(0..40) as f64,
                    _ => rng.gen::<f64>(),
                };
                row.push(Cell::Number(v));
            }
            for &card in cat_cards {
                row.push(Cell::Text(format!("v{}", rng.gen_range(0..card))));
            }
            row
        })
        .collect();
    RawTable { schema, rows }
}

#[test]
fn acceptance_4_transform_round_trip() {
    let start = Instant::now();
    // Column shapes of the four evaluation datasets:
    // (numeric count, categorical cardinalities).
    let shapes: [(&str, usize, Vec<usize>); 4] = [
        ("adult", 6, vec![9, 16, 7, 15, 6, 5, 42, 2, 2]),
        ("propublica", 4, vec![3, 4, 2, 5, 6, 3, 4, 2, 3, 5, 2, 2]),
        ("bank", 6, vec![12, 3, 4, 2, 2, 2, 3, 4, 12, 2, 2]),
        ("law", 5, vec![5, 2, 2]),
    ];

    for (shape_i, (name, n_numeric, cards)) in shapes.iter().enumerate() {
        let table = shaped_table(name, *n_numeric, cards, 400, 0xC4 + shape_i as u64);
        let model = transform::fit(&table).unwrap();
        let encoded = transform::encode(&table, &model).unwrap();
        encoded.validate(&model, true).unwrap();
        let decoded = transform::decode(&encoded, &model).unwrap();

        for (orig, dec) in table.rows.iter().zip(decoded.rows.iter()) {
            for (ci, (col, kind)) in model.schema.columns.iter().enumerate() {
                match kind {
                    ColumnKind::Categorical => {
                        assert_eq!(orig[ci], dec[ci], "{col} categorical mismatch");
                    }
                    ColumnKind::Numeric => {
                        let x = orig[ci].as_number().unwrap();
                        let y = dec[ci].as_number().unwrap();
                        let q = model
                            .quantile_maps
                            .iter()
                            .find(|q| &q.column == col)
                            .unwrap();
                        let sv = &q.sorted_values;
                        let rank_low = sv.partition_point(|&v| v < x);
                        let rank_high = sv.partition_point(|&v| v <= x);
                        let gap_prev = if rank_low > 0 { x - sv[rank_low - 1] } else { 0.0 };
                        let gap_next = if rank_high < sv.len() {
                            sv[rank_high] - x
                        } else {
                            0.0
                        };
                        let step = gap_prev.max(gap_next) + 1e-9;
                        assert!(
                            (x - y).abs() <= step,
                            "{col}: {x} decoded to {y}, quantile step {step}"
                        );
                    }
                }
            }
        }

        // Generated tables from a fresh (untrained) generator always
        // schema-validate: vocab membership, one-hot blocks, numeric
        // range.
        let gen_arch = GeneratorArch::from_transform_with(&model, 8, vec![16], 0.2);
        let critic_arch = CriticArch {
            input_width: model.encoded_width,
            hidden_dims: vec![8],
        };
        let cp = fairsynth::checkpoint::Checkpoint {
            transform: model.clone(),
            generator_arch: gen_arch.clone(),
            critic_arch: critic_arch.clone(),
            generator: GeneratorNet::init(gen_arch, 0xC4 + shape_i as u64).store,
            critic: CriticNet::init(critic_arch, 1).store,
            config: TrainConfig::default(),
            epoch: 0,
            global_step: 0,
            train_rows: table.n_rows(),
            rng: trainer::RngState::capture(&ChaCha12Rng::seed_from_u64(0)),
        };
        let synth = fairsynth::synth::generate(&cp, 100, 7).unwrap();
        assert_eq!(synth.n_rows(), 100);
        let re_encoded = transform::encode(&synth, &model).unwrap();
        re_encoded.validate(&model, true).unwrap();
    }

    println!(
        "ACCEPTANCE 4 (transform round trip, 4 schema shapes): PASS ({:.1}s)",
        start.elapsed().as_secs_f64()
    );
}

// ---------------------------------------------------------------------
// criterion 5: toy-distribution sanity + privacy hinge displacement
// ---------------------------------------------------------------------

fn mean_real_to_synth_nn(real: &Tensor, synth: &Tensor) -> f64 {
    let mut total = 0.0;
    for i in 0..real.rows() {
        let mut best = f64::INFINITY;
        for j in 0..synth.rows() {
            let mut acc = 0.0;
            for c in 0..real.cols() {
                let d = real.get(i, c) - synth.get(j, c);
                acc += d * d;
            }
            best = best.min(acc);
        }
        total += best.sqrt();
    }
    total / real.rows() as f64
}

#[test]
fn acceptance_5_toy_distribution_and_privacy_hinge() {
    let start = Instant::now();
    let table = cluster_table(4000, 0xC5);
    let (model, matrix, privacy) = prepare(&table);

    // 4000 rows at batch 128 with n_critic 4 gives 6 generator steps per
    // epoch; 500 epochs cover 3000 steps.
    let epochs = 500;
    let config = |lambda_p: f64| TrainConfig {
        epochs,
        batch_size: 128,
        n_critic: 4,
        seed: 0xC5,
        noise_dim: 16,
        generator_hidden: vec![32, 32],
        critic_hidden: vec![32, 32],
        pf_start: Some(0),
        pf_end: Some(epochs),
        weights: LossWeights {
            lambda_privacy: lambda_p,
            lambda_fairness: 0.0,
            privacy_variant: PrivacyVariant::NearestNeighbor,
            ..LossWeights::default()
        },
        ..TrainConfig::default()
    };

    let (cp_plain, log) =
        trainer::train_epochs(config(0.0), model.clone(), &matrix, &privacy, epochs, |_| {})
            .unwrap();
    assert_eq!(cp_plain.global_step, 3000);
    assert!(log.iter().all(|r| r.critic_loss.is_finite()));

    // Cluster means of the generated numerics against the real ones.
    let synth = fairsynth::synth::generate(&cp_plain, 4000, 99).unwrap();
    let centers = [(0.25f64, 0.30f64), (0.75, 0.70)];
    let mut sums = [[0.0f64; 2]; 2];
    let mut counts = [0usize; 2];
    for row in &synth.rows {
        let x0 = row[0].as_number().unwrap();
        let x1 = row[1].as_number().unwrap();
        let pick = centers
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                let da = (x0 - a.0).powi(2) + (x1 - a.1).powi(2);
                let db = (x0 - b.0).powi(2) + (x1 - b.1).powi(2);
                da.total_cmp(&db)
            })
            .unwrap()
            .0;
        sums[pick][0] += x0;
        sums[pick][1] += x1;
        counts[pick] += 1;
    }
    // Real per-cluster means from the construction.
    let mut real_sums = [[0.0f64; 2]; 2];
    let mut real_counts = [0usize; 2];
    for row in &table.rows {
        let x0 = row[0].as_number().unwrap();
        let x1 = row[1].as_number().unwrap();
        let pick = usize::from((x0 - 0.25).abs() > (x0 - 0.75).abs());
        real_sums[pick][0] += x0;
        real_sums[pick][1] += x1;
        real_counts[pick] += 1;
    }
    for cluster in 0..2 {
        assert!(
            counts[cluster] > 0,
            "cluster {cluster} received no synthetic points (mode collapse)"
        );
        for d in 0..2 {
            let synth_mean = sums[cluster][d] / counts[cluster] as f64;
            let real_mean = real_sums[cluster][d] / real_counts[cluster] as f64;
            assert!(
                (synth_mean - real_mean).abs() < 0.15,
                "cluster {cluster} dim {d}: synth {synth_mean:.3} vs real {real_mean:.3}"
            );
        }
    }

    // Privacy hinge: lambda_p = 0.5 strictly increases the mean
    // real-to-synthetic nearest-neighbor distance from the same seed.
    let (cp_hinge, _) =
        trainer::train_epochs(config(0.5), model.clone(), &matrix, &privacy, epochs, |_| {})
            .unwrap();
    let synth_plain = fairsynth::synth::generate_matrix(&cp_plain, 2000, 7).unwrap();
    let synth_hinge = fairsynth::synth::generate_matrix(&cp_hinge, 2000, 7).unwrap();
    let real_t = matrix.to_tensor();
    let nn_plain = mean_real_to_synth_nn(&real_t, &synth_plain.to_tensor());
    let nn_hinge = mean_real_to_synth_nn(&real_t, &synth_hinge.to_tensor());
    assert!(
        nn_hinge > nn_plain,
        "privacy hinge did not push synthetic data away: {nn_hinge:.5} vs {nn_plain:.5}"
    );

    println!(
        "ACCEPTANCE 5 (toy distribution + privacy hinge): PASS \
         (nn {nn_plain:.4} -> {nn_hinge:.4}, {:.1}s)",
        start.elapsed().as_secs_f64()
    );
}

// ---------------------------------------------------------------------
// criterion 6: fairness steering
// ---------------------------------------------------------------------

fn biased_table(n_per_group: usize, seed: u64) -> RawTable {
    let schema = TableSchema::new(
        vec![
            ("x".into(), ColumnKind::Numeric),
            ("s".into(), ColumnKind::Categorical),
            ("y".into(), ColumnKind::Categorical),
        ],
        ("s".into(), "a".into()),
        ("y".into(), "pos".into()),
    )
    .unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(2 * n_per_group);
    // Deterministic label counts: 60% favorable in the privileged group,
    // 20% in the other, a DP gap of 0.4 by construction.
    for group in 0..2 {
        let favorable = if group == 0 {
            (n_per_group * 6) / 10
        } else {
            n_per_group / 5
        };
        for i in 0..n_per_group {
            rows.push(vec![
                Cell::Number(rng.gen()),
                Cell::Text(if group == 0 { "a" } else { "b" }.into()),
                Cell::Text(if i < favorable { "pos" } else { "neg" }.into()),
            ]);
        }
    }
    RawTable { schema, rows }
}

#[test]
fn acceptance_6_fairness_steering() {
    let start = Instant::now();
    let table = biased_table(1000, 0xC6);
    assert!((dp_gap(&table).gap - 0.4).abs() < 1e-12);
    let (model, matrix, privacy) = prepare(&table);

    // 2000 rows at batch 128 / n_critic 4 gives 3 generator steps per
    // epoch; 600 epochs = 1800 generator steps.
    let epochs = 600;
    let config = |lambda_f: f64| TrainConfig {
        epochs,
        batch_size: 128,
        n_critic: 4,
        seed: 0xC6,
        noise_dim: 16,
        generator_hidden: vec![32, 32],
        critic_hidden: vec![32, 32],
        pf_start: Some(epochs / 4),
        pf_end: Some(epochs),
        weights: LossWeights {
            lambda_privacy: 0.0,
            lambda_fairness: lambda_f,
            ..LossWeights::default()
        },
        ..TrainConfig::default()
    };

    let (cp_fair, _) =
        trainer::train_epochs(config(1.0), model.clone(), &matrix, &privacy, epochs, |_| {})
            .unwrap();
    let (cp_unfair, _) =
        trainer::train_epochs(config(0.0), model.clone(), &matrix, &privacy, epochs, |_| {})
            .unwrap();

    let synth_fair = fairsynth::synth::generate(&cp_fair, 4000, 11).unwrap();
    let synth_unfair = fairsynth::synth::generate(&cp_unfair, 4000, 11).unwrap();
    let gap_fair = dp_gap(&synth_fair).gap;
    let gap_unfair = dp_gap(&synth_unfair).gap;

    assert!(
        gap_fair <= 0.1,
        "fairness-steered run kept a dp gap of {gap_fair:.3}"
    );
    assert!(
        gap_unfair >= 0.25,
        "unconstrained run failed to learn the bias: gap {gap_unfair:.3}"
    );

    println!(
        "ACCEPTANCE 6 (fairness steering): PASS (gap {gap_unfair:.3} -> {gap_fair:.3}, {:.1}s)",
        start.elapsed().as_secs_f64()
    );
}

// ---------------------------------------------------------------------
// criterion 8 (fault-injection half): the non-finite guard
// ---------------------------------------------------------------------

#[test]
fn acceptance_8_nan_guard_fault_injection() {
    let start = Instant::now();
    let table = cluster_table(600, 0xC8);
    let (model, matrix, privacy) = prepare(&table);
    let config = TrainConfig {
        epochs: 3,
        batch_size: 32,
        n_critic: 4,
        seed: 1,
        noise_dim: 8,
        generator_hidden: vec![16],
        critic_hidden: vec![16],
        deterministic: true,
        inject_nan_at_step: Some(2),
        ..TrainConfig::default()
    };

    let mut trainer = Trainer::new(config, model).unwrap();
    let tensor = matrix.to_tensor();
    let mut fault = None;
    while trainer.epoch() < 3 {
        match trainer.run_epoch(&tensor, &privacy) {
            Ok(record) => assert!(record.all_finite()),
            Err(e) => {
                fault = Some(e);
                break;
            }
        }
    }
    let fault = fault.expect("the poisoned parameter must trip the guard");
    assert!(matches!(fault, Error::NonFinite { .. }));

    // A diagnostic checkpoint of the pre-corruption state is writable
    // and loads back.
    let dir = tempfile::tempdir().unwrap();
    let diag = dir.path().join("diagnostic.pfw");
    save_checkpoint(&trainer.to_checkpoint(), &diag).unwrap();
    let reloaded = fairsynth::checkpoint::load_checkpoint(&diag).unwrap();
    assert_eq!(reloaded.epoch, trainer.epoch());

    println!(
        "ACCEPTANCE 8 (non-finite guard, fault injection): PASS ({:.1}s)",
        start.elapsed().as_secs_f64()
    );
}

// ---------------------------------------------------------------------
// criterion 9: checkpoint / resume equivalence
// ---------------------------------------------------------------------

#[test]
fn acceptance_9_checkpoint_resume() {
    let start = Instant::now();
    let table = cluster_table(800, 0xC9);
    let (model, matrix, privacy) = prepare(&table);
    let config = TrainConfig {
        epochs: 6,
        batch_size: 32,
        n_critic: 4,
        seed: 77,
        noise_dim: 8,
        generator_hidden: vec![16, 16],
        critic_hidden: vec![16, 16],
        deterministic: true,
        ..TrainConfig::default()
    };

    let (full, _) =
        trainer::train_epochs(config.clone(), model.clone(), &matrix, &privacy, 6, |_| {})
            .unwrap();

    let (half, _) =
        trainer::train_epochs(config, model, &matrix, &privacy, 3, |_| {}).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("half.pfw");
    save_checkpoint(&half, &path).unwrap();

    // save -> load -> save is byte-identical.
    let reloaded = fairsynth::checkpoint::load_checkpoint(&path).unwrap();
    let path2 = dir.path().join("half2.pfw");
    save_checkpoint(&reloaded, &path2).unwrap();
    assert_eq!(
        std::fs::read(&path).unwrap(),
        std::fs::read(&path2).unwrap(),
        "save/load/save must be byte-identical"
    );

    // Resumed training reaches a bit-identical final checkpoint.
    let (resumed, _) = trainer::resume(reloaded, &matrix, &privacy, |_| {}).unwrap();
    assert_eq!(resumed.epoch, 6);
    assert_eq!(checkpoint_bytes(&full), checkpoint_bytes(&resumed));

    println!(
        "ACCEPTANCE 9 (checkpoint/resume equivalence): PASS ({:.1}s)",
        start.elapsed().as_secs_f64()
    );
}

// ---------------------------------------------------------------------
// criterion 7 + 8 (full run): Adult desk-scale reproduction, data-gated
// ---------------------------------------------------------------------

fn adult_csv_path() -> Option<std::path::PathBuf> {
    if let Ok(p) = std::env::var("ADULT_CSV") {
        let p = std::path::PathBuf::from(p);
        if p.exists() {
            return Some(p);
        }
    }
    let fallback = std::path::PathBuf::from("data/adult.csv");
    fallback.exists().then_some(fallback)
}

fn adult_schema() -> TableSchema {
    TableSchema::new(
        vec![
            ("age".into(), ColumnKind::Numeric),
            ("workclass".into(), ColumnKind::Categorical),
            ("fnlwgt".into(), ColumnKind::Numeric),
            ("education".into(), ColumnKind::Categorical),
            ("education-num".into(), ColumnKind::Numeric),
            ("marital-status".into(), ColumnKind::Categorical),
            ("occupation".into(), ColumnKind::Categorical),
            ("relationship".into(), ColumnKind::Categorical),
            ("race".into(), ColumnKind::Categorical),
            ("sex".into(), ColumnKind::Categorical),
            ("capital-gain".into(), ColumnKind::Numeric),
            ("capital-loss".into(), ColumnKind::Numeric),
            ("hours-per-week".into(), ColumnKind::Numeric),
            ("native-country".into(), ColumnKind::Categorical),
            ("income".into(), ColumnKind::Categorical),
        ],
        ("sex".into(), "Male".into()),
        ("income".into(), ">50K".into()),
    )
    .unwrap()
}

#[test]
#[ignore = "needs the Adult dataset: set ADULT_CSV or place data/adult.csv (~2h full run)"]
fn acceptance_7_adult_desk_scale_reproduction() {
    let start = Instant::now();
    let Some(path) = adult_csv_path() else {
        println!(
            "ACCEPTANCE 7 (Adult reproduction): SKIP — dataset not present; \
             set ADULT_CSV or place data/adult.csv (header: age,workclass,fnlwgt,...; \
             income values >50K / <=50K)"
        );
        return;
    };

    let schema = adult_schema();
    let loaded = fairsynth::schema::load_csv(&path, &schema, &[]).unwrap();
    println!(
        "adult: {} rows ({} dropped)",
        loaded.table.n_rows(),
        loaded.dropped_rows
    );
    let (train_table, test_table) = fairsynth::schema::split(
        &loaded.table,
        &SplitSpec {
            train_fraction: 0.9,
            seed: 0,
        },
    )
    .unwrap();

    let model = transform::fit(&train_table).unwrap();
    let matrix = transform::encode(&train_table, &model).unwrap();
    let tensor = matrix.to_tensor();
    let w = feature_weights(&tensor, FeatureWeighting::Uniform);
    let privacy = precompute_privacy_reference(&tensor, &w).unwrap();

    let config = |lambda_p: f64, lambda_f: f64| TrainConfig {
        epochs: 230,
        seed: 0,
        weights: LossWeights {
            lambda_privacy: lambda_p,
            lambda_fairness: lambda_f,
            privacy_variant: PrivacyVariant::NearestNeighbor,
            ..LossWeights::default()
        },
        ..TrainConfig::default()
    };

    // Criterion 8 (stability): the full run must finish with every log
    // record finite; run_epoch already faults otherwise, and we assert
    // the records again here.
    let (cp_pf, log_pf) = trainer::train_epochs(
        config(0.2, 1.0),
        model.clone(),
        &matrix,
        &privacy,
        230,
        |r| {
            if r.epoch % 10 == 0 {
                println!(
                    "pf epoch {:>3}: critic {:+.4} adv {:+.4} privacy {:.4} fairness {:.4}",
                    r.epoch, r.critic_loss, r.adv_loss, r.privacy_loss, r.fairness_loss
                );
            }
        },
    )
    .unwrap();
    assert!(log_pf.iter().all(|r| r.all_finite()), "non-finite log record");
    println!("ACCEPTANCE 8 (Adult stability, zero non-finite records): PASS");

    let (cp_plain, _) = trainer::train_epochs(
        config(0.0, 0.0),
        model.clone(),
        &matrix,
        &privacy,
        230,
        |_| {},
    )
    .unwrap();

    let cfg = EvalConfig {
        repetitions: 10,
        seed: 1,
        dataset: "adult".into(),
        model_id: "pf-l2".into(),
        ..EvalConfig::default()
    };
    let synth = fairsynth::synth::generate(&cp_pf, train_table.n_rows(), 2).unwrap();
    let report = evaluate_all(&train_table, &test_table, &synth, &cfg).unwrap();
    let synth_plain = fairsynth::synth::generate(&cp_plain, train_table.n_rows(), 2).unwrap();
    let report_plain = evaluate_all(&train_table, &test_table, &synth_plain, &cfg).unwrap();

    let u = report.utility.as_ref().expect("utility block");
    let b = report.real_baseline.as_ref().expect("baseline block");
    println!(
        "adult results: acc {:.4} f1 {:.4} auc {:.4} gap {:.4} ident {:.4} | baseline acc {:.4} | plain ident {:.4}",
        u.accuracy.mean,
        u.f1.mean,
        u.auc_roc.mean,
        report.dp_gap.mean,
        report.identifiability.mean,
        b.accuracy.mean,
        report_plain.identifiability.mean
    );

    // Table 4 ordering and tolerances.
    assert!(
        (u.accuracy.mean - 0.7577).abs() <= 0.05,
        "TSTR accuracy {:.4} outside 0.7577 +/- 0.05",
        u.accuracy.mean
    );
    assert!(
        (u.f1.mean - 0.4733).abs() <= 0.06,
        "TSTR F1 {:.4} outside 0.4733 +/- 0.06",
        u.f1.mean
    );
    assert!(
        report.dp_gap.mean <= 0.15,
        "dp gap {:.4} above 0.15",
        report.dp_gap.mean
    );
    assert!(
        report.identifiability.mean < report_plain.identifiability.mean,
        "identifiability {:.4} not below the plain adversarial baseline {:.4}",
        report.identifiability.mean,
        report_plain.identifiability.mean
    );
    assert!(
        (b.accuracy.mean - 0.8150).abs() <= 0.03,
        "real-baseline accuracy {:.4} outside 0.8150 +/- 0.03",
        b.accuracy.mean
    );

    println!(
        "ACCEPTANCE 7 (Adult desk-scale reproduction): PASS ({:.0}s)",
        start.elapsed().as_secs_f64()
    );
}
