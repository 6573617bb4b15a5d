use fairsynth::diff::graph::Graph;
use fairsynth::diff::ops::{standard_normal, BnMode};
use fairsynth::eval::dp_gap;
use fairsynth::losses::{LossWeights, PrivacyVariant};
use fairsynth::networks::GeneratorNet;
use fairsynth::schema::{Cell, ColumnKind, RawTable, TableSchema};
use fairsynth::trainer::{self, feature_weights, precompute_privacy_reference, FeatureWeighting, TrainConfig};
use fairsynth::transform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn biased_table(n_per_group: usize, seed: u64) -> RawTable {
    let schema = TableSchema::new(
        vec![("x".into(), ColumnKind::Numeric), ("s".into(), ColumnKind::Categorical), ("y".into(), ColumnKind::Categorical)],
        ("s".into(), "a".into()), ("y".into(), "pos".into())).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for group in 0..2 {
        let favorable = if group == 0 { (n_per_group * 6) / 10 } else { n_per_group / 5 };
        for i in 0..n_per_group {
            rows.push(vec![Cell::Number(rng.gen()),
                Cell::Text(if group == 0 { "a" } else { "b" }.into()),
                Cell::Text(if i < favorable { "pos" } else { "neg" }.into())]);
        }
    }
    RawTable { schema, rows }
}

fn main() {
    let epochs: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let lambda_f: f64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let table = biased_table(1000, 0xC6);
    let model = transform::fit(&table).unwrap();
    let matrix = transform::encode(&table, &model).unwrap();
    let w = feature_weights(&matrix.to_tensor(), FeatureWeighting::Uniform);
    let privacy = precompute_privacy_reference(&matrix.to_tensor(), &w).unwrap();
    let config = TrainConfig {
        epochs, batch_size: 128, n_critic: 4, seed: 0xC6, noise_dim: 16,
        generator_hidden: vec![32, 32], critic_hidden: vec![32, 32],
        pf_start: Some(epochs / 4), pf_end: Some(epochs),
        weights: LossWeights { lambda_privacy: 0.0, lambda_fairness: lambda_f,
            privacy_variant: PrivacyVariant::NearestNeighbor, ..LossWeights::default() },
        ..TrainConfig::default()
    };
    let (cp, _) = trainer::train_epochs(config, model.clone(), &matrix, &privacy, epochs, |r| {
        if r.epoch % 25 == 0 { println!("epoch {:>4} critic {:+.4} adv {:+.4} fair {:.4}", r.epoch, r.critic_loss, r.adv_loss, r.fairness_loss); }
    }).unwrap();

    // argmax generation
    let synth_hard = fairsynth::synth::generate(&cp, 4000, 11).unwrap();
    println!("hard/argmax dp_gap: {:.4}", dp_gap(&synth_hard).gap);

    // gumbel-sampled generation: run train-mode forward, take argmax of sampled blocks
    let mut gen = GeneratorNet { arch: cp.generator_arch.clone(), store: cp.generator.clone() };
    let mut rng = ChaCha12Rng::seed_from_u64(999);
    let mut s_pos = [0usize; 2]; let mut s_tot = [0usize; 2];
    let s_span = model.span_of("s").unwrap();
    let y_span = model.span_of("y").unwrap();
    let priv_col = model.category_coordinate("s", "a").unwrap();
    let fav_col = model.category_coordinate("y", "pos").unwrap();
    for _ in 0..16 {
        let z = standard_normal(256, 16, &mut rng);
        let mut g = Graph::new();
        let binding = gen.bind(&mut g).unwrap();
        let out = gen.forward(&mut g, &binding, &z, BnMode::Train, Some(&mut rng)).unwrap();
        let v = g.value(out);
        for r in 0..256 {
            let row = v.row(r);
            let s_blk = &row[s_span.start..s_span.start + s_span.len];
            let y_blk = &row[y_span.start..y_span.start + y_span.len];
            let s_arg = s_span.start + s_blk.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            let y_arg = y_span.start + y_blk.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            let sg = usize::from(s_arg == priv_col);
            s_tot[sg] += 1;
            if y_arg == fav_col { s_pos[sg] += 1; }
        }
    }
    let r1 = s_pos[1] as f64 / s_tot[1].max(1) as f64;
    let r0 = s_pos[0] as f64 / s_tot[0].max(1) as f64;
    println!("gumbel-sampled dp_gap: {:.4} (r1 {:.3} n={} / r0 {:.3} n={})", (r1 - r0).abs(), r1, s_tot[1], r0, s_tot[0]);
}
