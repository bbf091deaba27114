//! Diagnostic probe: extracts pooled representations from a freshly
//! initialized (untrained) encoder for held-out positives and matched
//! negatives, then fits a logistic regression on them. Shows whether the
//! planted third-order signal is linearly recoverable from the frozen
//! encoder, independent of end-to-end training dynamics.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use setwalk_core::SamplerConfig;
use setwalk_core::eval::{DEFAULT_EVAL_SEED, NegativeSampler, auc, prepare_example};
use setwalk_core::model::{ModelDims, ModelParams, RunMode, forward_example};
use setwalk_core::sampler::{compute_scores, mix_seed};
use setwalk_core::split::{SplitMode, split_dataset};
use setwalk_core::synth::{GroupCoverConfig, group_cover_stream};
use setwalk_core::train::build_walk_graph;

fn logistic_auc(feats: &[Vec<f64>], labels: &[f64]) -> f64 {
    let d = feats[0].len();
    let n = feats.len();
    // Standardize each feature.
    let mut mean = vec![0.0; d];
    let mut sd = vec![0.0; d];
    for f in feats {
        for (j, v) in f.iter().enumerate() {
            mean[j] += v / n as f64;
        }
    }
    for f in feats {
        for (j, v) in f.iter().enumerate() {
            sd[j] += (v - mean[j]).powi(2) / n as f64;
        }
    }
    for s in sd.iter_mut() {
        *s = s.sqrt().max(1e-12);
    }
    let x: Vec<Vec<f64>> = feats
        .iter()
        .map(|f| {
            f.iter()
                .enumerate()
                .map(|(j, v)| (v - mean[j]) / sd[j])
                .collect()
        })
        .collect();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let lr = 0.5;
    for _ in 0..3000 {
        let mut gw = vec![0.0; d];
        let mut gb = 0.0;
        for (xi, &yi) in x.iter().zip(labels) {
            let z: f64 = b + xi.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            let p = 1.0 / (1.0 + (-z).exp());
            let e = p - yi;
            for (g, a) in gw.iter_mut().zip(xi) {
                *g += e * a / n as f64;
            }
            gb += e / n as f64;
        }
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= lr * g;
        }
        b -= lr * gb;
    }
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for (xi, &yi) in x.iter().zip(labels) {
        let z: f64 = b + xi.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
        if yi > 0.5 {
            pos.push(z);
        } else {
            neg.push(z);
        }
    }
    auc(&pos, &neg)
}

fn main() {
    let cfg = GroupCoverConfig {
        n_groups: 5,
        planted_rate: 40,
        cover_events: 1200,
        post_per_group: 120,
        seed: 2024,
    };
    let g = group_cover_stream(&cfg);
    let split = split_dataset(&g, SplitMode::Transductive, 0).unwrap();
    let walk_graph = build_walk_graph(&g, &split, None).unwrap();
    let sampler_cfg = SamplerConfig {
        alpha: 0.0,
        walks_per_node: 8,
        walk_len: 3,
        ..SamplerConfig::default()
    };
    let scores = compute_scores(&walk_graph, &sampler_cfg).unwrap();
    let neg_sampler = NegativeSampler::new(&g);
    let k_max = g.max_edge_size();

    let mut dims = ModelDims::new(3, k_max, g.max_edge_size());
    dims.d_h = 16;
    dims.d_t = 8;
    dims.set_ff = 16;
    dims.token_ff = 8;
    dims.channel_ff = 16;
    dims.head_hidden = 16;
    dims.time_shift = walk_graph.min_time().unwrap_or(0.0);
    let span = walk_graph.max_time().unwrap_or(1.0) - dims.time_shift;
    dims.time_scale = if span > 0.0 { 1.0 / span } else { 1.0 };
    let ps = ModelParams::init(dims.clone(), 17).unwrap();

    let mut pooled_feats: Vec<Vec<f64>> = Vec::new();
    let mut member_feats: Vec<Vec<f64>> = Vec::new();
    let mut block3_counts: Vec<f64> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();

    for (i, idx) in split.test.iter().take(150).enumerate() {
        let ev = &g.events()[*idx as usize];
        let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(DEFAULT_EVAL_SEED, &[1, i as u64]));
        let neg_edge = neg_sampler
            .generate_negative(&ev.nodes, 0.5, &mut rng)
            .unwrap();
        for (edge, label, stream) in [(&ev.nodes, 1.0, 2u64), (&neg_edge, 0.0, 3u64)] {
            let input = prepare_example(
                &walk_graph,
                &scores,
                &sampler_cfg,
                k_max,
                edge,
                ev.time,
                mix_seed(DEFAULT_EVAL_SEED, &[stream, i as u64]),
            );
            let mut mode = RunMode::Eval;
            let (_, cache) = forward_example(&ps, &input, &mut mode);
            pooled_feats.push(cache.pooled().data.clone());
            let vecs = cache.backbone().member_vecs();
            let d_w = vecs[0].cols;
            let mut mean_vec = vec![0.0; d_w];
            for v in vecs {
                for (j, x) in v.data.iter().enumerate() {
                    mean_vec[j] += x / vecs.len() as f64;
                }
            }
            member_feats.push(mean_vec);
            let mut b3 = 0.0;
            for ws in &input.walksets {
                for w in &ws.walks {
                    for step in &w.steps {
                        if input.edge.iter().filter(|u| step.nodes.contains(u)).count() >= 3 {
                            b3 += 1.0;
                        }
                    }
                }
            }
            block3_counts.push(b3);
            labels.push(label);
        }
    }

    let (mut p3, mut n3) = (Vec::new(), Vec::new());
    for (c, l) in block3_counts.iter().zip(&labels) {
        if *l > 0.5 {
            p3.push(*c);
        } else {
            n3.push(*c);
        }
    }
    println!(
        "manual 3-seed-block count: auc {:.4} (pos mean {:.2}, neg mean {:.2})",
        auc(&p3, &n3),
        p3.iter().sum::<f64>() / p3.len() as f64,
        n3.iter().sum::<f64>() / n3.len() as f64
    );
    println!(
        "linear probe on pooled features: auc {:.4}",
        logistic_auc(&pooled_feats, &labels)
    );
    println!(
        "linear probe on mean member vec:  auc {:.4}",
        logistic_auc(&member_feats, &labels)
    );
}
