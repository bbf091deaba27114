//! Diagnostic probe: for held-out positives and matched negatives, counts how
//! many sampled walk steps land on events containing 2 or 3 of the query
//! set's nodes. Verifies that the third-order co-occurrence signal survives
//! sampling before any training happens.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use setwalk_core::SamplerConfig;
use setwalk_core::eval::{DEFAULT_EVAL_SEED, NegativeSampler, prepare_example};
use setwalk_core::sampler::{compute_scores, mix_seed};
use setwalk_core::split::{SplitMode, split_dataset};
use setwalk_core::synth::{PlantedTriplesConfig, planted_triples};
use setwalk_core::train::build_walk_graph;

fn seed_hits(edge: &[u32], walksets: &[setwalk_core::WalkSet]) -> (usize, usize) {
    let (mut two, mut three) = (0usize, 0usize);
    for ws in walksets {
        for w in &ws.walks {
            for step in &w.steps {
                let n = edge.iter().filter(|u| step.nodes.contains(u)).count();
                if n == 2 {
                    two += 1;
                }
                if n >= 3 {
                    three += 1;
                }
            }
        }
    }
    (two, three)
}

fn main() {
    let cfg = PlantedTriplesConfig {
        n_triples: 4,
        bg_rate: 15,
        triple_rate: 15,
        extra_bg: 5,
        post_per_triple: 93,
        seed: 2024,
    };
    let g = planted_triples(&cfg);
    let split = split_dataset(&g, SplitMode::Transductive, 0).unwrap();
    let walk_graph = build_walk_graph(&g, &split, None).unwrap();
    let sampler_cfg = SamplerConfig {
        alpha: 0.0,
        walks_per_node: 8,
        walk_len: 3,
        ..SamplerConfig::default()
    };
    let scores = compute_scores(&walk_graph, &sampler_cfg).unwrap();
    let neg = NegativeSampler::new(&g);
    let k_max = g.max_edge_size();

    let (mut p2, mut p3, mut n2, mut n3, mut count) = (0, 0, 0, 0, 0);
    for (i, idx) in split.test.iter().take(40).enumerate() {
        let ev = &g.events()[*idx as usize];
        let pos = prepare_example(
            &walk_graph,
            &scores,
            &sampler_cfg,
            k_max,
            &ev.nodes,
            ev.time,
            mix_seed(DEFAULT_EVAL_SEED, &[2, i as u64]),
        );
        let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(DEFAULT_EVAL_SEED, &[1, i as u64]));
        let neg_edge = neg.generate_negative(&ev.nodes, 0.5, &mut rng).unwrap();
        let nex = prepare_example(
            &walk_graph,
            &scores,
            &sampler_cfg,
            k_max,
            &neg_edge,
            ev.time,
            mix_seed(DEFAULT_EVAL_SEED, &[3, i as u64]),
        );
        let (a, b) = seed_hits(&pos.edge, &pos.walksets);
        let (c, d) = seed_hits(&nex.edge, &nex.walksets);
        p2 += a;
        p3 += b;
        n2 += c;
        n3 += d;
        count += 1;
        if i < 6 {
            println!(
                "ex {i}: pos {:?} blocks2 {a} blocks3 {b} | neg {:?} blocks2 {c} blocks3 {d}",
                pos.edge, neg_edge
            );
        }
    }
    println!(
        "over {count} examples: pos avg 2-seed {:.2} 3-seed {:.2} | neg avg 2-seed {:.2} 3-seed {:.2}",
        p2 as f64 / count as f64,
        p3 as f64 / count as f64,
        n2 as f64 / count as f64,
        n3 as f64 / count as f64
    );
}
