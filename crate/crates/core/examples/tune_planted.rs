//! Offline tuning harness for the planted-triples demonstration: trains the
//! full model and the pairwise-walk ablation on the same stream and prints
//! AUCs and wall times, so the demonstration settings can be chosen with
//! evidence. Run with `cargo run --release -p setwalk-core --example
//! tune_planted -- <n_groups> <planted_rate> <cover_events> <post_per_group> <epochs> <lr> <alpha> <dropout> <walks_per_node> <batch_size> <walk_len> <patience> <candidate_window>`.

use std::time::Instant;

use setwalk_core::SamplerConfig;
use setwalk_core::ablate::{AblationMode, run_ablation};
use setwalk_core::eval::DEFAULT_EVAL_SEED;
use setwalk_core::model::ModelDims;
use setwalk_core::split::{SplitMode, split_dataset};
use setwalk_core::synth::{GroupCoverConfig, group_cover_stream};
use setwalk_core::train::TrainConfig;

fn arg<T: std::str::FromStr>(args: &[String], i: usize, default: T) -> T {
    args.get(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let stream_cfg = GroupCoverConfig {
        n_groups: arg(&args, 1, 5),
        planted_rate: arg(&args, 2, 100),
        cover_events: arg(&args, 3, 3000),
        post_per_group: arg(&args, 4, 300),
        seed: 2024,
    };
    let epochs: usize = arg(&args, 5, 10);
    let lr: f64 = arg(&args, 6, 1e-3);
    let alpha: f64 = arg(&args, 7, 0.0);
    let dropout: f64 = arg(&args, 8, 0.1);
    let walks: usize = arg(&args, 9, 8);
    let batch: usize = arg(&args, 10, 64);
    let walk_len: usize = arg(&args, 11, 3);
    let patience: usize = arg(&args, 12, 5);
    let window: usize = arg(&args, 13, 0);

    let g = group_cover_stream(&stream_cfg);
    println!(
        "stream: {} events, {} nodes, pre {} / post {}",
        g.len(),
        g.node_count(),
        stream_cfg.pre_events(),
        g.len() - stream_cfg.pre_events()
    );
    let split = split_dataset(&g, SplitMode::Transductive, 0).unwrap();
    println!(
        "split: train {} val {} test {}",
        split.train.len(),
        split.val.len(),
        split.test.len()
    );

    let sampler = SamplerConfig {
        alpha,
        walks_per_node: walks,
        walk_len,
        candidate_window: if window > 0 { Some(window) } else { None },
        ..SamplerConfig::default()
    };
    let mut dims = ModelDims::new(3, 3, 3);
    dims.d_h = 16;
    dims.d_t = 8;
    dims.set_ff = 16;
    dims.token_ff = 8;
    dims.channel_ff = 16;
    dims.head_hidden = 16;
    let train_cfg = TrainConfig {
        batch_size: batch,
        learning_rate: lr,
        max_epochs: epochs,
        patience,
        dropout,
        negative_fraction: 0.5,
        seed: 17,
        threads: 1,
        ..TrainConfig::default()
    };

    for mode in [AblationMode::Full, AblationMode::R2Walk] {
        let t = Instant::now();
        let (outcome, report) = run_ablation(
            mode,
            &g,
            &split,
            &sampler,
            &dims,
            &train_cfg,
            DEFAULT_EVAL_SEED,
        )
        .unwrap();
        println!(
            "{mode}: test auc {:.4} ap {:.4} | epochs {} best_val {:?} | {:.1}s",
            report.auc,
            report.ap,
            outcome.epochs_run,
            outcome.best_val_auc.map(|v| (v * 1e4).round() / 1e4),
            t.elapsed().as_secs_f64()
        );
        for h in &outcome.history {
            println!(
                "  epoch {} loss {:.4} val_auc {:.4}",
                h.epoch, h.loss, h.val_auc
            );
        }
    }
}
