//! `setwalk` — temporal hypergraph learning pipeline in one binary.
//!
//! Subcommands cover the full flow: `ingest` converts raw datasets to binary
//! snapshots, `sample` dumps walks, `train`/`eval` fit and score hyperedge
//! predictors, `ablate` compares model variants, `bench` times the pipeline
//! across stream sizes, and `classify` trains a node classifier.
//!
//! Configuration comes from CLI flags, a `--config` TOML file, an optional
//! `--preset`, and built-in defaults, in that precedence order. Every
//! command accepts `--seed`; identical invocations produce byte-identical
//! artifacts (except measured wall-times, which are zeroed unless
//! `--timings` is given, and the timing columns of `bench`).

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{RunConfig, resolve};

#[derive(Parser)]
#[command(
    name = "setwalk",
    version,
    about = "Temporal hypergraph learning: set walks, anonymized encodings, mixer models"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

/// Options shared by every subcommand.
#[derive(Args)]
struct Common {
    /// TOML file with the same keys as the long flags; flags win.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Record measured wall-times in artifacts (otherwise they are zeroed so
    /// identical runs stay byte-identical).
    #[arg(long)]
    timings: bool,
    #[command(flatten)]
    overrides: RunConfig,
}

#[derive(Subcommand)]
enum Cmd {
    /// Convert a three-file dataset (nverts/simplices/times) into a snapshot.
    Ingest {
        /// Member-count file, one integer per event.
        #[arg(long, value_name = "FILE")]
        nverts: Option<PathBuf>,
        /// Flattened member ids, one integer per line.
        #[arg(long, value_name = "FILE")]
        simplices: Option<PathBuf>,
        /// Timestamps, one integer per event.
        #[arg(long, value_name = "FILE")]
        times: Option<PathBuf>,
        /// Snapshot file to write.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Dump temporal set walks (and identities for --edge) as text.
    Sample {
        /// Query hyperedge, e.g. "3,17,52": one walk set per member plus the
        /// positional identity matrices.
        #[arg(long, value_name = "NODES")]
        edge: Option<String>,
        /// Comma-separated seed nodes (default: every node).
        #[arg(long, value_name = "NODES", conflicts_with = "edge")]
        nodes: Option<String>,
        /// Walks look strictly before this time (default: after the stream).
        #[arg(long, value_name = "TIME")]
        t0: Option<f64>,
        /// Dump file; stdout when omitted.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Train a hyperedge predictor on the snapshot's train partition.
    Train {
        /// Checkpoint file to write (model parameters + walk settings).
        #[arg(long, value_name = "FILE")]
        model_out: Option<PathBuf>,
        /// Metrics JSON file; stdout when omitted.
        #[arg(long, value_name = "FILE")]
        metrics_out: Option<PathBuf>,
        /// Per-epoch `epoch,loss,val_auc` CSV file.
        #[arg(long, value_name = "FILE")]
        history_out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Score a held-out partition with a trained checkpoint.
    Eval {
        /// Checkpoint written by `train`.
        #[arg(long, value_name = "FILE")]
        checkpoint: PathBuf,
        /// Partition to score: "val" or "test".
        #[arg(long, default_value = "test")]
        part: String,
        /// Metrics JSON file; stdout when omitted.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Train and score model variants side by side.
    Ablate {
        /// Comma-separated variants (default: all of full, r2_walk,
        /// no_time_encoding, mean_pool, alpha_zero).
        #[arg(long)]
        modes: Option<String>,
        /// Table JSON file; stdout when omitted.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Time walk sampling and one training epoch across stream sizes.
    Bench {
        /// Comma-separated event counts, e.g. "10000,20000". Streams are
        /// synthesized, or truncated from --snapshot when given.
        #[arg(long)]
        sizes: String,
        /// CSV file (`n_events,sampling_s,epoch_s`); stdout when omitted.
        /// With a file, provenance goes to `<file>.config.json`.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Train a node classifier from a `node<TAB>label` file.
    Classify {
        /// Metrics JSON file; stdout when omitted.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<(), String> {
    let common = match &cli.command {
        Cmd::Ingest { common, .. }
        | Cmd::Sample { common, .. }
        | Cmd::Train { common, .. }
        | Cmd::Eval { common, .. }
        | Cmd::Ablate { common, .. }
        | Cmd::Bench { common, .. }
        | Cmd::Classify { common, .. } => common,
    };
    let cfg = resolve(common.config.as_ref(), &common.overrides)?;
    let timings = common.timings;

    // One global worker pool, capped by --threads. Results are identical for
    // any cap; 1 is the reference mode.
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads())
        .build_global()
        .map_err(|e| format!("cannot configure {} worker threads: {e}", cfg.threads()))?;

    match &cli.command {
        Cmd::Ingest {
            nverts,
            simplices,
            times,
            out,
            ..
        } => commands::cmd_ingest(
            &cfg,
            nverts.as_ref(),
            simplices.as_ref(),
            times.as_ref(),
            out,
        ),
        Cmd::Sample {
            edge,
            nodes,
            t0,
            out,
            ..
        } => commands::cmd_sample(&cfg, edge.as_deref(), nodes.as_deref(), *t0, out.as_ref()),
        Cmd::Train {
            model_out,
            metrics_out,
            history_out,
            ..
        } => commands::cmd_train(
            &cfg,
            timings,
            model_out.as_ref(),
            metrics_out.as_ref(),
            history_out.as_ref(),
        ),
        Cmd::Eval {
            checkpoint,
            part,
            out,
            ..
        } => commands::cmd_eval(&cfg, timings, checkpoint, part, out.as_ref()),
        Cmd::Ablate { modes, out, .. } => {
            commands::cmd_ablate(&cfg, timings, modes.as_deref(), out.as_ref())
        }
        Cmd::Bench { sizes, out, .. } => commands::cmd_bench(&cfg, sizes, out.as_ref()),
        Cmd::Classify { out, .. } => commands::cmd_classify(&cfg, timings, out.as_ref()),
    }
}
