//! Implementations of the subcommands. Every function returns a one-line
//! `String` error on failure; `main` turns that into a nonzero exit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{Value, json};

use setwalk_core::ablate::{AblationMode, apply_ablation, run_ablation};
use setwalk_core::anonymize::{collect_identities, identities_to_text};
use setwalk_core::classify::{ClassifyConfig, node_classify, parse_labels};
use setwalk_core::eval::{DEFAULT_EVAL_SEED, EvalPart, MetricsRecord, evaluate};
use setwalk_core::hypergraph::{EventIndex, NodeId, TemporalHypergraph};
use setwalk_core::ingest::{ingest_benson, read_snapshot, write_snapshot};
use setwalk_core::model::{load_checkpoint, save_checkpoint};
use setwalk_core::sampler::{compute_scores_light, mix_seed, sample_walksets, walks_to_text};
use setwalk_core::split::{DatasetSplit, split_dataset_with};
use setwalk_core::synth::uniform_triples;
use setwalk_core::train::{build_walk_graph, history_to_csv, train_projected};

use crate::config::{RunConfig, cap_alpha};

// ---------------------------------------------------------------------------
// Small shared plumbing
// ---------------------------------------------------------------------------

fn read_graph(path: &Path) -> Result<TemporalHypergraph, String> {
    let f =
        File::open(path).map_err(|e| format!("cannot open snapshot {}: {e}", path.display()))?;
    read_snapshot(BufReader::new(f)).map_err(|e| format!("bad snapshot {}: {e}", path.display()))
}

fn snapshot_graph(cfg: &RunConfig) -> Result<TemporalHypergraph, String> {
    let path = cfg
        .snapshot
        .as_ref()
        .ok_or("no snapshot given (pass --snapshot or set `snapshot` in the config file)")?;
    read_graph(path)
}

fn time_span(g: &TemporalHypergraph) -> f64 {
    g.max_time().unwrap_or(0.0) - g.min_time().unwrap_or(0.0)
}

fn make_split(cfg: &RunConfig, g: &TemporalHypergraph) -> Result<DatasetSplit, String> {
    split_dataset_with(g, cfg.split_mode()?, cfg.seed(), &cfg.split_config()?)
        .map_err(|e| format!("cannot split the stream: {e}"))
}

/// Wraps a command result with the resolved configuration and its hash, so
/// every artifact records how it was produced.
fn envelope(command: &str, cfg: &RunConfig, payload: Value) -> Value {
    json!({
        "schema_version": 1,
        "command": command,
        "config_hash": cfg.config_hash(),
        "effective_config": cfg.effective(),
        "result": payload,
    })
}

/// Writes pretty JSON to `out`, or to stdout when no path is given.
fn emit_json(out: Option<&PathBuf>, value: &Value) -> Result<(), String> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| format!("cannot render JSON: {e}"))?;
    text.push('\n');
    emit_text(out, &text)
}

fn emit_text(out: Option<&PathBuf>, text: &str) -> Result<(), String> {
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Measured seconds, or 0 unless `--timings` was given: timing values are the
/// one part of an artifact that would differ between identical runs.
fn timing(timings: bool, secs: f64) -> f64 {
    if timings { secs } else { 0.0 }
}

fn parse_node_list(arg: &str) -> Result<Vec<NodeId>, String> {
    arg.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<NodeId>()
                .map_err(|_| format!("bad node id {tok:?} in {arg:?}"))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

pub fn cmd_ingest(
    cfg: &RunConfig,
    nverts: Option<&PathBuf>,
    simplices: Option<&PathBuf>,
    times: Option<&PathBuf>,
    out: &PathBuf,
) -> Result<(), String> {
    let (nv_path, sx_path, tm_path) = match (nverts, simplices, times, &cfg.stem) {
        (Some(a), Some(b), Some(c), _) => (a.clone(), b.clone(), c.clone()),
        (None, None, None, Some(stem)) => {
            let expand = |suffix: &str| {
                let mut name = stem
                    .file_name()
                    .map(|s| s.to_os_string())
                    .unwrap_or_default();
                name.push(format!("-{suffix}.txt"));
                stem.with_file_name(name)
            };
            (expand("nverts"), expand("simplices"), expand("times"))
        }
        _ => {
            return Err(
                "ingest needs either --stem or all three of --nverts, --simplices, --times".into(),
            );
        }
    };
    let read = |p: &PathBuf| {
        std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))
    };
    let g = ingest_benson(&read(&nv_path)?, &read(&sx_path)?, &read(&tm_path)?)
        .map_err(|e| format!("ingest failed: {e}"))?;

    let f = File::create(out).map_err(|e| format!("cannot create {}: {e}", out.display()))?;
    let mut w = BufWriter::new(f);
    write_snapshot(&g, &mut w).map_err(|e| format!("cannot write snapshot: {e}"))?;
    w.flush()
        .map_err(|e| format!("cannot write snapshot: {e}"))?;

    let payload = json!({
        "snapshot": out,
        "events": g.len(),
        "nodes": g.node_count(),
        "max_edge_size": g.max_edge_size(),
        "min_time": g.min_time(),
        "max_time": g.max_time(),
    });
    emit_json(None, &envelope("ingest", cfg, payload))
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

pub fn cmd_sample(
    cfg: &RunConfig,
    edge: Option<&str>,
    nodes: Option<&str>,
    t0: Option<f64>,
    out: Option<&PathBuf>,
) -> Result<(), String> {
    let g = snapshot_graph(cfg)?;
    let sampler = cap_alpha(cfg.sampler()?, time_span(&g));
    let scores =
        compute_scores_light(&g, &sampler).map_err(|e| format!("cannot score events: {e}"))?;
    let t0 = t0.unwrap_or_else(|| g.max_time().unwrap_or(0.0) + 1.0);
    let seed = cfg.seed();
    let check = |u: NodeId| -> Result<NodeId, String> {
        if (u as usize) < g.node_count() {
            Ok(u)
        } else {
            Err(format!(
                "node {u} outside the universe 0..{}",
                g.node_count()
            ))
        }
    };

    let mut dump = String::new();
    let n_seeds;
    match (edge, nodes) {
        (Some(_), Some(_)) => return Err("pass either --edge or --nodes, not both".into()),
        (Some(arg), None) => {
            // One walk set per member of the query hyperedge, plus the
            // positional identity matrices derived from them.
            let mut e: Vec<NodeId> = parse_node_list(arg)?
                .into_iter()
                .map(check)
                .collect::<Result<_, _>>()?;
            e.sort_unstable();
            e.dedup();
            let ws = sample_walksets(&e, t0, &g, &scores, &sampler, mix_seed(seed, &[0]));
            n_seeds = ws.len();
            for w in &ws {
                dump.push_str(&format!("# seed {}\n", w.seed_node));
                dump.push_str(&walks_to_text(&w.walks));
            }
            let ids = collect_identities(&e, &ws, e.len(), sampler.walk_len)
                .map_err(|e| format!("cannot build identities: {e}"))?;
            dump.push_str("# identities\n");
            dump.push_str(&identities_to_text(&ids));
        }
        (None, arg) => {
            // Independent walk sets for a list of nodes (default: all).
            let seeds: Vec<NodeId> = match arg {
                Some(s) => parse_node_list(s)?
                    .into_iter()
                    .map(check)
                    .collect::<Result<_, _>>()?,
                None => (0..g.node_count() as NodeId).collect(),
            };
            n_seeds = seeds.len();
            for &u in &seeds {
                let ws = sample_walksets(
                    &[u],
                    t0,
                    &g,
                    &scores,
                    &sampler,
                    mix_seed(seed, &[1, u as u64]),
                );
                dump.push_str(&format!("# seed {u}\n"));
                dump.push_str(&walks_to_text(&ws[0].walks));
            }
        }
    }

    emit_text(out, &dump)?;
    if out.is_some() {
        let payload = json!({ "walk_dump": out, "seeds": n_seeds, "t0": t0 });
        emit_json(None, &envelope("sample", cfg, payload))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

pub fn cmd_train(
    cfg: &RunConfig,
    timings: bool,
    model_out: Option<&PathBuf>,
    metrics_out: Option<&PathBuf>,
    history_out: Option<&PathBuf>,
) -> Result<(), String> {
    let g = snapshot_graph(cfg)?;
    let split = make_split(cfg, &g)?;
    let mut sampler = cap_alpha(cfg.sampler()?, time_span(&g));
    let mut dims = cfg.dims_template();
    let projection = apply_ablation(cfg.ablation()?, &mut sampler, &mut dims);
    let train_cfg = cfg.train()?;

    let outcome = train_projected(&g, &split, &sampler, &dims, &train_cfg, projection)
        .map_err(|e| format!("training failed: {e}"))?;

    if let Some(path) = model_out {
        let f = File::create(path).map_err(|e| format!("cannot create {}: {e}", path.display()))?;
        let mut w = BufWriter::new(f);
        save_checkpoint(&mut w, &outcome.params, &sampler)
            .map_err(|e| format!("cannot write checkpoint: {e}"))?;
        w.flush()
            .map_err(|e| format!("cannot write checkpoint: {e}"))?;
    }
    if let Some(path) = history_out {
        std::fs::write(path, history_to_csv(&outcome.history))
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }

    // Validation-part metrics; the held-out test part stays untouched until
    // an explicit `eval`.
    let metrics = if split.val.is_empty() {
        Value::Null
    } else {
        let walk_graph = build_walk_graph(&g, &split, projection)
            .map_err(|e| format!("cannot build the walk graph: {e}"))?;
        let scores = compute_scores_light(&walk_graph, &sampler)
            .map_err(|e| format!("cannot score events: {e}"))?;
        let report = evaluate(
            &outcome.params,
            &sampler,
            &g,
            &walk_graph,
            &scores,
            &split,
            EvalPart::Val,
            train_cfg.negative_fraction,
            DEFAULT_EVAL_SEED,
        )
        .map_err(|e| format!("validation scoring failed: {e}"))?;
        json!(MetricsRecord::from_report(
            &report,
            EvalPart::Val,
            &cfg.canonical_text(),
            cfg.seed(),
            outcome.epochs_run,
            timing(timings, outcome.wall_time_s),
        ))
    };

    let payload = json!({
        "checkpoint": model_out,
        "history": history_out,
        "epochs_run": outcome.epochs_run,
        "best_val_auc": outcome.best_val_auc,
        "metrics": metrics,
    });
    emit_json(metrics_out, &envelope("train", cfg, payload))
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

pub fn cmd_eval(
    cfg: &RunConfig,
    timings: bool,
    checkpoint: &PathBuf,
    part: &str,
    out: Option<&PathBuf>,
) -> Result<(), String> {
    let part = match part {
        "val" => EvalPart::Val,
        "test" => EvalPart::Test,
        other => return Err(format!("unknown part {other:?} (val, test)")),
    };
    let f = File::open(checkpoint)
        .map_err(|e| format!("cannot open checkpoint {}: {e}", checkpoint.display()))?;
    let mut r = BufReader::new(f);
    // The checkpoint carries the walk settings it was trained with; flags
    // only steer the split, the negative rate and the variant's projection.
    let (params, sampler) = load_checkpoint(&mut r).map_err(|e| format!("bad checkpoint: {e}"))?;
    drop(r);

    let g = snapshot_graph(cfg)?;
    let split = make_split(cfg, &g)?;
    let mut scratch_sampler = sampler.clone();
    let mut scratch_dims = params.dims.clone();
    let projection = apply_ablation(cfg.ablation()?, &mut scratch_sampler, &mut scratch_dims);
    let walk_graph = build_walk_graph(&g, &split, projection)
        .map_err(|e| format!("cannot build the walk graph: {e}"))?;
    let scores = compute_scores_light(&walk_graph, &sampler)
        .map_err(|e| format!("cannot score events: {e}"))?;

    let started = Instant::now();
    let report = evaluate(
        &params,
        &sampler,
        &g,
        &walk_graph,
        &scores,
        &split,
        part,
        cfg.train()?.negative_fraction,
        DEFAULT_EVAL_SEED,
    )
    .map_err(|e| format!("scoring failed: {e}"))?;
    let record = MetricsRecord::from_report(
        &report,
        part,
        &cfg.canonical_text(),
        cfg.seed(),
        0,
        timing(timings, started.elapsed().as_secs_f64()),
    );
    emit_json(out, &envelope("eval", cfg, json!({ "metrics": record })))
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

pub fn cmd_ablate(
    cfg: &RunConfig,
    timings: bool,
    modes: Option<&str>,
    out: Option<&PathBuf>,
) -> Result<(), String> {
    let list = modes.unwrap_or("full,r2_walk,no_time_encoding,mean_pool,alpha_zero");
    let modes: Vec<AblationMode> = list
        .split(',')
        .map(|tok| tok.trim().parse().map_err(|e: String| e))
        .collect::<Result<_, _>>()?;

    let g = snapshot_graph(cfg)?;
    let split = make_split(cfg, &g)?;
    let sampler = cap_alpha(cfg.sampler()?, time_span(&g));
    let dims = cfg.dims_template();
    let train_cfg = cfg.train()?;

    let mut rows = Vec::new();
    for mode in modes {
        let (outcome, report) = run_ablation(
            mode,
            &g,
            &split,
            &sampler,
            &dims,
            &train_cfg,
            DEFAULT_EVAL_SEED,
        )
        .map_err(|e| format!("variant {mode} failed: {e}"))?;
        rows.push(json!({
            "mode": mode.to_string(),
            "test_auc": report.auc,
            "test_ap": report.ap,
            "n_pos": report.n_pos,
            "n_neg": report.n_neg,
            "epochs_run": outcome.epochs_run,
            "best_val_auc": outcome.best_val_auc,
            "wall_time_s": timing(timings, outcome.wall_time_s),
        }));
    }
    emit_json(out, &envelope("ablate", cfg, json!({ "rows": rows })))
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

/// Byte-identical across runs and platforms; pinned by a test.
pub const BENCH_CSV_HEADER: &str = "n_events,sampling_s,epoch_s";

pub fn cmd_bench(cfg: &RunConfig, sizes: &str, out: Option<&PathBuf>) -> Result<(), String> {
    let sizes: Vec<usize> = sizes
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|_| format!("bad stream size {tok:?} in {sizes:?}"))
        })
        .collect::<Result<_, _>>()?;
    if sizes.is_empty() {
        return Err("bench needs at least one stream size".into());
    }
    if let Some(&z) = sizes.iter().find(|&&n| n == 0) {
        return Err(format!("bench sizes must be at least 1, got {z}"));
    }

    // With a snapshot the stream is truncated to each requested length;
    // otherwise constant-density synthetic streams are generated.
    let base: Option<TemporalHypergraph> = match &cfg.snapshot {
        Some(path) => Some(read_graph(path)?),
        None => None,
    };
    let seed = cfg.seed();
    let dims = cfg.dims_template();
    let mut train_cfg = cfg.train()?;
    train_cfg.max_epochs = 1;
    train_cfg.patience = 1;

    let mut csv = format!("{BENCH_CSV_HEADER}\n");
    for &n in &sizes {
        let g = match &base {
            Some(b) => {
                if n > b.len() {
                    return Err(format!(
                        "snapshot has {} events, cannot benchmark at {n}",
                        b.len()
                    ));
                }
                let keep: Vec<EventIndex> = (0..n as EventIndex).collect();
                b.subgraph(&keep)
                    .map_err(|e| format!("cannot truncate the stream: {e}"))?
                    .0
            }
            None => uniform_triples(n, seed),
        };
        let split = make_split(cfg, &g)?;
        let sampler = cap_alpha(cfg.sampler()?, time_span(&g));

        // Pass 1: score table + walk sets for every train event.
        let t = Instant::now();
        let (walk_graph, _) = g
            .subgraph(&split.train)
            .map_err(|e| format!("cannot build the walk graph: {e}"))?;
        let scores = compute_scores_light(&walk_graph, &sampler)
            .map_err(|e| format!("cannot score events: {e}"))?;
        let mut sink = 0usize;
        for (i, &ei) in split.train.iter().enumerate() {
            let ev = g.event(ei);
            let ws = sample_walksets(
                &ev.nodes,
                ev.time,
                &walk_graph,
                &scores,
                &sampler,
                mix_seed(seed, &[n as u64, i as u64]),
            );
            sink += ws.iter().map(|w| w.walks.len()).sum::<usize>();
        }
        std::hint::black_box(sink);
        let sampling_s = t.elapsed().as_secs_f64();

        // Pass 2: one full training epoch (includes its own sampling).
        let t = Instant::now();
        train_projected(&g, &split, &sampler, &dims, &train_cfg, None)
            .map_err(|e| format!("bench epoch failed at {n} events: {e}"))?;
        let epoch_s = t.elapsed().as_secs_f64();

        csv.push_str(&format!("{n},{sampling_s:.3},{epoch_s:.3}\n"));
    }

    emit_text(out, &csv)?;
    // The CSV stays a pure table; the provenance record rides alongside.
    let provenance = envelope("bench", cfg, json!({ "sizes": sizes, "csv": out }));
    match out {
        Some(path) => {
            let mut sidecar = path.clone();
            sidecar.set_extension("config.json");
            emit_json(Some(&sidecar), &provenance)
        }
        None => {
            let text = serde_json::to_string(&provenance)
                .map_err(|e| format!("cannot render JSON: {e}"))?;
            eprintln!("{text}");
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// classify
// ---------------------------------------------------------------------------

pub fn cmd_classify(cfg: &RunConfig, timings: bool, out: Option<&PathBuf>) -> Result<(), String> {
    let g = snapshot_graph(cfg)?;
    let labels_path = cfg
        .labels
        .as_ref()
        .ok_or("no label file given (pass --labels or set `labels` in the config file)")?;
    let text = std::fs::read_to_string(labels_path)
        .map_err(|e| format!("cannot read {}: {e}", labels_path.display()))?;
    let labels = parse_labels(&text).map_err(|e| format!("bad label file: {e}"))?;

    let sampler = cap_alpha(cfg.sampler()?, time_span(&g));
    let dims = cfg.dims_template();
    let ccfg = ClassifyConfig {
        base: cfg.train()?,
        node_train_fraction: cfg.effective().node_train_fraction.unwrap(),
    };
    let outcome = node_classify(&g, &labels, &sampler, &dims, &ccfg)
        .map_err(|e| format!("classification failed: {e}"))?;

    let payload = json!({
        "accuracy": outcome.accuracy,
        "n_train": outcome.n_train,
        "n_test": outcome.n_test,
        "classes": outcome.classes,
        "skipped_nodes": outcome.skipped.len(),
        "epochs_run": outcome.history.len(),
        "wall_time_s": timing(timings, outcome.wall_time_s),
    });
    emit_json(out, &envelope("classify", cfg, payload))
}
