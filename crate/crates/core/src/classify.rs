//! Node classification: label a node from the walk structure around its
//! incident hyperedges.
//!
//! Per node `u0` the sampler takes max{deg(u0), 10} incident hyperedges — all
//! of them once each when the degree is at least 10, otherwise 10 draws with
//! replacement — and turns each into one walk whose forced first step is that
//! hyperedge, extended backwards in time by the regular step rule. The node's
//! encoding is the mean over its walk encodings (the shared backbone with the
//! singleton seed set `{u0}`), classified by a separate two-layer head.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anonymize::collect_identities;
use crate::eval::DEFAULT_EVAL_SEED;
use crate::hypergraph::{NodeId, TemporalHypergraph};
use crate::model::{
    ExampleInput, HeadPs, ModelDims, ModelError, ModelParams, RunMode, backbone_backward,
    backbone_forward, head_backward, head_forward,
};
use crate::sampler::{
    SamplerConfig, SamplerError, ScoreTable, SetWalk, WalkSet, WalkStep, compute_scores_light,
    mix_seed, sample_next, walk_rng,
};
use crate::train::{AdamState, OptimizerKind, TrainConfig, TrainError};

/// Minimum number of walk starts per node; nodes with fewer incident events
/// draw with replacement up to this count.
pub const MIN_WALK_STARTS: usize = 10;

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("label line {line}: {msg}")]
    BadLabelLine { line: usize, msg: String },
    #[error("node {0} appears twice in the label file")]
    DuplicateLabel(NodeId),
    #[error("no usable labeled nodes (all missing from the graph or isolated)")]
    NoLabeledNodes,
    #[error("need at least two labeled nodes to form a train/test split")]
    TooFewNodes,
    #[error("labels use only one class; nothing to learn")]
    SingleClass,
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("loss became non-finite at epoch {0}; lower the learning rate")]
    NonFiniteLoss(usize),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub base: TrainConfig,
    /// Fraction of labeled nodes used for training (rest is the test set).
    pub node_train_fraction: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            base: TrainConfig::default(),
            node_train_fraction: 0.7,
        }
    }
}

/// Parses `node_id<TAB>label` lines. Blank lines are skipped.
pub fn parse_labels(text: &str) -> Result<Vec<(NodeId, String)>, ClassifyError> {
    let mut out: Vec<(NodeId, String)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (id_part, label) = line.split_once('\t').ok_or(ClassifyError::BadLabelLine {
            line: i + 1,
            msg: "expected node_id<TAB>label".into(),
        })?;
        let node: NodeId = id_part
            .trim()
            .parse()
            .map_err(|e| ClassifyError::BadLabelLine {
                line: i + 1,
                msg: format!("bad node id {id_part:?}: {e}"),
            })?;
        let label = label.trim();
        if label.is_empty() {
            return Err(ClassifyError::BadLabelLine {
                line: i + 1,
                msg: "empty label".into(),
            });
        }
        if !seen.insert(node) {
            return Err(ClassifyError::DuplicateLabel(node));
        }
        out.push((node, label.to_string()));
    }
    Ok(out)
}

/// Numerically stable softmax cross-entropy for one logit row; returns the
/// loss and its gradient with respect to the logits.
pub fn softmax_ce(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    assert!(label < logits.len());
    let mx = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - mx).exp()).collect();
    let denom: f64 = exps.iter().sum();
    let loss = denom.ln() + mx - logits[label];
    let mut d: Vec<f64> = exps.iter().map(|e| e / denom).collect();
    d[label] -= 1.0;
    (loss, d)
}

/// Builds the walk set of one node: max{deg, MIN_WALK_STARTS} walks, each
/// starting at a sampled incident hyperedge (the forced first step) and
/// extended by up to `walk_len − 1` regular backward steps.
pub fn node_walkset(
    u0: NodeId,
    g: &TemporalHypergraph,
    scores: &ScoreTable,
    cfg: &SamplerConfig,
    base_seed: u64,
) -> WalkSet {
    let inc = g.incidence(u0);
    if inc.is_empty() {
        return WalkSet {
            seed_node: u0,
            walks: Vec::new(),
        };
    }
    let starts: Vec<_> = if inc.len() >= MIN_WALK_STARTS {
        inc.to_vec()
    } else {
        let mut pick_rng = ChaCha12Rng::seed_from_u64(mix_seed(base_seed, &[0x51A7]));
        (0..MIN_WALK_STARTS)
            .map(|_| inc[pick_rng.random_range(0..inc.len())])
            .collect()
    };
    let mut walks = Vec::with_capacity(starts.len());
    for (w_idx, &ei) in starts.iter().enumerate() {
        let mut rng = walk_rng(base_seed, 0, w_idx);
        let ev = g.event(ei);
        let mut steps = vec![WalkStep {
            event: ei,
            nodes: ev.nodes.clone(),
            time: ev.time,
        }];
        let (mut cur_nodes, mut cur_t) = (ev.nodes.clone(), ev.time);
        for _ in 1..cfg.walk_len {
            match sample_next(&cur_nodes, cur_t, g, scores, cfg, &mut rng) {
                Some((next, t)) => {
                    let nev = g.event(next);
                    steps.push(WalkStep {
                        event: next,
                        nodes: nev.nodes.clone(),
                        time: t,
                    });
                    cur_nodes = nev.nodes.clone();
                    cur_t = t;
                }
                None => break,
            }
        }
        walks.push(SetWalk { steps });
    }
    WalkSet {
        seed_node: u0,
        walks,
    }
}

fn node_input(
    u0: NodeId,
    g: &TemporalHypergraph,
    scores: &ScoreTable,
    cfg: &SamplerConfig,
    k_max: usize,
    base_seed: u64,
) -> ExampleInput {
    let ws = node_walkset(u0, g, scores, cfg, base_seed);
    let t0 = g.max_time().unwrap_or(0.0);
    let walksets = vec![ws];
    let identities = collect_identities(&[u0], &walksets, k_max, cfg.walk_len)
        .expect("singleton seed matches its one walk set");
    ExampleInput {
        edge: vec![u0],
        t0,
        walksets,
        identities,
    }
}

// Adaptive-moment buffers for the standalone classification head.
struct HeadAdam {
    m: HeadPs,
    v: HeadPs,
    step: u64,
}

impl HeadAdam {
    fn new(d_in: usize, hidden: usize, out: usize) -> Self {
        Self {
            m: HeadPs::zeros(d_in, hidden, out),
            v: HeadPs::zeros(d_in, hidden, out),
            step: 0,
        }
    }

    fn update(&mut self, ps: &mut HeadPs, g: &HeadPs, lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.step += 1;
        let c1 = 1.0 - B1.powi(self.step as i32);
        let c2 = 1.0 - B2.powi(self.step as i32);
        let fields = [
            (&mut ps.w1, &g.w1, &mut self.m.w1, &mut self.v.w1),
            (&mut ps.b1, &g.b1, &mut self.m.b1, &mut self.v.b1),
            (&mut ps.w2, &g.w2, &mut self.m.w2, &mut self.v.w2),
            (&mut ps.b2, &g.b2, &mut self.m.b2, &mut self.v.b2),
        ];
        for (p, gg, m, v) in fields {
            for i in 0..p.data.len() {
                let gi = gg.data[i];
                m.data[i] = B1 * m.data[i] + (1.0 - B1) * gi;
                v.data[i] = B2 * v.data[i] + (1.0 - B2) * gi * gi;
                p.data[i] -= lr * (m.data[i] / c1) / ((v.data[i] / c2).sqrt() + EPS);
            }
        }
    }
}

fn head_accumulate(dst: &mut HeadPs, src: &HeadPs, scale: f64) {
    for (d, s) in [
        (&mut dst.w1, &src.w1),
        (&mut dst.b1, &src.b1),
        (&mut dst.w2, &src.w2),
        (&mut dst.b2, &src.b2),
    ] {
        for (a, b) in d.data.iter_mut().zip(&s.data) {
            *a += b * scale;
        }
    }
}

pub struct ClassifyOutcome {
    pub params: ModelParams,
    pub class_head: HeadPs,
    /// Class labels in index order (sorted lexicographically).
    pub classes: Vec<String>,
    /// Test accuracy.
    pub accuracy: f64,
    pub n_train: usize,
    pub n_test: usize,
    /// Labeled nodes excluded for having no incident hyperedges.
    pub skipped: Vec<NodeId>,
    /// Per-epoch mean training loss.
    pub history: Vec<(usize, f64)>,
    pub wall_time_s: f64,
}

// One argument per pipeline stage; bundling them into a context struct would
// only move the width somewhere less visible.
#[allow(clippy::too_many_arguments)]
fn node_pass(
    params: &ModelParams,
    class_head: &HeadPs,
    g: &TemporalHypergraph,
    scores: &ScoreTable,
    sampler_cfg: &SamplerConfig,
    u0: NodeId,
    label: usize,
    n_classes: usize,
    walk_seed: u64,
    dropout_seed: u64,
) -> (f64, ModelParams, HeadPs) {
    let input = node_input(u0, g, scores, sampler_cfg, params.dims.k_max, walk_seed);
    let mut drop_rng = ChaCha12Rng::seed_from_u64(dropout_seed);
    let mut mode = RunMode::Train {
        rng: &mut drop_rng,
        dropout: params.dims.dropout,
    };
    let backbone = backbone_forward(params, &input, &mut mode);
    let vec = backbone.member_vecs()[0].clone();
    let (logits, head_cache) = head_forward(class_head, &vec, &mut mode);
    let (loss, dlogits) = softmax_ce(logits.row(0), label);

    let mut g_params = params.zeros_like();
    let mut g_head = HeadPs::zeros(params.dims.walk_width(), params.dims.head_hidden, n_classes);
    let dz = crate::tensor::Mat::from_vec(1, n_classes, dlogits);
    let dvec = head_backward(class_head, &head_cache, &dz, &mut g_head);
    backbone_backward(params, &input, &backbone, &[dvec], &mut g_params);
    (loss, g_params, g_head)
}

fn predict(
    params: &ModelParams,
    class_head: &HeadPs,
    g: &TemporalHypergraph,
    scores: &ScoreTable,
    sampler_cfg: &SamplerConfig,
    u0: NodeId,
    walk_seed: u64,
) -> usize {
    let input = node_input(u0, g, scores, sampler_cfg, params.dims.k_max, walk_seed);
    let mut mode = RunMode::Eval;
    let backbone = backbone_forward(params, &input, &mut mode);
    let (logits, _) = head_forward(class_head, &backbone.member_vecs()[0], &mut mode);
    logits
        .row(0)
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap()
}

/// Trains a node classifier on `labels` and reports accuracy on a held-out
/// node split. Walks run over the full event stream; labeled nodes without
/// any incident event are excluded (with a warning on stderr).
pub fn node_classify(
    g: &TemporalHypergraph,
    labels: &[(NodeId, String)],
    sampler_cfg: &SamplerConfig,
    dims_template: &ModelDims,
    cfg: &ClassifyConfig,
) -> Result<ClassifyOutcome, ClassifyError> {
    let start = std::time::Instant::now();
    cfg.base.validate()?;
    if !(cfg.node_train_fraction > 0.0 && cfg.node_train_fraction < 1.0) {
        return Err(TrainError::BadConfig(format!(
            "node_train_fraction must be in (0, 1), got {}",
            cfg.node_train_fraction
        ))
        .into());
    }

    // Class vocabulary, sorted for stable ids.
    let mut classes: Vec<String> = labels.iter().map(|(_, l)| l.clone()).collect();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(ClassifyError::SingleClass);
    }
    let class_id: BTreeMap<&str, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();

    let mut skipped = Vec::new();
    let mut nodes: Vec<(NodeId, usize)> = Vec::new();
    for (u, l) in labels {
        if (*u as usize) < g.node_count() && g.degree(*u) > 0 {
            nodes.push((*u, class_id[l.as_str()]));
        } else {
            eprintln!("warning: labeled node {u} has no incident hyperedges; excluded");
            skipped.push(*u);
        }
    }
    if nodes.is_empty() {
        return Err(ClassifyError::NoLabeledNodes);
    }
    if nodes.len() < 2 {
        return Err(ClassifyError::TooFewNodes);
    }

    let scores = compute_scores_light(g, sampler_cfg)?;
    let seed = cfg.base.seed;

    let mut dims = dims_template.clone();
    dims.m = sampler_cfg.walk_len;
    dims.k_max = 1; // singleton seed set {u0}
    dims.d_max = g.max_edge_size();
    dims.dropout = cfg.base.dropout;
    let t_min = g.min_time().unwrap_or(0.0);
    let t_max = g.max_time().unwrap_or(0.0);
    dims.time_shift = t_min;
    dims.time_scale = if t_max > t_min {
        1.0 / (t_max - t_min)
    } else {
        1.0
    };

    let mut params = ModelParams::init(dims, seed)?;
    let n_classes = classes.len();
    let d_w = params.dims.walk_width();
    let mut class_head = {
        let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(seed, &[0xC1A5]));
        HeadPs::init(d_w, params.dims.head_hidden, n_classes, &mut rng)
    };

    // 70/30 node split.
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    let mut split_rng = ChaCha12Rng::seed_from_u64(mix_seed(seed, &[8]));
    order.shuffle(&mut split_rng);
    let n_train =
        ((nodes.len() as f64 * cfg.node_train_fraction).round() as usize).clamp(1, nodes.len() - 1);
    let train_nodes: Vec<(NodeId, usize)> = order[..n_train].iter().map(|&i| nodes[i]).collect();
    let test_nodes: Vec<(NodeId, usize)> = order[n_train..].iter().map(|&i| nodes[i]).collect();

    let mut opt_params = match cfg.base.optimizer {
        OptimizerKind::Adam => Some(AdamState::new(&params)),
        OptimizerKind::Sgd => None,
    };
    let mut opt_head = match cfg.base.optimizer {
        OptimizerKind::Adam => Some(HeadAdam::new(d_w, params.dims.head_hidden, n_classes)),
        OptimizerKind::Sgd => None,
    };
    let pool = if cfg.base.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.base.threads)
                .build()
                .map_err(|e| TrainError::Threads(e.to_string()))?,
        )
    } else {
        None
    };

    let mut history = Vec::new();
    for epoch in 0..cfg.base.max_epochs {
        let ep = epoch as u64;
        let mut visit: Vec<usize> = (0..train_nodes.len()).collect();
        let mut shuffle_rng = ChaCha12Rng::seed_from_u64(mix_seed(seed, &[9, ep]));
        visit.shuffle(&mut shuffle_rng);

        let mut loss_sum = 0.0;
        for chunk in visit.chunks(cfg.base.batch_size) {
            let batch: Vec<(NodeId, usize, u64)> = chunk
                .iter()
                .map(|&i| {
                    let (u, l) = train_nodes[i];
                    (u, l, i as u64)
                })
                .collect();
            let pass = |(u, l, i): &(NodeId, usize, u64)| {
                node_pass(
                    &params,
                    &class_head,
                    g,
                    &scores,
                    sampler_cfg,
                    *u,
                    *l,
                    n_classes,
                    mix_seed(seed, &[10, ep, *i]),
                    mix_seed(seed, &[11, ep, *i]),
                )
            };
            let results: Vec<(f64, ModelParams, HeadPs)> = match &pool {
                Some(p) => p.install(|| batch.par_iter().map(pass).collect()),
                None => batch.iter().map(pass).collect(),
            };

            let n = results.len() as f64;
            let mut g_params = params.zeros_like();
            let mut g_head = HeadPs::zeros(d_w, params.dims.head_hidden, n_classes);
            let mut batch_loss = 0.0;
            for (loss, gp, gh) in &results {
                batch_loss += loss;
                g_params.accumulate(gp, 1.0 / n);
                head_accumulate(&mut g_head, gh, 1.0 / n);
            }
            batch_loss /= n;
            if !batch_loss.is_finite() {
                return Err(ClassifyError::NonFiniteLoss(epoch));
            }
            loss_sum += batch_loss * n;

            match (&mut opt_params, &mut opt_head) {
                (Some(op), Some(oh)) => {
                    op.update(&mut params, &g_params, cfg.base.learning_rate);
                    oh.update(&mut class_head, &g_head, cfg.base.learning_rate);
                }
                _ => {
                    params.accumulate(&g_params, -cfg.base.learning_rate);
                    head_accumulate(&mut class_head, &g_head, -cfg.base.learning_rate);
                }
            }
        }
        history.push((epoch, loss_sum / train_nodes.len() as f64));
    }

    let correct = test_nodes
        .iter()
        .enumerate()
        .filter(|(i, (u, l))| {
            predict(
                &params,
                &class_head,
                g,
                &scores,
                sampler_cfg,
                *u,
                mix_seed(DEFAULT_EVAL_SEED, &[12, *i as u64]),
            ) == *l
        })
        .count();
    let accuracy = correct as f64 / test_nodes.len() as f64;

    Ok(ClassifyOutcome {
        params,
        class_head,
        classes,
        accuracy,
        n_train: train_nodes.len(),
        n_test: test_nodes.len(),
        skipped,
        history,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}
