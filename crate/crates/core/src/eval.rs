//! Ranking metrics and the hyperedge-prediction evaluation pipeline.
//!
//! Evaluation scores every held-out hyperedge against one size-preserving
//! negative, drawn with a dedicated evaluation seed that is independent of the
//! training seed, so metrics stay comparable across checkpoints trained with
//! different seeds. Walks are always sampled on the train-period graph; the
//! held-out event only supplies the query node set and timestamp.

use std::collections::{BTreeSet, HashSet};

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::anonymize::collect_identities;
use crate::hypergraph::{NodeId, TemporalHypergraph};
use crate::model::{ExampleInput, ModelParams, RunMode, forward_example};
use crate::sampler::{SamplerConfig, ScoreTable, mix_seed, sample_walksets};
use crate::split::{DatasetSplit, SplitMode};

/// Dedicated default seed for evaluation-time negatives and walks. Decoupled
/// from the training seed on purpose: two checkpoints trained with different
/// seeds are still measured on the same evaluation draws.
pub const DEFAULT_EVAL_SEED: u64 = 0x5EED_E7A1;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("the {0} partition is empty; nothing to evaluate")]
    EmptyPart(EvalPart),
    #[error("cannot form a size-{size} node set from a universe of {node_count} nodes")]
    UniverseTooSmall { size: usize, node_count: usize },
    #[error("no unobserved negative found after {0} attempts (universe too dense)")]
    NegativeExhausted(usize),
}

/// Which held-out partition to score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalPart {
    Val,
    Test,
}

impl std::fmt::Display for EvalPart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EvalPart::Val => "val",
            EvalPart::Test => "test",
        })
    }
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Area under the ROC curve via the rank statistic. Tied scores get their
/// mid-rank, so a tied positive/negative pair contributes 1/2 — exactly the
/// convention of the quadratic pair count in [`auc_pair_count`].
pub fn auc(pos: &[f64], neg: &[f64]) -> f64 {
    assert!(
        !pos.is_empty() && !neg.is_empty(),
        "auc needs both classes nonempty"
    );
    let n = pos.len() + neg.len();
    let mut all: Vec<(f64, bool)> = Vec::with_capacity(n);
    all.extend(pos.iter().map(|&s| (s, true)));
    all.extend(neg.iter().map(|&s| (s, false)));
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Sum of positive mid-ranks. Ranks are 1-based; a tie group spanning
    // ranks i+1..=j gets the mid-rank (i+1+j)/2. All addends are integers or
    // half-integers, so the accumulation is exact in f64 for any realistic n.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && all[j].0 == all[i].0 {
            j += 1;
        }
        let mid = (i + 1 + j) as f64 / 2.0;
        for item in &all[i..j] {
            if item.1 {
                rank_sum += mid;
            }
        }
        i = j;
    }
    let n_pos = pos.len() as f64;
    let n_neg = neg.len() as f64;
    (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg)
}

/// Brute-force O(|pos|·|neg|) pairwise comparison: wins count 1, ties 1/2.
/// This is the oracle the rank implementation must match bit for bit (both
/// reduce to the same exactly-representable numerator over the same
/// denominator).
pub fn auc_pair_count(pos: &[f64], neg: &[f64]) -> f64 {
    assert!(
        !pos.is_empty() && !neg.is_empty(),
        "auc needs both classes nonempty"
    );
    let mut wins = 0.0;
    for &p in pos {
        for &q in neg {
            if p > q {
                wins += 1.0;
            } else if p == q {
                wins += 0.5;
            }
        }
    }
    wins / (pos.len() as f64 * neg.len() as f64)
}

/// Average precision: the area under the precision–recall curve accumulated
/// over descending score thresholds, with tied scores entering as one group.
pub fn average_precision(pos: &[f64], neg: &[f64]) -> f64 {
    assert!(
        !pos.is_empty() && !neg.is_empty(),
        "average precision needs both classes nonempty"
    );
    let mut all: Vec<(f64, bool)> = Vec::with_capacity(pos.len() + neg.len());
    all.extend(pos.iter().map(|&s| (s, true)));
    all.extend(neg.iter().map(|&s| (s, false)));
    all.sort_by(|a, b| b.0.total_cmp(&a.0));

    let total_pos = pos.len() as f64;
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        for item in &all[i..j] {
            if item.1 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
        }
        let precision = tp / (tp + fp);
        let recall = tp / total_pos;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    ap
}

// ---------------------------------------------------------------------------
// Negative sampling
// ---------------------------------------------------------------------------

const PERTURB_TRIES: usize = 32;
const RANDOM_TRIES: usize = 1000;

/// Draws size-preserving corruptions of observed hyperedges: a fraction of
/// the members is replaced by uniformly random non-member nodes, and any
/// candidate equal (as a set) to an observed hyperedge is rejected. After a
/// bounded number of perturbation attempts it falls back to fully random
/// same-size sets.
pub struct NegativeSampler {
    node_count: usize,
    observed: HashSet<Vec<NodeId>>,
}

impl NegativeSampler {
    /// Collects the node universe and observed node sets of `g`.
    pub fn new(g: &TemporalHypergraph) -> Self {
        let observed = g.events().iter().map(|e| e.nodes.clone()).collect();
        Self {
            node_count: g.node_count(),
            observed,
        }
    }

    /// Corrupts `e_pos` (sorted, deduplicated) into a same-size node set that
    /// differs from every observed hyperedge. Exactly ⌈fraction·|e_pos|⌉
    /// members are replaced in the perturbation phase.
    pub fn generate_negative(
        &self,
        e_pos: &[NodeId],
        fraction: f64,
        rng: &mut impl Rng,
    ) -> Result<Vec<NodeId>, EvalError> {
        let k = e_pos.len();
        assert!(k >= 1, "positive hyperedge must be nonempty");
        if self.node_count < k {
            return Err(EvalError::UniverseTooSmall {
                size: k,
                node_count: self.node_count,
            });
        }
        let n_replace = ((fraction * k as f64).ceil() as usize).clamp(1, k);
        for _ in 0..PERTURB_TRIES {
            if let Some(cand) = self.perturb(e_pos, n_replace, rng)
                && !self.observed.contains(&cand)
            {
                return Ok(cand);
            }
        }
        for _ in 0..RANDOM_TRIES {
            let cand = self.random_set(k, rng);
            if !self.observed.contains(&cand) {
                return Ok(cand);
            }
        }
        Err(EvalError::NegativeExhausted(PERTURB_TRIES + RANDOM_TRIES))
    }

    fn perturb(
        &self,
        e_pos: &[NodeId],
        n_replace: usize,
        rng: &mut impl Rng,
    ) -> Option<Vec<NodeId>> {
        let k = e_pos.len();
        let dropped: BTreeSet<usize> = rand::seq::index::sample(rng, k, n_replace).iter().collect();
        let mut out: Vec<NodeId> = e_pos
            .iter()
            .enumerate()
            .filter(|(i, _)| !dropped.contains(i))
            .map(|(_, &u)| u)
            .collect();
        let mut misses = 0;
        while out.len() < k {
            let u = rng.random_range(0..self.node_count) as NodeId;
            if e_pos.binary_search(&u).is_ok() || out.contains(&u) {
                misses += 1;
                if misses > 20 * k + 100 {
                    return None; // too few non-members; caller falls back
                }
                continue;
            }
            out.push(u);
        }
        out.sort_unstable();
        Some(out)
    }

    fn random_set(&self, k: usize, rng: &mut impl Rng) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = rand::seq::index::sample(rng, self.node_count, k)
            .iter()
            .map(|i| i as NodeId)
            .collect();
        out.sort_unstable();
        out
    }
}

// ---------------------------------------------------------------------------
// Example preparation and scoring
// ---------------------------------------------------------------------------

/// Samples the walk sets for a candidate hyperedge and derives the positional
/// identities of every visited node. `g` must be the train-period graph so no
/// future event can appear in a walk (debug-asserted).
pub fn prepare_example(
    g: &TemporalHypergraph,
    scores: &ScoreTable,
    cfg: &SamplerConfig,
    k_max: usize,
    edge: &[NodeId],
    t0: f64,
    base_seed: u64,
) -> ExampleInput {
    let mut e0 = edge.to_vec();
    e0.sort_unstable();
    e0.dedup();
    let walksets = sample_walksets(&e0, t0, g, scores, cfg, base_seed);
    debug_assert!(
        walksets
            .iter()
            .flat_map(|ws| &ws.walks)
            .flat_map(|w| &w.steps)
            .all(|s| s.time < t0),
        "temporal leakage: a walk step is not strictly earlier than the example"
    );
    let identities = collect_identities(&e0, &walksets, k_max, cfg.walk_len)
        .expect("walk sets are generated in sorted member order");
    ExampleInput {
        edge: e0,
        t0,
        walksets,
        identities,
    }
}

/// Scores one candidate hyperedge with the deterministic walk stream
/// `base_seed` (no dropout).
pub fn score_edge(
    params: &ModelParams,
    g: &TemporalHypergraph,
    scores: &ScoreTable,
    cfg: &SamplerConfig,
    edge: &[NodeId],
    t0: f64,
    base_seed: u64,
) -> f64 {
    let input = prepare_example(g, scores, cfg, params.dims.k_max, edge, t0, base_seed);
    let mut mode = RunMode::Eval;
    forward_example(params, &input, &mut mode).0
}

// ---------------------------------------------------------------------------
// Evaluation pipeline
// ---------------------------------------------------------------------------

/// Metrics of one evaluation run.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub auc: f64,
    pub ap: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub mode: SplitMode,
}

/// Scores a held-out partition with one negative per positive.
///
/// Per positive `i`, the negative draw, the positive's walks and the
/// negative's walks each get their own rng stream derived from
/// `(eval_seed, i)`, so results do not depend on iteration order or thread
/// count; scoring runs in parallel.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    params: &ModelParams,
    sampler_cfg: &SamplerConfig,
    full: &TemporalHypergraph,
    walk_graph: &TemporalHypergraph,
    scores: &ScoreTable,
    split: &DatasetSplit,
    part: EvalPart,
    negative_fraction: f64,
    eval_seed: u64,
) -> Result<EvalReport, EvalError> {
    let indexes = match part {
        EvalPart::Val => &split.val,
        EvalPart::Test => &split.test,
    };
    if indexes.is_empty() {
        return Err(EvalError::EmptyPart(part));
    }

    let negatives = NegativeSampler::new(full);
    let mut examples = Vec::with_capacity(indexes.len());
    for (i, &ei) in indexes.iter().enumerate() {
        let ev = full.event(ei);
        let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(eval_seed, &[1, i as u64]));
        let neg = negatives.generate_negative(&ev.nodes, negative_fraction, &mut rng)?;
        examples.push((ev.nodes.clone(), neg, ev.time, i as u64));
    }

    let scored: Vec<(f64, f64)> = examples
        .par_iter()
        .map(|(pos_edge, neg_edge, t0, i)| {
            let zp = score_edge(
                params,
                walk_graph,
                scores,
                sampler_cfg,
                pos_edge,
                *t0,
                mix_seed(eval_seed, &[2, *i]),
            );
            let zn = score_edge(
                params,
                walk_graph,
                scores,
                sampler_cfg,
                neg_edge,
                *t0,
                mix_seed(eval_seed, &[3, *i]),
            );
            (zp, zn)
        })
        .collect();

    let pos: Vec<f64> = scored.iter().map(|s| s.0).collect();
    let neg: Vec<f64> = scored.iter().map(|s| s.1).collect();
    Ok(EvalReport {
        auc: auc(&pos, &neg),
        ap: average_precision(&pos, &neg),
        n_pos: pos.len(),
        n_neg: neg.len(),
        mode: split.mode,
    })
}

// ---------------------------------------------------------------------------
// Structured run record
// ---------------------------------------------------------------------------

/// 64-bit FNV-1a over raw bytes; used to fingerprint the effective run
/// configuration in emitted metrics.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// One JSON object per run, emitted by the command-line tools.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsRecord {
    pub schema_version: u32,
    /// FNV-1a hash (hex) of the effective configuration text.
    pub config_hash: String,
    pub seed: u64,
    pub split_mode: String,
    pub part: String,
    pub auc: f64,
    pub ap: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub epochs: usize,
    pub wall_time_s: f64,
}

impl MetricsRecord {
    pub fn from_report(
        report: &EvalReport,
        part: EvalPart,
        config_text: &str,
        seed: u64,
        epochs: usize,
        wall_time_s: f64,
    ) -> Self {
        Self {
            schema_version: 1,
            config_hash: format!("{:016x}", fnv1a64(config_text.as_bytes())),
            seed,
            split_mode: report.mode.to_string(),
            part: part.to_string(),
            auc: report.auc,
            ap: report.ap,
            n_pos: report.n_pos,
            n_neg: report.n_neg,
            epochs,
            wall_time_s,
        }
    }
}
