//! Temporal walk sampling over hyperedges.
//!
//! A set walk is a time-decreasing sequence of pairwise-intersecting
//! hyperedge events. Steps are drawn from the candidate set "events adjacent
//! to the current hyperedge that happened strictly earlier", with a weight
//! combining a temporal bias `exp(α·Δt)` (recent events win) and a structural
//! bias `exp(φ)` where `φ` scores the overlap between candidate and current
//! hyperedge. Weights are handled in log space so large `α·Δt` products never
//! overflow; timestamps are min-shifted before any exponentiation.
//!
//! The default step rule draws from the exact categorical distribution over
//! the candidate set. A sequential acceptance variant (scanning candidates in
//! decreasing-time order) is kept behind [`SamplerConfig::sequential`] for
//! fidelity experiments; it does not realize the same distribution.

use std::collections::HashMap;
use std::rc::Rc;

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hypergraph::{EventIndex, NodeId, TemporalHypergraph};

/// Largest exponent argument allowed by the overflow guard.
const MAX_EXPONENT: f64 = 700.0;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error(
        "alpha * timestamp span = {product:.3e} exceeds {MAX_EXPONENT}; \
         rescale alpha below {limit:.3e} for this dataset's time units"
    )]
    AlphaOverflow { product: f64, limit: f64 },
    #[error("invalid sampler config: {0}")]
    BadConfig(String),
}

/// Per-node weight Γ(u, e) used by the structural bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMode {
    /// Γ ≡ 1, so φ(e, e') is the intersection size.
    Unit,
    /// Γ(u, ·) = 1 / deg(u), so φ(e, e') = Σ 1/deg(u)² over the intersection.
    InverseDegree,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Temporal bias coefficient α ≥ 0, in inverse dataset time units.
    pub alpha: f64,
    /// Walks per seed node (M).
    pub walks_per_node: usize,
    /// Maximum walk length in hyperedges (m).
    pub walk_len: usize,
    /// Hyperedge size cap r; `None` = unbounded. With `Some(r)` only events of
    /// size ≤ r are eligible as steps (r-restricted walks).
    pub max_edge_size: Option<usize>,
    pub gamma_mode: GammaMode,
    /// If set, each step scans at most this many most-recent candidates.
    pub candidate_window: Option<usize>,
    /// Use the sequential acceptance rule instead of exact categorical draws.
    pub sequential: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            walks_per_node: 8,
            walk_len: 3,
            max_edge_size: None,
            gamma_mode: GammaMode::Unit,
            candidate_window: None,
            sequential: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.walks_per_node == 0 {
            return Err(SamplerError::BadConfig(
                "walks_per_node must be >= 1".into(),
            ));
        }
        if self.walk_len == 0 {
            return Err(SamplerError::BadConfig("walk_len must be >= 1".into()));
        }
        if self.alpha < 0.0 || !self.alpha.is_finite() {
            return Err(SamplerError::BadConfig(format!(
                "alpha must be finite and >= 0, got {}",
                self.alpha
            )));
        }
        if let Some(r) = self.max_edge_size
            && r < 2
        {
            return Err(SamplerError::BadConfig(format!(
                "max_edge_size must be >= 2, got {r}"
            )));
        }
        Ok(())
    }
}

/// Node-in-edge weight Γ(u, e). Both modes depend only on the node.
pub fn gamma(u: NodeId, g: &TemporalHypergraph, mode: GammaMode) -> f64 {
    match mode {
        GammaMode::Unit => 1.0,
        GammaMode::InverseDegree => {
            let d = g.degree(u);
            if d == 0 { 0.0 } else { 1.0 / d as f64 }
        }
    }
}

/// Structural bias φ(e, e') = Σ_{u ∈ e ∩ e'} Γ(u,e)·Γ(u,e') over the
/// intersection of two sorted node sets.
pub fn phi(e: &[NodeId], e_p: &[NodeId], mode: GammaMode, g: &TemporalHypergraph) -> f64 {
    let mut total = 0.0;
    let (mut i, mut j) = (0, 0);
    while i < e.len() && j < e_p.len() {
        match e[i].cmp(&e_p[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                let w = gamma(e[i], g, mode);
                total += w * w;
                i += 1;
                j += 1;
            }
        }
    }
    total
}

/// Numerically stable log(Σ exp(x_i)); `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let mx = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return f64::NEG_INFINITY;
    }
    let s: f64 = xs.iter().map(|&x| (x - mx).exp()).sum();
    mx + s.ln()
}

/// Precomputed per-event sampling scores.
///
/// All quantities are stored in log space: `log_p0 = α·t̃` (t̃ min-shifted),
/// `log_p1 = log Σ exp(α·t̃')` over the event's earlier adjacent events,
/// `log_p2 = log Σ exp(φ(e', e))` over the same set, and `predecessors`
/// optionally lists those events with their φ values. The `p0/p1/p2/p3`
/// accessors expose the plain (exponentiated) values.
#[derive(Debug, Clone)]
pub struct ScoreTable {
    alpha: f64,
    shift: f64,
    records: Vec<EventScores>,
}

#[derive(Debug, Clone)]
pub struct EventScores {
    pub log_p0: f64,
    pub log_p1: f64,
    pub log_p2: f64,
    pub predecessors: Option<Vec<(EventIndex, f64)>>,
}

impl ScoreTable {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Min timestamp subtracted from every time before exponentiation.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn record(&self, i: EventIndex) -> &EventScores {
        &self.records[i as usize]
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn p0(&self, i: EventIndex) -> f64 {
        self.records[i as usize].log_p0.exp()
    }

    pub fn p1(&self, i: EventIndex) -> f64 {
        self.records[i as usize].log_p1.exp()
    }

    pub fn p2(&self, i: EventIndex) -> f64 {
        self.records[i as usize].log_p2.exp()
    }

    /// Map from adjacent earlier event to exp(φ), when predecessor lists were
    /// materialized.
    pub fn p3(&self, i: EventIndex) -> Option<Vec<(EventIndex, f64)>> {
        self.records[i as usize]
            .predecessors
            .as_ref()
            .map(|v| v.iter().map(|&(j, phi)| (j, phi.exp())).collect())
    }
}

fn check_overflow(g: &TemporalHypergraph, alpha: f64) -> Result<f64, SamplerError> {
    let shift = g.min_time().unwrap_or(0.0);
    let span = g.max_time().unwrap_or(0.0) - shift;
    let product = alpha * span;
    if product > MAX_EXPONENT {
        return Err(SamplerError::AlphaOverflow {
            product,
            limit: if span > 0.0 {
                MAX_EXPONENT / span
            } else {
                f64::INFINITY
            },
        });
    }
    Ok(shift)
}

/// Computes the score table, materializing per-event predecessor lists
/// (memory O(Σ |E^t(e)|)). Prefer [`compute_scores_light`] for large streams.
pub fn compute_scores(
    g: &TemporalHypergraph,
    cfg: &SamplerConfig,
) -> Result<ScoreTable, SamplerError> {
    compute_scores_impl(g, cfg, true)
}

/// Computes the same table without storing predecessor lists; samplers then
/// enumerate candidates on the fly (identical distributions).
pub fn compute_scores_light(
    g: &TemporalHypergraph,
    cfg: &SamplerConfig,
) -> Result<ScoreTable, SamplerError> {
    compute_scores_impl(g, cfg, false)
}

fn compute_scores_impl(
    g: &TemporalHypergraph,
    cfg: &SamplerConfig,
    keep_predecessors: bool,
) -> Result<ScoreTable, SamplerError> {
    cfg.validate()?;
    let shift = check_overflow(g, cfg.alpha)?;

    let mut records = Vec::with_capacity(g.len());
    for i in 0..g.len() as EventIndex {
        let e = g.event(i);
        // Adjacent earlier events, deduplicated across the member-node loop.
        let mut preds = g.adjacent_indexes_before(&e.nodes, e.time);
        if let Some(w) = cfg.candidate_window
            && preds.len() > w
        {
            preds.drain(..preds.len() - w); // keep the most recent w
        }
        let mut time_terms = Vec::with_capacity(preds.len());
        let mut phi_terms = Vec::with_capacity(preds.len());
        let mut pred_phis = Vec::with_capacity(if keep_predecessors { preds.len() } else { 0 });
        for &j in &preds {
            let ej = g.event(j);
            let p = phi(&ej.nodes, &e.nodes, cfg.gamma_mode, g);
            time_terms.push(cfg.alpha * (ej.time - shift));
            phi_terms.push(p);
            if keep_predecessors {
                pred_phis.push((j, p));
            }
        }
        records.push(EventScores {
            log_p0: cfg.alpha * (e.time - shift),
            log_p1: log_sum_exp(&time_terms),
            log_p2: log_sum_exp(&phi_terms),
            predecessors: keep_predecessors.then_some(pred_phis),
        });
    }
    Ok(ScoreTable {
        alpha: cfg.alpha,
        shift,
        records,
    })
}

/// One step of a set walk.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkStep {
    pub event: EventIndex,
    pub nodes: Vec<NodeId>,
    pub time: f64,
}

/// A time-decreasing sequence of pairwise-intersecting hyperedge events.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SetWalk {
    pub steps: Vec<WalkStep>,
}

impl SetWalk {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// The M walks sampled for one seed node.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkSet {
    pub seed_node: NodeId,
    pub walks: Vec<SetWalk>,
}

impl WalkSet {
    /// True when no walk found any history.
    pub fn is_empty(&self) -> bool {
        self.walks.iter().all(SetWalk::is_empty)
    }
}

/// Candidate list with cumulative weights, shared across the walks of one
/// sampling call.
struct Candidates {
    idx: Vec<EventIndex>,
    /// Cumulative sums of exp(log_w - max_log_w), same length as `idx`.
    cum: Vec<f64>,
    total: f64,
}

impl Candidates {
    fn from_log_weights(idx: Vec<EventIndex>, logw: &[f64]) -> Self {
        let mx = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut cum = Vec::with_capacity(logw.len());
        let mut acc = 0.0;
        for &lw in logw {
            acc += (lw - mx).exp();
            cum.push(acc);
        }
        Candidates {
            idx,
            cum,
            total: acc,
        }
    }

    // The negated comparison is load-bearing: a NaN total (all weights
    // degenerate) must read as empty, and `total <= 0.0` would not catch it.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    fn is_empty(&self) -> bool {
        self.idx.is_empty() || !(self.total > 0.0)
    }

    fn draw(&self, rng: &mut impl Rng) -> EventIndex {
        let r = rng.random::<f64>() * self.total;
        let at = self
            .cum
            .partition_point(|&c| c <= r)
            .min(self.idx.len() - 1);
        self.idx[at]
    }

    /// Sequential acceptance in decreasing-time order over the normalized
    /// weights; `None` when every candidate is rejected.
    fn draw_sequential(&self, rng: &mut impl Rng) -> Option<EventIndex> {
        let mut prev = 0.0;
        // idx is ascending in time; scan from the most recent backwards.
        for at in (0..self.idx.len()).rev() {
            let w = self.cum[at] - if at == 0 { 0.0 } else { self.cum[at - 1] };
            let p = w / self.total;
            if rng.random::<f64>() < p {
                return Some(self.idx[at]);
            }
            prev += p;
        }
        let _ = prev;
        None
    }
}

enum CacheKey {
    SeedNode(NodeId),
    FromEvent(EventIndex),
}

impl CacheKey {
    fn as_u64(&self) -> u64 {
        match *self {
            CacheKey::SeedNode(u) => (1u64 << 32) | u as u64,
            CacheKey::FromEvent(i) => (2u64 << 32) | i as u64,
        }
    }
}

/// Per-call cache: candidate lists keyed by walk position source. Start lists
/// depend on (seed node, t0) and are valid within a single sampling call;
/// event-keyed lists depend only on the event.
struct WalkCache {
    map: HashMap<u64, Rc<Candidates>>,
}

impl WalkCache {
    fn new() -> Self {
        Self {
            map: HashMap::new(),
        }
    }
}

fn size_ok(g: &TemporalHypergraph, i: EventIndex, cfg: &SamplerConfig) -> bool {
    match cfg.max_edge_size {
        Some(r) => g.event(i).size() <= r,
        None => true,
    }
}

fn candidates_from_event(
    e_p: EventIndex,
    g: &TemporalHypergraph,
    scores: &ScoreTable,
    cfg: &SamplerConfig,
) -> Candidates {
    let ev = g.event(e_p);
    let t_p = ev.time;
    let shift = scores.shift();
    let mut idx: Vec<EventIndex>;
    let mut logw: Vec<f64> = Vec::new();
    if let Some(preds) = scores.record(e_p).predecessors.as_ref() {
        idx = Vec::with_capacity(preds.len());
        for &(j, phi_j) in preds {
            if !size_ok(g, j, cfg) {
                continue;
            }
            idx.push(j);
            logw.push(cfg.alpha * (g.event(j).time - shift) + phi_j);
        }
    } else {
        idx = g.adjacent_indexes_before(&ev.nodes, t_p);
        if let Some(w) = cfg.candidate_window
            && idx.len() > w
        {
            idx.drain(..idx.len() - w);
        }
        idx.retain(|&j| size_ok(g, j, cfg));
        logw = idx
            .iter()
            .map(|&j| {
                let ej = g.event(j);
                cfg.alpha * (ej.time - shift) + phi(&ej.nodes, &ev.nodes, cfg.gamma_mode, g)
            })
            .collect();
    }
    // Weights are relative within the step: subtract α·t̃_p for readability of
    // the math (constant offset, no effect after normalization).
    let off = cfg.alpha * (t_p - shift);
    for lw in &mut logw {
        *lw -= off;
    }
    Candidates::from_log_weights(idx, &logw)
}

fn candidates_from_seed(
    u: NodeId,
    t0: f64,
    g: &TemporalHypergraph,
    scores: &ScoreTable,
    cfg: &SamplerConfig,
) -> Candidates {
    let shift = scores.shift();
    let mut idx: Vec<EventIndex> = g.incidence_before(u, t0).to_vec();
    if let Some(w) = cfg.candidate_window
        && idx.len() > w
    {
        idx.drain(..idx.len() - w);
    }
    idx.retain(|&j| size_ok(g, j, cfg));
    // Degenerate seed hyperedge {u}: φ({u} ∩ e) = Γ(u)² is constant across
    // candidates (every candidate contains u), as is the α·t̃0 offset.
    let gm = gamma(u, g, cfg.gamma_mode);
    let logw: Vec<f64> = idx
        .iter()
        .map(|&j| cfg.alpha * (g.event(j).time - shift) - cfg.alpha * (t0 - shift) + gm * gm)
        .collect();
    Candidates::from_log_weights(idx, &logw)
}

/// Exact next-step distribution from hyperedge `e_p` at time `t_p`:
/// normalized weights `exp(α(t−t_p))·exp(φ(e, e_p))` over the eligible
/// candidates, ascending by event index. Reference implementation for tests
/// and distribution checks.
pub fn step_distribution(
    e_p: &[NodeId],
    t_p: f64,
    g: &TemporalHypergraph,
    cfg: &SamplerConfig,
) -> Vec<(EventIndex, f64)> {
    let mut idx = g.adjacent_indexes_before(e_p, t_p);
    if let Some(w) = cfg.candidate_window
        && idx.len() > w
    {
        idx.drain(..idx.len() - w);
    }
    idx.retain(|&j| size_ok(g, j, cfg));
    let logw: Vec<f64> = idx
        .iter()
        .map(|&j| {
            let ej = g.event(j);
            cfg.alpha * (ej.time - t_p) + phi(&ej.nodes, e_p, cfg.gamma_mode, g)
        })
        .collect();
    let lse = log_sum_exp(&logw);
    idx.into_iter()
        .zip(logw)
        .map(|(j, lw)| (j, (lw - lse).exp()))
        .collect()
}

/// Draws one next step from the candidate set of `e_p` at `t_p`. Returns
/// `None` when no candidate exists (the walk terminates).
pub fn sample_next(
    e_p: &[NodeId],
    t_p: f64,
    g: &TemporalHypergraph,
    scores: &ScoreTable,
    cfg: &SamplerConfig,
    rng: &mut impl Rng,
) -> Option<(EventIndex, f64)> {
    let shift = scores.shift();
    let mut idx = g.adjacent_indexes_before(e_p, t_p);
    if let Some(w) = cfg.candidate_window
        && idx.len() > w
    {
        idx.drain(..idx.len() - w);
    }
    idx.retain(|&j| size_ok(g, j, cfg));
    let logw: Vec<f64> = idx
        .iter()
        .map(|&j| {
            let ej = g.event(j);
            cfg.alpha * (ej.time - shift) - cfg.alpha * (t_p - shift)
                + phi(&ej.nodes, e_p, cfg.gamma_mode, g)
        })
        .collect();
    let cands = Candidates::from_log_weights(idx, &logw);
    draw_step(&cands, cfg, rng).map(|j| (j, g.event(j).time))
}

fn draw_step(cands: &Candidates, cfg: &SamplerConfig, rng: &mut impl Rng) -> Option<EventIndex> {
    if cands.is_empty() {
        return None;
    }
    if cfg.sequential {
        cands.draw_sequential(rng)
    } else {
        Some(cands.draw(rng))
    }
}

fn sample_setwalk_cached(
    seed_node: NodeId,
    t0: f64,
    g: &TemporalHypergraph,
    scores: &ScoreTable,
    cfg: &SamplerConfig,
    rng: &mut impl Rng,
    cache: &mut WalkCache,
) -> SetWalk {
    let mut walk = SetWalk::default();
    let mut key = CacheKey::SeedNode(seed_node);
    for _ in 0..cfg.walk_len {
        let cands = match cache.map.get(&key.as_u64()) {
            Some(c) => Rc::clone(c),
            None => {
                let built = match key {
                    CacheKey::SeedNode(u) => candidates_from_seed(u, t0, g, scores, cfg),
                    CacheKey::FromEvent(i) => candidates_from_event(i, g, scores, cfg),
                };
                let rc = Rc::new(built);
                cache.map.insert(key.as_u64(), Rc::clone(&rc));
                rc
            }
        };
        let Some(next) = draw_step(&cands, cfg, rng) else {
            break;
        };
        let ev = g.event(next);
        walk.steps.push(WalkStep {
            event: next,
            nodes: ev.nodes.clone(),
            time: ev.time,
        });
        key = CacheKey::FromEvent(next);
    }
    walk
}

/// Samples one set walk from `seed_node` looking back from `t0`: the first
/// step is drawn from the node's own history (the seed acts as a degenerate
/// one-node hyperedge), later steps follow [`sample_next`]'s rule. Walks
/// truncate at dead ends; a seed with no history yields an empty walk.
pub fn sample_setwalk(
    seed_node: NodeId,
    t0: f64,
    g: &TemporalHypergraph,
    scores: &ScoreTable,
    cfg: &SamplerConfig,
    rng: &mut impl Rng,
) -> SetWalk {
    let mut cache = WalkCache::new();
    sample_setwalk_cached(seed_node, t0, g, scores, cfg, rng, &mut cache)
}

/// Derives the per-walk rng stream. Streams depend on the *position* of the
/// seed inside the (sorted) seed hyperedge rather than the raw node id, so
/// isomorphic instances relabeled by an order-preserving bijection sample
/// corresponding walks from the same base seed.
pub fn walk_rng(base_seed: u64, seed_position: usize, walk_index: usize) -> ChaCha12Rng {
    let mut h = base_seed ^ 0x9e37_79b9_7f4a_7c15;
    for v in [seed_position as u64, walk_index as u64] {
        h ^= v
            .wrapping_add(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(h << 6)
            .wrapping_add(h >> 2);
        h = splitmix64(h);
    }
    ChaCha12Rng::seed_from_u64(h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed with a list of stream labels into a derived seed.
/// Training and evaluation use this to give every (epoch, example, purpose)
/// its own independent deterministic rng stream.
pub fn mix_seed(base: u64, parts: &[u64]) -> u64 {
    let mut h = splitmix64(base ^ 0xa076_1d64_78bd_642f);
    for &v in parts {
        h = splitmix64(h ^ splitmix64(v));
    }
    h
}

/// Samples `walks_per_node` walks for every node of `e0` (sorted order),
/// looking back from `t0`. Fully determined by `base_seed`.
pub fn sample_walksets(
    e0: &[NodeId],
    t0: f64,
    g: &TemporalHypergraph,
    scores: &ScoreTable,
    cfg: &SamplerConfig,
    base_seed: u64,
) -> Vec<WalkSet> {
    let mut seeds = e0.to_vec();
    seeds.sort_unstable();
    seeds.dedup();
    let mut cache = WalkCache::new();
    seeds
        .iter()
        .enumerate()
        .map(|(pos, &u)| {
            let walks = (0..cfg.walks_per_node)
                .map(|j| {
                    let mut rng = walk_rng(base_seed, pos, j);
                    sample_setwalk_cached(u, t0, g, scores, cfg, &mut rng, &mut cache)
                })
                .collect();
            WalkSet {
                seed_node: u,
                walks,
            }
        })
        .collect()
}

/// Serializes walks as line-oriented text: one walk per line, steps separated
/// by `;`, each step `time:node,node,...`. Empty walks produce empty lines.
pub fn walks_to_text(walks: &[SetWalk]) -> String {
    let mut out = String::new();
    for w in walks {
        let line = w
            .steps
            .iter()
            .map(|s| {
                let nodes = s
                    .nodes
                    .iter()
                    .map(|u| u.to_string())
                    .collect::<Vec<_>>()
                    .join(",");
                format!("{}:{}", s.time, nodes)
            })
            .collect::<Vec<_>>()
            .join(";");
        out.push_str(&line);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::HyperedgeEvent;

    fn graph(events: &[(&[NodeId], f64)], n: usize) -> TemporalHypergraph {
        let evs = events
            .iter()
            .map(|&(ns, t)| HyperedgeEvent::new(ns.to_vec(), t))
            .collect();
        TemporalHypergraph::from_events(evs, n).unwrap()
    }

    #[test]
    fn phi_unit_is_intersection_size() {
        let g = graph(&[(&[0, 1, 2], 0.0)], 6);
        assert_eq!(phi(&[0, 1, 2], &[2, 3, 4, 5], GammaMode::Unit, &g), 1.0);
        assert_eq!(phi(&[0, 1], &[2, 3], GammaMode::Unit, &g), 0.0);
        assert_eq!(phi(&[0, 1, 2], &[0, 1, 2], GammaMode::Unit, &g), 3.0);
    }

    #[test]
    fn phi_inverse_degree_hand_case() {
        // deg(a)=2, deg(b)=4 → φ({a,b},{a,b,c}) = 1/4 + 1/16 = 0.3125
        let g = graph(
            &[
                (&[0, 1], 0.0),
                (&[0, 1], 1.0),
                (&[1, 2], 2.0),
                (&[1, 3], 3.0),
            ],
            4,
        );
        assert_eq!(g.degree(0), 2);
        assert_eq!(g.degree(1), 4);
        let got = phi(&[0, 1], &[0, 1, 2], GammaMode::InverseDegree, &g);
        assert!((got - 0.3125).abs() < 1e-15, "got {got}");
    }

    #[test]
    fn scores_single_event() {
        let g = graph(&[(&[0, 1], 5.0)], 2);
        let t = compute_scores(&g, &SamplerConfig::default()).unwrap();
        assert_eq!(t.p1(0), 0.0);
        assert_eq!(t.p2(0), 0.0);
        assert!(t.p3(0).unwrap().is_empty());
    }

    #[test]
    fn scores_two_event_chain() {
        // chain sharing one node, α=0, unit Γ: later event has P1=1, P2=e^1
        let g = graph(&[(&[0, 1], 1.0), (&[1, 2], 2.0)], 3);
        let t = compute_scores(&g, &SamplerConfig::default()).unwrap();
        assert_eq!(t.p0(0), 1.0); // α=0 ⇒ all P0 = 1
        assert_eq!(t.p0(1), 1.0);
        assert!((t.p1(1) - 1.0).abs() < 1e-12);
        assert!((t.p2(1) - 1.0f64.exp()).abs() < 1e-12);
        let p3 = t.p3(1).unwrap();
        assert_eq!(p3.len(), 1);
        assert_eq!(p3[0].0, 0);
        assert!((p3[0].1 - 1.0f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn scores_overflow_guard() {
        let g = graph(&[(&[0, 1], 0.0), (&[1, 2], 1000.0)], 3);
        let cfg = SamplerConfig {
            alpha: 1.0,
            ..Default::default()
        };
        match compute_scores(&g, &cfg) {
            Err(SamplerError::AlphaOverflow { product, .. }) => {
                assert_eq!(product, 1000.0)
            }
            other => panic!("expected overflow error, got {other:?}"),
        }
    }

    #[test]
    fn sample_next_two_candidate_probabilities() {
        // e_p={a,b}@10; candidates e1={a,c}@5 (φ=1), e2={a,b,d}@8 (φ=2), α=0
        // → P(e1) = e/(e+e²) ≈ 0.2689, P(e2) ≈ 0.7311
        let g = graph(&[(&[0, 2], 5.0), (&[0, 1, 3], 8.0), (&[0, 1], 10.0)], 4);
        let cfg = SamplerConfig::default();
        let dist = step_distribution(&[0, 1], 10.0, &g, &cfg);
        assert_eq!(dist.len(), 2);
        let p1 = dist.iter().find(|&&(j, _)| j == 0).unwrap().1;
        let p2 = dist.iter().find(|&&(j, _)| j == 1).unwrap().1;
        assert!((p1 - 0.268941).abs() < 1e-5, "p1={p1}");
        assert!((p2 - 0.731058).abs() < 1e-5, "p2={p2}");

        let scores = compute_scores(&g, &cfg).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(123);
        let n = 100_000;
        let mut hits = 0usize;
        for _ in 0..n {
            let (j, _) = sample_next(&[0, 1], 10.0, &g, &scores, &cfg, &mut rng).unwrap();
            if j == 1 {
                hits += 1;
            }
        }
        let freq = hits as f64 / n as f64;
        assert!((freq - p2).abs() < 0.01, "freq={freq} expected≈{p2}");
    }

    #[test]
    fn sample_next_edge_cases() {
        let g = graph(&[(&[0, 1], 1.0), (&[1, 2], 3.0)], 3);
        let cfg = SamplerConfig::default();
        let scores = compute_scores(&g, &cfg).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        // single candidate chosen with probability 1
        let got = sample_next(&[1, 2], 3.0, &g, &scores, &cfg, &mut rng);
        assert_eq!(got, Some((0, 1.0)));
        // no candidates → absent
        let got = sample_next(&[0, 1], 1.0, &g, &scores, &cfg, &mut rng);
        assert_eq!(got, None);
    }

    #[test]
    fn setwalk_deterministic_chain() {
        // e1({a,b},1) → e2({b,c},2), seed=c, t0=3, m=2 →
        // walk [({b,c},2),({a,b},1)] with probability 1
        let g = graph(&[(&[0, 1], 1.0), (&[1, 2], 2.0)], 3);
        let cfg = SamplerConfig {
            walk_len: 2,
            ..Default::default()
        };
        let scores = compute_scores(&g, &cfg).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let w = sample_setwalk(2, 3.0, &g, &scores, &cfg, &mut rng);
        assert_eq!(w.len(), 2);
        assert_eq!(w.steps[0].nodes, vec![1, 2]);
        assert_eq!(w.steps[0].time, 2.0);
        assert_eq!(w.steps[1].nodes, vec![0, 1]);
        assert_eq!(w.steps[1].time, 1.0);
    }

    #[test]
    fn setwalk_empty_history() {
        let g = graph(&[(&[0, 1], 5.0)], 3);
        let cfg = SamplerConfig::default();
        let scores = compute_scores(&g, &cfg).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        assert!(sample_setwalk(2, 9.0, &g, &scores, &cfg, &mut rng).is_empty());
        assert!(sample_setwalk(0, 5.0, &g, &scores, &cfg, &mut rng).is_empty());
    }

    #[test]
    fn walksets_shape_and_determinism() {
        let g = graph(
            &[
                (&[0, 1], 1.0),
                (&[1, 2], 2.0),
                (&[2, 3], 3.0),
                (&[0, 3], 4.0),
            ],
            4,
        );
        let cfg = SamplerConfig {
            walks_per_node: 4,
            walk_len: 3,
            ..Default::default()
        };
        let scores = compute_scores(&g, &cfg).unwrap();
        let a = sample_walksets(&[0, 1, 2], 5.0, &g, &scores, &cfg, 77);
        assert_eq!(a.len(), 3);
        assert!(a.iter().all(|ws| ws.walks.len() == 4));
        let b = sample_walksets(&[0, 1, 2], 5.0, &g, &scores, &cfg, 77);
        assert_eq!(a, b);
        let c = sample_walksets(&[0, 1, 2], 5.0, &g, &scores, &cfg, 78);
        assert_ne!(a, c);
    }

    #[test]
    fn walk_invariants_fuzz() {
        let mut seed_rng = ChaCha12Rng::seed_from_u64(2024);
        for round in 0..40 {
            let n_nodes = 5 + (round % 7);
            let n_events = 30 + (round * 3) % 60;
            let events: Vec<HyperedgeEvent> = (0..n_events)
                .map(|_| {
                    let k = seed_rng.random_range(1..=3usize.min(n_nodes));
                    let nodes: Vec<NodeId> = rand::seq::index::sample(&mut seed_rng, n_nodes, k)
                        .into_iter()
                        .map(|v| v as NodeId)
                        .collect();
                    HyperedgeEvent::new(nodes, seed_rng.random_range(0..50u32) as f64)
                })
                .collect();
            let g = TemporalHypergraph::from_events(events, n_nodes).unwrap();
            let cfg = SamplerConfig {
                alpha: 0.01,
                walks_per_node: 3,
                walk_len: 4,
                ..Default::default()
            };
            let scores = compute_scores_light(&g, &cfg).unwrap();
            let e0: Vec<NodeId> = vec![0, (n_nodes as NodeId) / 2];
            for ws in sample_walksets(&e0, 60.0, &g, &scores, &cfg, round as u64) {
                for w in &ws.walks {
                    if let Some(first) = w.steps.first() {
                        assert!(first.nodes.contains(&ws.seed_node));
                        assert!(first.time < 60.0);
                    }
                    for pair in w.steps.windows(2) {
                        assert!(pair[1].time < pair[0].time, "times must strictly decrease");
                        let shared = pair[0].nodes.iter().any(|u| pair[1].nodes.contains(u));
                        assert!(shared, "consecutive steps must intersect");
                    }
                }
            }
        }
    }

    #[test]
    fn r_cap_filters_candidates() {
        let g = graph(&[(&[0, 1, 2, 3], 1.0), (&[0, 1], 2.0), (&[1, 2], 3.0)], 4);
        let cfg = SamplerConfig {
            max_edge_size: Some(2),
            walk_len: 3,
            ..Default::default()
        };
        let scores = compute_scores(&g, &cfg).unwrap();
        for s in 0..20 {
            let mut rng = ChaCha12Rng::seed_from_u64(s);
            let w = sample_setwalk(1, 4.0, &g, &scores, &cfg, &mut rng);
            assert!(w.steps.iter().all(|st| st.nodes.len() <= 2));
        }
    }

    #[test]
    fn candidate_window_limits_history() {
        let events: Vec<(&[NodeId], f64)> = vec![
            (&[0, 1], 1.0),
            (&[0, 2], 2.0),
            (&[0, 3], 3.0),
            (&[0, 4], 4.0),
        ];
        let g = graph(&events, 5);
        let cfg = SamplerConfig {
            candidate_window: Some(2),
            ..Default::default()
        };
        let dist = step_distribution(&[0], 5.0, &g, &cfg);
        let kept: Vec<EventIndex> = dist.iter().map(|&(j, _)| j).collect();
        assert_eq!(kept, vec![2, 3]); // only the two most recent
    }

    #[test]
    fn light_and_full_scores_sample_identically() {
        let g = graph(
            &[
                (&[0, 1, 2], 1.0),
                (&[1, 3], 2.0),
                (&[2, 3], 2.5),
                (&[0, 3], 3.0),
            ],
            4,
        );
        let cfg = SamplerConfig {
            alpha: 0.1,
            walks_per_node: 5,
            walk_len: 3,
            ..Default::default()
        };
        let full = compute_scores(&g, &cfg).unwrap();
        let light = compute_scores_light(&g, &cfg).unwrap();
        let a = sample_walksets(&[0, 3], 4.0, &g, &full, &cfg, 5);
        let b = sample_walksets(&[0, 3], 4.0, &g, &light, &cfg, 5);
        assert_eq!(a, b);
    }

    #[test]
    fn sequential_variant_runs_and_respects_invariants() {
        let g = graph(
            &[
                (&[0, 1], 1.0),
                (&[1, 2], 2.0),
                (&[0, 2], 3.0),
                (&[1, 2], 4.0),
            ],
            3,
        );
        let cfg = SamplerConfig {
            sequential: true,
            walk_len: 3,
            ..Default::default()
        };
        let scores = compute_scores(&g, &cfg).unwrap();
        for s in 0..50 {
            let mut rng = ChaCha12Rng::seed_from_u64(s);
            let w = sample_setwalk(2, 5.0, &g, &scores, &cfg, &mut rng);
            for pair in w.steps.windows(2) {
                assert!(pair[1].time < pair[0].time);
            }
        }
    }

    #[test]
    fn walk_text_dump_golden() {
        let g = graph(&[(&[0, 1], 1.0), (&[1, 2], 2.5)], 3);
        let cfg = SamplerConfig {
            walk_len: 2,
            ..Default::default()
        };
        let scores = compute_scores(&g, &cfg).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let w = sample_setwalk(2, 3.0, &g, &scores, &cfg, &mut rng);
        let text = walks_to_text(&[w, SetWalk::default()]);
        assert_eq!(text, "2.5:1,2;1:0,1\n\n");
    }
}
