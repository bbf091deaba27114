//! Synthetic event streams with known structure, used by tests, ablation
//! demonstrations, and the scalability benchmark.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

use crate::hypergraph::{HyperedgeEvent, NodeId, TemporalHypergraph};

/// A stream where the only usable signal is third-order: disjoint triples
/// recur as genuine 3-node events, while the pairwise co-occurrence counts of
/// *every* pair of nodes are (near) identical by construction.
///
/// Layout: nodes `3j, 3j+1, 3j+2` form triple `j`. Before the boundary the
/// stream holds every non-internal pair exactly `bg_rate` times, every triple
/// exactly `triple_rate` times, and `extra_bg` additional random non-internal
/// pairs (to pad the period to a target length); internal pairs occur *only*
/// through their triple. With `bg_rate == triple_rate` a pairwise projection
/// of the stream is uninformative about which triples are real. After the
/// boundary only the triples recur (`post_per_triple` times each), so every
/// held-out event tests the planted rule.
#[derive(Debug, Clone)]
pub struct PlantedTriplesConfig {
    pub n_triples: usize,
    /// Occurrences of each non-internal pair before the boundary.
    pub bg_rate: usize,
    /// Occurrences of each triple before the boundary.
    pub triple_rate: usize,
    /// Occurrences of each triple after the boundary.
    pub post_per_triple: usize,
    /// Extra random non-internal pair events before the boundary.
    pub extra_bg: usize,
    pub seed: u64,
}

impl PlantedTriplesConfig {
    /// Total number of events the stream will contain.
    pub fn total_events(&self) -> usize {
        let n = 3 * self.n_triples;
        let non_internal = n * (n - 1) / 2 - 3 * self.n_triples;
        non_internal * self.bg_rate
            + self.n_triples * self.triple_rate
            + self.extra_bg
            + self.n_triples * self.post_per_triple
    }

    /// Events before the boundary.
    pub fn pre_events(&self) -> usize {
        self.total_events() - self.n_triples * self.post_per_triple
    }
}

pub fn planted_triples(cfg: &PlantedTriplesConfig) -> TemporalHypergraph {
    assert!(cfg.n_triples >= 2, "need at least two triples");
    let n = 3 * cfg.n_triples;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);

    let triples: Vec<Vec<NodeId>> = (0..cfg.n_triples)
        .map(|j| vec![3 * j as NodeId, 3 * j as NodeId + 1, 3 * j as NodeId + 2])
        .collect();
    let mut non_internal: Vec<(NodeId, NodeId)> = Vec::new();
    for a in 0..n as NodeId {
        for b in (a + 1)..n as NodeId {
            if a / 3 != b / 3 {
                non_internal.push((a, b));
            }
        }
    }

    let mut pre: Vec<Vec<NodeId>> = Vec::with_capacity(cfg.pre_events());
    for &(a, b) in &non_internal {
        for _ in 0..cfg.bg_rate {
            pre.push(vec![a, b]);
        }
    }
    for t in &triples {
        for _ in 0..cfg.triple_rate {
            pre.push(t.clone());
        }
    }
    for _ in 0..cfg.extra_bg {
        let &(a, b) = non_internal.choose(&mut rng).unwrap();
        pre.push(vec![a, b]);
    }
    pre.shuffle(&mut rng);

    let mut post: Vec<Vec<NodeId>> = Vec::with_capacity(cfg.n_triples * cfg.post_per_triple);
    for t in &triples {
        for _ in 0..cfg.post_per_triple {
            post.push(t.clone());
        }
    }
    post.shuffle(&mut rng);

    let events: Vec<HyperedgeEvent> = pre
        .into_iter()
        .chain(post)
        .enumerate()
        .map(|(i, nodes)| HyperedgeEvent::new(nodes, (i + 1) as f64))
        .collect();
    TemporalHypergraph::from_events(events, n).expect("generator emits valid events")
}

/// A stream of 3-node events where the planted rule is that member groups
/// recur as whole sets. Nodes `3j, 3j+1, 3j+2` form group `j`. Before the
/// boundary each group occurs `planted_rate` times and `cover_events`
/// "transversal" triples (one node from each of three distinct groups, so
/// never two nodes of the same group) spread pairwise co-occurrence over the
/// cross-group pairs. Choosing `planted_rate ≈ cover_events · 3 / (9 ·
/// C(n_groups, 2))` makes the expected co-occurrence count of every pair of
/// nodes equal, so a pairwise projection carries (almost) no usable signal,
/// while transversal triples recur as whole types often enough that both
/// background and planted positives reward the same third-order feature.
/// After the boundary only the groups recur.
#[derive(Debug, Clone)]
pub struct GroupCoverConfig {
    pub n_groups: usize,
    /// Occurrences of each group triple before the boundary.
    pub planted_rate: usize,
    /// Transversal background triples before the boundary.
    pub cover_events: usize,
    /// Occurrences of each group triple after the boundary.
    pub post_per_group: usize,
    pub seed: u64,
}

impl GroupCoverConfig {
    /// Total number of events the stream will contain.
    pub fn total_events(&self) -> usize {
        self.pre_events() + self.n_groups * self.post_per_group
    }

    /// Events before the boundary.
    pub fn pre_events(&self) -> usize {
        self.n_groups * self.planted_rate + self.cover_events
    }
}

pub fn group_cover_stream(cfg: &GroupCoverConfig) -> TemporalHypergraph {
    assert!(cfg.n_groups >= 4, "need at least four groups");
    let n = 3 * cfg.n_groups;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);

    let groups: Vec<Vec<NodeId>> = (0..cfg.n_groups)
        .map(|j| vec![3 * j as NodeId, 3 * j as NodeId + 1, 3 * j as NodeId + 2])
        .collect();

    let mut pre: Vec<Vec<NodeId>> = Vec::with_capacity(cfg.pre_events());
    for g in &groups {
        for _ in 0..cfg.planted_rate {
            pre.push(g.clone());
        }
    }
    for _ in 0..cfg.cover_events {
        let picked = rand::seq::index::sample(&mut rng, cfg.n_groups, 3);
        let mut e: Vec<NodeId> = picked
            .iter()
            .map(|j| 3 * j as NodeId + rng.random_range(0..3))
            .collect();
        e.sort_unstable();
        pre.push(e);
    }
    pre.shuffle(&mut rng);

    let mut post: Vec<Vec<NodeId>> = Vec::with_capacity(cfg.n_groups * cfg.post_per_group);
    for g in &groups {
        for _ in 0..cfg.post_per_group {
            post.push(g.clone());
        }
    }
    post.shuffle(&mut rng);

    let events: Vec<HyperedgeEvent> = pre
        .into_iter()
        .chain(post)
        .enumerate()
        .map(|(i, nodes)| HyperedgeEvent::new(nodes, (i + 1) as f64))
        .collect();
    TemporalHypergraph::from_events(events, n).expect("generator emits valid events")
}

/// A stream where recency is the only reliable signal. Nodes `2j, 2j+1` form
/// "hot" pair `j`. The old phase (times ≤ 600) holds a `bg_coverage`
/// fraction of the non-hot pairs `bg_rate` times each; the recent phase
/// (times 650..circa 695) holds every hot pair `hot_rate` times; after the
/// boundary at t = 700 only hot pairs recur. With `bg_rate == hot_rate` the
/// co-occurrence counts of hot pairs and covered background pairs match, so a
/// sampler that ignores event times cannot tell a recurring hot pair from a
/// corrupted pair whose nodes met long ago. Coverage below 1 keeps some
/// pairs unobserved so negative sampling has room.
#[derive(Debug, Clone)]
pub struct RecencyPairsConfig {
    pub n_hot_pairs: usize,
    /// Occurrences of each covered non-hot pair in the old phase.
    pub bg_rate: usize,
    /// Fraction of non-hot pairs present in the old phase.
    pub bg_coverage: f64,
    /// Occurrences of each hot pair in the recent phase.
    pub hot_rate: usize,
    /// Occurrences of each hot pair after the boundary.
    pub post_per_pair: usize,
    pub seed: u64,
}

pub fn recency_pairs(cfg: &RecencyPairsConfig) -> TemporalHypergraph {
    assert!(cfg.n_hot_pairs >= 2, "need at least two hot pairs");
    assert!((0.0..=1.0).contains(&cfg.bg_coverage));
    let n = 2 * cfg.n_hot_pairs;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);

    let mut non_hot: Vec<(NodeId, NodeId)> = Vec::new();
    for a in 0..n as NodeId {
        for b in (a + 1)..n as NodeId {
            if a / 2 != b / 2 {
                non_hot.push((a, b));
            }
        }
    }
    non_hot.shuffle(&mut rng);
    let covered = ((non_hot.len() as f64) * cfg.bg_coverage).round() as usize;
    let mut old: Vec<Vec<NodeId>> = Vec::new();
    for &(a, b) in &non_hot[..covered] {
        for _ in 0..cfg.bg_rate {
            old.push(vec![a, b]);
        }
    }
    old.shuffle(&mut rng);

    let hot: Vec<Vec<NodeId>> = (0..cfg.n_hot_pairs)
        .map(|j| vec![2 * j as NodeId, 2 * j as NodeId + 1])
        .collect();
    let mut recent: Vec<Vec<NodeId>> = hot
        .iter()
        .flat_map(|p| std::iter::repeat_n(p.clone(), cfg.hot_rate))
        .collect();
    recent.shuffle(&mut rng);
    let mut post: Vec<Vec<NodeId>> = hot
        .iter()
        .flat_map(|p| std::iter::repeat_n(p.clone(), cfg.post_per_pair))
        .collect();
    post.shuffle(&mut rng);

    let mut events = Vec::new();
    let n_old = old.len();
    for (i, nodes) in old.into_iter().enumerate() {
        events.push(HyperedgeEvent::new(
            nodes,
            600.0 * (i + 1) as f64 / n_old as f64,
        ));
    }
    let n_recent = recent.len();
    for (i, nodes) in recent.into_iter().enumerate() {
        events.push(HyperedgeEvent::new(
            nodes,
            650.0 + 45.0 * (i + 1) as f64 / n_recent as f64,
        ));
    }
    let n_post = post.len();
    for (i, nodes) in post.into_iter().enumerate() {
        events.push(HyperedgeEvent::new(
            nodes,
            710.0 + 290.0 * (i + 1) as f64 / n_post as f64,
        ));
    }
    TemporalHypergraph::from_events(events, n).expect("generator emits valid events")
}

/// Uniform random triples with the node pool scaled to the stream length, so
/// per-node degree (and with it the per-event candidate count) stays constant
/// as `n_events` grows. Used by the scalability benchmark.
pub fn uniform_triples(n_events: usize, seed: u64) -> TemporalHypergraph {
    assert!(n_events >= 1);
    let n_nodes = (n_events / 5).max(6);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let events = (0..n_events)
        .map(|i| {
            let picks = rand::seq::index::sample(&mut rng, n_nodes, 3);
            let nodes: Vec<NodeId> = picks.iter().map(|v| v as NodeId).collect();
            HyperedgeEvent::new(nodes, (i + 1) as f64)
        })
        .collect();
    TemporalHypergraph::from_events(events, n_nodes).expect("generator emits valid events")
}
