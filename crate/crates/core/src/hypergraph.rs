//! Temporal hypergraph data model and adjacency queries.
//!
//! A temporal hypergraph is a time-sorted stream of *events*: each event is a
//! duplicate-free, sorted node set together with a timestamp. The structure is
//! immutable after construction and maintains a per-node incidence index so
//! that "what happened to this node before time t" queries run in logarithmic
//! time instead of scanning the whole stream.

use itertools::Itertools;
use thiserror::Error;

/// Dense node index. Ingestion remaps arbitrary external ids to `0..node_count`.
pub type NodeId = u32;

/// Index of an event inside [`TemporalHypergraph::events`].
pub type EventIndex = u32;

/// Default cap on the number of subsets a single event may expand to under
/// [`TemporalHypergraph::project`].
pub const DEFAULT_PROJECTION_CAP: u64 = 100_000;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("event {index} has an empty node set")]
    EmptyEvent { index: usize },
    #[error("event {index} references node {node} but node_count is {node_count}")]
    NodeOutOfRange {
        index: usize,
        node: NodeId,
        node_count: usize,
    },
    #[error("event {index} has a non-finite or negative timestamp {time}")]
    BadTimestamp { index: usize, time: f64 },
    #[error(
        "projecting a size-{size} event to r={r} would emit {subsets} subsets \
         (cap {cap}); raise the cap or drop the event"
    )]
    ProjectionBlowup {
        size: usize,
        r: usize,
        subsets: u128,
        cap: u64,
    },
    #[error("projection requires r >= 2, got {0}")]
    ProjectionRadius(usize),
    #[error("hypergraph has no events")]
    Empty,
}

/// One hyperedge event: a set of nodes observed together at a point in time.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperedgeEvent {
    /// Member nodes, sorted ascending, duplicate-free.
    pub nodes: Vec<NodeId>,
    /// Timestamp in dataset units (non-negative, finite).
    pub time: f64,
}

impl HyperedgeEvent {
    /// Builds an event, sorting and deduplicating `nodes`.
    pub fn new(mut nodes: Vec<NodeId>, time: f64) -> Self {
        nodes.sort_unstable();
        nodes.dedup();
        Self { nodes, time }
    }

    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    /// Membership test via binary search (nodes are sorted).
    pub fn contains(&self, u: NodeId) -> bool {
        self.nodes.binary_search(&u).is_ok()
    }
}

/// Immutable event store with temporal adjacency indexes.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalHypergraph {
    events: Vec<HyperedgeEvent>,
    node_count: usize,
    /// For each node, event indexes in ascending order (== ascending time,
    /// since `events` is time-sorted with stable tie order).
    incidence: Vec<Vec<EventIndex>>,
    max_edge_size: usize,
}

impl TemporalHypergraph {
    /// Builds a hypergraph from raw events. Events are normalized (node sets
    /// sorted and deduplicated) and stably sorted by time, so ties keep their
    /// input order.
    pub fn from_events(events: Vec<HyperedgeEvent>, node_count: usize) -> Result<Self, GraphError> {
        let mut events: Vec<HyperedgeEvent> = events
            .into_iter()
            .map(|e| HyperedgeEvent::new(e.nodes, e.time))
            .collect();
        for (index, e) in events.iter().enumerate() {
            if e.nodes.is_empty() {
                return Err(GraphError::EmptyEvent { index });
            }
            if !e.time.is_finite() || e.time < 0.0 {
                return Err(GraphError::BadTimestamp {
                    index,
                    time: e.time,
                });
            }
            if let Some(&node) = e.nodes.iter().find(|&&u| u as usize >= node_count) {
                return Err(GraphError::NodeOutOfRange {
                    index,
                    node,
                    node_count,
                });
            }
        }
        events.sort_by(|a, b| a.time.total_cmp(&b.time));

        let mut incidence = vec![Vec::new(); node_count];
        let mut max_edge_size = 0;
        for (i, e) in events.iter().enumerate() {
            max_edge_size = max_edge_size.max(e.nodes.len());
            for &u in &e.nodes {
                incidence[u as usize].push(i as EventIndex);
            }
        }
        Ok(Self {
            events,
            node_count,
            incidence,
            max_edge_size,
        })
    }

    pub fn events(&self) -> &[HyperedgeEvent] {
        &self.events
    }

    pub fn event(&self, i: EventIndex) -> &HyperedgeEvent {
        &self.events[i as usize]
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Largest event size in the stream (`d_max`).
    pub fn max_edge_size(&self) -> usize {
        self.max_edge_size
    }

    /// Number of events a node participates in (total incidence count).
    pub fn degree(&self, u: NodeId) -> usize {
        self.incidence[u as usize].len()
    }

    /// All events containing `u`, ascending by time.
    pub fn incidence(&self, u: NodeId) -> &[EventIndex] {
        &self.incidence[u as usize]
    }

    /// Earliest timestamp, or `None` for an empty stream.
    pub fn min_time(&self) -> Option<f64> {
        self.events.first().map(|e| e.time)
    }

    /// Latest timestamp, or `None` for an empty stream.
    pub fn max_time(&self) -> Option<f64> {
        self.events.last().map(|e| e.time)
    }

    /// Events containing `u` with time strictly before `t`, as a slice of the
    /// incidence index (ascending time). Zero-allocation form of
    /// [`Self::hyperedges_of_node_before`].
    pub fn incidence_before(&self, u: NodeId, t: f64) -> &[EventIndex] {
        let list = &self.incidence[u as usize];
        let cut = list.partition_point(|&i| self.events[i as usize].time < t);
        &list[..cut]
    }

    /// Events `e` with `u ∈ e` and `time(e) < t` (strict), time-sorted.
    pub fn hyperedges_of_node_before(&self, u: NodeId, t: f64) -> Vec<(EventIndex, f64)> {
        self.incidence_before(u, t)
            .iter()
            .map(|&i| (i, self.events[i as usize].time))
            .collect()
    }

    /// Events `e'` with `time(e') < t` and `e' ∩ e ≠ ∅`, deduplicated and
    /// time-sorted. `e` need not be an existing event — any node set works.
    /// Computed by merging the members' incidence lists.
    pub fn adjacent_hyperedges_before(&self, e: &[NodeId], t: f64) -> Vec<(EventIndex, f64)> {
        self.adjacent_indexes_before(e, t)
            .into_iter()
            .map(|i| (i, self.events[i as usize].time))
            .collect()
    }

    /// Index-only form of [`Self::adjacent_hyperedges_before`].
    pub fn adjacent_indexes_before(&self, e: &[NodeId], t: f64) -> Vec<EventIndex> {
        let mut merged: Vec<EventIndex> = Vec::new();
        for &u in e {
            merged.extend_from_slice(self.incidence_before(u, t));
        }
        merged.sort_unstable();
        merged.dedup();
        merged
    }

    /// The r-projection: events with `|e| ≤ r` are kept; every larger event is
    /// replaced by all `C(|e|, r)` size-r subsets at the same timestamp
    /// (unweighted). `r = 2` yields the clique expansion. Refuses events whose
    /// subset count exceeds `cap`.
    pub fn project_with_cap(&self, r: usize, cap: u64) -> Result<Self, GraphError> {
        if r < 2 {
            return Err(GraphError::ProjectionRadius(r));
        }
        let mut out: Vec<HyperedgeEvent> = Vec::new();
        for e in &self.events {
            let k = e.nodes.len();
            if k <= r {
                out.push(e.clone());
                continue;
            }
            let subsets = binomial(k as u64, r as u64);
            if subsets > cap as u128 {
                return Err(GraphError::ProjectionBlowup {
                    size: k,
                    r,
                    subsets,
                    cap,
                });
            }
            // `combinations` on a sorted slice yields subsets in lexicographic
            // order, keeping the projected stream deterministic.
            for combo in e.nodes.iter().copied().combinations(r) {
                out.push(HyperedgeEvent {
                    nodes: combo,
                    time: e.time,
                });
            }
        }
        Self::from_events(out, self.node_count)
    }

    /// [`Self::project_with_cap`] with [`DEFAULT_PROJECTION_CAP`].
    pub fn project(&self, r: usize) -> Result<Self, GraphError> {
        self.project_with_cap(r, DEFAULT_PROJECTION_CAP)
    }

    /// Builds the sub-hypergraph containing only `keep` (event indexes into
    /// `self`), preserving the node universe. Returns the new graph together
    /// with the mapping from new event index to original index.
    pub fn subgraph(&self, keep: &[EventIndex]) -> Result<(Self, Vec<EventIndex>), GraphError> {
        let mut sorted = keep.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let events = sorted
            .iter()
            .map(|&i| self.events[i as usize].clone())
            .collect();
        // Events are re-sorted stably by `from_events`; `sorted` is already in
        // stream order, so positions are preserved and the mapping is direct.
        let g = Self::from_events(events, self.node_count)?;
        Ok((g, sorted))
    }
}

/// Binomial coefficient with saturation; exact for all arguments that matter
/// before hitting the projection cap.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i + 1) as u128;
        if acc > u128::from(u64::MAX) {
            return acc; // already beyond any sensible cap
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn ev(nodes: &[NodeId], time: f64) -> HyperedgeEvent {
        HyperedgeEvent::new(nodes.to_vec(), time)
    }

    /// Two-event fixture: {0,1}@10 and {0,2,3}@20 (ids as after remapping the
    /// raw stream 7,9 / 7,3,5).
    fn two_event_fixture() -> TemporalHypergraph {
        TemporalHypergraph::from_events(vec![ev(&[0, 1], 10.0), ev(&[0, 2, 3], 20.0)], 4).unwrap()
    }

    #[test]
    fn node_history_strictly_before() {
        let g = two_event_fixture();
        assert_eq!(g.hyperedges_of_node_before(0, 15.0), vec![(0, 10.0)]);
        assert_eq!(g.hyperedges_of_node_before(0, 10.0), vec![]); // strict <
        assert_eq!(g.hyperedges_of_node_before(1, -1.0), vec![]);
        assert_eq!(g.hyperedges_of_node_before(3, 19.0), vec![]);
    }

    #[test]
    fn adjacency_merges_and_dedups() {
        let g = two_event_fixture();
        // {0,2,3} at its own time: only the earlier event intersects (via 0).
        assert_eq!(
            g.adjacent_hyperedges_before(&[0, 2, 3], 20.0),
            vec![(0, 10.0)]
        );
        // An event is never adjacent to itself at its own timestamp (strict <).
        assert_eq!(g.adjacent_hyperedges_before(&[0, 1], 10.0), vec![]);
        // Disjoint query set.
        assert_eq!(g.adjacent_hyperedges_before(&[2, 3], 15.0), vec![]);
    }

    #[test]
    fn events_are_normalized_and_time_sorted() {
        let g = TemporalHypergraph::from_events(
            vec![
                ev(&[2, 1, 2], 5.0),
                HyperedgeEvent {
                    nodes: vec![3, 0],
                    time: 1.0,
                },
            ],
            4,
        )
        .unwrap();
        assert_eq!(g.event(0).nodes, vec![0, 3]);
        assert_eq!(g.event(1).nodes, vec![1, 2]);
        assert_eq!(g.max_edge_size(), 2);
    }

    #[test]
    fn construction_rejects_bad_events() {
        assert!(matches!(
            TemporalHypergraph::from_events(vec![ev(&[], 1.0)], 2),
            Err(GraphError::EmptyEvent { .. })
        ));
        assert!(matches!(
            TemporalHypergraph::from_events(vec![ev(&[5], 1.0)], 2),
            Err(GraphError::NodeOutOfRange { .. })
        ));
        assert!(matches!(
            TemporalHypergraph::from_events(vec![ev(&[0], f64::NAN)], 2),
            Err(GraphError::BadTimestamp { .. })
        ));
        assert!(matches!(
            TemporalHypergraph::from_events(vec![ev(&[0], -3.0)], 2),
            Err(GraphError::BadTimestamp { .. })
        ));
    }

    #[test]
    fn projection_triangle_clique_expansion() {
        let g = TemporalHypergraph::from_events(vec![ev(&[0, 1, 2], 4.0)], 3).unwrap();
        let p = g.project(2).unwrap();
        let got: Vec<Vec<NodeId>> = p.events().iter().map(|e| e.nodes.clone()).collect();
        assert_eq!(got, vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert!(p.events().iter().all(|e| e.time == 4.0));
    }

    #[test]
    fn projection_keeps_small_events_and_counts_subsets() {
        let g =
            TemporalHypergraph::from_events(vec![ev(&[0, 1], 1.0), ev(&[0, 1, 2, 3, 4], 2.0)], 5)
                .unwrap();
        let p = g.project(3).unwrap();
        // size-2 event kept, size-5 event expands to C(5,3) = 10 subsets
        assert_eq!(p.len(), 1 + 10);
        assert_eq!(p.event(0).nodes, vec![0, 1]);
        assert!(p.events()[1..].iter().all(|e| e.size() == 3));
    }

    #[test]
    fn projection_guards() {
        let g = TemporalHypergraph::from_events(vec![ev(&[0, 1, 2, 3, 4, 5], 0.0)], 6).unwrap();
        assert!(matches!(
            g.project_with_cap(3, 10),
            Err(GraphError::ProjectionBlowup { subsets: 20, .. })
        ));
        assert!(matches!(g.project(1), Err(GraphError::ProjectionRadius(1))));
    }

    #[test]
    fn binomial_small_values() {
        assert_eq!(binomial(5, 3), 10);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(3, 5), 0);
        assert_eq!(binomial(50, 25), 126_410_606_437_752);
    }

    #[test]
    fn subgraph_preserves_node_universe_and_order() {
        let g = TemporalHypergraph::from_events(
            vec![ev(&[0, 1], 1.0), ev(&[1, 2], 2.0), ev(&[2, 3], 3.0)],
            4,
        )
        .unwrap();
        let (sub, map) = g.subgraph(&[2, 0]).unwrap();
        assert_eq!(sub.len(), 2);
        assert_eq!(sub.node_count(), 4);
        assert_eq!(map, vec![0, 2]);
        assert_eq!(sub.event(1).nodes, vec![2, 3]);
    }

    /// Oracle check: index-backed queries equal a brute-force scan over all
    /// events, on randomly generated hypergraphs.
    #[test]
    fn adjacency_queries_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..30 {
            let n_nodes = rng.random_range(3..12usize);
            let n_events = rng.random_range(1..60usize);
            let events: Vec<HyperedgeEvent> = (0..n_events)
                .map(|_| {
                    let k = rng.random_range(1..=n_nodes.min(4));
                    let nodes: Vec<NodeId> = rand::seq::index::sample(&mut rng, n_nodes, k)
                        .into_iter()
                        .map(|v| v as NodeId)
                        .collect();
                    ev(&nodes, rng.random_range(0..40u32) as f64)
                })
                .collect();
            let g = TemporalHypergraph::from_events(events, n_nodes).unwrap();

            for _ in 0..20 {
                let t = rng.random_range(-1..45i32) as f64;
                let u = rng.random_range(0..n_nodes) as NodeId;
                let by_index = g.hyperedges_of_node_before(u, t);
                let brute: Vec<(EventIndex, f64)> = g
                    .events()
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| e.time < t && e.contains(u))
                    .map(|(i, e)| (i as EventIndex, e.time))
                    .collect();
                assert_eq!(by_index, brute);

                let k = rng.random_range(1..=n_nodes.min(3));
                let probe: Vec<NodeId> = rand::seq::index::sample(&mut rng, n_nodes, k)
                    .into_iter()
                    .map(|v| v as NodeId)
                    .collect();
                let by_merge = g.adjacent_hyperedges_before(&probe, t);
                let brute: Vec<(EventIndex, f64)> = g
                    .events()
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| e.time < t && probe.iter().any(|&u| e.contains(u)))
                    .map(|(i, e)| (i as EventIndex, e.time))
                    .collect();
                assert_eq!(by_merge, brute);
            }
        }
    }

    /// The pair multiset of `project(G, 2)` equals brute-force pairwise
    /// expansion of every event.
    #[test]
    fn clique_expansion_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n_nodes = rng.random_range(4..10usize);
            let n_events = rng.random_range(1..30usize);
            let events: Vec<HyperedgeEvent> = (0..n_events)
                .map(|_| {
                    let k = rng.random_range(1..=n_nodes.min(5));
                    let nodes: Vec<NodeId> = rand::seq::index::sample(&mut rng, n_nodes, k)
                        .into_iter()
                        .map(|v| v as NodeId)
                        .collect();
                    ev(&nodes, rng.random_range(0..20u32) as f64)
                })
                .collect();
            let g = TemporalHypergraph::from_events(events, n_nodes).unwrap();
            let p = g.project(2).unwrap();

            let mut got: Vec<(Vec<NodeId>, u64)> = p
                .events()
                .iter()
                .map(|e| (e.nodes.clone(), e.time as u64))
                .collect();
            let mut want: Vec<(Vec<NodeId>, u64)> = Vec::new();
            for e in g.events() {
                if e.size() <= 2 {
                    want.push((e.nodes.clone(), e.time as u64));
                } else {
                    for i in 0..e.size() {
                        for j in i + 1..e.size() {
                            want.push((vec![e.nodes[i], e.nodes[j]], e.time as u64));
                        }
                    }
                }
            }
            got.sort();
            want.sort();
            assert_eq!(got, want);
        }
    }
}
