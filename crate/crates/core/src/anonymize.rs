//! Set-based walk anonymization.
//!
//! Downstream models must not see raw node ids — identity has to come from
//! *structure*. For a seed hyperedge `e0` we sample one walk set per member
//! node; a node `w` is then described by how often it shows up at each walk
//! position of each member's walk set. Stacking those per-seed count vectors
//! (in `e0`'s sorted node order, zero-padded to a fixed number of rows) gives
//! the node's positional identity matrix. A candidate hyperedge becomes a
//! block of per-member embeddings of those identities, zero-padded to a fixed
//! row count, ready for permutation-invariant pooling.
//!
//! Identity entries are pure occurrence counts, so two instances that differ
//! only by a node relabeling produce bit-identical tensors when the walk
//! samplers are driven by synchronized rng streams.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::hypergraph::NodeId;
use crate::sampler::WalkSet;

#[derive(Debug, Error)]
pub enum AnonymizeError {
    #[error("hyperedge has {size} members but identity blocks hold at most {d_max} rows")]
    EdgeTooLarge { size: usize, d_max: usize },
    #[error("expected one walk set per seed node ({expected}), got {got}")]
    WalksetMismatch { expected: usize, got: usize },
}

/// Positional identity of one node relative to a seed hyperedge: row `j`
/// counts, per walk position, the appearances of the node in the walk set of
/// the `j`-th seed node (sorted order). Rows beyond the seed's actual size
/// are zero so every identity has the same shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeIdentity {
    /// `k_max` rows × `m` columns of occurrence counts.
    pub rows: Vec<Vec<u32>>,
}

impl NodeIdentity {
    pub fn zero(k_max: usize, m: usize) -> Self {
        Self {
            rows: vec![vec![0; m]; k_max],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().all(|r| r.iter().all(|&c| c == 0))
    }

    /// Row-major flattening as floats, the layout consumed by embeddings.
    pub fn flat_f64(&self) -> Vec<f64> {
        self.rows
            .iter()
            .flat_map(|r| r.iter().map(|&c| c as f64))
            .collect()
    }
}

/// Counts, for each walk position `0..m`, the number of walks in `walkset`
/// whose hyperedge at that position contains `w`. Truncated walks contribute
/// only to the positions they reach.
pub fn count_positions(w: NodeId, walkset: &WalkSet, m: usize) -> Vec<u32> {
    let mut counts = vec![0u32; m];
    for walk in &walkset.walks {
        debug_assert!(walk.len() <= m, "walk longer than the declared maximum");
        for (i, step) in walk.steps.iter().take(m).enumerate() {
            if step.nodes.binary_search(&w).is_ok() {
                counts[i] += 1;
            }
        }
    }
    counts
}

/// Builds the identity matrix of every node that appears in at least one walk
/// of the given walk sets. `walksets[j]` must be the walk set of the `j`-th
/// node of `e0` in sorted order; identities get `k_max` rows of `m` counts.
pub fn collect_identities(
    e0: &[NodeId],
    walksets: &[WalkSet],
    k_max: usize,
    m: usize,
) -> Result<BTreeMap<NodeId, NodeIdentity>, AnonymizeError> {
    let mut seeds = e0.to_vec();
    seeds.sort_unstable();
    seeds.dedup();
    if walksets.len() != seeds.len() {
        return Err(AnonymizeError::WalksetMismatch {
            expected: seeds.len(),
            got: walksets.len(),
        });
    }
    debug_assert!(
        walksets
            .iter()
            .zip(&seeds)
            .all(|(ws, &u)| ws.seed_node == u),
        "walk sets must be ordered like the sorted seed hyperedge"
    );

    let mut identities: BTreeMap<NodeId, NodeIdentity> = BTreeMap::new();
    for (j, ws) in walksets.iter().enumerate() {
        for walk in &ws.walks {
            for step in walk.steps.iter().take(m) {
                for &w in &step.nodes {
                    identities
                        .entry(w)
                        .or_insert_with(|| NodeIdentity::zero(k_max, m));
                }
            }
        }
        let _ = j;
    }
    for (&w, id) in identities.iter_mut() {
        for (j, ws) in walksets.iter().enumerate() {
            if j < k_max {
                id.rows[j] = count_positions(w, ws, m);
            }
        }
    }
    Ok(identities)
}

/// Assembles the per-member embedding block of hyperedge `e` relative to the
/// seed `e0`: row `i` is `psi2` applied to the identity of the `i`-th member
/// (sorted node order), rows `|e|..d_max` are zero. Members without an
/// identity (never visited by any walk) use the zero identity.
pub fn assemble_hyperedge_block<F>(
    e: &[NodeId],
    _e0: &[NodeId],
    identities: &BTreeMap<NodeId, NodeIdentity>,
    k_max: usize,
    m: usize,
    d_max: usize,
    mut psi2: F,
) -> Result<Vec<Vec<f64>>, AnonymizeError>
where
    F: FnMut(&NodeIdentity) -> Vec<f64>,
{
    let mut members = e.to_vec();
    members.sort_unstable();
    members.dedup();
    if members.len() > d_max {
        return Err(AnonymizeError::EdgeTooLarge {
            size: members.len(),
            d_max,
        });
    }
    let zero = NodeIdentity::zero(k_max, m);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(d_max);
    let mut width = 0;
    for &u in &members {
        let id = identities.get(&u).unwrap_or(&zero);
        let row = psi2(id);
        width = row.len();
        rows.push(row);
    }
    if rows.is_empty() {
        width = psi2(&zero).len();
    }
    while rows.len() < d_max {
        rows.push(vec![0.0; width]);
    }
    Ok(rows)
}

/// Line-oriented debug rendering of an identity map, stable across runs:
/// `node: r0c0,r0c1 | r1c0,r1c1 | ...` in ascending node order.
pub fn identities_to_text(identities: &BTreeMap<NodeId, NodeIdentity>) -> String {
    let mut out = String::new();
    for (node, id) in identities {
        let rows = id
            .rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect::<Vec<_>>()
            .join(" | ");
        out.push_str(&format!("{node}: {rows}\n"));
    }
    out
}
