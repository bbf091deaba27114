//! Dataset ingestion and binary snapshots.
//!
//! Two ways into a [`TemporalHypergraph`]:
//!
//! * the three-file text format used by the public higher-order interaction
//!   benchmarks (`<name>-nverts.txt`, `<name>-simplices.txt`,
//!   `<name>-times.txt`), and
//! * a versioned little-endian binary snapshot for fast reload.
//!
//! External node ids of any magnitude are remapped to dense `0..|V|` ids in
//! order of first appearance, so re-ingesting a stream whose ids were all
//! shifted by a constant produces an identical graph.

use std::collections::HashMap;
use std::io::{self, Read, Write};

use thiserror::Error;

use crate::hypergraph::{GraphError, HyperedgeEvent, NodeId, TemporalHypergraph};

const SNAPSHOT_MAGIC: &[u8; 4] = b"THGS";
const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("simplices length {simplices} does not match sum of nverts {expected}")]
    SimplexLengthMismatch { simplices: usize, expected: usize },
    #[error("nverts has {nverts} entries but times has {times}")]
    TimesLengthMismatch { nverts: usize, times: usize },
    #[error("non-integer token {token:?} in {stream}")]
    BadToken { stream: &'static str, token: String },
    #[error("negative entry {value} in nverts")]
    NegativeNverts { value: i64 },
    #[error("graph construction failed: {0}")]
    Graph(#[from] GraphError),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("bad snapshot magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported snapshot version {0}")]
    BadVersion(u32),
    #[error("snapshot truncated or corrupt: {0}")]
    Corrupt(&'static str),
}

fn parse_ints(text: &str, stream: &'static str) -> Result<Vec<i64>, IngestError> {
    text.split_whitespace()
        .map(|tok| {
            tok.parse::<i64>().map_err(|_| IngestError::BadToken {
                stream,
                token: tok.to_string(),
            })
        })
        .collect()
}

/// Parses the three-file benchmark format. `nverts` gives the node count of
/// each event, `simplices` is the concatenation of all member ids, `times`
/// one timestamp per event. External ids are remapped to dense ids by first
/// appearance; duplicate ids within one raw simplex are deduplicated.
pub fn ingest_benson(
    nverts_text: &str,
    simplices_text: &str,
    times_text: &str,
) -> Result<TemporalHypergraph, IngestError> {
    let nverts = parse_ints(nverts_text, "nverts")?;
    let simplices = parse_ints(simplices_text, "simplices")?;
    let times = parse_ints(times_text, "times")?;

    if let Some(&value) = nverts.iter().find(|&&v| v < 0) {
        return Err(IngestError::NegativeNverts { value });
    }
    let expected: usize = nverts.iter().map(|&v| v as usize).sum();
    if simplices.len() != expected {
        return Err(IngestError::SimplexLengthMismatch {
            simplices: simplices.len(),
            expected,
        });
    }
    if times.len() != nverts.len() {
        return Err(IngestError::TimesLengthMismatch {
            nverts: nverts.len(),
            times: times.len(),
        });
    }

    let mut remap: HashMap<i64, NodeId> = HashMap::new();
    let mut events = Vec::with_capacity(nverts.len());
    let mut cursor = 0usize;
    for (&k, &t) in nverts.iter().zip(&times) {
        let k = k as usize;
        let mut nodes = Vec::with_capacity(k);
        for &raw in &simplices[cursor..cursor + k] {
            let next_id = remap.len() as NodeId;
            let id = *remap.entry(raw).or_insert(next_id);
            nodes.push(id);
        }
        cursor += k;
        events.push(HyperedgeEvent::new(nodes, t as f64));
    }
    let node_count = remap.len();
    Ok(TemporalHypergraph::from_events(events, node_count)?)
}

/// Writes a versioned little-endian snapshot of `g`.
pub fn write_snapshot<W: Write>(g: &TemporalHypergraph, mut w: W) -> Result<(), IngestError> {
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    w.write_all(&(g.node_count() as u64).to_le_bytes())?;
    w.write_all(&(g.len() as u64).to_le_bytes())?;
    for e in g.events() {
        w.write_all(&e.time.to_le_bytes())?;
        w.write_all(&(e.nodes.len() as u32).to_le_bytes())?;
        for &u in &e.nodes {
            w.write_all(&u.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a snapshot produced by [`write_snapshot`].
pub fn read_snapshot<R: Read>(mut r: R) -> Result<TemporalHypergraph, IngestError> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let mut at = 0usize;

    let take = |at: &mut usize, n: usize| -> Result<&[u8], IngestError> {
        if *at + n > buf.len() {
            return Err(IngestError::Corrupt("unexpected end of snapshot"));
        }
        let s = &buf[*at..*at + n];
        *at += n;
        Ok(s)
    };

    let magic: [u8; 4] = take(&mut at, 4)?.try_into().unwrap();
    if &magic != SNAPSHOT_MAGIC {
        return Err(IngestError::BadMagic(magic));
    }
    let version = u32::from_le_bytes(take(&mut at, 4)?.try_into().unwrap());
    if version != SNAPSHOT_VERSION {
        return Err(IngestError::BadVersion(version));
    }
    let node_count = u64::from_le_bytes(take(&mut at, 8)?.try_into().unwrap()) as usize;
    let n_events = u64::from_le_bytes(take(&mut at, 8)?.try_into().unwrap()) as usize;

    let mut events = Vec::with_capacity(n_events);
    for _ in 0..n_events {
        let time = f64::from_le_bytes(take(&mut at, 8)?.try_into().unwrap());
        let k = u32::from_le_bytes(take(&mut at, 4)?.try_into().unwrap()) as usize;
        let mut nodes = Vec::with_capacity(k);
        for _ in 0..k {
            nodes.push(u32::from_le_bytes(take(&mut at, 4)?.try_into().unwrap()));
        }
        events.push(HyperedgeEvent { nodes, time });
    }
    if at != buf.len() {
        return Err(IngestError::Corrupt("trailing bytes after event data"));
    }
    Ok(TemporalHypergraph::from_events(events, node_count)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ingest_remaps_ids_by_first_appearance() {
        let g = ingest_benson("2\n3\n", "7\n9\n7\n3\n5\n", "10\n20\n").unwrap();
        assert_eq!(g.node_count(), 4);
        assert_eq!(g.len(), 2);
        // 7→0, 9→1, 3→2, 5→3
        assert_eq!(g.event(0).nodes, vec![0, 1]);
        assert_eq!(g.event(0).time, 10.0);
        assert_eq!(g.event(1).nodes, vec![0, 2, 3]);
        assert_eq!(g.event(1).time, 20.0);
    }

    #[test]
    fn ingest_singleton() {
        let g = ingest_benson("1", "4", "0").unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.event(0).nodes, vec![0]);
        assert_eq!(g.event(0).time, 0.0);
    }

    #[test]
    fn ingest_rejects_length_mismatch() {
        assert!(matches!(
            ingest_benson("2", "1\n2\n3", "5"),
            Err(IngestError::SimplexLengthMismatch { .. })
        ));
        assert!(matches!(
            ingest_benson("1\n1", "1\n2", "5"),
            Err(IngestError::TimesLengthMismatch { .. })
        ));
        assert!(matches!(
            ingest_benson("1", "x", "5"),
            Err(IngestError::BadToken {
                stream: "simplices",
                ..
            })
        ));
        assert!(matches!(
            ingest_benson("-2", "", "5"),
            Err(IngestError::NegativeNverts { value: -2 })
        ));
    }

    #[test]
    fn ingest_dedups_within_simplex_and_sorts_by_time() {
        let g = ingest_benson("3\n2\n", "1\n1\n2\n3\n4\n", "9\n2\n").unwrap();
        // second raw event (t=2) sorts first
        assert_eq!(g.event(0).time, 2.0);
        assert_eq!(g.event(1).nodes.len(), 2); // {1,1,2} deduped
    }

    #[test]
    fn constant_id_offset_changes_nothing() {
        let a = ingest_benson("2\n2\n", "10\n20\n20\n30\n", "1\n2\n").unwrap();
        let b = ingest_benson("2\n2\n", "1010\n1020\n1020\n1030\n", "1\n2\n").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn snapshot_round_trip() {
        let g = ingest_benson("2\n3\n1\n", "7\n9\n7\n3\n5\n9\n", "10\n20\n15\n").unwrap();
        let mut buf = Vec::new();
        write_snapshot(&g, &mut buf).unwrap();
        let g2 = read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(g, g2);
    }

    #[test]
    fn snapshot_rejects_corruption() {
        let g = ingest_benson("1", "4", "0").unwrap();
        let mut buf = Vec::new();
        write_snapshot(&g, &mut buf).unwrap();

        let mut bad_magic = buf.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            read_snapshot(bad_magic.as_slice()),
            Err(IngestError::BadMagic(_))
        ));

        let mut bad_version = buf.clone();
        bad_version[4] = 99;
        assert!(matches!(
            read_snapshot(bad_version.as_slice()),
            Err(IngestError::BadVersion(99))
        ));

        let truncated = &buf[..buf.len() - 2];
        assert!(matches!(
            read_snapshot(truncated),
            Err(IngestError::Corrupt(_))
        ));

        let mut trailing = buf.clone();
        trailing.push(0);
        assert!(matches!(
            read_snapshot(trailing.as_slice()),
            Err(IngestError::Corrupt(_))
        ));
    }
}
