//! Temporal hypergraph learning engine.
//!
//! Models streams of timestamped hyperedge events (group interactions) and
//! learns to predict future hyperedges and node labels. The pipeline:
//!
//! 1. [`hypergraph`] — event storage, incidence indexes, time-bounded
//!    adjacency queries, and pairwise/size-capped projections.
//! 2. [`sampler`] — temporal set walks: time-decreasing sequences of
//!    intersecting hyperedges, drawn with a recency × overlap weight.
//! 3. [`anonymize`] — replaces node ids in a walk set by positional count
//!    vectors, so downstream models see structure, not identity.
//! 4. [`tensor`] / [`model`] — a small reverse-mode autodiff core and the
//!    permutation-invariant set pooling + walk mixer networks built on it.
//! 5. [`train`] / [`eval`] / [`classify`] — hyperedge prediction training
//!    with negative sampling, ranking metrics, and node classification.
//! 6. [`ablate`] / [`synth`] — ablation variants and synthetic streams used
//!    by the test suite and benchmarks.

pub mod ablate;
pub mod anonymize;
pub mod classify;
pub mod eval;
pub mod hypergraph;
pub mod ingest;
pub mod model;
pub mod sampler;
pub mod split;
pub mod synth;
pub mod tensor;
pub mod train;

pub use ablate::{AblateError, AblationMode};
pub use anonymize::{AnonymizeError, NodeIdentity};
pub use classify::{ClassifyConfig, ClassifyError, ClassifyOutcome};
pub use eval::{DEFAULT_EVAL_SEED, EvalPart, EvalReport, MetricsRecord};
pub use hypergraph::{EventIndex, GraphError, HyperedgeEvent, NodeId, TemporalHypergraph};
pub use sampler::{GammaMode, SamplerConfig, SamplerError, ScoreTable, SetWalk, WalkSet, WalkStep};
pub use split::{DatasetSplit, SplitConfig, SplitError, SplitMode, TrainBoundary};
pub use train::{OptimizerKind, TrainConfig, TrainError, TrainOutcome};
