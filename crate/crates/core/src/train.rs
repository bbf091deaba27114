//! Hyperedge-prediction training: negative-sampled minibatches, adaptive
//! moment-estimation updates, early stopping on validation AUC.
//!
//! Determinism contract: every random decision (negative draws, epoch
//! shuffles, walk streams, dropout masks) has its own rng stream derived from
//! `(seed, epoch, example)` labels, so a fixed seed reproduces the training
//! history bit for bit — including across different worker-thread counts,
//! because per-item gradients are collected in example order and summed
//! serially.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{
    DEFAULT_EVAL_SEED, EvalError, EvalPart, NegativeSampler, evaluate, prepare_example,
};
use crate::hypergraph::{NodeId, TemporalHypergraph};
use crate::model::{
    ModelDims, ModelError, ModelParams, RunMode, backward_example, bce_with_logits, forward_example,
};
use crate::sampler::{SamplerConfig, SamplerError, ScoreTable, compute_scores_light, mix_seed};
use crate::split::DatasetSplit;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training partition is empty")]
    EmptyTrain,
    #[error("invalid train config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Graph(#[from] crate::hypergraph::GraphError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(
        "loss became non-finite at epoch {epoch}, batch {batch}; \
         lower the learning rate or alpha"
    )]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("could not build worker pool: {0}")]
    Threads(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    /// Adaptive moment estimation with bias correction.
    Adam,
    /// Plain stochastic gradient descent.
    Sgd,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Positive examples per minibatch; each brings one paired negative.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Epochs without a validation-AUC improvement before stopping.
    pub patience: usize,
    pub dropout: f64,
    /// Fraction of members replaced when corrupting a positive.
    pub negative_fraction: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    /// Worker threads for the per-item passes; 1 = fully serial reference.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            learning_rate: 1e-4,
            max_epochs: 30,
            patience: 5,
            dropout: 0.1,
            negative_fraction: 0.5,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::BadConfig("batch_size must be >= 1".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(TrainError::BadConfig(format!(
                "learning_rate must be finite and positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(TrainError::BadConfig(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        if !(self.negative_fraction > 0.0 && self.negative_fraction <= 1.0) {
            return Err(TrainError::BadConfig(format!(
                "negative_fraction must be in (0, 1], got {}",
                self.negative_fraction
            )));
        }
        if self.patience == 0 {
            return Err(TrainError::BadConfig("patience must be >= 1".into()));
        }
        if self.threads == 0 {
            return Err(TrainError::BadConfig("threads must be >= 1".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// First/second moment buffers, one slot per named tensor.
pub struct AdamState {
    m: ModelParams,
    v: ModelParams,
    step: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }

    /// One bias-corrected update of `params` from `grads`.
    pub fn update(&mut self, params: &mut ModelParams, grads: &ModelParams, lr: f64) {
        self.step += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.step as i32);
        let c2 = 1.0 - ADAM_BETA2.powi(self.step as i32);
        let gs = grads.tensors();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for (((_, p), (_, g)), ((_, m), (_, v))) in params
            .tensors_mut()
            .into_iter()
            .zip(gs)
            .zip(ms.into_iter().zip(vs))
        {
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = ADAM_BETA1 * m.data[i] + (1.0 - ADAM_BETA1) * gi;
                v.data[i] = ADAM_BETA2 * v.data[i] + (1.0 - ADAM_BETA2) * gi * gi;
                let mh = m.data[i] / c1;
                let vh = v.data[i] / c2;
                p.data[i] -= lr * mh / (vh.sqrt() + ADAM_EPS);
            }
        }
    }
}

enum OptimizerState {
    Adam(Box<AdamState>),
    Sgd,
}

impl OptimizerState {
    fn update(&mut self, params: &mut ModelParams, grads: &ModelParams, lr: f64) {
        match self {
            OptimizerState::Adam(st) => st.update(params, grads, lr),
            OptimizerState::Sgd => params.accumulate(grads, -lr),
        }
    }
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-item loss over the epoch (positives and negatives alike).
    pub loss: f64,
    /// Validation AUC after the epoch; NaN when the validation set is empty.
    pub val_auc: f64,
}

/// Renders the history as `epoch,loss,val_auc` CSV.
pub fn history_to_csv(history: &[EpochStats]) -> String {
    let mut out = String::from("epoch,loss,val_auc\n");
    for h in history {
        out.push_str(&format!("{},{},{}\n", h.epoch, h.loss, h.val_auc));
    }
    out
}

pub struct TrainOutcome {
    /// Parameters of the best validation epoch (final epoch when no
    /// validation data exists).
    pub params: ModelParams,
    pub sampler: SamplerConfig,
    pub history: Vec<EpochStats>,
    pub best_val_auc: Option<f64>,
    pub epochs_run: usize,
    pub wall_time_s: f64,
}

struct Item {
    edge: Vec<NodeId>,
    t0: f64,
    y: f64,
    /// Stable per-example label: 2·p for the p-th positive, 2·p+1 for its
    /// paired negative. Keyed by position in the train partition, not by the
    /// shuffled visit order, so rng streams survive reshuffling.
    uid: u64,
}

fn item_pass(
    params: &ModelParams,
    walk_graph: &TemporalHypergraph,
    scores: &ScoreTable,
    sampler_cfg: &SamplerConfig,
    item: &Item,
    seed: u64,
    epoch: u64,
) -> (f64, ModelParams) {
    let input = prepare_example(
        walk_graph,
        scores,
        sampler_cfg,
        params.dims.k_max,
        &item.edge,
        item.t0,
        mix_seed(seed, &[3, epoch, item.uid]),
    );
    let mut drop_rng = ChaCha12Rng::seed_from_u64(mix_seed(seed, &[4, epoch, item.uid]));
    let mut mode = RunMode::Train {
        rng: &mut drop_rng,
        dropout: params.dims.dropout,
    };
    let (z, cache) = forward_example(params, &input, &mut mode);
    let (loss, dz) = bce_with_logits(z, item.y);
    let mut g = params.zeros_like();
    backward_example(params, &input, &cache, dz, &mut g);
    (loss, g)
}

/// Builds the graph walks run on: the train partition of `full`, optionally
/// replaced by its size-`r` projection (pairwise-decomposition ablation).
pub fn build_walk_graph(
    full: &TemporalHypergraph,
    split: &DatasetSplit,
    projection: Option<usize>,
) -> Result<TemporalHypergraph, crate::hypergraph::GraphError> {
    let (g, _) = full.subgraph(&split.train)?;
    match projection {
        Some(r) => g.project(r),
        None => Ok(g),
    }
}

/// Trains a hyperedge predictor on the train partition of `split`.
///
/// Walks and score tables use only train-period events; a training example at
/// time `t` sees strictly earlier history. Shape fields of `dims_template`
/// (`m`, `k_max`, `d_max`), the dropout rate, and the time normalization are
/// derived from the data and configs; the template only supplies widths and
/// mode switches.
pub fn train(
    full: &TemporalHypergraph,
    split: &DatasetSplit,
    sampler_cfg: &SamplerConfig,
    dims_template: &ModelDims,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    train_projected(full, split, sampler_cfg, dims_template, cfg, None)
}

/// [`train`] with an optional walk-graph projection. With `Some(r)` every
/// walk (training and validation alike) runs on the size-`r` decomposition of
/// the train events while the prediction targets stay the original
/// hyperedges.
pub fn train_projected(
    full: &TemporalHypergraph,
    split: &DatasetSplit,
    sampler_cfg: &SamplerConfig,
    dims_template: &ModelDims,
    cfg: &TrainConfig,
    projection: Option<usize>,
) -> Result<TrainOutcome, TrainError> {
    let start = std::time::Instant::now();
    cfg.validate()?;
    if split.train.is_empty() {
        return Err(TrainError::EmptyTrain);
    }

    let walk_graph = build_walk_graph(full, split, projection)?;
    let scores = compute_scores_light(&walk_graph, sampler_cfg)?;

    let mut dims = dims_template.clone();
    dims.m = sampler_cfg.walk_len;
    // Shape constants cover the whole stream so held-out hyperedges (which
    // can be larger than anything seen in training) still fit the fixed-size
    // identity and block layouts. Sizes carry no event content.
    dims.k_max = full.max_edge_size();
    dims.d_max = full.max_edge_size();
    dims.dropout = cfg.dropout;
    let t_min = walk_graph.min_time().unwrap_or(0.0);
    let t_max = walk_graph.max_time().unwrap_or(0.0);
    dims.time_shift = t_min;
    dims.time_scale = if t_max > t_min {
        1.0 / (t_max - t_min)
    } else {
        1.0
    };

    let mut params = ModelParams::init(dims, cfg.seed)?;
    let mut opt = match cfg.optimizer {
        OptimizerKind::Adam => OptimizerState::Adam(Box::new(AdamState::new(&params))),
        OptimizerKind::Sgd => OptimizerState::Sgd,
    };
    let pool = if cfg.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build()
                .map_err(|e| TrainError::Threads(e.to_string()))?,
        )
    } else {
        None
    };

    let positives: Vec<(Vec<NodeId>, f64)> = split
        .train
        .iter()
        .map(|&ei| {
            let ev = full.event(ei);
            (ev.nodes.clone(), ev.time)
        })
        .collect();
    let negatives = NegativeSampler::new(full);

    let mut history: Vec<EpochStats> = Vec::new();
    let mut best: Option<(f64, ModelParams)> = None;
    let mut bad_epochs = 0usize;

    for epoch in 0..cfg.max_epochs {
        let ep = epoch as u64;

        // Fresh negatives every epoch, keyed by positive position.
        let mut items: Vec<Item> = Vec::with_capacity(positives.len());
        for (p, (edge, t0)) in positives.iter().enumerate() {
            let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(cfg.seed, &[1, ep, p as u64]));
            let neg = negatives.generate_negative(edge, cfg.negative_fraction, &mut rng)?;
            items.push(Item {
                edge: edge.clone(),
                t0: *t0,
                y: 1.0,
                uid: 2 * p as u64,
            });
            items.push(Item {
                edge: neg,
                t0: *t0,
                y: 0.0,
                uid: 2 * p as u64 + 1,
            });
        }
        // Shuffle positives (keeping each negative glued to its positive).
        let mut order: Vec<usize> = (0..positives.len()).collect();
        let mut shuffle_rng = ChaCha12Rng::seed_from_u64(mix_seed(cfg.seed, &[2, ep]));
        order.shuffle(&mut shuffle_rng);

        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        for (batch_no, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Item> = chunk
                .iter()
                .flat_map(|&p| [&items[2 * p], &items[2 * p + 1]])
                .collect();
            let run = || -> Vec<(f64, ModelParams)> {
                batch
                    .par_iter()
                    .map(|it| {
                        item_pass(&params, &walk_graph, &scores, sampler_cfg, it, cfg.seed, ep)
                    })
                    .collect()
            };
            let results = match &pool {
                Some(p) => p.install(run),
                None => batch
                    .iter()
                    .map(|it| {
                        item_pass(&params, &walk_graph, &scores, sampler_cfg, it, cfg.seed, ep)
                    })
                    .collect(),
            };

            let n_items = results.len() as f64;
            let mut grads = params.zeros_like();
            let mut batch_loss = 0.0;
            for (loss, g) in &results {
                batch_loss += loss;
                grads.accumulate(g, 1.0 / n_items);
            }
            batch_loss /= n_items;
            if !batch_loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    batch: batch_no,
                });
            }
            loss_sum += batch_loss * n_items;
            loss_count += results.len();
            opt.update(&mut params, &grads, cfg.learning_rate);
        }

        let val_auc = if split.val.is_empty() {
            f64::NAN
        } else {
            evaluate(
                &params,
                sampler_cfg,
                full,
                &walk_graph,
                &scores,
                split,
                EvalPart::Val,
                cfg.negative_fraction,
                DEFAULT_EVAL_SEED,
            )?
            .auc
        };
        history.push(EpochStats {
            epoch,
            loss: loss_sum / loss_count as f64,
            val_auc,
        });

        if val_auc.is_nan() {
            continue;
        }
        let improved = best.as_ref().is_none_or(|(b, _)| val_auc > *b);
        if improved {
            best = Some((val_auc, params.clone()));
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
            if bad_epochs >= cfg.patience {
                break;
            }
        }
    }

    let epochs_run = history.len();
    let (best_val_auc, params) = match best {
        Some((b, p)) => (Some(b), p),
        None => (None, params),
    };
    Ok(TrainOutcome {
        params,
        sampler: sampler_cfg.clone(),
        history,
        best_val_auc,
        epochs_run,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}
