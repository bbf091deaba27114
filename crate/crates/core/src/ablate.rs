//! Controlled degradations of the full model, each switching off one
//! ingredient: set walks, time encoding, set pooling, or the temporal bias.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::TemporalHypergraph;
use crate::eval::{EvalError, EvalPart, EvalReport, evaluate};
use crate::model::ModelDims;
use crate::sampler::{SamplerConfig, SamplerError, compute_scores_light};
use crate::split::DatasetSplit;
use crate::train::{TrainConfig, TrainError, TrainOutcome, build_walk_graph, train_projected};

#[derive(Debug, Error)]
pub enum AblateError {
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Graph(#[from] crate::hypergraph::GraphError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

/// Exactly one variant is active per run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    /// The unmodified model.
    Full,
    /// Walks run on the pairwise decomposition of the train events and may
    /// only step onto size-2 hyperedges (classic random walks).
    R2Walk,
    /// The time encoding is replaced by zeros.
    NoTimeEncoding,
    /// Step pooling and the final hyperedge pooling become plain means; the
    /// identity pooling stays.
    MeanPool,
    /// The temporal bias coefficient is fixed to zero, so candidate steps are
    /// weighted by overlap only.
    AlphaZero,
}

impl std::fmt::Display for AblationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Full => "full",
            Self::R2Walk => "r2_walk",
            Self::NoTimeEncoding => "no_time_encoding",
            Self::MeanPool => "mean_pool",
            Self::AlphaZero => "alpha_zero",
        })
    }
}

impl std::str::FromStr for AblationMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(Self::Full),
            "r2_walk" | "r2-walk" => Ok(Self::R2Walk),
            "no_time_encoding" | "no-time-encoding" => Ok(Self::NoTimeEncoding),
            "mean_pool" | "mean-pool" => Ok(Self::MeanPool),
            "alpha_zero" | "alpha-zero" => Ok(Self::AlphaZero),
            other => Err(format!(
                "unknown ablation mode {other:?} (expected full, r2_walk, \
                 no_time_encoding, mean_pool or alpha_zero)"
            )),
        }
    }
}

/// Applies `mode` to copies of the sampler and model configuration; returns
/// the walk-graph projection size the mode requires, if any.
pub fn apply_ablation(
    mode: AblationMode,
    sampler: &mut SamplerConfig,
    dims: &mut ModelDims,
) -> Option<usize> {
    match mode {
        AblationMode::Full => None,
        AblationMode::R2Walk => {
            sampler.max_edge_size = Some(2);
            Some(2)
        }
        AblationMode::NoTimeEncoding => {
            dims.zero_time = true;
            None
        }
        AblationMode::MeanPool => {
            dims.psi1_mean = true;
            dims.final_pool_mean = true;
            None
        }
        AblationMode::AlphaZero => {
            sampler.alpha = 0.0;
            None
        }
    }
}

/// Trains under `mode` and reports test metrics. The walk graph, score table
/// and model switches all reflect the ablation; targets and negative
/// sampling are untouched.
pub fn run_ablation(
    mode: AblationMode,
    full: &TemporalHypergraph,
    split: &DatasetSplit,
    sampler_template: &SamplerConfig,
    dims_template: &ModelDims,
    train_cfg: &TrainConfig,
    eval_seed: u64,
) -> Result<(TrainOutcome, EvalReport), AblateError> {
    let mut sampler = sampler_template.clone();
    let mut dims = dims_template.clone();
    let projection = apply_ablation(mode, &mut sampler, &mut dims);

    let outcome = train_projected(full, split, &sampler, &dims, train_cfg, projection)?;
    let walk_graph = build_walk_graph(full, split, projection)?;
    let scores = compute_scores_light(&walk_graph, &sampler)?;
    let report = evaluate(
        &outcome.params,
        &sampler,
        full,
        &walk_graph,
        &scores,
        split,
        EvalPart::Test,
        train_cfg.negative_fraction,
        eval_seed,
    )?;
    Ok((outcome, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::DEFAULT_EVAL_SEED;
    use crate::split::{SplitMode, split_dataset};
    use crate::synth::{RecencyPairsConfig, recency_pairs, uniform_triples};

    #[test]
    fn mode_names_round_trip() {
        for (mode, name) in [
            (AblationMode::Full, "full"),
            (AblationMode::R2Walk, "r2_walk"),
            (AblationMode::NoTimeEncoding, "no_time_encoding"),
            (AblationMode::MeanPool, "mean_pool"),
            (AblationMode::AlphaZero, "alpha_zero"),
        ] {
            assert_eq!(mode.to_string(), name);
            assert_eq!(name.parse::<AblationMode>().unwrap(), mode);
        }
        assert!("bogus".parse::<AblationMode>().is_err());
    }

    #[test]
    fn switches_touch_exactly_their_target() {
        let base_s = SamplerConfig {
            alpha: 0.3,
            ..SamplerConfig::default()
        };
        let base_d = ModelDims::new(3, 2, 4);

        let mut s = base_s.clone();
        let mut d = base_d.clone();
        assert_eq!(apply_ablation(AblationMode::Full, &mut s, &mut d), None);
        assert_eq!(s.alpha, 0.3);
        assert!(!d.zero_time && !d.psi1_mean && !d.final_pool_mean);

        let mut s = base_s.clone();
        let mut d = base_d.clone();
        assert_eq!(
            apply_ablation(AblationMode::R2Walk, &mut s, &mut d),
            Some(2)
        );
        assert_eq!(s.max_edge_size, Some(2));

        let mut s = base_s.clone();
        let mut d = base_d.clone();
        assert_eq!(
            apply_ablation(AblationMode::NoTimeEncoding, &mut s, &mut d),
            None
        );
        assert!(d.zero_time);

        let mut s = base_s.clone();
        let mut d = base_d.clone();
        apply_ablation(AblationMode::MeanPool, &mut s, &mut d);
        assert!(d.psi1_mean && d.final_pool_mean && !d.zero_time);

        let mut s = base_s.clone();
        let mut d = base_d.clone();
        apply_ablation(AblationMode::AlphaZero, &mut s, &mut d);
        assert_eq!(s.alpha, 0.0);
    }

    fn tiny_dims() -> ModelDims {
        let mut d = ModelDims::new(1, 1, 1);
        d.d_h = 6;
        d.d_t = 4;
        d.set_ff = 6;
        d.token_ff = 4;
        d.channel_ff = 6;
        d.head_hidden = 6;
        d
    }

    #[test]
    fn every_mode_produces_finite_metrics() {
        let g = uniform_triples(120, 5);
        let split = split_dataset(&g, SplitMode::Transductive, 0).unwrap();
        let sampler = SamplerConfig {
            alpha: 0.02,
            walks_per_node: 3,
            walk_len: 3,
            ..SamplerConfig::default()
        };
        let cfg = TrainConfig {
            batch_size: 16,
            max_epochs: 1,
            seed: 4,
            ..TrainConfig::default()
        };
        for mode in [
            AblationMode::Full,
            AblationMode::R2Walk,
            AblationMode::NoTimeEncoding,
            AblationMode::MeanPool,
            AblationMode::AlphaZero,
        ] {
            let (out, report) = run_ablation(
                mode,
                &g,
                &split,
                &sampler,
                &tiny_dims(),
                &cfg,
                DEFAULT_EVAL_SEED,
            )
            .unwrap_or_else(|e| panic!("{mode}: {e}"));
            assert!(report.auc.is_finite(), "{mode}");
            assert!(report.ap.is_finite(), "{mode}");
            assert_eq!(out.epochs_run, 1, "{mode}");
        }
    }

    #[test]
    fn alpha_zero_underperforms_on_recency_stream() {
        let g = recency_pairs(&RecencyPairsConfig {
            n_hot_pairs: 8,
            bg_rate: 4,
            bg_coverage: 0.5,
            hot_rate: 4,
            post_per_pair: 4,
            seed: 11,
        });
        let split = split_dataset(&g, SplitMode::Transductive, 0).unwrap();
        let sampler = SamplerConfig {
            // Strong recency bias: weight ratio between the recent window and
            // the old phase is astronomically large.
            alpha: 0.1,
            walks_per_node: 4,
            walk_len: 2,
            ..SamplerConfig::default()
        };
        let cfg = TrainConfig {
            batch_size: 32,
            learning_rate: 3e-3,
            max_epochs: 4,
            dropout: 0.0,
            seed: 7,
            ..TrainConfig::default()
        };
        let (_, full_report) = run_ablation(
            AblationMode::Full,
            &g,
            &split,
            &sampler,
            &tiny_dims(),
            &cfg,
            DEFAULT_EVAL_SEED,
        )
        .unwrap();
        let (_, zero_report) = run_ablation(
            AblationMode::AlphaZero,
            &g,
            &split,
            &sampler,
            &tiny_dims(),
            &cfg,
            DEFAULT_EVAL_SEED,
        )
        .unwrap();
        assert!(
            full_report.auc > zero_report.auc,
            "recency bias should help: full {} vs alpha-zero {}",
            full_report.auc,
            zero_report.auc
        );
    }
}
