//! Layered run configuration.
//!
//! Every knob of the pipeline is a flat optional key that can come from four
//! layers, highest precedence first: a CLI flag, a TOML config file
//! (`--config`), a named preset (`--preset` or the `preset` key), and the
//! built-in defaults. The fully resolved configuration is echoed into every
//! output artifact together with its FNV-1a hash, so results stay traceable
//! to the exact settings that produced them.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use setwalk_core::ablate::AblationMode;
use setwalk_core::eval::fnv1a64;
use setwalk_core::model::ModelDims;
use setwalk_core::sampler::{GammaMode, SamplerConfig};
use setwalk_core::split::{SplitConfig, SplitMode, TrainBoundary};
use setwalk_core::train::{OptimizerKind, TrainConfig};

/// One flat key-value configuration. Unknown keys in a config file are
/// rejected. `candidate_window = 0` and `max_edge_size = 0` mean "no limit".
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    // --- sampler ----------------------------------------------------------
    /// Temporal bias, in inverse dataset time units (default 0).
    #[arg(long, help_heading = "Walk sampling")]
    pub alpha: Option<f64>,
    /// Walks per seed node, M (default 8).
    #[arg(long, help_heading = "Walk sampling")]
    pub walks_per_node: Option<usize>,
    /// Maximum walk length in hyperedges, m (default 3).
    #[arg(long, help_heading = "Walk sampling")]
    pub walk_len: Option<usize>,
    /// Only events of at most this size are eligible steps; 0 = no cap.
    #[arg(long, help_heading = "Walk sampling")]
    pub max_edge_size: Option<usize>,
    /// Per-node structural weight: "unit" or "inverse_degree" (default unit).
    #[arg(long, help_heading = "Walk sampling")]
    pub gamma_mode: Option<String>,
    /// Each step scans at most this many most-recent candidates; 0 = all.
    #[arg(long, help_heading = "Walk sampling")]
    pub candidate_window: Option<usize>,
    /// Use the sequential acceptance rule instead of exact categorical draws.
    #[arg(long, help_heading = "Walk sampling")]
    pub sequential: Option<bool>,

    // --- training ---------------------------------------------------------
    /// Minibatch size (default 64).
    #[arg(long, help_heading = "Training")]
    pub batch_size: Option<usize>,
    /// Adam/SGD step size (default 1e-4).
    #[arg(long, help_heading = "Training")]
    pub learning_rate: Option<f64>,
    /// Upper bound on training epochs (default 30).
    #[arg(long, help_heading = "Training")]
    pub max_epochs: Option<usize>,
    /// Early-stopping patience in epochs (default 5).
    #[arg(long, help_heading = "Training")]
    pub patience: Option<usize>,
    /// Dropout rate in [0, 1) (default 0.1).
    #[arg(long, help_heading = "Training")]
    pub dropout: Option<f64>,
    /// Fraction of members corrupted per negative, in (0, 1] (default 0.5).
    #[arg(long, help_heading = "Training")]
    pub negative_fraction: Option<f64>,
    /// "adam" or "sgd" (default adam).
    #[arg(long, help_heading = "Training")]
    pub optimizer: Option<String>,

    // --- model widths -----------------------------------------------------
    /// Hidden width of identity/step embeddings (default 64).
    #[arg(long, help_heading = "Model widths")]
    pub d_h: Option<usize>,
    /// Time-encoding width, >= 2 (default 16).
    #[arg(long, help_heading = "Model widths")]
    pub d_t: Option<usize>,
    /// Hidden width of the set-pooling channel MLPs (default 64).
    #[arg(long, help_heading = "Model widths")]
    pub set_ff: Option<usize>,
    /// Hidden width of the walk mixer's position MLP (default 16).
    #[arg(long, help_heading = "Model widths")]
    pub token_ff: Option<usize>,
    /// Hidden width of the walk mixer's channel MLP (default 64).
    #[arg(long, help_heading = "Model widths")]
    pub channel_ff: Option<usize>,
    /// Hidden width of the prediction head (default 64).
    #[arg(long, help_heading = "Model widths")]
    pub head_hidden: Option<usize>,

    // --- split ------------------------------------------------------------
    /// "transductive", "weakly_inductive" or "strongly_inductive".
    #[arg(long, help_heading = "Dataset split")]
    pub split_mode: Option<String>,
    /// Fraction of the stream used for training (default 0.7).
    #[arg(long, help_heading = "Dataset split")]
    pub train_fraction: Option<f64>,
    /// Boundary rule: "timestamp_fraction" or "event_quantile".
    #[arg(long, help_heading = "Dataset split")]
    pub boundary: Option<String>,
    /// Fraction of nodes masked in the inductive modes (default 0.1).
    #[arg(long, help_heading = "Dataset split")]
    pub mask_fraction: Option<f64>,

    // --- run --------------------------------------------------------------
    /// Variant switch: full, r2_walk, no_time_encoding, mean_pool,
    /// alpha_zero (default full).
    #[arg(long, help_heading = "Run")]
    pub ablation: Option<String>,
    /// Named defaults bundle (see `--preset help`).
    #[arg(long, help_heading = "Run")]
    pub preset: Option<String>,
    /// Base seed for every random choice (default 0).
    #[arg(long, help_heading = "Run")]
    pub seed: Option<u64>,
    /// Worker thread cap; 1 is the reference mode and results are identical
    /// for any value (default 1).
    #[arg(long, help_heading = "Run")]
    pub threads: Option<usize>,
    /// Fraction of labeled nodes used to train the node classifier
    /// (default 0.7).
    #[arg(long, help_heading = "Run")]
    pub node_train_fraction: Option<f64>,

    // --- paths ------------------------------------------------------------
    /// Binary event-stream snapshot produced by `ingest`.
    #[arg(long, help_heading = "Paths")]
    pub snapshot: Option<PathBuf>,
    /// Node label file (`node<TAB>label` lines) for `classify`.
    #[arg(long, help_heading = "Paths")]
    pub labels: Option<PathBuf>,
    /// Dataset stem `DIR/NAME`, expanded to `NAME-nverts.txt`,
    /// `NAME-simplices.txt`, `NAME-times.txt` for `ingest`.
    #[arg(long, help_heading = "Paths")]
    pub stem: Option<PathBuf>,
}

macro_rules! overlay_fields {
    ($dst:expr, $src:expr, $($f:ident),+ $(,)?) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )+
    };
}

impl RunConfig {
    /// Copies every set key of `higher` over `self`.
    pub fn overlay(&mut self, higher: &RunConfig) {
        overlay_fields!(
            self,
            higher,
            alpha,
            walks_per_node,
            walk_len,
            max_edge_size,
            gamma_mode,
            candidate_window,
            sequential,
            batch_size,
            learning_rate,
            max_epochs,
            patience,
            dropout,
            negative_fraction,
            optimizer,
            d_h,
            d_t,
            set_ff,
            token_ff,
            channel_ff,
            head_hidden,
            split_mode,
            train_fraction,
            boundary,
            mask_fraction,
            ablation,
            preset,
            seed,
            threads,
            node_train_fraction,
            snapshot,
            labels,
            stem,
        );
    }

    /// Fills every unset key with its built-in default, yielding the
    /// configuration that the run actually uses.
    pub fn effective(&self) -> RunConfig {
        let s = SamplerConfig::default();
        let t = TrainConfig::default();
        let d = ModelDims::new(1, 1, 1);
        let sp = SplitConfig::default();
        let mut out = self.clone();
        out.alpha.get_or_insert(s.alpha);
        out.walks_per_node.get_or_insert(s.walks_per_node);
        out.walk_len.get_or_insert(s.walk_len);
        out.max_edge_size
            .get_or_insert(s.max_edge_size.unwrap_or(0));
        out.gamma_mode.get_or_insert_with(|| "unit".into());
        out.candidate_window
            .get_or_insert(s.candidate_window.unwrap_or(0));
        out.sequential.get_or_insert(s.sequential);
        out.batch_size.get_or_insert(t.batch_size);
        out.learning_rate.get_or_insert(t.learning_rate);
        out.max_epochs.get_or_insert(t.max_epochs);
        out.patience.get_or_insert(t.patience);
        out.dropout.get_or_insert(t.dropout);
        out.negative_fraction.get_or_insert(t.negative_fraction);
        out.optimizer.get_or_insert_with(|| "adam".into());
        out.d_h.get_or_insert(d.d_h);
        out.d_t.get_or_insert(d.d_t);
        out.set_ff.get_or_insert(d.set_ff);
        out.token_ff.get_or_insert(d.token_ff);
        out.channel_ff.get_or_insert(d.channel_ff);
        out.head_hidden.get_or_insert(d.head_hidden);
        out.split_mode.get_or_insert_with(|| "transductive".into());
        out.train_fraction.get_or_insert(sp.train_fraction);
        out.boundary
            .get_or_insert_with(|| "timestamp_fraction".into());
        out.mask_fraction.get_or_insert(sp.mask_fraction);
        out.ablation.get_or_insert_with(|| "full".into());
        out.preset.get_or_insert_with(|| "none".into());
        out.seed.get_or_insert(0);
        out.threads.get_or_insert(1);
        out.node_train_fraction.get_or_insert(0.7);
        out
    }

    /// Canonical TOML rendering of [`Self::effective`]; the hash of this text
    /// is the run's `config_hash`.
    ///
    /// The thread cap is normalized to 1 first: it steers execution, not the
    /// experiment, and results are identical under any cap, so runs that
    /// differ only in `--threads` share a hash.
    pub fn canonical_text(&self) -> String {
        let mut eff = self.effective();
        eff.threads = Some(1);
        toml::to_string(&eff).expect("effective config serializes")
    }

    pub fn config_hash(&self) -> String {
        format!("{:016x}", fnv1a64(self.canonical_text().as_bytes()))
    }

    // --- typed views ------------------------------------------------------

    pub fn sampler(&self) -> Result<SamplerConfig, String> {
        let e = self.effective();
        let gamma_mode = match e.gamma_mode.as_deref().unwrap() {
            "unit" => GammaMode::Unit,
            "inverse_degree" => GammaMode::InverseDegree,
            other => {
                return Err(format!(
                    "unknown gamma_mode {other:?} (unit, inverse_degree)"
                ));
            }
        };
        let none_if_zero = |v: usize| if v == 0 { None } else { Some(v) };
        let cfg = SamplerConfig {
            alpha: e.alpha.unwrap(),
            walks_per_node: e.walks_per_node.unwrap(),
            walk_len: e.walk_len.unwrap(),
            max_edge_size: none_if_zero(e.max_edge_size.unwrap()),
            gamma_mode,
            candidate_window: none_if_zero(e.candidate_window.unwrap()),
            sequential: e.sequential.unwrap(),
        };
        cfg.validate().map_err(|err| err.to_string())?;
        Ok(cfg)
    }

    pub fn train(&self) -> Result<TrainConfig, String> {
        let e = self.effective();
        let optimizer = match e.optimizer.as_deref().unwrap() {
            "adam" => OptimizerKind::Adam,
            "sgd" => OptimizerKind::Sgd,
            other => return Err(format!("unknown optimizer {other:?} (adam, sgd)")),
        };
        let cfg = TrainConfig {
            batch_size: e.batch_size.unwrap(),
            learning_rate: e.learning_rate.unwrap(),
            max_epochs: e.max_epochs.unwrap(),
            patience: e.patience.unwrap(),
            dropout: e.dropout.unwrap(),
            negative_fraction: e.negative_fraction.unwrap(),
            seed: e.seed.unwrap(),
            optimizer,
            threads: e.threads.unwrap(),
        };
        cfg.validate().map_err(|err| err.to_string())?;
        Ok(cfg)
    }

    /// Width/dropout template; `m`, `k_max`, `d_max` and the time
    /// normalization are derived from the data by the training entry points.
    pub fn dims_template(&self) -> ModelDims {
        let e = self.effective();
        let mut d = ModelDims::new(1, 1, 1);
        d.d_h = e.d_h.unwrap();
        d.d_t = e.d_t.unwrap();
        d.set_ff = e.set_ff.unwrap();
        d.token_ff = e.token_ff.unwrap();
        d.channel_ff = e.channel_ff.unwrap();
        d.head_hidden = e.head_hidden.unwrap();
        d.dropout = e.dropout.unwrap();
        d
    }

    pub fn split_mode(&self) -> Result<SplitMode, String> {
        self.effective().split_mode.unwrap().parse()
    }

    pub fn split_config(&self) -> Result<SplitConfig, String> {
        let e = self.effective();
        let boundary = match e.boundary.as_deref().unwrap() {
            "timestamp_fraction" => TrainBoundary::TimestampFraction,
            "event_quantile" => TrainBoundary::EventQuantile,
            other => {
                return Err(format!(
                    "unknown boundary {other:?} (timestamp_fraction, event_quantile)"
                ));
            }
        };
        Ok(SplitConfig {
            train_fraction: e.train_fraction.unwrap(),
            boundary,
            mask_fraction: e.mask_fraction.unwrap(),
        })
    }

    pub fn ablation(&self) -> Result<AblationMode, String> {
        self.effective().ablation.unwrap().parse()
    }

    pub fn seed(&self) -> u64 {
        self.effective().seed.unwrap()
    }

    pub fn threads(&self) -> usize {
        self.effective().threads.unwrap()
    }
}

/// Named default bundles, one per bundled public dataset family. All carry
/// the same grid midpoints (M = 8, m = 3, alpha = 2e-7 in inverse seconds,
/// 64-wide hidden layers); they exist so runs on those datasets start from
/// sensible values without a config file. The alpha value assumes an
/// epoch-seconds time axis and is capped at runtime when the dataset span
/// would push step weights out of floating-point range.
pub const PRESET_NAMES: [&str; 3] = ["email-enron", "ndc-class", "congress-bills"];

pub fn preset_values(name: &str) -> Result<RunConfig, String> {
    if !PRESET_NAMES.contains(&name) {
        return Err(format!(
            "unknown preset {name:?} (known: {})",
            PRESET_NAMES.join(", ")
        ));
    }
    Ok(RunConfig {
        alpha: Some(2e-7),
        walks_per_node: Some(8),
        walk_len: Some(3),
        d_h: Some(64),
        set_ff: Some(64),
        channel_ff: Some(64),
        head_hidden: Some(64),
        ..RunConfig::default()
    })
}

/// Resolves the four configuration layers into one [`RunConfig`].
pub fn resolve(config_file: Option<&PathBuf>, flags: &RunConfig) -> Result<RunConfig, String> {
    let file_cfg: Option<RunConfig> = match config_file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
            // `e.message()` keeps the diagnostic on one line; the default
            // rendering spans several lines of source annotation.
            Some(
                toml::from_str::<RunConfig>(&text)
                    .map_err(|e| format!("bad config {}: {}", path.display(), e.message()))?,
            )
        }
        None => None,
    };
    let preset_name = flags
        .preset
        .clone()
        .or_else(|| file_cfg.as_ref().and_then(|c| c.preset.clone()));
    let mut cfg = match &preset_name {
        Some(name) => preset_values(name)?,
        None => RunConfig::default(),
    };
    if let Some(f) = &file_cfg {
        cfg.overlay(f);
    }
    cfg.overlay(flags);
    cfg.preset = preset_name;
    Ok(cfg)
}

/// Caps `alpha` so that `alpha * span` stays within a numerically safe
/// exponent range; warns on stderr when the cap engages.
pub fn cap_alpha(mut sampler: SamplerConfig, span: f64) -> SamplerConfig {
    const MAX_EXPONENT: f64 = 600.0;
    if span > 0.0 && sampler.alpha * span > MAX_EXPONENT {
        let capped = MAX_EXPONENT / span;
        eprintln!(
            "note: alpha {} is too steep for a time span of {span}; using {capped:e}",
            sampler.alpha
        );
        sampler.alpha = capped;
    }
    sampler
}
