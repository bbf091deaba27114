//! Neural encoders for anonymized walk sets, with hand-written backward
//! passes.
//!
//! Pipeline for scoring one candidate hyperedge `e0` at time `t0`:
//!
//! 1. every node identity (a `k_max × m` count matrix) is lifted row-wise by
//!    a learned linear map to `d_h` features and pooled by a
//!    permutation-invariant set mixer (`psi2`) into one vector per node;
//! 2. each walk-step hyperedge becomes a `d_max × d_h` block of its members'
//!    vectors (zero rows pad) and is pooled by a second set mixer (`psi1`)
//!    into the step's structural embedding;
//! 3. each walk builds a `m × (d_h + d_t)` matrix of step embedding ‖ time
//!    encoding rows (zero rows for truncated steps) and runs a two-block
//!    mixer — token mixing across walk positions, channel mixing across
//!    features — followed by mean pooling; walks are order sensitive;
//! 4. a node's vector is the mean of its walk encodings (all-empty walk sets
//!    encode to zero), the hyperedge vector pools the member vectors (set
//!    mixer or mean), and a two-layer head produces the logit.
//!
//! Every parameter's gradient is exercised against central finite
//! differences in the tests.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anonymize::NodeIdentity;
use crate::hypergraph::{EventIndex, NodeId};
use crate::sampler::{SamplerConfig, WalkSet};
use crate::tensor::{
    LayerNormCache, Mat, col_softmax, col_softmax_bwd, dropout, dropout_bwd, gelu, gelu_bwd,
    layer_norm, layer_norm_bwd, matmul, matmul_bwd, mean_rows, mean_rows_bwd, sample_normal,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("bad model dimensions: {0}")]
    BadDims(String),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad checkpoint magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SWM1";
pub const CHECKPOINT_VERSION: u32 = 1;

/// All shape and mode switches of the model. Persisted with checkpoints.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelDims {
    /// Walk length (rows of the walk matrix).
    pub m: usize,
    /// Identity rows = pad target for seed-hyperedge size.
    pub k_max: usize,
    /// Block rows = pad target for hyperedge size.
    pub d_max: usize,
    /// Hidden width for identity/step embeddings.
    pub d_h: usize,
    /// Time-encoding width (≥ 2: one linear slot + cosine features).
    pub d_t: usize,
    /// Hidden width of the set-mixer channel MLPs.
    pub set_ff: usize,
    /// Hidden width of the walk mixer's token (position) MLP.
    pub token_ff: usize,
    /// Hidden width of the walk mixer's channel MLP.
    pub channel_ff: usize,
    pub head_hidden: usize,
    pub dropout: f64,
    /// Subtracted from every timestamp before encoding (min train time).
    pub time_shift: f64,
    /// Multiplies shifted timestamps (1 / train span) for numeric sanity.
    pub time_scale: f64,
    /// Pool member vectors by mean instead of the set mixer.
    pub final_pool_mean: bool,
    /// Replace the step-embedding set mixer by a mean over block rows.
    pub psi1_mean: bool,
    /// Force the time encoding to zero (ablation switch).
    pub zero_time: bool,
}

impl ModelDims {
    pub fn new(m: usize, k_max: usize, d_max: usize) -> Self {
        Self {
            m,
            k_max,
            d_max,
            d_h: 64,
            d_t: 16,
            set_ff: 64,
            token_ff: 16,
            channel_ff: 64,
            head_hidden: 64,
            dropout: 0.1,
            time_shift: 0.0,
            time_scale: 1.0,
            final_pool_mean: false,
            psi1_mean: false,
            zero_time: false,
        }
    }

    /// Feature width of one walk-matrix row.
    pub fn walk_width(&self) -> usize {
        self.d_h + self.d_t
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.m == 0 || self.k_max == 0 || self.d_max == 0 {
            return Err(ModelError::BadDims(
                "m, k_max and d_max must be at least 1".into(),
            ));
        }
        if self.d_t < 2 {
            return Err(ModelError::BadDims("d_t must be at least 2".into()));
        }
        if self.d_h == 0
            || self.set_ff == 0
            || self.token_ff == 0
            || self.channel_ff == 0
            || self.head_hidden == 0
        {
            return Err(ModelError::BadDims("hidden widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::BadDims(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        if !self.time_scale.is_finite() || self.time_scale <= 0.0 {
            return Err(ModelError::BadDims("time_scale must be positive".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Set mixer: permutation-invariant pooling of a set of feature rows
// ---------------------------------------------------------------------------

/// Parameters of one set mixer over rows of width `d1`. Also reused as the
/// gradient buffer (same shapes, zero-initialized).
#[derive(Debug, Clone, PartialEq)]
pub struct SetMixerPs {
    pub ln1_gamma: Mat,
    pub ln1_beta: Mat,
    pub ln2_gamma: Mat,
    pub ln2_beta: Mat,
    pub w1: Mat,
    pub w2: Mat,
}

impl SetMixerPs {
    fn init(d1: usize, ff: usize, rng: &mut impl Rng) -> Self {
        Self {
            ln1_gamma: Mat::from_vec(1, d1, vec![1.0; d1]),
            ln1_beta: Mat::zeros(1, d1),
            ln2_gamma: Mat::from_vec(1, d1, vec![1.0; d1]),
            ln2_beta: Mat::zeros(1, d1),
            w1: Mat::init_uniform(d1, ff, d1, rng),
            w2: Mat::init_uniform(ff, d1, ff, rng),
        }
    }

    fn zeros(d1: usize, ff: usize) -> Self {
        Self {
            ln1_gamma: Mat::zeros(1, d1),
            ln1_beta: Mat::zeros(1, d1),
            ln2_gamma: Mat::zeros(1, d1),
            ln2_beta: Mat::zeros(1, d1),
            w1: Mat::zeros(d1, ff),
            w2: Mat::zeros(ff, d1),
        }
    }
}

pub struct SetMixerCache {
    /// Softmax output over the set axis (needed for its backward).
    s: Mat,
    ln1: LayerNormCache,
    ln2: LayerNormCache,
    l2: Mat,
    a: Mat,
    ga: Mat,
    d: usize,
}

/// Pools `v` (`d × d1`, one row per set element) into a `1 × d1` vector:
/// a parameter-free token mix (GeLU of a per-feature softmax over the set
/// axis, added residually) followed by a per-row channel MLP, then the mean
/// over rows. Invariant under any permutation of the input rows.
pub fn setmixer_forward(ps: &SetMixerPs, v: &Mat) -> (Mat, SetMixerCache) {
    debug_assert!(v.rows >= 1);
    let (l1, ln1) = layer_norm(v, &ps.ln1_gamma, &ps.ln1_beta);
    let s = col_softmax(&l1);
    let gs = gelu(&s);
    let mut h = v.clone();
    h.add_assign(&gs);
    let (l2, ln2) = layer_norm(&h, &ps.ln2_gamma, &ps.ln2_beta);
    let a = matmul(&l2, &ps.w1);
    let ga = gelu(&a);
    let f = matmul(&ga, &ps.w2);
    let mut rows_out = h;
    rows_out.add_assign(&f);
    let pooled = mean_rows(&rows_out);
    (
        pooled,
        SetMixerCache {
            s,
            ln1,
            ln2,
            l2,
            a,
            ga,
            d: v.rows,
        },
    )
}

/// Backward of [`setmixer_forward`]; returns the gradient w.r.t. the input
/// rows and accumulates parameter gradients into `g`.
pub fn setmixer_backward(
    ps: &SetMixerPs,
    cache: &SetMixerCache,
    dpooled: &Mat,
    g: &mut SetMixerPs,
) -> Mat {
    let drows = mean_rows_bwd(cache.d, dpooled);
    // rows_out = h + f
    let mut dh = drows.clone();
    let df = drows;
    // f = gelu(a)·w2
    let (dga, dw2) = matmul_bwd(&cache.ga, &ps.w2, &df);
    g.w2.add_assign(&dw2);
    let da = gelu_bwd(&cache.a, &dga);
    // a = l2·w1
    let (dl2, dw1) = matmul_bwd(&cache.l2, &ps.w1, &da);
    g.w1.add_assign(&dw1);
    let dh2 = layer_norm_bwd(
        &cache.ln2,
        &ps.ln2_gamma,
        &dl2,
        &mut g.ln2_gamma,
        &mut g.ln2_beta,
    );
    dh.add_assign(&dh2);
    // h = v + gelu(softmax(ln1(v)))
    let mut dv = dh.clone();
    let ds = gelu_bwd(&cache.s, &dh);
    let dl1 = col_softmax_bwd(&cache.s, &ds);
    let dv1 = layer_norm_bwd(
        &cache.ln1,
        &ps.ln1_gamma,
        &dl1,
        &mut g.ln1_gamma,
        &mut g.ln1_beta,
    );
    dv.add_assign(&dv1);
    dv
}

// ---------------------------------------------------------------------------
// Time encoder
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct TimeEncoderPs {
    pub w_l: Mat,
    pub b_l: Mat,
    /// Cosine feature frequencies, `1 × (d_t − 1)`.
    pub w_p: Mat,
}

impl TimeEncoderPs {
    fn init(d_t: usize, rng: &mut impl Rng) -> Self {
        let mut w_p = Mat::zeros(1, d_t - 1);
        for v in w_p.data.iter_mut() {
            *v = sample_normal(rng);
        }
        Self {
            w_l: Mat::init_uniform(1, 1, 1, rng),
            b_l: Mat::zeros(1, 1),
            w_p,
        }
    }

    fn zeros(d_t: usize) -> Self {
        Self {
            w_l: Mat::zeros(1, 1),
            b_l: Mat::zeros(1, 1),
            w_p: Mat::zeros(1, d_t - 1),
        }
    }
}

/// Encodes a (shifted, scaled) timestamp as `[w_l·t + b_l, cos(t·w_p)...]`.
pub fn time_encode(ps: &TimeEncoderPs, t: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(1 + ps.w_p.cols);
    out.push(ps.w_l.data[0] * t + ps.b_l.data[0]);
    for &w in &ps.w_p.data {
        out.push((t * w).cos());
    }
    out
}

/// Accumulates time-encoder gradients for one encoded timestamp.
pub fn time_encode_bwd(ps: &TimeEncoderPs, t: f64, dout: &[f64], g: &mut TimeEncoderPs) {
    g.w_l.data[0] += t * dout[0];
    g.b_l.data[0] += dout[0];
    for (i, &w) in ps.w_p.data.iter().enumerate() {
        g.w_p.data[i] += -t * (t * w).sin() * dout[i + 1];
    }
}

// ---------------------------------------------------------------------------
// Walk mixer: order-sensitive encoder over walk positions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct WalkMixerPs {
    pub ln_tok_gamma: Mat,
    pub ln_tok_beta: Mat,
    /// `token_ff × m`, left-multiplied: mixes across walk positions.
    pub w_tok1: Mat,
    /// `m × token_ff`, left-multiplied.
    pub w_tok2: Mat,
    pub ln_ch_gamma: Mat,
    pub ln_ch_beta: Mat,
    pub w_ch1: Mat,
    pub w_ch2: Mat,
}

impl WalkMixerPs {
    fn init(dims: &ModelDims, rng: &mut impl Rng) -> Self {
        let d = dims.walk_width();
        Self {
            ln_tok_gamma: Mat::from_vec(1, d, vec![1.0; d]),
            ln_tok_beta: Mat::zeros(1, d),
            w_tok1: Mat::init_uniform(dims.token_ff, dims.m, dims.m, rng),
            w_tok2: Mat::init_uniform(dims.m, dims.token_ff, dims.token_ff, rng),
            ln_ch_gamma: Mat::from_vec(1, d, vec![1.0; d]),
            ln_ch_beta: Mat::zeros(1, d),
            w_ch1: Mat::init_uniform(d, dims.channel_ff, d, rng),
            w_ch2: Mat::init_uniform(dims.channel_ff, d, dims.channel_ff, rng),
        }
    }

    fn zeros(dims: &ModelDims) -> Self {
        let d = dims.walk_width();
        Self {
            ln_tok_gamma: Mat::zeros(1, d),
            ln_tok_beta: Mat::zeros(1, d),
            w_tok1: Mat::zeros(dims.token_ff, dims.m),
            w_tok2: Mat::zeros(dims.m, dims.token_ff),
            ln_ch_gamma: Mat::zeros(1, d),
            ln_ch_beta: Mat::zeros(1, d),
            w_ch1: Mat::zeros(d, dims.channel_ff),
            w_ch2: Mat::zeros(dims.channel_ff, d),
        }
    }
}

pub struct WalkMixerCache {
    ln_t: LayerNormCache,
    lt: Mat,
    a_t: Mat,
    g_t: Mat,
    h_mask: Option<Mat>,
    ln_c: LayerNormCache,
    a_c: Mat,
    g_c: Mat,
    out_mask: Option<Mat>,
    rows: usize,
}

/// Dropout behavior for one forward pass.
pub enum RunMode<'a> {
    Train {
        rng: &'a mut ChaCha12Rng,
        dropout: f64,
    },
    Eval,
}

impl RunMode<'_> {
    fn apply_dropout(&mut self, x: &Mat) -> (Mat, Option<Mat>) {
        match self {
            RunMode::Train { rng, dropout: rate } if *rate > 0.0 => {
                let (y, mask) = dropout(x, *rate, *rng);
                (y, Some(mask))
            }
            _ => (x.clone(), None),
        }
    }
}

/// Encodes one walk matrix `e` (`m × (d_h + d_t)`): token mixing across the
/// `m` positions (left-multiplying MLP on the normalized matrix, residual),
/// then channel mixing across features, each block followed by dropout in
/// training, then the mean over positions. Sensitive to row order.
pub fn walk_mixer_forward(ps: &WalkMixerPs, e: &Mat, mode: &mut RunMode) -> (Mat, WalkMixerCache) {
    let (lt, ln_t) = layer_norm(e, &ps.ln_tok_gamma, &ps.ln_tok_beta);
    let a_t = matmul(&ps.w_tok1, &lt);
    let g_t = gelu(&a_t);
    let mix_t = matmul(&ps.w_tok2, &g_t);
    let mut h = e.clone();
    h.add_assign(&mix_t);
    let (hd, h_mask) = mode.apply_dropout(&h);
    let (lc, ln_c) = layer_norm(&hd, &ps.ln_ch_gamma, &ps.ln_ch_beta);
    let a_c = matmul(&lc, &ps.w_ch1);
    let g_c = gelu(&a_c);
    let mix_c = matmul(&g_c, &ps.w_ch2);
    let mut out_pre = hd.clone();
    out_pre.add_assign(&mix_c);
    let (out_drop, out_mask) = mode.apply_dropout(&out_pre);
    let enc = mean_rows(&out_drop);
    let _ = hd;
    (
        enc,
        WalkMixerCache {
            ln_t,
            lt,
            a_t,
            g_t,
            h_mask,
            ln_c,
            a_c,
            g_c,
            out_mask,
            rows: e.rows,
        },
    )
}

pub fn walk_mixer_backward(
    ps: &WalkMixerPs,
    cache: &WalkMixerCache,
    denc: &Mat,
    g: &mut WalkMixerPs,
) -> Mat {
    let dout_drop = mean_rows_bwd(cache.rows, denc);
    let dout_pre = match &cache.out_mask {
        Some(mask) => dropout_bwd(mask, &dout_drop),
        None => dout_drop,
    };
    // out_pre = hd + gelu(ln_c(hd)·w_ch1)·w_ch2
    let mut dhd = dout_pre.clone();
    let (dg_c, dw_ch2) = matmul_bwd(&cache.g_c, &ps.w_ch2, &dout_pre);
    g.w_ch2.add_assign(&dw_ch2);
    let da_c = gelu_bwd(&cache.a_c, &dg_c);
    let lc = {
        // reconstruct ln_c output from its cache: xhat·γ + β
        let mut lc = cache.ln_c.xhat.clone();
        for r in 0..lc.rows {
            for c in 0..lc.cols {
                let v = lc.at(r, c) * ps.ln_ch_gamma.data[c] + ps.ln_ch_beta.data[c];
                *lc.at_mut(r, c) = v;
            }
        }
        lc
    };
    let (dlc, dw_ch1) = matmul_bwd(&lc, &ps.w_ch1, &da_c);
    g.w_ch1.add_assign(&dw_ch1);
    let dhd2 = layer_norm_bwd(
        &cache.ln_c,
        &ps.ln_ch_gamma,
        &dlc,
        &mut g.ln_ch_gamma,
        &mut g.ln_ch_beta,
    );
    dhd.add_assign(&dhd2);
    let dh = match &cache.h_mask {
        Some(mask) => dropout_bwd(mask, &dhd),
        None => dhd,
    };
    // h = e + w_tok2·gelu(w_tok1·ln_t(e))
    let mut de = dh.clone();
    let (dw_tok2, dg_t) = matmul_bwd(&ps.w_tok2, &cache.g_t, &dh);
    g.w_tok2.add_assign(&dw_tok2);
    let da_t = gelu_bwd(&cache.a_t, &dg_t);
    let (dw_tok1, dlt) = matmul_bwd(&ps.w_tok1, &cache.lt, &da_t);
    g.w_tok1.add_assign(&dw_tok1);
    let de2 = layer_norm_bwd(
        &cache.ln_t,
        &ps.ln_tok_gamma,
        &dlt,
        &mut g.ln_tok_gamma,
        &mut g.ln_tok_beta,
    );
    de.add_assign(&de2);
    de
}

// ---------------------------------------------------------------------------
// Prediction head
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct HeadPs {
    pub w1: Mat,
    pub b1: Mat,
    pub w2: Mat,
    pub b2: Mat,
}

impl HeadPs {
    pub fn init(d_in: usize, hidden: usize, out: usize, rng: &mut impl Rng) -> Self {
        Self {
            w1: Mat::init_uniform(d_in, hidden, d_in, rng),
            b1: Mat::zeros(1, hidden),
            w2: Mat::init_uniform(hidden, out, hidden, rng),
            b2: Mat::zeros(1, out),
        }
    }

    pub fn zeros(d_in: usize, hidden: usize, out: usize) -> Self {
        Self {
            w1: Mat::zeros(d_in, hidden),
            b1: Mat::zeros(1, hidden),
            w2: Mat::zeros(hidden, out),
            b2: Mat::zeros(1, out),
        }
    }
}

pub struct HeadCache {
    x: Mat,
    a: Mat,
    ga: Mat,
    mask: Option<Mat>,
    gd: Mat,
}

/// Two affine layers with a GeLU hidden activation and train-time dropout.
pub fn head_forward(ps: &HeadPs, x: &Mat, mode: &mut RunMode) -> (Mat, HeadCache) {
    let mut a = matmul(x, &ps.w1);
    for (v, b) in a.data.iter_mut().zip(&ps.b1.data) {
        *v += b;
    }
    let ga = gelu(&a);
    let (gd, mask) = mode.apply_dropout(&ga);
    let mut z = matmul(&gd, &ps.w2);
    for (v, b) in z.data.iter_mut().zip(&ps.b2.data) {
        *v += b;
    }
    (
        z,
        HeadCache {
            x: x.clone(),
            a,
            ga,
            mask,
            gd,
        },
    )
}

/// Backward of the head; returns the gradient w.r.t. the input vector.
pub fn head_backward(ps: &HeadPs, cache: &HeadCache, dz: &Mat, g: &mut HeadPs) -> Mat {
    let (dgd, dw2) = matmul_bwd(&cache.gd, &ps.w2, dz);
    g.w2.add_assign(&dw2);
    g.b2.add_assign(dz);
    let dga = match &cache.mask {
        Some(mask) => dropout_bwd(mask, &dgd),
        None => dgd,
    };
    let da = gelu_bwd(&cache.a, &dga);
    let (dx, dw1) = matmul_bwd(&cache.x, &ps.w1, &da);
    g.w1.add_assign(&dw1);
    g.b1.add_assign(&da);
    let _ = &cache.ga;
    dx
}

// ---------------------------------------------------------------------------
// Full model
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: ModelDims,
    /// Per-row lift of identity count rows: `m × d_h`, bias-free.
    pub id_embed: Mat,
    pub psi2: SetMixerPs,
    pub psi1: SetMixerPs,
    pub pool: SetMixerPs,
    pub time: TimeEncoderPs,
    pub mixer: WalkMixerPs,
    pub head: HeadPs,
}

impl ModelParams {
    pub fn init(dims: ModelDims, seed: u64) -> Result<Self, ModelError> {
        dims.validate()?;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let d_w = dims.walk_width();
        Ok(Self {
            id_embed: Mat::init_uniform(dims.m, dims.d_h, dims.m, &mut rng),
            psi2: SetMixerPs::init(dims.d_h, dims.set_ff, &mut rng),
            psi1: SetMixerPs::init(dims.d_h, dims.set_ff, &mut rng),
            pool: SetMixerPs::init(d_w, dims.set_ff, &mut rng),
            time: TimeEncoderPs::init(dims.d_t, &mut rng),
            mixer: WalkMixerPs::init(&dims, &mut rng),
            head: HeadPs::init(d_w, dims.head_hidden, 1, &mut rng),
            dims,
        })
    }

    /// Zero buffers with identical shapes, used as gradient accumulators.
    pub fn zeros_like(&self) -> Self {
        let dims = self.dims.clone();
        let d_w = dims.walk_width();
        Self {
            id_embed: Mat::zeros(dims.m, dims.d_h),
            psi2: SetMixerPs::zeros(dims.d_h, dims.set_ff),
            psi1: SetMixerPs::zeros(dims.d_h, dims.set_ff),
            pool: SetMixerPs::zeros(d_w, dims.set_ff),
            time: TimeEncoderPs::zeros(dims.d_t),
            mixer: WalkMixerPs::zeros(&dims),
            head: HeadPs::zeros(d_w, dims.head_hidden, 1),
            dims,
        }
    }

    /// All parameter tensors in a fixed, documented order (optimizer state
    /// and checkpoints index by this order).
    pub fn tensors(&self) -> Vec<(&'static str, &Mat)> {
        vec![
            ("id_embed", &self.id_embed),
            ("psi2.ln1_gamma", &self.psi2.ln1_gamma),
            ("psi2.ln1_beta", &self.psi2.ln1_beta),
            ("psi2.ln2_gamma", &self.psi2.ln2_gamma),
            ("psi2.ln2_beta", &self.psi2.ln2_beta),
            ("psi2.w1", &self.psi2.w1),
            ("psi2.w2", &self.psi2.w2),
            ("psi1.ln1_gamma", &self.psi1.ln1_gamma),
            ("psi1.ln1_beta", &self.psi1.ln1_beta),
            ("psi1.ln2_gamma", &self.psi1.ln2_gamma),
            ("psi1.ln2_beta", &self.psi1.ln2_beta),
            ("psi1.w1", &self.psi1.w1),
            ("psi1.w2", &self.psi1.w2),
            ("pool.ln1_gamma", &self.pool.ln1_gamma),
            ("pool.ln1_beta", &self.pool.ln1_beta),
            ("pool.ln2_gamma", &self.pool.ln2_gamma),
            ("pool.ln2_beta", &self.pool.ln2_beta),
            ("pool.w1", &self.pool.w1),
            ("pool.w2", &self.pool.w2),
            ("time.w_l", &self.time.w_l),
            ("time.b_l", &self.time.b_l),
            ("time.w_p", &self.time.w_p),
            ("mixer.ln_tok_gamma", &self.mixer.ln_tok_gamma),
            ("mixer.ln_tok_beta", &self.mixer.ln_tok_beta),
            ("mixer.w_tok1", &self.mixer.w_tok1),
            ("mixer.w_tok2", &self.mixer.w_tok2),
            ("mixer.ln_ch_gamma", &self.mixer.ln_ch_gamma),
            ("mixer.ln_ch_beta", &self.mixer.ln_ch_beta),
            ("mixer.w_ch1", &self.mixer.w_ch1),
            ("mixer.w_ch2", &self.mixer.w_ch2),
            ("head.w1", &self.head.w1),
            ("head.b1", &self.head.b1),
            ("head.w2", &self.head.w2),
            ("head.b2", &self.head.b2),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Mat)> {
        vec![
            ("id_embed", &mut self.id_embed),
            ("psi2.ln1_gamma", &mut self.psi2.ln1_gamma),
            ("psi2.ln1_beta", &mut self.psi2.ln1_beta),
            ("psi2.ln2_gamma", &mut self.psi2.ln2_gamma),
            ("psi2.ln2_beta", &mut self.psi2.ln2_beta),
            ("psi2.w1", &mut self.psi2.w1),
            ("psi2.w2", &mut self.psi2.w2),
            ("psi1.ln1_gamma", &mut self.psi1.ln1_gamma),
            ("psi1.ln1_beta", &mut self.psi1.ln1_beta),
            ("psi1.ln2_gamma", &mut self.psi1.ln2_gamma),
            ("psi1.ln2_beta", &mut self.psi1.ln2_beta),
            ("psi1.w1", &mut self.psi1.w1),
            ("psi1.w2", &mut self.psi1.w2),
            ("pool.ln1_gamma", &mut self.pool.ln1_gamma),
            ("pool.ln1_beta", &mut self.pool.ln1_beta),
            ("pool.ln2_gamma", &mut self.pool.ln2_gamma),
            ("pool.ln2_beta", &mut self.pool.ln2_beta),
            ("pool.w1", &mut self.pool.w1),
            ("pool.w2", &mut self.pool.w2),
            ("time.w_l", &mut self.time.w_l),
            ("time.b_l", &mut self.time.b_l),
            ("time.w_p", &mut self.time.w_p),
            ("mixer.ln_tok_gamma", &mut self.mixer.ln_tok_gamma),
            ("mixer.ln_tok_beta", &mut self.mixer.ln_tok_beta),
            ("mixer.w_tok1", &mut self.mixer.w_tok1),
            ("mixer.w_tok2", &mut self.mixer.w_tok2),
            ("mixer.ln_ch_gamma", &mut self.mixer.ln_ch_gamma),
            ("mixer.ln_ch_beta", &mut self.mixer.ln_ch_beta),
            ("mixer.w_ch1", &mut self.mixer.w_ch1),
            ("mixer.w_ch2", &mut self.mixer.w_ch2),
            ("head.w1", &mut self.head.w1),
            ("head.b1", &mut self.head.b1),
            ("head.w2", &mut self.head.w2),
            ("head.b2", &mut self.head.b2),
        ]
    }

    /// Adds `other`'s tensors (same shapes) into this one, scaled.
    pub fn accumulate(&mut self, other: &Self, scale: f64) {
        let others = other.tensors();
        for ((_, dst), (_, src)) in self.tensors_mut().into_iter().zip(others) {
            for (d, s) in dst.data.iter_mut().zip(&src.data) {
                *d += s * scale;
            }
        }
    }
}

/// Everything the model needs to score one candidate hyperedge.
pub struct ExampleInput {
    /// Sorted, deduplicated candidate hyperedge.
    pub edge: Vec<NodeId>,
    pub t0: f64,
    /// One walk set per member, in sorted node order.
    pub walksets: Vec<WalkSet>,
    /// Positional identities of every node visited by the walks.
    pub identities: BTreeMap<NodeId, NodeIdentity>,
}

enum RowSource {
    Known(usize),
    ZeroIdentity,
    Pad,
}

struct EventEncoding {
    event: EventIndex,
    /// One entry per block row: where the row came from.
    sources: Vec<RowSource>,
    psi1: Option<SetMixerCache>,
    out: Mat,
}

struct WalkEncoding {
    /// `(event-cache index, scaled time)` per real step.
    steps: Vec<(usize, f64)>,
    mixer: WalkMixerCache,
    enc: Mat,
}

/// Cached activations of the shared encoder stages: identity embeddings,
/// step-event embeddings, walk encodings, and the per-member vectors.
pub struct BackboneCache {
    node_order: Vec<NodeId>,
    psi2_caches: Vec<SetMixerCache>,
    psi2_outs: Vec<Mat>,
    zero_psi2: Option<(SetMixerCache, Mat)>,
    events: Vec<EventEncoding>,
    /// Per member: `None` when the walk set was empty (vector is zero).
    member_walks: Vec<Option<Vec<WalkEncoding>>>,
    member_vecs: Vec<Mat>,
}

impl BackboneCache {
    /// One `1 × (d_h + d_t)` vector per member of the input edge.
    pub fn member_vecs(&self) -> &[Mat] {
        &self.member_vecs
    }
}

pub struct ExampleCache {
    backbone: BackboneCache,
    pool_cache: Option<SetMixerCache>,
    pooled: Mat,
    head: HeadCache,
}

impl ExampleCache {
    /// The pooled query-set representation fed to the scoring head
    /// (`1 × walk_width`), e.g. for probing a frozen encoder.
    pub fn pooled(&self) -> &Mat {
        &self.pooled
    }

    /// The per-stage cache of the shared encoder.
    pub fn backbone(&self) -> &BackboneCache {
        &self.backbone
    }
}

fn identity_to_mat(id: &NodeIdentity, k_max: usize, m: usize) -> Mat {
    let mut out = Mat::zeros(k_max, m);
    for (r, row) in id.rows.iter().take(k_max).enumerate() {
        for (c, &v) in row.iter().take(m).enumerate() {
            *out.at_mut(r, c) = v as f64;
        }
    }
    out
}

fn psi2_run(ps: &ModelParams, id_mat: &Mat) -> (Mat, SetMixerCache) {
    let emb = matmul(id_mat, &ps.id_embed);
    setmixer_forward(&ps.psi2, &emb)
}

fn psi2_run_bwd(
    ps: &ModelParams,
    id_mat: &Mat,
    cache: &SetMixerCache,
    dout: &Mat,
    g: &mut ModelParams,
) {
    let demb = setmixer_backward(&ps.psi2, cache, dout, &mut g.psi2);
    let (_, dw) = matmul_bwd(id_mat, &ps.id_embed, &demb);
    g.id_embed.add_assign(&dw);
}

/// Runs the shared encoder stages for one example: per-node identity
/// embeddings, per-event structural embeddings, order-sensitive walk
/// encodings, and the mean-over-walks member vectors.
pub fn backbone_forward(
    ps: &ModelParams,
    input: &ExampleInput,
    mode: &mut RunMode,
) -> BackboneCache {
    let dims = &ps.dims;
    let d_w = dims.walk_width();

    // Stage 1: per-node identity embeddings, ascending node order.
    let node_order: Vec<NodeId> = input.identities.keys().copied().collect();
    let mut psi2_caches = Vec::with_capacity(node_order.len());
    let mut psi2_outs = Vec::with_capacity(node_order.len());
    for u in &node_order {
        let id_mat = identity_to_mat(&input.identities[u], dims.k_max, dims.m);
        let (out, cache) = psi2_run(ps, &id_mat);
        psi2_caches.push(cache);
        psi2_outs.push(out);
    }
    let node_slot: BTreeMap<NodeId, usize> = node_order
        .iter()
        .enumerate()
        .map(|(i, &u)| (u, i))
        .collect();
    let mut zero_psi2: Option<(SetMixerCache, Mat)> = None;

    // Stage 2: one structural embedding per unique step event.
    let mut events: Vec<EventEncoding> = Vec::new();
    let mut event_slot: BTreeMap<EventIndex, usize> = BTreeMap::new();
    for ws in &input.walksets {
        for walk in &ws.walks {
            for step in &walk.steps {
                if event_slot.contains_key(&step.event) {
                    continue;
                }
                let mut sources = Vec::with_capacity(dims.d_max);
                let mut block = Mat::zeros(dims.d_max, dims.d_h);
                for (row, &member) in step.nodes.iter().take(dims.d_max).enumerate() {
                    match node_slot.get(&member) {
                        Some(&slot) => {
                            sources.push(RowSource::Known(slot));
                            block.set_row(row, psi2_outs[slot].row(0));
                        }
                        None => {
                            if zero_psi2.is_none() {
                                let zmat = Mat::zeros(dims.k_max, dims.m);
                                let (out, cache) = psi2_run(ps, &zmat);
                                zero_psi2 = Some((cache, out));
                            }
                            sources.push(RowSource::ZeroIdentity);
                            block.set_row(row, zero_psi2.as_ref().unwrap().1.row(0));
                        }
                    }
                }
                while sources.len() < dims.d_max {
                    sources.push(RowSource::Pad);
                }
                let (out, psi1) = if dims.psi1_mean {
                    (mean_rows(&block), None)
                } else {
                    let (o, c) = setmixer_forward(&ps.psi1, &block);
                    (o, Some(c))
                };
                event_slot.insert(step.event, events.len());
                events.push(EventEncoding {
                    event: step.event,
                    sources,
                    psi1,
                    out,
                });
            }
        }
    }

    // Stage 3: encode each walk, average per member.
    let mut member_walks = Vec::with_capacity(input.walksets.len());
    let mut member_vecs = Vec::with_capacity(input.walksets.len());
    for ws in &input.walksets {
        if ws.is_empty() {
            member_walks.push(None);
            member_vecs.push(Mat::zeros(1, d_w));
            continue;
        }
        let mut encs = Vec::with_capacity(ws.walks.len());
        let mut acc = Mat::zeros(1, d_w);
        for walk in &ws.walks {
            let mut e = Mat::zeros(dims.m, d_w);
            let mut steps = Vec::with_capacity(walk.steps.len());
            for (i, step) in walk.steps.iter().take(dims.m).enumerate() {
                let slot = event_slot[&step.event];
                let t = (step.time - dims.time_shift) * dims.time_scale;
                let row = e.row_mut(i);
                row[..dims.d_h].copy_from_slice(events[slot].out.row(0));
                if !dims.zero_time {
                    let tvec = time_encode(&ps.time, t);
                    row[dims.d_h..].copy_from_slice(&tvec);
                }
                steps.push((slot, t));
            }
            let (enc, mixer) = walk_mixer_forward(&ps.mixer, &e, mode);
            acc.add_assign(&enc);
            encs.push(WalkEncoding { steps, mixer, enc });
        }
        acc.scale(1.0 / ws.walks.len() as f64);
        member_walks.push(Some(encs));
        member_vecs.push(acc);
    }

    BackboneCache {
        node_order,
        psi2_caches,
        psi2_outs,
        zero_psi2,
        events,
        member_walks,
        member_vecs,
    }
}

/// Scores one candidate hyperedge: backbone, member-vector pooling (set
/// mixer or mean), then the prediction head. Keeps every intermediate needed
/// by [`backward_example`].
pub fn forward_example(
    ps: &ModelParams,
    input: &ExampleInput,
    mode: &mut RunMode,
) -> (f64, ExampleCache) {
    let dims = &ps.dims;
    let d_w = dims.walk_width();
    let backbone = backbone_forward(ps, input, mode);

    let mut stacked = Mat::zeros(backbone.member_vecs.len(), d_w);
    for (r, v) in backbone.member_vecs.iter().enumerate() {
        stacked.set_row(r, v.row(0));
    }
    let (pooled, pool_cache) = if dims.final_pool_mean {
        (mean_rows(&stacked), None)
    } else {
        let (p, c) = setmixer_forward(&ps.pool, &stacked);
        (p, Some(c))
    };
    let (z, head) = head_forward(&ps.head, &pooled, mode);
    let logit = z.data[0];

    (
        logit,
        ExampleCache {
            backbone,
            pool_cache,
            pooled,
            head,
        },
    )
}

/// Propagates per-member vector gradients (`1 × (d_h+d_t)` each) back
/// through the shared encoder stages, accumulating parameter gradients.
pub fn backbone_backward(
    ps: &ModelParams,
    input: &ExampleInput,
    cache: &BackboneCache,
    dvecs: &[Mat],
    g: &mut ModelParams,
) {
    let dims = &ps.dims;

    // Gradients flowing into each unique event encoding, summed over walks.
    let mut devent: Vec<Mat> = cache
        .events
        .iter()
        .map(|_| Mat::zeros(1, dims.d_h))
        .collect();

    for (j, walks) in cache.member_walks.iter().enumerate() {
        let Some(walks) = walks else { continue };
        let mut dvec = dvecs[j].clone();
        dvec.scale(1.0 / walks.len() as f64);
        for wenc in walks {
            let de = walk_mixer_backward(&ps.mixer, &wenc.mixer, &dvec, &mut g.mixer);
            for (i, &(slot, t)) in wenc.steps.iter().enumerate() {
                let row = de.row(i);
                for (c, &v) in row[..dims.d_h].iter().enumerate() {
                    devent[slot].data[c] += v;
                }
                if !dims.zero_time {
                    time_encode_bwd(&ps.time, t, &row[dims.d_h..], &mut g.time);
                }
            }
            let _ = &wenc.enc;
        }
    }

    // Back through the step encodings into the per-node identity embeddings.
    let mut dpsi2: Vec<Mat> = cache
        .psi2_outs
        .iter()
        .map(|_| Mat::zeros(1, dims.d_h))
        .collect();
    let mut dzero = Mat::zeros(1, dims.d_h);
    let mut zero_used = false;
    for (enc, dout) in cache.events.iter().zip(&devent) {
        let dblock = match &enc.psi1 {
            Some(pc) => setmixer_backward(&ps.psi1, pc, dout, &mut g.psi1),
            None => mean_rows_bwd(dims.d_max, dout),
        };
        for (row, src) in enc.sources.iter().enumerate() {
            match src {
                RowSource::Known(slot) => {
                    for (c, &v) in dblock.row(row).iter().enumerate() {
                        dpsi2[*slot].data[c] += v;
                    }
                }
                RowSource::ZeroIdentity => {
                    zero_used = true;
                    for (c, &v) in dblock.row(row).iter().enumerate() {
                        dzero.data[c] += v;
                    }
                }
                RowSource::Pad => {}
            }
        }
        let _ = enc.event;
    }

    for ((u, pc), dout) in cache.node_order.iter().zip(&cache.psi2_caches).zip(&dpsi2) {
        let id_mat = identity_to_mat(&input.identities[u], dims.k_max, dims.m);
        psi2_run_bwd(ps, &id_mat, pc, dout, g);
    }
    if zero_used && let Some((pc, _)) = &cache.zero_psi2 {
        let zmat = Mat::zeros(dims.k_max, dims.m);
        psi2_run_bwd(ps, &zmat, pc, &dzero, g);
    }
}

/// Propagates `dlogit` back through the cached forward pass, accumulating
/// parameter gradients into `g`.
pub fn backward_example(
    ps: &ModelParams,
    input: &ExampleInput,
    cache: &ExampleCache,
    dlogit: f64,
    g: &mut ModelParams,
) {
    let dims = &ps.dims;
    let d_w = dims.walk_width();
    let _ = &cache.pooled;

    let dz = Mat::from_vec(1, 1, vec![dlogit]);
    let dpooled = head_backward(&ps.head, &cache.head, &dz, &mut g.head);

    let n_members = cache.backbone.member_vecs.len();
    let dstacked = match &cache.pool_cache {
        Some(pc) => setmixer_backward(&ps.pool, pc, &dpooled, &mut g.pool),
        None => mean_rows_bwd(n_members, &dpooled),
    };
    let dvecs: Vec<Mat> = (0..n_members)
        .map(|j| {
            let mut v = Mat::zeros(1, d_w);
            v.set_row(0, dstacked.row(j));
            v
        })
        .collect();
    backbone_backward(ps, input, &cache.backbone, &dvecs, g);
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

/// Numerically stable binary cross-entropy on a logit. Returns
/// `(loss, dloss/dlogit)`; the gradient is `sigmoid(z) − y`.
pub fn bce_with_logits(z: f64, y: f64) -> (f64, f64) {
    let loss = z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
    let sig = 1.0 / (1.0 + (-z).exp());
    (loss, sig - y)
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    dims: ModelDims,
    sampler: SamplerConfig,
}

pub fn save_checkpoint<W: Write>(
    w: &mut W,
    params: &ModelParams,
    sampler: &SamplerConfig,
) -> Result<(), ModelError> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    let header = serde_json::to_vec(&CheckpointHeader {
        dims: params.dims.clone(),
        sampler: sampler.clone(),
    })
    .map_err(|e| ModelError::Corrupt(e.to_string()))?;
    w.write_all(&(header.len() as u64).to_le_bytes())?;
    w.write_all(&header)?;
    let tensors = params.tensors();
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, mat) in tensors {
        let bytes = name.as_bytes();
        w.write_all(&(bytes.len() as u16).to_le_bytes())?;
        w.write_all(bytes)?;
        w.write_all(&(mat.rows as u32).to_le_bytes())?;
        w.write_all(&(mat.cols as u32).to_le_bytes())?;
        for v in &mat.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_checkpoint<R: Read>(r: &mut R) -> Result<(ModelParams, SamplerConfig), ModelError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(ModelError::BadMagic(magic));
    }
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4)?;
    let version = u32::from_le_bytes(buf4);
    if version != CHECKPOINT_VERSION {
        return Err(ModelError::BadVersion(version));
    }
    let mut buf8 = [0u8; 8];
    r.read_exact(&mut buf8)?;
    let hlen = u64::from_le_bytes(buf8) as usize;
    if hlen > 1 << 20 {
        return Err(ModelError::Corrupt("oversized header".into()));
    }
    let mut hbuf = vec![0u8; hlen];
    r.read_exact(&mut hbuf)?;
    let header: CheckpointHeader =
        serde_json::from_slice(&hbuf).map_err(|e| ModelError::Corrupt(e.to_string()))?;
    header.dims.validate()?;

    let mut params = ModelParams::init(header.dims, 0)?;
    r.read_exact(&mut buf4)?;
    let count = u32::from_le_bytes(buf4) as usize;
    let expected = params.tensors().len();
    if count != expected {
        return Err(ModelError::Corrupt(format!(
            "expected {expected} tensors, found {count}"
        )));
    }
    for (name, mat) in params.tensors_mut() {
        let mut buf2 = [0u8; 2];
        r.read_exact(&mut buf2)?;
        let nlen = u16::from_le_bytes(buf2) as usize;
        let mut nbuf = vec![0u8; nlen];
        r.read_exact(&mut nbuf)?;
        let got = String::from_utf8(nbuf).map_err(|_| ModelError::Corrupt("name".into()))?;
        if got != name {
            return Err(ModelError::Corrupt(format!(
                "tensor order mismatch: expected {name}, found {got}"
            )));
        }
        r.read_exact(&mut buf4)?;
        let rows = u32::from_le_bytes(buf4) as usize;
        r.read_exact(&mut buf4)?;
        let cols = u32::from_le_bytes(buf4) as usize;
        if rows != mat.rows || cols != mat.cols {
            return Err(ModelError::Corrupt(format!(
                "tensor {name}: expected {}×{}, found {rows}×{cols}",
                mat.rows, mat.cols
            )));
        }
        for v in mat.data.iter_mut() {
            r.read_exact(&mut buf8)?;
            *v = f64::from_le_bytes(buf8);
        }
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(ModelError::Corrupt("trailing bytes".into()));
    }
    Ok((params, header.sampler))
}
