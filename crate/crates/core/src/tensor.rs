//! Minimal dense matrix math with hand-written backward passes.
//!
//! Every differentiable operation comes as a forward function plus a
//! `*_bwd` companion that maps the upstream gradient to input (and
//! parameter) gradients, reusing values cached during the forward pass.
//! Shapes are plain row-major `f64` matrices; nothing here allocates a
//! graph — composite models chain these primitives explicitly and own
//! their caches.

use rand::Rng;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "shape/data mismatch");
        Mat { rows, cols, data }
    }

    pub fn zeros_like(other: &Mat) -> Self {
        Mat::zeros(other.rows, other.cols)
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn set_row(&mut self, r: usize, values: &[f64]) {
        self.row_mut(r).copy_from_slice(values);
    }

    /// Element count.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn add_assign(&mut self, other: &Mat) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    /// He-style uniform initialization in `±sqrt(6 / fan_in)`.
    pub fn init_uniform(rows: usize, cols: usize, fan_in: usize, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / fan_in.max(1) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Mat { rows, cols, data }
    }
}

/// Standard normal draw via the Box–Muller transform.
pub fn sample_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

// ---------------------------------------------------------------------------
// Matrix products
// ---------------------------------------------------------------------------

/// `a (r×k) · b (k×c)`.
pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.cols, b.rows, "matmul inner dims");
    let mut out = Mat::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let av = a.at(i, k);
            if av == 0.0 {
                continue;
            }
            let brow = b.row(k);
            let orow = out.row_mut(i);
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `a (r×k) · bᵀ (k×c)` where `b` is stored `c×k`.
pub fn matmul_nt(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.cols, b.cols, "matmul_nt inner dims");
    let mut out = Mat::zeros(a.rows, b.rows);
    for i in 0..a.rows {
        let arow = a.row(i);
        for j in 0..b.rows {
            let dot: f64 = arow.iter().zip(b.row(j)).map(|(&x, &y)| x * y).sum();
            *out.at_mut(i, j) = dot;
        }
    }
    out
}

/// `aᵀ (r×k) · b (r×c)` where `a` is stored `r×k`: result `k×c`.
pub fn matmul_tn(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.rows, b.rows, "matmul_tn inner dims");
    let mut out = Mat::zeros(a.cols, b.cols);
    for r in 0..a.rows {
        let arow = a.row(r);
        let brow = b.row(r);
        for (k, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let orow = out.row_mut(k);
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// Gradients of `matmul(a, b)` w.r.t. both factors.
pub fn matmul_bwd(a: &Mat, b: &Mat, dout: &Mat) -> (Mat, Mat) {
    (matmul_nt(dout, b), matmul_tn(a, dout))
}

// ---------------------------------------------------------------------------
// GeLU (tanh approximation)
// ---------------------------------------------------------------------------

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/π)
const GELU_A: f64 = 0.044_715;

#[inline]
pub fn gelu_scalar(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

#[inline]
pub fn gelu_grad_scalar(x: f64) -> f64 {
    let inner = GELU_C * (x + GELU_A * x * x * x);
    let t = inner.tanh();
    let sech2 = 1.0 - t * t;
    0.5 * (1.0 + t) + 0.5 * x * sech2 * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

pub fn gelu(x: &Mat) -> Mat {
    Mat {
        rows: x.rows,
        cols: x.cols,
        data: x.data.iter().map(|&v| gelu_scalar(v)).collect(),
    }
}

pub fn gelu_bwd(x: &Mat, dout: &Mat) -> Mat {
    debug_assert_eq!(x.data.len(), dout.data.len());
    Mat {
        rows: x.rows,
        cols: x.cols,
        data: x
            .data
            .iter()
            .zip(&dout.data)
            .map(|(&v, &d)| gelu_grad_scalar(v) * d)
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// Layer normalization (per row, learnable scale and shift)
// ---------------------------------------------------------------------------

pub const LN_EPS: f64 = 1e-5;

pub struct LayerNormCache {
    /// Normalized input (before scale/shift), same shape as the input.
    pub xhat: Mat,
    /// Per-row reciprocal standard deviation.
    pub rstd: Vec<f64>,
}

/// Normalizes each row to zero mean / unit variance, then applies the
/// per-feature scale `gamma` and shift `beta` (both `1×cols`).
pub fn layer_norm(x: &Mat, gamma: &Mat, beta: &Mat) -> (Mat, LayerNormCache) {
    assert_eq!(gamma.cols, x.cols);
    assert_eq!(beta.cols, x.cols);
    let mut out = Mat::zeros(x.rows, x.cols);
    let mut xhat = Mat::zeros(x.rows, x.cols);
    let mut rstd = Vec::with_capacity(x.rows);
    let n = x.cols as f64;
    for r in 0..x.rows {
        let row = x.row(r);
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let rs = 1.0 / (var + LN_EPS).sqrt();
        rstd.push(rs);
        for (c, &rv) in row.iter().enumerate() {
            let xh = (rv - mean) * rs;
            *xhat.at_mut(r, c) = xh;
            *out.at_mut(r, c) = xh * gamma.data[c] + beta.data[c];
        }
    }
    (out, LayerNormCache { xhat, rstd })
}

/// Returns `dx` and accumulates `dgamma` / `dbeta`.
pub fn layer_norm_bwd(
    cache: &LayerNormCache,
    gamma: &Mat,
    dout: &Mat,
    dgamma: &mut Mat,
    dbeta: &mut Mat,
) -> Mat {
    let rows = cache.xhat.rows;
    let cols = cache.xhat.cols;
    let n = cols as f64;
    let mut dx = Mat::zeros(rows, cols);
    for r in 0..rows {
        let xh = cache.xhat.row(r);
        let dy = dout.row(r);
        let mut sum_g = 0.0; // Σ γ·dy
        let mut sum_gx = 0.0; // Σ γ·dy·xhat
        for c in 0..cols {
            let g = gamma.data[c] * dy[c];
            sum_g += g;
            sum_gx += g * xh[c];
            dgamma.data[c] += dy[c] * xh[c];
            dbeta.data[c] += dy[c];
        }
        let rs = cache.rstd[r];
        for c in 0..cols {
            let g = gamma.data[c] * dy[c];
            *dx.at_mut(r, c) = (g - sum_g / n - xh[c] * sum_gx / n) * rs;
        }
    }
    dx
}

// ---------------------------------------------------------------------------
// Softmax over the set axis (per column, across rows)
// ---------------------------------------------------------------------------

/// Softmax across rows, independently for each column, so each column of the
/// result sums to one. This is the "mix across set elements" direction.
pub fn col_softmax(x: &Mat) -> Mat {
    let mut out = Mat::zeros(x.rows, x.cols);
    for c in 0..x.cols {
        let mut mx = f64::NEG_INFINITY;
        for r in 0..x.rows {
            mx = mx.max(x.at(r, c));
        }
        let mut denom = 0.0;
        for r in 0..x.rows {
            let e = (x.at(r, c) - mx).exp();
            *out.at_mut(r, c) = e;
            denom += e;
        }
        for r in 0..x.rows {
            *out.at_mut(r, c) /= denom;
        }
        // Non-finite inputs propagate so the training loop's divergence
        // guard, not this invariant, reports them.
        debug_assert!(
            {
                let s: f64 = (0..x.rows).map(|r| out.at(r, c)).sum();
                !s.is_finite() || (s - 1.0).abs() < 1e-9
            },
            "softmax column must sum to 1"
        );
    }
    out
}

/// Backward through [`col_softmax`] given its output `y`.
pub fn col_softmax_bwd(y: &Mat, dout: &Mat) -> Mat {
    let mut dx = Mat::zeros(y.rows, y.cols);
    for c in 0..y.cols {
        let mut dot = 0.0;
        for r in 0..y.rows {
            dot += y.at(r, c) * dout.at(r, c);
        }
        for r in 0..y.rows {
            *dx.at_mut(r, c) = y.at(r, c) * (dout.at(r, c) - dot);
        }
    }
    dx
}

// ---------------------------------------------------------------------------
// Row pooling
// ---------------------------------------------------------------------------

/// Mean over rows: `r×c → 1×c`.
pub fn mean_rows(x: &Mat) -> Mat {
    let mut out = Mat::zeros(1, x.cols);
    for r in 0..x.rows {
        for c in 0..x.cols {
            out.data[c] += x.at(r, c);
        }
    }
    let inv = 1.0 / x.rows.max(1) as f64;
    out.scale(inv);
    out
}

/// Backward of [`mean_rows`]: spreads `dout (1×c)` evenly over `rows` rows.
pub fn mean_rows_bwd(rows: usize, dout: &Mat) -> Mat {
    let mut dx = Mat::zeros(rows, dout.cols);
    let inv = 1.0 / rows.max(1) as f64;
    for r in 0..rows {
        for c in 0..dout.cols {
            *dx.at_mut(r, c) = dout.data[c] * inv;
        }
    }
    dx
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

/// Inverted dropout: the mask already carries the `1/(1-p)` scaling, so the
/// backward pass is a plain elementwise product with the mask.
pub fn dropout(x: &Mat, p: f64, rng: &mut impl Rng) -> (Mat, Mat) {
    debug_assert!((0.0..1.0).contains(&p));
    let keep = 1.0 - p;
    let mut mask = Mat::zeros(x.rows, x.cols);
    for v in mask.data.iter_mut() {
        *v = if rng.random::<f64>() < keep {
            1.0 / keep
        } else {
            0.0
        };
    }
    let mut out = x.clone();
    for (o, m) in out.data.iter_mut().zip(&mask.data) {
        *o *= m;
    }
    (out, mask)
}

pub fn dropout_bwd(mask: &Mat, dout: &Mat) -> Mat {
    let mut dx = dout.clone();
    for (d, m) in dx.data.iter_mut().zip(&mask.data) {
        *d *= m;
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn random_mat(rows: usize, cols: usize, rng: &mut impl Rng) -> Mat {
        Mat::from_vec(
            rows,
            cols,
            (0..rows * cols)
                .map(|_| rng.random_range(-1.5..1.5))
                .collect(),
        )
    }

    /// Central finite difference of `f` w.r.t. `x[idx]`.
    fn fd<F: FnMut(&Mat) -> f64>(x: &Mat, idx: usize, mut f: F) -> f64 {
        let h = 1e-5;
        let mut xp = x.clone();
        xp.data[idx] += h;
        let mut xm = x.clone();
        xm.data[idx] -= h;
        (f(&xp) - f(&xm)) / (2.0 * h)
    }

    fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
        let denom = a.abs().max(b.abs()).max(1e-6);
        assert!(
            (a - b).abs() / denom <= tol,
            "{what}: analytic {a} vs numeric {b}"
        );
    }

    /// Scalar projection of a matrix for loss-style FD checks.
    fn project(m: &Mat, w: &Mat) -> f64 {
        m.data.iter().zip(&w.data).map(|(&a, &b)| a * b).sum()
    }

    #[test]
    fn matmul_matches_hand_example() {
        let a = Mat::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = Mat::from_vec(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let c = matmul(&a, &b);
        assert_eq!(c.data, vec![58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn matmul_transposed_variants_agree() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let a = random_mat(4, 3, &mut rng);
        let b = random_mat(3, 5, &mut rng);
        let c = matmul(&a, &b);
        // a·b == matmul_nt(a, bᵀ)
        let mut bt = Mat::zeros(5, 3);
        for r in 0..3 {
            for c2 in 0..5 {
                *bt.at_mut(c2, r) = b.at(r, c2);
            }
        }
        assert_eq!(matmul_nt(&a, &bt).data, c.data);
        // a·b == matmul_tn(aᵀ, b)
        let mut at = Mat::zeros(3, 4);
        for r in 0..4 {
            for c2 in 0..3 {
                *at.at_mut(c2, r) = a.at(r, c2);
            }
        }
        let c2 = matmul_tn(&at, &b);
        for (x, y) in c2.data.iter().zip(&c.data) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn matmul_gradients_match_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let a = random_mat(3, 4, &mut rng);
        let b = random_mat(4, 2, &mut rng);
        let w = random_mat(3, 2, &mut rng); // projection weights
        let (da, db) = matmul_bwd(&a, &b, &w);
        for idx in 0..a.len() {
            let num = fd(&a, idx, |m| project(&matmul(m, &b), &w));
            assert_close(da.data[idx], num, 1e-6, "matmul da");
        }
        for idx in 0..b.len() {
            let num = fd(&b, idx, |m| project(&matmul(&a, m), &w));
            assert_close(db.data[idx], num, 1e-6, "matmul db");
        }
    }

    #[test]
    fn gelu_matches_reference_points() {
        // Reference values for the tanh-form approximation.
        assert!((gelu_scalar(0.0)).abs() < 1e-15);
        assert!((gelu_scalar(1.0) - 0.841192).abs() < 1e-5);
        assert!((gelu_scalar(-1.0) + 0.158808).abs() < 1e-5);
        assert!((gelu_scalar(3.0) - 2.996363).abs() < 1e-5);
    }

    #[test]
    fn gelu_gradients_match_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let x = random_mat(4, 5, &mut rng);
        let w = random_mat(4, 5, &mut rng);
        let dx = gelu_bwd(&x, &w);
        for idx in 0..x.len() {
            let num = fd(&x, idx, |m| project(&gelu(m), &w));
            assert_close(dx.data[idx], num, 1e-5, "gelu dx");
        }
    }

    #[test]
    fn layer_norm_normalizes_rows() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let x = random_mat(3, 8, &mut rng);
        let gamma = Mat::from_vec(1, 8, vec![1.0; 8]);
        let beta = Mat::zeros(1, 8);
        let (y, _) = layer_norm(&x, &gamma, &beta);
        for r in 0..3 {
            let mean: f64 = y.row(r).iter().sum::<f64>() / 8.0;
            let var: f64 = y
                .row(r)
                .iter()
                .map(|&v| (v - mean) * (v - mean))
                .sum::<f64>()
                / 8.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-3); // epsilon shrinks variance slightly
        }
    }

    #[test]
    fn layer_norm_gradients_match_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let x = random_mat(3, 6, &mut rng);
        let gamma = random_mat(1, 6, &mut rng);
        let beta = random_mat(1, 6, &mut rng);
        let w = random_mat(3, 6, &mut rng);
        let (_, cache) = layer_norm(&x, &gamma, &beta);
        let mut dg = Mat::zeros(1, 6);
        let mut db = Mat::zeros(1, 6);
        let dx = layer_norm_bwd(&cache, &gamma, &w, &mut dg, &mut db);
        for idx in 0..x.len() {
            let num = fd(&x, idx, |m| project(&layer_norm(m, &gamma, &beta).0, &w));
            assert_close(dx.data[idx], num, 1e-5, "ln dx");
        }
        for idx in 0..gamma.len() {
            let num = fd(&gamma, idx, |m| project(&layer_norm(&x, m, &beta).0, &w));
            assert_close(dg.data[idx], num, 1e-5, "ln dgamma");
        }
        for idx in 0..beta.len() {
            let num = fd(&beta, idx, |m| project(&layer_norm(&x, &gamma, m).0, &w));
            assert_close(db.data[idx], num, 1e-5, "ln dbeta");
        }
    }

    #[test]
    fn col_softmax_columns_sum_to_one_and_shift_invariant() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let x = random_mat(5, 4, &mut rng);
        let y = col_softmax(&x);
        for c in 0..4 {
            let s: f64 = (0..5).map(|r| y.at(r, c)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        let mut shifted = x.clone();
        for r in 0..5 {
            for c in 0..4 {
                *shifted.at_mut(r, c) += 100.0;
            }
        }
        let y2 = col_softmax(&shifted);
        for (a, b) in y.data.iter().zip(&y2.data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn col_softmax_gradients_match_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let x = random_mat(4, 3, &mut rng);
        let w = random_mat(4, 3, &mut rng);
        let y = col_softmax(&x);
        let dx = col_softmax_bwd(&y, &w);
        for idx in 0..x.len() {
            let num = fd(&x, idx, |m| project(&col_softmax(m), &w));
            assert_close(dx.data[idx], num, 1e-5, "softmax dx");
        }
    }

    #[test]
    fn mean_rows_gradients_match_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let x = random_mat(5, 3, &mut rng);
        let w = random_mat(1, 3, &mut rng);
        let dx = mean_rows_bwd(5, &w);
        for idx in 0..x.len() {
            let num = fd(&x, idx, |m| project(&mean_rows(m), &w));
            assert_close(dx.data[idx], num, 1e-6, "mean dx");
        }
    }

    #[test]
    fn dropout_scales_survivors_and_masks_gradient() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let x = Mat::from_vec(1, 1000, vec![1.0; 1000]);
        let (y, mask) = dropout(&x, 0.25, &mut rng);
        let kept = y.data.iter().filter(|&&v| v != 0.0).count();
        assert!((kept as f64 / 1000.0 - 0.75).abs() < 0.05);
        for &v in &y.data {
            assert!(v == 0.0 || (v - 1.0 / 0.75).abs() < 1e-12);
        }
        let dout = Mat::from_vec(1, 1000, vec![2.0; 1000]);
        let dx = dropout_bwd(&mask, &dout);
        for (d, m) in dx.data.iter().zip(&mask.data) {
            assert_eq!(*d, 2.0 * m);
        }
    }

    #[test]
    fn normal_sampler_moments() {
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let n = 20_000;
        let samples: Vec<f64> = (0..n).map(|_| sample_normal(&mut rng)).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples
            .iter()
            .map(|&v| (v - mean) * (v - mean))
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() < 0.03, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }
}
