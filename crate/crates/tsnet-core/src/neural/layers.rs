//! Layers with manual forward/backward passes.
//!
//! Every layer owns its parameters and gradient accumulators. Forward
//! passes return the activation plus whatever cache the backward pass
//! needs; backward passes accumulate parameter gradients and return the
//! gradient with respect to the layer input. Activations are `tanh`
//! throughout so finite-difference checks are not confounded by kinks.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::math;

use super::mat::Mat;

/// Visits every `(parameter, gradient)` pair in a fixed order.
pub trait Params {
    fn visit(&mut self, f: &mut dyn FnMut(&mut f64, &mut f64));

    fn zero_grads(&mut self) {
        self.visit(&mut |_, g| *g = 0.0);
    }

    fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, _| n += 1);
        n
    }
}

fn xavier(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> f64 {
    let bound = math::sqrt(6.0 / (fan_in + fan_out) as f64);
    rng.gen_range(-bound..bound)
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Linear {
    /// `in_dim × out_dim`.
    pub w: Mat,
    pub b: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(skip, default = "Mat::empty_grad"))]
    pub gw: Mat,
    #[cfg_attr(feature = "serde", serde(skip))]
    pub gb: Vec<f64>,
}

impl Mat {
    #[cfg(feature = "serde")]
    fn empty_grad() -> Mat {
        Mat::zeros(0, 0)
    }
}

impl Linear {
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let w = Mat::from_fn(in_dim, out_dim, |_, _| xavier(rng, in_dim, out_dim));
        // Nonzero bias keeps layer norms away from the zero-variance
        // point when an input row is all zeros.
        let bias_bound = 1.0 / math::sqrt(in_dim as f64);
        let b = (0..out_dim)
            .map(|_| rng.gen_range(-bias_bound..bias_bound))
            .collect();
        Self {
            gw: Mat::zeros(in_dim, out_dim),
            gb: vec![0.0; out_dim],
            w,
            b,
        }
    }

    /// Restores gradient buffers after deserialization (serde skips them).
    pub fn ensure_grads(&mut self) {
        if self.gw.data.len() != self.w.data.len() {
            self.gw = Mat::zeros(self.w.rows, self.w.cols);
        }
        if self.gb.len() != self.b.len() {
            self.gb = vec![0.0; self.b.len()];
        }
    }

    pub fn forward(&self, x: &Mat) -> Mat {
        let mut y = x.matmul(&self.w);
        for i in 0..y.rows {
            for j in 0..y.cols {
                *y.at_mut(i, j) += self.b[j];
            }
        }
        y
    }

    pub fn backward(&mut self, x: &Mat, gy: &Mat) -> Mat {
        self.gw.add_assign(&x.t_matmul(gy));
        for i in 0..gy.rows {
            for j in 0..gy.cols {
                self.gb[j] += gy.at(i, j);
            }
        }
        gy.matmul_t(&self.w)
    }
}

impl Params for Linear {
    fn visit(&mut self, f: &mut dyn FnMut(&mut f64, &mut f64)) {
        for (p, g) in self.w.data.iter_mut().zip(self.gw.data.iter_mut()) {
            f(p, g);
        }
        for (p, g) in self.b.iter_mut().zip(self.gb.iter_mut()) {
            f(p, g);
        }
    }
}

// ---------------------------------------------------------------------------
// Tanh (stateless)
// ---------------------------------------------------------------------------

pub fn tanh_forward(x: &Mat) -> Mat {
    x.map(math::tanh)
}

/// `y` must be the tanh output.
pub fn tanh_backward(y: &Mat, gy: &Mat) -> Mat {
    Mat {
        rows: y.rows,
        cols: y.cols,
        data: y
            .data
            .iter()
            .zip(&gy.data)
            .map(|(&y, &g)| g * (1.0 - y * y))
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// LayerNorm
// ---------------------------------------------------------------------------

pub const LAYER_NORM_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(skip))]
    pub ggamma: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(skip))]
    pub gbeta: Vec<f64>,
}

pub struct LayerNormCache {
    pub xhat: Mat,
    pub inv_std: Vec<f64>,
}

impl LayerNorm {
    pub fn new(dim: usize) -> Self {
        Self {
            gamma: vec![1.0; dim],
            beta: vec![0.0; dim],
            ggamma: vec![0.0; dim],
            gbeta: vec![0.0; dim],
        }
    }

    pub fn ensure_grads(&mut self) {
        if self.ggamma.len() != self.gamma.len() {
            self.ggamma = vec![0.0; self.gamma.len()];
        }
        if self.gbeta.len() != self.beta.len() {
            self.gbeta = vec![0.0; self.beta.len()];
        }
    }

    pub fn forward(&self, x: &Mat) -> (Mat, LayerNormCache) {
        let d = x.cols as f64;
        let mut xhat = Mat::zeros(x.rows, x.cols);
        let mut inv_std = Vec::with_capacity(x.rows);
        let mut y = Mat::zeros(x.rows, x.cols);
        for i in 0..x.rows {
            let row = x.row(i);
            let mean = row.iter().sum::<f64>() / d;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
            let istd = 1.0 / math::sqrt(var + LAYER_NORM_EPS);
            inv_std.push(istd);
            for j in 0..x.cols {
                let h = (row[j] - mean) * istd;
                *xhat.at_mut(i, j) = h;
                *y.at_mut(i, j) = self.gamma[j] * h + self.beta[j];
            }
        }
        (y, LayerNormCache { xhat, inv_std })
    }

    pub fn backward(&mut self, cache: &LayerNormCache, gy: &Mat) -> Mat {
        let d = gy.cols as f64;
        let mut gx = Mat::zeros(gy.rows, gy.cols);
        for i in 0..gy.rows {
            let mut sum_g = 0.0;
            let mut sum_gx = 0.0;
            for j in 0..gy.cols {
                let g = gy.at(i, j) * self.gamma[j];
                sum_g += g;
                sum_gx += g * cache.xhat.at(i, j);
                self.ggamma[j] += gy.at(i, j) * cache.xhat.at(i, j);
                self.gbeta[j] += gy.at(i, j);
            }
            let istd = cache.inv_std[i];
            for j in 0..gy.cols {
                let g = gy.at(i, j) * self.gamma[j];
                *gx.at_mut(i, j) =
                    istd * (g - sum_g / d - cache.xhat.at(i, j) * sum_gx / d);
            }
        }
        gx
    }
}

impl Params for LayerNorm {
    fn visit(&mut self, f: &mut dyn FnMut(&mut f64, &mut f64)) {
        for (p, g) in self.gamma.iter_mut().zip(self.ggamma.iter_mut()) {
            f(p, g);
        }
        for (p, g) in self.beta.iter_mut().zip(self.gbeta.iter_mut()) {
            f(p, g);
        }
    }
}

// ---------------------------------------------------------------------------
// Multi-head self-attention
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MultiHeadSelfAttention {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub head_count: usize,
}

pub struct MhsaCache {
    pub x: Mat,
    pub q: Mat,
    pub k: Mat,
    pub v: Mat,
    /// Softmax weights per head, each `n × n`.
    pub attn: Vec<Mat>,
    pub concat: Mat,
}

fn softmax_rows(x: &mut Mat) {
    for i in 0..x.rows {
        let row = x.row_mut(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = math::exp(*v - max);
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

impl MultiHeadSelfAttention {
    pub fn new(dim: usize, head_count: usize, rng: &mut ChaCha8Rng) -> Self {
        debug_assert_eq!(dim % head_count, 0);
        Self {
            wq: Linear::new(dim, dim, rng),
            wk: Linear::new(dim, dim, rng),
            wv: Linear::new(dim, dim, rng),
            wo: Linear::new(dim, dim, rng),
            head_count,
        }
    }

    pub fn ensure_grads(&mut self) {
        self.wq.ensure_grads();
        self.wk.ensure_grads();
        self.wv.ensure_grads();
        self.wo.ensure_grads();
    }

    pub fn forward(&self, x: &Mat) -> (Mat, MhsaCache) {
        let dim = x.cols;
        let dh = dim / self.head_count;
        let scale = 1.0 / math::sqrt(dh as f64);
        let q = self.wq.forward(x);
        let k = self.wk.forward(x);
        let v = self.wv.forward(x);
        let mut concat = Mat::zeros(x.rows, dim);
        let mut attn = Vec::with_capacity(self.head_count);
        for h in 0..self.head_count {
            let qh = q.col_block(h * dh, dh);
            let kh = k.col_block(h * dh, dh);
            let vh = v.col_block(h * dh, dh);
            let mut scores = qh.matmul_t(&kh);
            scores.scale(scale);
            softmax_rows(&mut scores);
            let out_h = scores.matmul(&vh);
            concat.add_col_block(h * dh, &out_h);
            attn.push(scores);
        }
        let y = self.wo.forward(&concat);
        (
            y,
            MhsaCache {
                x: x.clone(),
                q,
                k,
                v,
                attn,
                concat,
            },
        )
    }

    pub fn backward(&mut self, cache: &MhsaCache, gy: &Mat) -> Mat {
        let dim = cache.x.cols;
        let dh = dim / self.head_count;
        let scale = 1.0 / math::sqrt(dh as f64);
        let g_concat = self.wo.backward(&cache.concat, gy);
        let mut gq = Mat::zeros(cache.q.rows, dim);
        let mut gk = Mat::zeros(cache.k.rows, dim);
        let mut gv = Mat::zeros(cache.v.rows, dim);
        for h in 0..self.head_count {
            let g_out = g_concat.col_block(h * dh, dh);
            let attn = &cache.attn[h];
            let qh = cache.q.col_block(h * dh, dh);
            let kh = cache.k.col_block(h * dh, dh);
            let vh = cache.v.col_block(h * dh, dh);
            let g_vh = attn.t_matmul(&g_out);
            let g_attn = g_out.matmul_t(&vh);
            // Softmax backward per row.
            let mut g_scores = Mat::zeros(attn.rows, attn.cols);
            for i in 0..attn.rows {
                let mut dot = 0.0;
                for j in 0..attn.cols {
                    dot += g_attn.at(i, j) * attn.at(i, j);
                }
                for j in 0..attn.cols {
                    *g_scores.at_mut(i, j) = attn.at(i, j) * (g_attn.at(i, j) - dot);
                }
            }
            g_scores.scale(scale);
            let g_qh = g_scores.matmul(&kh);
            let g_kh = g_scores.t_matmul(&qh);
            gq.add_col_block(h * dh, &g_qh);
            gk.add_col_block(h * dh, &g_kh);
            gv.add_col_block(h * dh, &g_vh);
        }
        let mut gx = self.wq.backward(&cache.x, &gq);
        gx.add_assign(&self.wk.backward(&cache.x, &gk));
        gx.add_assign(&self.wv.backward(&cache.x, &gv));
        gx
    }
}

impl Params for MultiHeadSelfAttention {
    fn visit(&mut self, f: &mut dyn FnMut(&mut f64, &mut f64)) {
        self.wq.visit(f);
        self.wk.visit(f);
        self.wv.visit(f);
        self.wo.visit(f);
    }
}

// ---------------------------------------------------------------------------
// Feed-forward (position-wise two-layer MLP with tanh)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeedForward {
    pub lin1: Linear,
    pub lin2: Linear,
}

pub struct FeedForwardCache {
    pub x: Mat,
    /// Post-tanh hidden activation.
    pub h: Mat,
}

impl FeedForward {
    pub fn new(dim: usize, hidden: usize, out: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            lin1: Linear::new(dim, hidden, rng),
            lin2: Linear::new(hidden, out, rng),
        }
    }

    pub fn ensure_grads(&mut self) {
        self.lin1.ensure_grads();
        self.lin2.ensure_grads();
    }

    pub fn forward(&self, x: &Mat) -> (Mat, FeedForwardCache) {
        let h = tanh_forward(&self.lin1.forward(x));
        let y = self.lin2.forward(&h);
        (y, FeedForwardCache { x: x.clone(), h })
    }

    pub fn backward(&mut self, cache: &FeedForwardCache, gy: &Mat) -> Mat {
        let gh = self.lin2.backward(&cache.h, gy);
        let gpre = tanh_backward(&cache.h, &gh);
        self.lin1.backward(&cache.x, &gpre)
    }
}

impl Params for FeedForward {
    fn visit(&mut self, f: &mut dyn FnMut(&mut f64, &mut f64)) {
        self.lin1.visit(f);
        self.lin2.visit(f);
    }
}

// ---------------------------------------------------------------------------
// Transformer encoder layer (post-norm residual blocks)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EncoderLayer {
    pub attn: MultiHeadSelfAttention,
    pub ln1: LayerNorm,
    pub ffn: FeedForward,
    pub ln2: LayerNorm,
}

pub struct EncoderLayerCache {
    pub attn: MhsaCache,
    pub ln1: LayerNormCache,
    pub y1: Mat,
    pub ffn: FeedForwardCache,
    pub ln2: LayerNormCache,
}

impl EncoderLayer {
    pub fn new(dim: usize, head_count: usize, ffn_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            attn: MultiHeadSelfAttention::new(dim, head_count, rng),
            ln1: LayerNorm::new(dim),
            ffn: FeedForward::new(dim, ffn_dim, dim, rng),
            ln2: LayerNorm::new(dim),
        }
    }

    pub fn ensure_grads(&mut self) {
        self.attn.ensure_grads();
        self.ln1.ensure_grads();
        self.ffn.ensure_grads();
        self.ln2.ensure_grads();
    }

    pub fn forward(&self, x: &Mat) -> (Mat, EncoderLayerCache) {
        let (a, attn_cache) = self.attn.forward(x);
        let mut sum1 = x.clone();
        sum1.add_assign(&a);
        let (y1, ln1_cache) = self.ln1.forward(&sum1);
        let (f, ffn_cache) = self.ffn.forward(&y1);
        let mut sum2 = y1.clone();
        sum2.add_assign(&f);
        let (y2, ln2_cache) = self.ln2.forward(&sum2);
        (
            y2,
            EncoderLayerCache {
                attn: attn_cache,
                ln1: ln1_cache,
                y1,
                ffn: ffn_cache,
                ln2: ln2_cache,
            },
        )
    }

    pub fn backward(&mut self, cache: &EncoderLayerCache, gy: &Mat) -> Mat {
        let g_sum2 = self.ln2.backward(&cache.ln2, gy);
        let g_ffn_in = self.ffn.backward(&cache.ffn, &g_sum2);
        let mut g_y1 = g_sum2;
        g_y1.add_assign(&g_ffn_in);
        let g_sum1 = self.ln1.backward(&cache.ln1, &g_y1);
        let g_attn_in = self.attn.backward(&cache.attn, &g_sum1);
        let mut gx = g_sum1;
        gx.add_assign(&g_attn_in);
        gx
    }
}

impl Params for EncoderLayer {
    fn visit(&mut self, f: &mut dyn FnMut(&mut f64, &mut f64)) {
        self.attn.visit(f);
        self.ln1.visit(f);
        self.ffn.visit(f);
        self.ln2.visit(f);
    }
}

// ---------------------------------------------------------------------------
// Mixer block (token-mixing MLP across positions + channel MLP)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MixerBlock {
    pub ln1: LayerNorm,
    /// Acts on the position axis; tied to a fixed padded length.
    pub token_mlp: FeedForward,
    pub ln2: LayerNorm,
    pub channel_mlp: FeedForward,
}

pub struct MixerBlockCache {
    pub ln1: LayerNormCache,
    pub token: FeedForwardCache,
    pub ln2: LayerNormCache,
    pub channel: FeedForwardCache,
}

impl MixerBlock {
    pub fn new(dim: usize, tokens: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            ln1: LayerNorm::new(dim),
            token_mlp: FeedForward::new(tokens, hidden, tokens, rng),
            ln2: LayerNorm::new(dim),
            channel_mlp: FeedForward::new(dim, hidden, dim, rng),
        }
    }

    pub fn ensure_grads(&mut self) {
        self.ln1.ensure_grads();
        self.token_mlp.ensure_grads();
        self.ln2.ensure_grads();
        self.channel_mlp.ensure_grads();
    }

    pub fn forward(&self, x: &Mat) -> (Mat, MixerBlockCache) {
        let (u, ln1_cache) = self.ln1.forward(x);
        let (t_out, token_cache) = self.token_mlp.forward(&u.transpose());
        let mut x1 = x.clone();
        x1.add_assign(&t_out.transpose());
        let (v, ln2_cache) = self.ln2.forward(&x1);
        let (c_out, channel_cache) = self.channel_mlp.forward(&v);
        let mut y = x1;
        y.add_assign(&c_out);
        (
            y,
            MixerBlockCache {
                ln1: ln1_cache,
                token: token_cache,
                ln2: ln2_cache,
                channel: channel_cache,
            },
        )
    }

    pub fn backward(&mut self, cache: &MixerBlockCache, gy: &Mat) -> Mat {
        let g_v = self.channel_mlp.backward(&cache.channel, gy);
        let mut g_x1 = gy.clone();
        g_x1.add_assign(&self.ln2.backward(&cache.ln2, &g_v));
        let g_u_t = self.token_mlp.backward(&cache.token, &g_x1.transpose());
        let g_u = g_u_t.transpose();
        let mut gx = g_x1;
        gx.add_assign(&self.ln1.backward(&cache.ln1, &g_u));
        gx
    }
}

impl Params for MixerBlock {
    fn visit(&mut self, f: &mut dyn FnMut(&mut f64, &mut f64)) {
        self.ln1.visit(f);
        self.token_mlp.visit(f);
        self.ln2.visit(f);
        self.channel_mlp.visit(f);
    }
}
