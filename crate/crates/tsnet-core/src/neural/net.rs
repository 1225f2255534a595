//! The scheduling sub-networks: an embedding MLP, a feature-mixing
//! backbone (transformer encoder stack, mixer stack, or plain
//! position-wise MLP stack), and a logistic head.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math;

use super::layers::{
    tanh_backward, tanh_forward, EncoderLayer, EncoderLayerCache, Linear, MixerBlock,
    MixerBlockCache, Params,
};
use super::mat::Mat;

pub const INPUT_FEATURES: usize = 4;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetConfig {
    pub embed_dim: usize,
    pub encoder_layers: usize,
    pub head_count: usize,
    pub ffn_dim: usize,
    pub dropout: f64,
    pub seed: u64,
    /// Off by default: pure self-attention is permutation-equivariant,
    /// which suits order-free task sets. Enable to reproduce the
    /// position-sensitive behavior the sliding augmentation targets.
    #[cfg_attr(feature = "serde", serde(default))]
    pub positional_encoding: bool,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            embed_dim: 32,
            encoder_layers: 2,
            head_count: 4,
            ffn_dim: 64,
            dropout: 0.0,
            seed: 0,
            positional_encoding: false,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0
            || self.encoder_layers == 0
            || self.head_count == 0
            || self.embed_dim % self.head_count != 0
            || self.ffn_dim == 0
            || !(0.0..1.0).contains(&self.dropout)
        {
            return Err(Error::InvalidArgument(String::from(
                "network configuration violates dimension invariants",
            )));
        }
        Ok(())
    }
}

/// Which quantity the head predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum HeadKind {
    /// Per-position offload probability (1 output).
    Offload,
    /// Per-position normalized `(p_ul, p_dl, f_ap)` (3 outputs).
    Resource,
}

impl HeadKind {
    pub fn output_dim(self) -> usize {
        match self {
            HeadKind::Offload => 1,
            HeadKind::Resource => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BackboneKind {
    Transformer,
    Mixer,
    Mlp,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Backbone {
    Transformer(Vec<EncoderLayer>),
    Mixer(Vec<MixerBlock>),
    /// Position-wise MLP stack; no cross-position interaction.
    Mlp(Vec<super::layers::FeedForward>),
}

pub enum BackboneCache {
    Transformer(Vec<EncoderLayerCache>),
    Mixer(Vec<MixerBlockCache>),
    Mlp(Vec<super::layers::FeedForwardCache>),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Network {
    pub config: NetConfig,
    pub head_kind: HeadKind,
    pub backbone_kind: BackboneKind,
    pub embed: Linear,
    pub backbone: Backbone,
    pub head_hidden: Linear,
    pub head_out: Linear,
}

pub struct ForwardCache {
    pub x: Mat,
    pub embedded: Mat,
    /// Post-tanh embedding (with positional encoding already added
    /// beforehand when enabled).
    pub embed_act: Mat,
    /// Backbone input: `embed_act` with the dropout mask applied.
    pub embed_used: Mat,
    pub backbone: BackboneCache,
    pub backbone_out: Mat,
    pub head_h: Mat,
    /// Head-output input: `head_h` with the dropout mask applied.
    pub head_used: Mat,
    pub logits: Mat,
    pub probs: Mat,
    pub embed_mask: Option<Mat>,
    pub head_mask: Option<Mat>,
}

/// Inverted-dropout mask: entries are `0` or `1/(1-p)`.
fn dropout_mask(rows: usize, cols: usize, p: f64, rng: &mut ChaCha8Rng) -> Mat {
    let keep = 1.0 - p;
    Mat::from_fn(rows, cols, |_, _| {
        if rng.gen_bool(keep) {
            1.0 / keep
        } else {
            0.0
        }
    })
}

fn apply_mask(x: &Mat, mask: &Mat) -> Mat {
    Mat {
        rows: x.rows,
        cols: x.cols,
        data: x.data.iter().zip(&mask.data).map(|(a, b)| a * b).collect(),
    }
}

fn positional_encoding(rows: usize, dim: usize) -> Mat {
    Mat::from_fn(rows, dim, |pos, j| {
        let pair = (j / 2) as f64;
        let angle = pos as f64 / math::powf(10000.0, 2.0 * pair / dim as f64);
        if j % 2 == 0 {
            math::sin(angle)
        } else {
            math::cos(angle)
        }
    })
}

impl Network {
    /// `tokens` is the padded sequence length; only the mixer backbone
    /// is tied to it (its token MLP acts across positions).
    pub fn new(config: NetConfig, head_kind: HeadKind, backbone_kind: BackboneKind, tokens: usize) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let d = config.embed_dim;
        let embed = Linear::new(INPUT_FEATURES, d, &mut rng);
        let backbone = match backbone_kind {
            BackboneKind::Transformer => Backbone::Transformer(
                (0..config.encoder_layers)
                    .map(|_| EncoderLayer::new(d, config.head_count, config.ffn_dim, &mut rng))
                    .collect(),
            ),
            BackboneKind::Mixer => Backbone::Mixer(
                (0..config.encoder_layers)
                    .map(|_| MixerBlock::new(d, tokens, config.ffn_dim, &mut rng))
                    .collect(),
            ),
            BackboneKind::Mlp => Backbone::Mlp(
                (0..config.encoder_layers)
                    .map(|_| super::layers::FeedForward::new(d, config.ffn_dim, d, &mut rng))
                    .collect(),
            ),
        };
        let head_hidden = Linear::new(d, d, &mut rng);
        let head_out = Linear::new(d, head_kind.output_dim(), &mut rng);
        Ok(Self {
            config,
            head_kind,
            backbone_kind,
            embed,
            backbone,
            head_hidden,
            head_out,
        })
    }

    pub fn ensure_grads(&mut self) {
        self.embed.ensure_grads();
        match &mut self.backbone {
            Backbone::Transformer(layers) => layers.iter_mut().for_each(EncoderLayer::ensure_grads),
            Backbone::Mixer(layers) => layers.iter_mut().for_each(MixerBlock::ensure_grads),
            Backbone::Mlp(layers) => layers
                .iter_mut()
                .for_each(super::layers::FeedForward::ensure_grads),
        }
        self.head_hidden.ensure_grads();
        self.head_out.ensure_grads();
    }

    /// Forward pass keeping everything the backward pass needs.
    pub fn forward_cached(&self, x: &Mat) -> Result<ForwardCache> {
        self.forward_train(x, None)
    }

    /// Training forward pass; dropout is applied at the embedding and
    /// head activations when a RNG is supplied and `dropout > 0`.
    pub fn forward_train(&self, x: &Mat, rng: Option<&mut ChaCha8Rng>) -> Result<ForwardCache> {
        if x.cols != INPUT_FEATURES {
            return Err(Error::Shape(alloc::format!(
                "expected {INPUT_FEATURES} input features, got {}",
                x.cols
            )));
        }
        if let Backbone::Mixer(layers) = &self.backbone {
            if let Some(first) = layers.first() {
                let tokens = first.token_mlp.lin1.w.rows;
                if tokens != x.rows {
                    return Err(Error::Shape(alloc::format!(
                        "mixer backbone is built for {tokens} positions, got {}",
                        x.rows
                    )));
                }
            }
        }
        let mut embedded = self.embed.forward(x);
        if self.config.positional_encoding {
            embedded.add_assign(&positional_encoding(x.rows, self.config.embed_dim));
        }
        let embed_act = tanh_forward(&embedded);
        let p = self.config.dropout;
        let mut masks = rng.filter(|_| p > 0.0).map(|rng| {
            (
                dropout_mask(embed_act.rows, embed_act.cols, p, rng),
                dropout_mask(embed_act.rows, self.config.embed_dim, p, rng),
            )
        });
        let embed_used = match &masks {
            Some((m, _)) => apply_mask(&embed_act, m),
            None => embed_act.clone(),
        };
        let mut h = embed_used.clone();
        let backbone_cache = match &self.backbone {
            Backbone::Transformer(layers) => {
                let mut caches = Vec::with_capacity(layers.len());
                for layer in layers {
                    let (y, c) = layer.forward(&h);
                    caches.push(c);
                    h = y;
                }
                BackboneCache::Transformer(caches)
            }
            Backbone::Mixer(layers) => {
                let mut caches = Vec::with_capacity(layers.len());
                for layer in layers {
                    let (y, c) = layer.forward(&h);
                    caches.push(c);
                    h = y;
                }
                BackboneCache::Mixer(caches)
            }
            Backbone::Mlp(layers) => {
                let mut caches = Vec::with_capacity(layers.len());
                for layer in layers {
                    let (y, c) = layer.forward(&h);
                    caches.push(c);
                    h = y;
                }
                BackboneCache::Mlp(caches)
            }
        };
        let backbone_out = h;
        let head_h = tanh_forward(&self.head_hidden.forward(&backbone_out));
        let head_used = match &masks {
            Some((_, m)) => apply_mask(&head_h, m),
            None => head_h.clone(),
        };
        let logits = self.head_out.forward(&head_used);
        let probs = logits.map(math::sigmoid);
        let (embed_mask, head_mask) = match masks.take() {
            Some((a, b)) => (Some(a), Some(b)),
            None => (None, None),
        };
        Ok(ForwardCache {
            x: x.clone(),
            embedded,
            embed_act,
            embed_used,
            backbone: backbone_cache,
            backbone_out,
            head_h,
            head_used,
            logits,
            probs,
            embed_mask,
            head_mask,
        })
    }

    /// Inference-only forward; returns per-position probabilities
    /// (`n × 1` for offload, `n × 3` for resources).
    pub fn forward(&self, x: &Mat) -> Result<Mat> {
        Ok(self.forward_cached(x)?.probs)
    }

    /// Accumulates parameter gradients for a loss whose gradient with
    /// respect to the head logits is `g_logits`.
    pub fn backward(&mut self, cache: &ForwardCache, g_logits: &Mat) {
        let mut g_head_h = self.head_out.backward(&cache.head_used, g_logits);
        if let Some(mask) = &cache.head_mask {
            g_head_h = apply_mask(&g_head_h, mask);
        }
        let g_head_pre = tanh_backward(&cache.head_h, &g_head_h);
        let mut g = self.head_hidden.backward(&cache.backbone_out, &g_head_pre);
        match (&mut self.backbone, &cache.backbone) {
            (Backbone::Transformer(layers), BackboneCache::Transformer(caches)) => {
                for (layer, c) in layers.iter_mut().zip(caches).rev() {
                    g = layer.backward(c, &g);
                }
            }
            (Backbone::Mixer(layers), BackboneCache::Mixer(caches)) => {
                for (layer, c) in layers.iter_mut().zip(caches).rev() {
                    g = layer.backward(c, &g);
                }
            }
            (Backbone::Mlp(layers), BackboneCache::Mlp(caches)) => {
                for (layer, c) in layers.iter_mut().zip(caches).rev() {
                    g = layer.backward(c, &g);
                }
            }
            _ => unreachable!("cache kind matches backbone kind"),
        }
        if let Some(mask) = &cache.embed_mask {
            g = apply_mask(&g, mask);
        }
        let g_embed_pre = tanh_backward(&cache.embed_act, &g);
        let _ = self.embed.backward(&cache.x, &g_embed_pre);
    }

    pub fn parameter_count(&mut self) -> usize {
        self.param_count()
    }
}

impl Params for Network {
    fn visit(&mut self, f: &mut dyn FnMut(&mut f64, &mut f64)) {
        self.embed.visit(f);
        match &mut self.backbone {
            Backbone::Transformer(layers) => {
                for layer in layers {
                    layer.visit(f);
                }
            }
            Backbone::Mixer(layers) => {
                for layer in layers {
                    layer.visit(f);
                }
            }
            Backbone::Mlp(layers) => {
                for layer in layers {
                    layer.visit(f);
                }
            }
        }
        self.head_hidden.visit(f);
        self.head_out.visit(f);
    }
}
