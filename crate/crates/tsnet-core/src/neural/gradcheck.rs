//! Finite-difference verification of the analytic gradients.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

use super::layers::Params;
use super::loss::{masked_loss_logits_grad, LossKind};
use super::mat::Mat;
use super::net::Network;

/// Compares analytic parameter gradients of the masked loss against
/// central finite differences on a random subset of at least
/// `min_coords` coordinates. Returns the maximum relative error,
/// `|a - n| / max(|a| + |n|, 1e-8)`.
pub fn grad_check(
    net: &mut Network,
    x: &Mat,
    target: &Mat,
    mask: &[bool],
    kind: LossKind,
    epsilon: f64,
    min_coords: usize,
    seed: u64,
) -> Result<f64> {
    net.zero_grads();
    let cache = net.forward_cached(x)?;
    let (_, g_logits) = masked_loss_logits_grad(kind, &cache.probs, target, mask)?;
    net.backward(&cache, &g_logits);

    let mut analytic = Vec::new();
    net.visit(&mut |_, g| analytic.push(*g));

    let count = analytic.len();
    let mut coords: Vec<usize> = (0..count).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    coords.shuffle(&mut rng);
    coords.truncate(min_coords.min(count));

    let loss_at = |net: &mut Network, idx: usize, delta: f64| -> Result<f64> {
        let mut i = 0;
        net.visit(&mut |p, _| {
            if i == idx {
                *p += delta;
            }
            i += 1;
        });
        let cache = net.forward_cached(x)?;
        let (loss, _) = masked_loss_logits_grad(kind, &cache.probs, target, mask)?;
        let mut i = 0;
        net.visit(&mut |p, _| {
            if i == idx {
                *p -= delta;
            }
            i += 1;
        });
        Ok(loss)
    };

    let mut max_rel = 0.0f64;
    for idx in coords {
        let plus = loss_at(net, idx, epsilon)?;
        let minus = loss_at(net, idx, -epsilon)?;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let a = analytic[idx];
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
        if rel > max_rel {
            max_rel = rel;
        }
    }
    Ok(max_rel)
}
