//! Masked losses over per-position predictions.

use alloc::string::String;

use crate::error::{Error, Result};
use crate::math;

use super::mat::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LossKind {
    BinaryCrossEntropy,
    MeanSquaredError,
}

fn masked_count(mask: &[bool]) -> usize {
    mask.iter().filter(|&&m| m).count()
}

/// Loss averaged over unmasked positions (times output width), plus
/// the gradient with respect to the predictions.
pub fn masked_loss(
    kind: LossKind,
    prediction: &Mat,
    target: &Mat,
    mask: &[bool],
) -> Result<(f64, Mat)> {
    if prediction.rows != target.rows
        || prediction.cols != target.cols
        || prediction.rows != mask.len()
    {
        return Err(Error::Shape(String::from(
            "prediction, target, and mask dimensions must agree",
        )));
    }
    let active = masked_count(mask);
    if active == 0 {
        return Err(Error::InvalidArgument(String::from(
            "loss mask selects no positions",
        )));
    }
    let denom = (active * prediction.cols) as f64;
    let mut loss = 0.0;
    let mut grad = Mat::zeros(prediction.rows, prediction.cols);
    for i in 0..prediction.rows {
        if !mask[i] {
            continue;
        }
        for j in 0..prediction.cols {
            let p = prediction.at(i, j);
            let t = target.at(i, j);
            match kind {
                LossKind::MeanSquaredError => {
                    loss += (p - t) * (p - t) / denom;
                    *grad.at_mut(i, j) = 2.0 * (p - t) / denom;
                }
                LossKind::BinaryCrossEntropy => {
                    let p = p.clamp(1e-12, 1.0 - 1e-12);
                    loss += -(t * math::ln(p) + (1.0 - t) * math::ln(1.0 - p)) / denom;
                    *grad.at_mut(i, j) = (p - t) / (p * (1.0 - p)) / denom;
                }
            }
        }
    }
    Ok((loss, grad))
}

/// Same loss, but the gradient is taken with respect to the logits of
/// a logistic output (`p = sigmoid(z)`); the BCE case composes to the
/// numerically stable `(p - t) / denom`.
pub fn masked_loss_logits_grad(
    kind: LossKind,
    probs: &Mat,
    target: &Mat,
    mask: &[bool],
) -> Result<(f64, Mat)> {
    let (loss, grad_p) = masked_loss(kind, probs, target, mask)?;
    let denom = (masked_count(mask) * probs.cols) as f64;
    let mut grad = Mat::zeros(probs.rows, probs.cols);
    for i in 0..probs.rows {
        if !mask[i] {
            continue;
        }
        for j in 0..probs.cols {
            let p = probs.at(i, j);
            let t = target.at(i, j);
            *grad.at_mut(i, j) = match kind {
                // (p - t)/denom exactly; the p(1-p) factors cancel.
                LossKind::BinaryCrossEntropy => (p - t) / denom,
                LossKind::MeanSquaredError => grad_p.at(i, j) * p * (1.0 - p),
            };
        }
    }
    Ok((loss, grad))
}
