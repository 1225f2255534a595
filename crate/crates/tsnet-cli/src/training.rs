//! Training loops for the offload and resource networks.
//!
//! One dataset record is one training sample: the padded feature
//! matrix of a whole instance. The resource network is teacher-forced,
//! its coupled input is built from the record's label offload vector,
//! never from offload-network predictions.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tsnet_core::model::SystemParams;
use tsnet_core::neural::{
    masked_loss_logits_grad, Adam, BackboneKind, HeadKind, LossKind, Mat, NetConfig, Network,
    Params,
};
use tsnet_core::scheduler::{normalized_features, pad, ExtenderConfig};

use crate::checkpoint::{Checkpoint, NetRole};
use crate::config::RunConfig;
use crate::dataset::{Dataset, DatasetRecord};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy)]
pub struct CurveRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Accuracy for offload predictors, MSE for the resource net.
    pub val_metric: f64,
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub curve: Vec<CurveRow>,
}

/// One prepared sample: input matrix, target, and row mask.
pub struct Sample {
    pub input: Mat,
    pub target: Mat,
    pub mask: Vec<bool>,
}

/// Builds the offload-net sample for a record: padded normalized
/// features, 0/1 targets on real rows.
pub fn prepare_offload_sample(
    record: &DatasetRecord,
    normalizer: &tsnet_core::datagen::Normalizer,
    ext: &ExtenderConfig,
    pad_seed: u64,
) -> CliResult<Sample> {
    let instance = record.instance()?;
    let features = normalized_features(&instance, normalizer);
    let (input, mask) = pad(&features, ext, pad_seed)?;
    let target = Mat::from_fn(ext.n_bar, 1, |i, _| {
        if i < record.m.len() {
            f64::from(record.m[i])
        } else {
            0.0
        }
    });
    Ok(Sample { input, target, mask })
}

/// Builds the teacher-forced resource-net sample: features masked by
/// the label offload vector, targets the label allocations mapped into
/// `[0, 1]` by the constraint boxes. The mask keeps only real,
/// offloaded rows; `None` when the record offloads nothing.
pub fn prepare_resource_sample(
    record: &DatasetRecord,
    normalizer: &tsnet_core::datagen::Normalizer,
    ext: &ExtenderConfig,
    params: &SystemParams,
    pad_seed: u64,
) -> CliResult<Option<Sample>> {
    let instance = record.instance()?;
    let features = normalized_features(&instance, normalizer);
    let (padded, real) = pad(&features, ext, pad_seed)?;
    let offloaded = |i: usize| i < record.m.len() && record.m[i] != 0;
    let input = Mat::from_fn(ext.n_bar, padded.cols, |i, j| {
        if offloaded(i) {
            padded.at(i, j)
        } else {
            0.0
        }
    });
    let norm = |v: f64, lo: f64, hi: f64| (v - lo) / (hi - lo);
    let target = Mat::from_fn(ext.n_bar, 3, |i, j| {
        if !offloaded(i) {
            return 0.0;
        }
        match j {
            0 => norm(record.p_ul[i], params.p_ul_min, params.p_ul_max),
            1 => norm(record.p_dl[i], params.p_dl_min, params.p_dl_max),
            _ => norm(record.f_ap[i], params.f_ap_min, params.f_ap_max),
        }
    });
    let mask: Vec<bool> = (0..ext.n_bar).map(|i| real[i] && offloaded(i)).collect();
    if mask.iter().all(|&m| !m) {
        return Ok(None);
    }
    Ok(Some(Sample { input, target, mask }))
}

fn backbone_for(role: NetRole, cfg: &NetConfig) -> (HeadKind, BackboneKind, NetConfig) {
    match role {
        NetRole::Offload => (HeadKind::Offload, BackboneKind::Transformer, cfg.clone()),
        NetRole::Resource => (HeadKind::Resource, BackboneKind::Transformer, cfg.clone()),
        NetRole::Mlp => (HeadKind::Offload, BackboneKind::Mlp, cfg.clone()),
        NetRole::Mixer => (HeadKind::Offload, BackboneKind::Mixer, cfg.clone()),
    }
}

fn loss_kind(role: NetRole) -> LossKind {
    if role.is_offload_predictor() {
        LossKind::BinaryCrossEntropy
    } else {
        LossKind::MeanSquaredError
    }
}

/// Offload accuracy at threshold 0.5 over masked rows.
fn accuracy(probs: &Mat, target: &Mat, mask: &[bool]) -> f64 {
    let mut hit = 0usize;
    let mut total = 0usize;
    for i in 0..probs.rows {
        if !mask[i] {
            continue;
        }
        total += 1;
        let pred = probs.at(i, 0) >= 0.5;
        let truth = target.at(i, 0) >= 0.5;
        if pred == truth {
            hit += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

pub fn train_network(cfg: &RunConfig, role: NetRole, dataset: &Dataset) -> CliResult<TrainOutcome> {
    cfg.validate()?;
    let params = cfg.system_params()?;
    let normalizer = &dataset.manifest.normalizer;
    let ext = &cfg.extender;
    let kind = loss_kind(role);

    let mut samples = Vec::new();
    for (idx, record) in dataset.records.iter().enumerate() {
        let sample = if role.is_offload_predictor() {
            Some(prepare_offload_sample(record, normalizer, ext, idx as u64)?)
        } else {
            prepare_resource_sample(record, normalizer, ext, &params, idx as u64)?
        };
        if let Some(s) = sample {
            samples.push(s);
        }
    }
    if samples.len() < 2 {
        return Err(CliError::usage(
            "training needs at least two usable records",
        ));
    }

    // Deterministic split: shuffle once, hold out the tail.
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut split_rng = ChaCha8Rng::seed_from_u64(cfg.train.split_seed);
    order.shuffle(&mut split_rng);
    let val_len = ((samples.len() as f64 * cfg.train.val_fraction) as usize)
        .min(samples.len() - 1);
    let (train_idx, val_idx) = order.split_at(samples.len() - val_len);
    let train_idx = train_idx.to_vec();
    let val_idx = val_idx.to_vec();

    let (head, backbone, net_cfg) = backbone_for(role, &cfg.net);
    let mut net = Network::new(net_cfg, head, backbone, ext.n_bar)
        .map_err(|e| CliError::usage(format!("cannot build network: {e}")))?;
    let count = net.parameter_count();
    let mut adam = Adam::new(cfg.train.learning_rate, count);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9);

    let mut curve = Vec::with_capacity(cfg.train.epochs);
    for epoch in 0..cfg.train.epochs {
        let mut epoch_order = train_idx.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.split_seed ^ (epoch as u64 + 1));
        epoch_order.shuffle(&mut rng);

        let mut train_loss = 0.0;
        for &i in &epoch_order {
            let s = &samples[i];
            net.zero_grads();
            let cache = if cfg.net.dropout > 0.0 {
                net.forward_train(&s.input, Some(&mut dropout_rng))
            } else {
                net.forward_cached(&s.input)
            }
            .map_err(|e| CliError::Numeric(format!("forward failed: {e}")))?;
            let (loss, g) = masked_loss_logits_grad(kind, &cache.probs, &s.target, &s.mask)
                .map_err(|e| CliError::Numeric(format!("loss failed: {e}")))?;
            if !loss.is_finite() {
                return Err(CliError::Numeric(format!(
                    "training diverged at epoch {epoch}: non-finite loss"
                )));
            }
            net.backward(&cache, &g);
            adam.step(&mut net);
            train_loss += loss;
        }
        train_loss /= epoch_order.len() as f64;

        let mut val_loss = 0.0;
        let mut val_metric = 0.0;
        for &i in &val_idx {
            let s = &samples[i];
            let probs = net
                .forward(&s.input)
                .map_err(|e| CliError::Numeric(format!("validation forward failed: {e}")))?;
            let (loss, _) = masked_loss_logits_grad(kind, &probs, &s.target, &s.mask)
                .map_err(|e| CliError::Numeric(format!("validation loss failed: {e}")))?;
            val_loss += loss;
            val_metric += if role.is_offload_predictor() {
                accuracy(&probs, &s.target, &s.mask)
            } else {
                loss
            };
        }
        let denom = val_idx.len().max(1) as f64;
        val_loss /= denom;
        val_metric /= denom;
        if !val_loss.is_finite() {
            return Err(CliError::Numeric(format!(
                "training diverged at epoch {epoch}: non-finite validation loss"
            )));
        }
        curve.push(CurveRow {
            epoch,
            train_loss,
            val_loss,
            val_metric,
        });
    }

    let final_val_metric = curve.last().map(|r| r.val_metric).unwrap_or(0.0);
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            role,
            network: net,
            normalizer: normalizer.clone(),
            n_bar: ext.n_bar,
            epochs_trained: cfg.train.epochs,
            final_val_metric,
        },
        curve,
    })
}

pub fn write_curve(path: &Path, curve: &[CurveRow]) -> CliResult<()> {
    let mut out = String::from("epoch,train_loss,val_loss,val_metric\n");
    for r in curve {
        out.push_str(&format!(
            "{},{:.9},{:.9},{:.9}\n",
            r.epoch, r.train_loss, r.val_loss, r.val_metric
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::build_dataset;
    use tempfile::tempdir;

    fn tiny_config() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.count_per_n = 8;
        cfg.distribution.n_values = vec![4];
        cfg.ga.population_size = 12;
        cfg.ga.generations = 10;
        cfg.net.embed_dim = 8;
        cfg.net.encoder_layers = 1;
        cfg.net.head_count = 2;
        cfg.net.ffn_dim = 8;
        cfg.train.epochs = 2;
        cfg.extender.n_bar = 8;
        cfg.params.n_bar = Some(8);
        cfg.sac.k = 4;
        cfg
    }

    fn tiny_dataset(cfg: &RunConfig) -> Dataset {
        let dir = tempdir().unwrap();
        build_dataset(cfg, dir.path()).unwrap();
        crate::dataset::load_dataset(dir.path()).unwrap()
    }

    #[test]
    fn offload_training_runs_and_is_deterministic() {
        let cfg = tiny_config();
        let ds = tiny_dataset(&cfg);
        let a = train_network(&cfg, NetRole::Offload, &ds).unwrap();
        let b = train_network(&cfg, NetRole::Offload, &ds).unwrap();
        assert_eq!(a.curve.len(), 2);
        let last_a = a.curve.last().unwrap();
        let last_b = b.curve.last().unwrap();
        assert_eq!(last_a.val_loss, last_b.val_loss);
        assert_eq!(last_a.val_metric, last_b.val_metric);
    }

    #[test]
    fn resource_sample_uses_label_offload_vector() {
        // The teacher-forcing contract: the coupled input is a function
        // of the record's m alone. Flip a label bit and the input row
        // changes; the record's features never pass through any network.
        let cfg = tiny_config();
        let ds = tiny_dataset(&cfg);
        let params = cfg.system_params().unwrap();
        let record = ds
            .records
            .iter()
            .find(|r| r.m.iter().any(|&b| b != 0))
            .expect("dataset has at least one offloaded task");
        let s = prepare_resource_sample(record, &ds.manifest.normalizer, &cfg.extender, &params, 0)
            .unwrap()
            .unwrap();
        let row = record.m.iter().position(|&b| b != 0).unwrap();
        assert!(s.mask[row]);
        let mut flipped = record.clone();
        flipped.m[row] = 0;
        match prepare_resource_sample(&flipped, &ds.manifest.normalizer, &cfg.extender, &params, 0)
            .unwrap()
        {
            Some(s2) => {
                assert!(!s2.mask[row]);
                assert!((0..s2.input.cols).all(|j| s2.input.at(row, j) == 0.0));
            }
            // Flipping the only offloaded row empties the mask.
            None => assert_eq!(record.m.iter().filter(|&&b| b != 0).count(), 1),
        }
    }

    #[test]
    fn resource_training_runs() {
        let cfg = tiny_config();
        let ds = tiny_dataset(&cfg);
        let out = train_network(&cfg, NetRole::Resource, &ds).unwrap();
        assert!(out.checkpoint.final_val_metric.is_finite());
        assert_eq!(out.checkpoint.role, NetRole::Resource);
    }

    #[test]
    fn offload_targets_are_masked_to_real_rows() {
        let cfg = tiny_config();
        let ds = tiny_dataset(&cfg);
        let s = prepare_offload_sample(&ds.records[0], &ds.manifest.normalizer, &cfg.extender, 0)
            .unwrap();
        assert_eq!(s.mask.iter().filter(|&&m| m).count(), ds.records[0].n);
        for i in ds.records[0].n..cfg.extender.n_bar {
            assert!(!s.mask[i]);
            assert_eq!(s.input.at(i, 0), cfg.extender.pad_value);
        }
    }
}
