//! Checkpoints: a trained network plus the normalizer it was trained
//! with and enough metadata to rebuild the inference pipeline.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use tsnet_core::datagen::Normalizer;
use tsnet_core::neural::Network;

use crate::error::{CliError, CliResult};

/// Which trainable model a checkpoint holds. `Mlp` and `Mixer` are
/// offload predictors with alternative backbones, used as ablation
/// baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetRole {
    Offload,
    Resource,
    Mlp,
    Mixer,
}

impl NetRole {
    pub fn parse(s: &str) -> CliResult<Self> {
        match s {
            "offload" => Ok(NetRole::Offload),
            "resource" => Ok(NetRole::Resource),
            "mlp" => Ok(NetRole::Mlp),
            "mixer" => Ok(NetRole::Mixer),
            other => Err(CliError::usage(format!(
                "unknown net '{other}'; valid: offload, resource, mlp, mixer"
            ))),
        }
    }

    pub fn is_offload_predictor(self) -> bool {
        !matches!(self, NetRole::Resource)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub role: NetRole,
    pub network: Network,
    pub normalizer: Normalizer,
    pub n_bar: usize,
    pub epochs_trained: usize,
    /// Validation accuracy (offload predictors) or MSE (resource).
    pub final_val_metric: f64,
}

pub fn save(path: &Path, ckpt: &Checkpoint) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let text = serde_json::to_string(ckpt)
        .map_err(|e| CliError::Numeric(format!("cannot serialize checkpoint: {e}")))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn load(path: &Path) -> CliResult<Checkpoint> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("missing checkpoint {}: {e}", path.display())))?;
    let mut ckpt: Checkpoint = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("malformed checkpoint {}: {e}", path.display())))?;
    // Gradient buffers are not persisted.
    ckpt.network.ensure_grads();
    ckpt.normalizer
        .validate()
        .map_err(|e| CliError::usage(format!("checkpoint normalizer invalid: {e}")))?;
    Ok(ckpt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;
    use tsnet_core::neural::{BackboneKind, HeadKind, Mat, NetConfig, INPUT_FEATURES};

    #[test]
    fn save_load_preserves_forward_outputs() {
        let cfg = NetConfig {
            embed_dim: 8,
            encoder_layers: 1,
            head_count: 2,
            ffn_dim: 8,
            seed: 3,
            ..NetConfig::default()
        };
        let net = Network::new(cfg, HeadKind::Offload, BackboneKind::Transformer, 6).unwrap();
        let x = Mat::from_fn(6, INPUT_FEATURES, |i, j| 0.1 * (i + j) as f64);
        let before = net.forward(&x).unwrap();
        let ckpt = Checkpoint {
            role: NetRole::Offload,
            network: net,
            normalizer: Normalizer {
                min: [0.0; 4],
                max: [1.0; 4],
            },
            n_bar: 6,
            epochs_trained: 0,
            final_val_metric: 0.0,
        };
        let dir = tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        save(&path, &ckpt).unwrap();
        let loaded = load(&path).unwrap();
        let after = loaded.network.forward(&x).unwrap();
        assert_eq!(before, after);
        assert_eq!(loaded.role, NetRole::Offload);
    }

    #[test]
    fn missing_checkpoint_is_a_usage_error() {
        let err = load(Path::new("/nonexistent/ckpt.json")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
