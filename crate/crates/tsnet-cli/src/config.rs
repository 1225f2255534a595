//! Run configuration: one JSON document covering system parameters,
//! the instance distribution, GA and network hyperparameters, the
//! extender/SAC settings, and training knobs. Every section may be
//! omitted and falls back to its default.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use tsnet_core::datagen::InstanceDistribution;
use tsnet_core::ga::GaConfig;
use tsnet_core::model::{dbm_per_hz_to_w, SystemParams};
use tsnet_core::neural::NetConfig;
use tsnet_core::scheduler::{ExtenderConfig, SacConfig};

use crate::error::{CliError, CliResult};

/// System parameters with every field optional; unset fields take the
/// library defaults. The noise density may be given either directly
/// (`n0_w_per_hz`) or in dBm/Hz (`n0_dbm_per_hz`), but not both.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemParamsConfig {
    pub f_loc: Option<f64>,
    pub k_loc: Option<f64>,
    pub k_ap: Option<f64>,
    pub p_ul_min: Option<f64>,
    pub p_ul_max: Option<f64>,
    pub p_dl_min: Option<f64>,
    pub p_dl_max: Option<f64>,
    pub f_ap_min: Option<f64>,
    pub f_ap_max: Option<f64>,
    pub f_total: Option<f64>,
    pub n0_w_per_hz: Option<f64>,
    pub n0_dbm_per_hz: Option<f64>,
    pub w_ul: Option<f64>,
    pub w_dl: Option<f64>,
    pub lambda: Option<f64>,
    pub n_bar: Option<usize>,
}

impl SystemParamsConfig {
    pub fn to_params(&self) -> CliResult<SystemParams> {
        let d = SystemParams::default();
        let n0 = match (self.n0_w_per_hz, self.n0_dbm_per_hz) {
            (Some(_), Some(_)) => {
                return Err(CliError::usage(
                    "set only one of n0_w_per_hz and n0_dbm_per_hz",
                ))
            }
            (Some(w), None) => w,
            (None, Some(dbm)) => dbm_per_hz_to_w(dbm),
            (None, None) => d.n0_w_per_hz,
        };
        let p = SystemParams {
            f_loc: self.f_loc.unwrap_or(d.f_loc),
            k_loc: self.k_loc.unwrap_or(d.k_loc),
            k_ap: self.k_ap.unwrap_or(d.k_ap),
            p_ul_min: self.p_ul_min.unwrap_or(d.p_ul_min),
            p_ul_max: self.p_ul_max.unwrap_or(d.p_ul_max),
            p_dl_min: self.p_dl_min.unwrap_or(d.p_dl_min),
            p_dl_max: self.p_dl_max.unwrap_or(d.p_dl_max),
            f_ap_min: self.f_ap_min.unwrap_or(d.f_ap_min),
            f_ap_max: self.f_ap_max.unwrap_or(d.f_ap_max),
            f_total: self.f_total.unwrap_or(d.f_total),
            n0_w_per_hz: n0,
            w_ul: self.w_ul.unwrap_or(d.w_ul),
            w_dl: self.w_dl.unwrap_or(d.w_dl),
            lambda: self.lambda.unwrap_or(d.lambda),
            n_bar: self.n_bar.unwrap_or(d.n_bar),
        };
        p.validate()
            .map_err(|e| CliError::usage(format!("invalid system parameters: {e}")))?;
        Ok(p)
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Fraction of records held out for validation.
    pub val_fraction: f64,
    /// Shuffle seed for the train/validation split.
    pub split_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            learning_rate: 1e-3,
            val_fraction: 0.2,
            split_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub data: Option<String>,
    pub checkpoints: Option<String>,
    pub reports: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub params: SystemParamsConfig,
    pub distribution: InstanceDistribution,
    pub ga: GaConfig,
    pub net: NetConfig,
    pub extender: ExtenderConfig,
    pub sac: SacConfig,
    pub train: TrainConfig,
    pub paths: Paths,
    /// Labeled instances generated per entry of `distribution.n_values`.
    pub count_per_n: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: SystemParamsConfig::default(),
            distribution: InstanceDistribution::default(),
            ga: GaConfig::default(),
            net: NetConfig::default(),
            extender: ExtenderConfig::default(),
            sac: SacConfig::default(),
            train: TrainConfig::default(),
            paths: Paths::default(),
            count_per_n: 10,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("malformed config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Cross-field checks the individual sections cannot see.
    pub fn validate(&self) -> CliResult<()> {
        let params = self.params.to_params()?;
        self.distribution
            .validate()
            .map_err(|e| CliError::usage(format!("invalid distribution: {e}")))?;
        self.ga
            .validate()
            .map_err(|e| CliError::usage(format!("invalid ga config: {e}")))?;
        self.net
            .validate()
            .map_err(|e| CliError::usage(format!("invalid net config: {e}")))?;
        self.sac
            .validate(self.extender.n_bar)
            .map_err(|e| CliError::usage(format!("invalid sac config: {e}")))?;
        if self.extender.n_bar != params.n_bar {
            return Err(CliError::usage(format!(
                "extender n_bar {} must equal params n_bar {}",
                self.extender.n_bar, params.n_bar
            )));
        }
        for &n in &self.distribution.n_values {
            if n == 0 || n > params.n_bar {
                return Err(CliError::usage(format!(
                    "n_values entry {n} outside [1, n_bar = {}]",
                    params.n_bar
                )));
            }
        }
        if !(0.0..1.0).contains(&self.train.val_fraction) {
            return Err(CliError::usage("val_fraction must lie in [0, 1)"));
        }
        if self.train.epochs == 0 || self.train.learning_rate <= 0.0 {
            return Err(CliError::usage(
                "training needs epochs >= 1 and a positive learning rate",
            ));
        }
        Ok(())
    }

    pub fn system_params(&self) -> CliResult<SystemParams> {
        self.params.to_params()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg: RunConfig = serde_json::from_str("{}").unwrap();
        cfg.validate().unwrap();
        let p = cfg.system_params().unwrap();
        assert_eq!(p.n_bar, 40);
        assert_eq!(cfg.count_per_n, 10);
    }

    #[test]
    fn dbm_noise_round_trips() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"params": {"n0_dbm_per_hz": -173.0}}"#).unwrap();
        let p = cfg.system_params().unwrap();
        let expected = 10f64.powf(-17.3) * 1e-3;
        assert!((p.n0_w_per_hz - expected).abs() < 1e-30);
    }

    #[test]
    fn double_noise_spec_is_rejected() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"params": {"n0_dbm_per_hz": -173.0, "n0_w_per_hz": 5e-21}}"#,
        )
        .unwrap();
        assert!(matches!(cfg.system_params(), Err(CliError::Usage(_))));
    }

    #[test]
    fn oversized_n_value_is_a_named_validation_error() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"distribution": {"u_range": [1e5, 1e6], "c_range": [1e8, 2e9], "d_range": [1e5, 2e8], "h_log10_range": [-10.0, -7.0], "n_values": [41], "seed": 0}}"#)
                .unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("n_bar"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unknown_field_is_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
