//! Method evaluation over a labeled dataset: per-method utility, gaps
//! against the labels and the exact oracle, offload accuracy, resource
//! MSE, decision latency, and the plot-data files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use tsnet_core::ga::{batch_seed, ga_solve};
use tsnet_core::model::{check_constraints, evaluate, Instance, Schedule, SystemParams};
use tsnet_core::oracle::{enumerate_optimal_utility, OracleConfig, ENUMERATION_LIMIT};
use tsnet_core::scheduler::{
    all_offload_schedule, tsnet_sac_schedule, SacConfig,
};

use crate::checkpoint::{Checkpoint, NetRole};
use crate::config::RunConfig;
use crate::dataset::Dataset;
use crate::error::{CliError, CliResult};
use crate::training::prepare_resource_sample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    AllLocal,
    AllOffload,
    Ga,
    Tsnet,
    TsnetSac,
    Mlp,
    Mixer,
}

pub const ALL_METHODS: [Method; 7] = [
    Method::AllLocal,
    Method::AllOffload,
    Method::Ga,
    Method::Tsnet,
    Method::TsnetSac,
    Method::Mlp,
    Method::Mixer,
];

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::AllLocal => "all-local",
            Method::AllOffload => "all-offload",
            Method::Ga => "ga",
            Method::Tsnet => "tsnet",
            Method::TsnetSac => "tsnet-sac",
            Method::Mlp => "mlp",
            Method::Mixer => "mixer",
        }
    }

    pub fn parse(s: &str) -> CliResult<Self> {
        ALL_METHODS
            .iter()
            .find(|m| m.name() == s)
            .copied()
            .ok_or_else(|| {
                let valid: Vec<&str> = ALL_METHODS.iter().map(|m| m.name()).collect();
                CliError::usage(format!(
                    "unknown method '{s}'; valid: {}",
                    valid.join(", ")
                ))
            })
    }
}

/// Checkpoints grouped by role.
#[derive(Default)]
pub struct CheckpointSet {
    pub offload: Option<Checkpoint>,
    pub resource: Option<Checkpoint>,
    pub mlp: Option<Checkpoint>,
    pub mixer: Option<Checkpoint>,
}

impl CheckpointSet {
    pub fn load(paths: &[impl AsRef<Path>]) -> CliResult<Self> {
        let mut set = CheckpointSet::default();
        for p in paths {
            let ckpt = crate::checkpoint::load(p.as_ref())?;
            let slot = match ckpt.role {
                NetRole::Offload => &mut set.offload,
                NetRole::Resource => &mut set.resource,
                NetRole::Mlp => &mut set.mlp,
                NetRole::Mixer => &mut set.mixer,
            };
            *slot = Some(ckpt);
        }
        Ok(set)
    }

    fn offload_predictor(&self, method: Method) -> CliResult<&Checkpoint> {
        let (slot, name) = match method {
            Method::Mlp => (&self.mlp, "mlp"),
            Method::Mixer => (&self.mixer, "mixer"),
            _ => (&self.offload, "offload"),
        };
        slot.as_ref().ok_or_else(|| {
            CliError::usage(format!(
                "method {} needs a '{name}' checkpoint",
                method.name()
            ))
        })
    }

    fn resource_net(&self) -> CliResult<&Checkpoint> {
        self.resource
            .as_ref()
            .ok_or_else(|| CliError::usage("learned methods need a 'resource' checkpoint"))
    }
}

/// Outcome of one method on one instance.
pub struct Decision {
    pub schedule: Schedule,
    pub utility: f64,
    pub latency_ms: f64,
    pub fallback: bool,
}

/// Runs `method` on one instance. `record_index` seeds the GA so that
/// evaluation reproduces generation-time labels.
pub fn run_method(
    method: Method,
    instance: &Instance,
    params: &SystemParams,
    cfg: &RunConfig,
    ckpts: &CheckpointSet,
    record_index: usize,
    sac_override: Option<&SacConfig>,
) -> CliResult<Decision> {
    let start = Instant::now();
    let (schedule, fallback) = match method {
        Method::AllLocal => (Schedule::all_local(instance.len()), false),
        Method::AllOffload => (
            all_offload_schedule(instance, params)
                .map_err(|e| CliError::Numeric(format!("all-offload clip failed: {e}")))?,
            false,
        ),
        Method::Ga => {
            let ga_cfg = tsnet_core::ga::GaConfig {
                seed: batch_seed(cfg.ga.seed, record_index),
                ..cfg.ga.clone()
            };
            let label = ga_solve(instance, params, &ga_cfg, &OracleConfig::default())
                .map_err(|e| CliError::Numeric(format!("ga failed: {e}")))?;
            (label.schedule, false)
        }
        Method::Tsnet | Method::TsnetSac | Method::Mlp | Method::Mixer => {
            let off = ckpts.offload_predictor(method)?;
            let res = ckpts.resource_net()?;
            let sac = match (method, sac_override) {
                (_, Some(s)) => s.clone(),
                // Plain TSNet and the backbone ablations use a single
                // candidate; only tsnet-sac slides.
                (Method::TsnetSac, None) => cfg.sac.clone(),
                _ => SacConfig {
                    k: 1,
                    ..cfg.sac.clone()
                },
            };
            let out = tsnet_sac_schedule(
                &off.network,
                &res.network,
                instance,
                params,
                &off.normalizer,
                &sac,
                &cfg.extender,
                record_index as u64,
            )
            .map_err(|e| CliError::Numeric(format!("pipeline failed: {e}")))?;
            (out.schedule, out.fallback)
        }
    };
    let latency_ms = start.elapsed().as_secs_f64() * 1e3;
    let report = evaluate(instance, &schedule, params)
        .map_err(|e| CliError::Numeric(format!("evaluation failed: {e}")))?;
    Ok(Decision {
        schedule,
        utility: report.utility,
        latency_ms,
        fallback,
    })
}

#[derive(Debug, Clone)]
pub struct MethodRow {
    pub method: &'static str,
    pub mean_utility: f64,
    /// Mean of `U_method / U_label - 1`.
    pub mean_gap_vs_label: f64,
    /// Mean of `U_method / U_oracle - 1` over records with
    /// `n <= ENUMERATION_LIMIT`; `None` when no record qualifies.
    pub mean_gap_vs_oracle: Option<f64>,
    /// Fraction of per-task offload bits matching the labels.
    pub offload_accuracy: f64,
    /// Teacher-forced resource MSE; learned methods only.
    pub resource_mse: Option<f64>,
    pub mean_latency_ms: f64,
    pub infeasible: usize,
    pub fallbacks: usize,
}

pub struct EvalOutput {
    pub rows: Vec<MethodRow>,
    /// `(n, method name, mean utility, offload accuracy)` per size.
    pub per_n: Vec<(usize, &'static str, f64, f64)>,
    /// Per-record utilities per method, dataset order.
    pub utilities: BTreeMap<&'static str, Vec<f64>>,
}

/// Evaluates every requested method over the whole dataset.
pub fn evaluate_methods(
    cfg: &RunConfig,
    dataset: &Dataset,
    ckpts: &CheckpointSet,
    methods: &[Method],
) -> CliResult<EvalOutput> {
    let params = cfg.system_params()?;
    if methods.is_empty() {
        return Err(CliError::usage("no methods requested"));
    }
    if dataset.records.is_empty() {
        return Err(CliError::usage("dataset is empty"));
    }

    // Oracle utilities for the gap column, shared across methods.
    let oracle_utilities: Vec<Option<f64>> = dataset
        .records
        .iter()
        .map(|r| {
            if r.n <= ENUMERATION_LIMIT {
                let inst = r.instance()?;
                enumerate_optimal_utility(&inst, &params, &OracleConfig::default())
                    .map(Some)
                    .map_err(|e| CliError::Numeric(format!("oracle failed: {e}")))
            } else {
                Ok(None)
            }
        })
        .collect::<CliResult<_>>()?;

    let mut rows = Vec::new();
    let mut per_n = Vec::new();
    let mut utilities: BTreeMap<&'static str, Vec<f64>> = BTreeMap::new();

    for &method in methods {
        let mut sum_u = 0.0;
        let mut sum_gap_label = 0.0;
        let mut oracle_gaps = Vec::new();
        let mut bit_hits = 0usize;
        let mut bit_total = 0usize;
        let mut latency = 0.0;
        let mut infeasible = 0usize;
        let mut fallbacks = 0usize;
        let mut by_n: BTreeMap<usize, (f64, usize, usize, usize)> = BTreeMap::new();
        let mut per_record = Vec::with_capacity(dataset.records.len());

        for (idx, record) in dataset.records.iter().enumerate() {
            let instance = record.instance()?;
            let d = run_method(method, &instance, &params, cfg, ckpts, idx, None)?;
            let feas = check_constraints(&d.schedule, &params);
            if !feas.feasible {
                infeasible += 1;
            }
            if d.fallback {
                fallbacks += 1;
            }
            sum_u += d.utility;
            per_record.push(d.utility);
            sum_gap_label += d.utility / record.utility - 1.0;
            if let Some(o) = oracle_utilities[idx] {
                oracle_gaps.push(d.utility / o - 1.0);
            }
            let mut hits = 0usize;
            for (bit, &label) in d.schedule.offload.iter().zip(&record.m) {
                if u8::from(*bit) == label {
                    hits += 1;
                }
            }
            bit_hits += hits;
            bit_total += record.n;
            latency += d.latency_ms;
            let slot = by_n.entry(record.n).or_insert((0.0, 0, 0, 0));
            slot.0 += d.utility;
            slot.1 += 1;
            slot.2 += hits;
            slot.3 += record.n;
        }

        let count = dataset.records.len() as f64;
        let resource_mse = match method {
            Method::Tsnet | Method::TsnetSac | Method::Mlp | Method::Mixer => Some(
                teacher_forced_mse(cfg, dataset, ckpts.resource_net()?, &params)?,
            ),
            _ => None,
        };
        rows.push(MethodRow {
            method: method.name(),
            mean_utility: sum_u / count,
            mean_gap_vs_label: sum_gap_label / count,
            mean_gap_vs_oracle: if oracle_gaps.is_empty() {
                None
            } else {
                Some(oracle_gaps.iter().sum::<f64>() / oracle_gaps.len() as f64)
            },
            offload_accuracy: bit_hits as f64 / bit_total as f64,
            resource_mse,
            mean_latency_ms: latency / count,
            infeasible,
            fallbacks,
        });
        for (n, (u, c, hits, bits)) in by_n {
            per_n.push((n, method.name(), u / c as f64, hits as f64 / bits as f64));
        }
        utilities.insert(method.name(), per_record);
    }

    Ok(EvalOutput {
        rows,
        per_n,
        utilities,
    })
}

/// Held-out-style MSE of the resource net under teacher forcing,
/// averaged over records that offload at least one task.
fn teacher_forced_mse(
    cfg: &RunConfig,
    dataset: &Dataset,
    resource: &Checkpoint,
    params: &SystemParams,
) -> CliResult<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for (idx, record) in dataset.records.iter().enumerate() {
        let Some(sample) = prepare_resource_sample(
            record,
            &resource.normalizer,
            &cfg.extender,
            params,
            idx as u64,
        )?
        else {
            continue;
        };
        let probs = resource
            .network
            .forward(&sample.input)
            .map_err(|e| CliError::Numeric(format!("resource forward failed: {e}")))?;
        let mut se = 0.0;
        let mut cells = 0usize;
        for i in 0..probs.rows {
            if !sample.mask[i] {
                continue;
            }
            for j in 0..probs.cols {
                let d = probs.at(i, j) - sample.target.at(i, j);
                se += d * d;
                cells += 1;
            }
        }
        if cells > 0 {
            total += se / cells as f64;
            count += 1;
        }
    }
    if count == 0 {
        return Err(CliError::usage(
            "resource MSE undefined: no record offloads any task",
        ));
    }
    Ok(total / count as f64)
}

pub const REPORT_HEADER: &str = "method,mean_utility,mean_gap_vs_label,mean_gap_vs_oracle,offload_accuracy,resource_mse,mean_latency_ms,infeasible,fallbacks";

pub fn write_report_csv(path: &Path, rows: &[MethodRow]) -> CliResult<()> {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in rows {
        let oracle = r
            .mean_gap_vs_oracle
            .map(|g| format!("{g:.9}"))
            .unwrap_or_default();
        let mse = r
            .resource_mse
            .map(|m| format!("{m:.9}"))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{:.9},{:.9},{},{:.9},{},{:.6},{},{}\n",
            r.method,
            r.mean_utility,
            r.mean_gap_vs_label,
            oracle,
            r.offload_accuracy,
            mse,
            r.mean_latency_ms,
            r.infeasible,
            r.fallbacks
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Plot data: mean utility and accuracy per instance size, one row per
/// (n, method); columns `n method utility accuracy` with `#` header.
pub fn write_per_n_plots(dir: &Path, output: &EvalOutput) -> CliResult<()> {
    let mut utility = String::from("# n method mean_utility\n");
    let mut accuracy = String::from("# n method offload_accuracy\n");
    for &(n, method, u, a) in &output.per_n {
        utility.push_str(&format!("{n} {method} {u:.9}\n"));
        accuracy.push_str(&format!("{n} {method} {a:.9}\n"));
    }
    fs::write(dir.join("utility_vs_n.txt"), utility)?;
    fs::write(dir.join("accuracy_vs_n.txt"), accuracy)?;
    Ok(())
}

/// Mean utility of the SAC pipeline as a function of the candidate
/// count; written as `k mean_utility` rows.
pub fn write_sac_gain_sweep(
    path: &Path,
    cfg: &RunConfig,
    dataset: &Dataset,
    ckpts: &CheckpointSet,
    k_values: &[usize],
) -> CliResult<Vec<(usize, f64)>> {
    let params = cfg.system_params()?;
    let mut rows = Vec::new();
    for &k in k_values {
        if k == 0 || k > cfg.extender.n_bar {
            continue;
        }
        let sac = SacConfig {
            k,
            ..cfg.sac.clone()
        };
        let mut sum = 0.0;
        for (idx, record) in dataset.records.iter().enumerate() {
            let instance = record.instance()?;
            let d = run_method(
                Method::TsnetSac,
                &instance,
                &params,
                cfg,
                ckpts,
                idx,
                Some(&sac),
            )?;
            sum += d.utility;
        }
        rows.push((k, sum / dataset.records.len() as f64));
    }
    let mut text = String::from("# k mean_utility\n");
    for &(k, u) in &rows {
        text.push_str(&format!("{k} {u:.9}\n"));
    }
    fs::write(path, text)?;
    Ok(rows)
}

/// Mean utility and accuracy of the single-candidate pipeline across
/// offload thresholds; written as `sigma mean_utility accuracy` rows.
pub fn write_threshold_sweep(
    path: &Path,
    cfg: &RunConfig,
    dataset: &Dataset,
    ckpts: &CheckpointSet,
    sigmas: &[f64],
) -> CliResult<()> {
    let params = cfg.system_params()?;
    let mut text = String::from("# sigma mean_utility offload_accuracy\n");
    for &sigma in sigmas {
        let sac = SacConfig {
            k: 1,
            sigma,
            ..cfg.sac.clone()
        };
        let mut sum = 0.0;
        let mut hits = 0usize;
        let mut bits = 0usize;
        for (idx, record) in dataset.records.iter().enumerate() {
            let instance = record.instance()?;
            let d = run_method(
                Method::Tsnet,
                &instance,
                &params,
                cfg,
                ckpts,
                idx,
                Some(&sac),
            )?;
            sum += d.utility;
            for (bit, &label) in d.schedule.offload.iter().zip(&record.m) {
                if u8::from(*bit) == label {
                    hits += 1;
                }
            }
            bits += record.n;
        }
        text.push_str(&format!(
            "{sigma:.3} {:.9} {:.9}\n",
            sum / dataset.records.len() as f64,
            hits as f64 / bits as f64
        ));
    }
    fs::write(path, text)?;
    Ok(())
}
