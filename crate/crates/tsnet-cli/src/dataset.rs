//! Dataset persistence: JSON-lines records plus a manifest carrying
//! full provenance (config echo, normalizer bounds, counts, failures).

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use tsnet_core::datagen::{sample_instance, Normalizer};
use tsnet_core::ga::{batch_seed, ga_solve};
use tsnet_core::model::{Instance, Schedule, TaskInfo};
use tsnet_core::oracle::OracleConfig;
use tsnet_core::Error;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const DATA_FILE: &str = "data.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

/// One labeled instance as persisted, one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    /// `[u, c, d, h]` per task.
    pub tasks: Vec<[f64; 4]>,
    /// Offload labels, 0/1.
    pub m: Vec<u8>,
    pub p_ul: Vec<f64>,
    pub p_dl: Vec<f64>,
    pub f_ap: Vec<f64>,
    pub utility: f64,
    pub n: usize,
    pub solver: String,
}

impl DatasetRecord {
    pub fn from_label(instance: &Instance, schedule: &Schedule, utility: f64, solver: &str) -> Self {
        Self {
            tasks: instance.tasks.iter().map(TaskInfo::features).collect(),
            m: schedule.offload.iter().map(|&b| u8::from(b)).collect(),
            p_ul: schedule.p_ul.clone(),
            p_dl: schedule.p_dl.clone(),
            f_ap: schedule.f_ap.clone(),
            utility,
            n: instance.len(),
            solver: solver.to_string(),
        }
    }

    pub fn instance(&self) -> CliResult<Instance> {
        let tasks = self
            .tasks
            .iter()
            .map(|&[u, c, d, h]| TaskInfo::symmetric(u, c, d, h))
            .collect();
        Instance::new(tasks).map_err(|e| CliError::usage(format!("bad record: {e}")))
    }

    pub fn schedule(&self) -> Schedule {
        Schedule {
            offload: self.m.iter().map(|&b| b != 0).collect(),
            p_ul: self.p_ul.clone(),
            p_dl: self.p_dl.clone(),
            f_ap: self.f_ap.clone(),
        }
    }

    fn shape_ok(&self) -> bool {
        self.n == self.tasks.len()
            && [self.m.len(), self.p_ul.len(), self.p_dl.len(), self.f_ap.len()]
                .iter()
                .all(|&l| l == self.n)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config: RunConfig,
    pub normalizer: Normalizer,
    /// `(n, requested, produced)` per entry of `n_values`.
    pub counts: Vec<(usize, usize, usize)>,
    pub ga_failures: usize,
    pub mean_label_utility: f64,
    /// Wall-clock creation time; the only run-dependent field.
    pub created_unix: u64,
}

pub struct BuildSummary {
    pub records: usize,
    pub ga_failures: usize,
    pub mean_label_utility: f64,
}

/// Samples, labels (GA), and persists the dataset for `cfg` into
/// `out_dir`. Labeling runs in parallel; record order and content are
/// independent of the worker count.
pub fn build_dataset(cfg: &RunConfig, out_dir: &Path) -> CliResult<BuildSummary> {
    cfg.validate()?;
    let params = cfg.system_params()?;
    let oracle_cfg = OracleConfig::default();
    fs::create_dir_all(out_dir)?;

    let jobs: Vec<(usize, usize)> = cfg
        .distribution
        .n_values
        .iter()
        .flat_map(|&n| (0..cfg.count_per_n).map(move |i| (n, i)))
        .enumerate()
        .map(|(global, (n, _))| (n, global))
        .collect();

    let results: Vec<Result<DatasetRecord, Error>> = jobs
        .par_iter()
        .map(|&(n, global)| {
            let instance = sample_instance(
                &cfg.distribution,
                n,
                batch_seed(cfg.distribution.seed, global),
                &params,
            )?;
            let ga_cfg = tsnet_core::ga::GaConfig {
                seed: batch_seed(cfg.ga.seed, global),
                ..cfg.ga.clone()
            };
            let label = ga_solve(&instance, &params, &ga_cfg, &oracle_cfg)?;
            Ok(DatasetRecord::from_label(
                &label.instance,
                &label.schedule,
                label.utility,
                &label.solver_tag,
            ))
        })
        .collect();

    let mut records = Vec::new();
    let mut ga_failures = 0usize;
    let mut produced_per_n: Vec<(usize, usize, usize)> = cfg
        .distribution
        .n_values
        .iter()
        .map(|&n| (n, cfg.count_per_n, 0))
        .collect();
    for (res, &(n, _)) in results.into_iter().zip(&jobs) {
        match res {
            Ok(r) => {
                for slot in produced_per_n.iter_mut() {
                    if slot.0 == n {
                        slot.2 += 1;
                    }
                }
                records.push(r);
            }
            Err(e) => {
                eprintln!("warning: ga labeling failed for one n = {n} instance: {e}");
                ga_failures += 1;
            }
        }
    }

    let feature_rows: Vec<[f64; 4]> = records.iter().flat_map(|r| r.tasks.clone()).collect();
    let normalizer = if feature_rows.is_empty() {
        // Empty dataset: fall back to the distribution's nominal bounds
        // so the manifest stays well formed.
        Normalizer {
            min: [
                cfg.distribution.u_range.0,
                cfg.distribution.c_range.0,
                cfg.distribution.d_range.0,
                10f64.powf(cfg.distribution.h_log10_range.0),
            ],
            max: [
                cfg.distribution.u_range.1,
                cfg.distribution.c_range.1,
                cfg.distribution.d_range.1,
                10f64.powf(cfg.distribution.h_log10_range.1),
            ],
        }
    } else {
        Normalizer::fit(feature_rows.iter())
            .map_err(|e| CliError::Numeric(format!("normalizer fit failed: {e}")))?
    };

    let mean_label_utility = if records.is_empty() {
        0.0
    } else {
        records.iter().map(|r| r.utility).sum::<f64>() / records.len() as f64
    };

    write_records(&out_dir.join(DATA_FILE), &records)?;
    let manifest = Manifest {
        config: cfg.clone(),
        normalizer,
        counts: produced_per_n,
        ga_failures,
        mean_label_utility,
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    write_manifest(&out_dir.join(MANIFEST_FILE), &manifest)?;

    Ok(BuildSummary {
        records: records.len(),
        ga_failures,
        mean_label_utility,
    })
}

pub fn write_records(path: &Path, records: &[DatasetRecord]) -> CliResult<()> {
    let mut file = fs::File::create(path)?;
    for r in records {
        let line = serde_json::to_string(r)
            .map_err(|e| CliError::Numeric(format!("cannot serialize record: {e}")))?;
        writeln!(file, "{line}")?;
    }
    Ok(())
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> CliResult<()> {
    let text = serde_json::to_string_pretty(manifest)
        .map_err(|e| CliError::Numeric(format!("cannot serialize manifest: {e}")))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> CliResult<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("malformed manifest {}: {e}", path.display())))
}

pub fn read_records(dir: &Path) -> CliResult<Vec<DatasetRecord>> {
    let path = dir.join(DATA_FILE);
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: DatasetRecord = serde_json::from_str(line).map_err(|e| {
            CliError::usage(format!("malformed record on line {}: {e}", i + 1))
        })?;
        if !r.shape_ok() {
            return Err(CliError::usage(format!(
                "record on line {} has inconsistent lengths",
                i + 1
            )));
        }
        records.push(r);
    }
    Ok(records)
}

/// Dataset directory with everything needed for training/evaluation.
pub struct Dataset {
    pub records: Vec<DatasetRecord>,
    pub manifest: Manifest,
}

pub fn load_dataset(dir: &Path) -> CliResult<Dataset> {
    Ok(Dataset {
        records: read_records(dir)?,
        manifest: read_manifest(dir)?,
    })
}

/// Instance input for `solve`: the record shape, tasks only.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceInput {
    pub tasks: Vec<[f64; 4]>,
}

pub fn read_instance(path: &Path) -> CliResult<Instance> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let input: InstanceInput = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("malformed instance {}: {e}", path.display())))?;
    let tasks = input
        .tasks
        .iter()
        .map(|&[u, c, d, h]| TaskInfo::symmetric(u, c, d, h))
        .collect();
    Instance::new(tasks).map_err(|e| CliError::usage(format!("invalid instance: {e}")))
}
