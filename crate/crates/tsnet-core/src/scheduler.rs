//! Inference pipeline assembling the two sub-networks into a scheduler.
//!
//! Instances are normalized, padded to the maximum access count with an
//! outlier token, and run through the offload network under `k`
//! circular shifts of the padded rows. Each shift yields one candidate:
//! predicted offload bits are shifted back and thresholded, features
//! are masked by the predicted bits and fed to the resource network,
//! the resulting allocation is clipped into the constraint set, and the
//! candidate with the lowest exact utility wins.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::datagen::Normalizer;
use crate::error::{Error, Result};
use crate::model::{
    clip_to_constraints, evaluate, CostReport, Instance, Schedule, SystemParams,
};
use crate::neural::{Mat, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum PadMode {
    /// Fill with a constant outlier (default -1, outside the
    /// normalized feature range).
    Outlier,
    Zero,
    /// Uniform values in `[0, 1)`, indistinguishable from real
    /// normalized features.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExtenderConfig {
    /// Padded sequence length; every instance must fit.
    pub n_bar: usize,
    pub pad_value: f64,
    pub pad_mode: PadMode,
}

impl Default for ExtenderConfig {
    fn default() -> Self {
        Self {
            n_bar: 40,
            pad_value: -1.0,
            pad_mode: PadMode::Outlier,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SacConfig {
    /// Candidate count (shift offsets per instance).
    pub k: usize,
    /// Offload decision threshold on predicted probabilities.
    pub sigma: f64,
    /// Use the first `k` unit shifts instead of `k` evenly spaced
    /// offsets over the padded length.
    #[cfg_attr(feature = "serde", serde(default))]
    pub unit_shifts: bool,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            k: 20,
            sigma: 0.3,
            unit_shifts: false,
        }
    }
}

impl SacConfig {
    pub fn validate(&self, n_bar: usize) -> Result<()> {
        if self.k == 0 || self.k > n_bar || !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::InvalidArgument(String::from(
                "SAC requires 1 <= k <= n_bar and sigma in (0, 1)",
            )));
        }
        Ok(())
    }
}

/// One SAC candidate with its exact evaluation.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub schedule: Schedule,
    pub report: CostReport,
    pub shift_index: usize,
}

/// Normalized features of an instance, one row per task.
pub fn normalized_features(instance: &Instance, normalizer: &Normalizer) -> Mat {
    let rows: Vec<Vec<f64>> = instance
        .tasks
        .iter()
        .map(|t| normalizer.apply(&t.features()).to_vec())
        .collect();
    Mat::from_rows(&rows)
}

/// Pads an `n × 4` feature matrix to `n_bar` rows. The mask is true on
/// real rows. Random-mode fill is deterministic per seed.
pub fn pad(features: &Mat, cfg: &ExtenderConfig, seed: u64) -> Result<(Mat, Vec<bool>)> {
    let n = features.rows;
    if n > cfg.n_bar {
        return Err(Error::InvalidArgument(alloc::format!(
            "instance length {n} exceeds padded length {}",
            cfg.n_bar
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let padded = Mat::from_fn(cfg.n_bar, features.cols, |i, j| {
        if i < n {
            features.at(i, j)
        } else {
            match cfg.pad_mode {
                PadMode::Outlier => cfg.pad_value,
                PadMode::Zero => 0.0,
                PadMode::Random => rng.gen_range(0.0..1.0),
            }
        }
    });
    let mask: Vec<bool> = (0..cfg.n_bar).map(|i| i < n).collect();
    Ok((padded, mask))
}

/// Keeps exactly the rows the mask marks as real, in original order.
pub fn unpad_rows(output: &Mat, mask: &[bool]) -> Result<Mat> {
    if output.rows != mask.len() {
        return Err(Error::LengthMismatch {
            expected: mask.len(),
            got: output.rows,
        });
    }
    let rows: Vec<Vec<f64>> = (0..output.rows)
        .filter(|&i| mask[i])
        .map(|i| output.row(i).to_vec())
        .collect();
    Ok(Mat::from_rows(&rows))
}

/// Sequence version of [`unpad_rows`].
pub fn unpad_seq<T: Clone>(seq: &[T], mask: &[bool]) -> Result<Vec<T>> {
    if seq.len() != mask.len() {
        return Err(Error::LengthMismatch {
            expected: mask.len(),
            got: seq.len(),
        });
    }
    Ok(seq
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(v, _)| v.clone())
        .collect())
}

/// Rotates rows right by `j` (pad rows rotate together with real rows).
pub fn shift_rows(features: &Mat, j: usize) -> Result<Mat> {
    if j >= features.rows.max(1) {
        return Err(Error::InvalidArgument(alloc::format!(
            "shift {j} out of range for {} rows",
            features.rows
        )));
    }
    let n = features.rows;
    Ok(Mat::from_fn(n, features.cols, |i, c| {
        features.at((i + n - j) % n, c)
    }))
}

/// Rotates a sequence left by `j`; exact inverse of [`shift_rows`] on
/// row indices.
pub fn inverse_shift_seq<T: Clone>(seq: &[T], j: usize) -> Result<Vec<T>> {
    let n = seq.len();
    if j >= n.max(1) {
        return Err(Error::InvalidArgument(alloc::format!(
            "shift {j} out of range for {n} elements"
        )));
    }
    Ok((0..n).map(|i| seq[(i + j) % n].clone()).collect())
}

/// The `k` shift offsets: evenly spaced over `[0, n_bar)` by default,
/// or the unit shifts `0..k`. Offset sets for divisors of `k` nest, so
/// enlarging `k` can only improve the selected candidate.
pub fn shift_offsets(k: usize, n_bar: usize, unit_shifts: bool) -> Vec<usize> {
    if unit_shifts {
        (0..k).collect()
    } else {
        (0..k).map(|i| i * n_bar / k).collect()
    }
}

/// Thresholds offload probabilities at real positions; pad positions
/// are always local.
pub fn predict_offload(
    net: &Network,
    features: &Mat,
    mask: &[bool],
    sigma: f64,
) -> Result<Vec<bool>> {
    let probs = net.forward(features)?;
    if probs.cols != 1 || probs.rows != mask.len() {
        return Err(Error::Shape(String::from(
            "offload network must emit one probability per position",
        )));
    }
    Ok((0..probs.rows)
        .map(|i| mask[i] && probs.at(i, 0) >= sigma)
        .collect())
}

/// Threshold rule applied to an externally computed probability vector.
pub fn threshold_probs(probs: &[f64], mask: &[bool], sigma: f64) -> Vec<bool> {
    probs
        .iter()
        .zip(mask)
        .map(|(&p, &m)| m && p >= sigma)
        .collect()
}

/// Per-task allocation produced by the resource network, denormalized
/// into the constraint boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub p_ul: Vec<f64>,
    pub p_dl: Vec<f64>,
    pub f_ap: Vec<f64>,
}

/// Masks each feature row by its offload bit (the dot-product coupling)
/// and runs the resource network; outputs map affinely into the boxes,
/// local rows are forced to zero allocation.
pub fn couple_and_allocate(
    net: &Network,
    features: &Mat,
    offload: &[bool],
    params: &SystemParams,
) -> Result<Allocation> {
    if features.rows != offload.len() {
        return Err(Error::LengthMismatch {
            expected: features.rows,
            got: offload.len(),
        });
    }
    let coupled = Mat::from_fn(features.rows, features.cols, |i, j| {
        if offload[i] {
            features.at(i, j)
        } else {
            0.0
        }
    });
    let out = net.forward(&coupled)?;
    if out.cols != 3 {
        return Err(Error::Shape(String::from(
            "resource network must emit three values per position",
        )));
    }
    let denorm = |v: f64, lo: f64, hi: f64| lo + v * (hi - lo);
    let mut alloc = Allocation {
        p_ul: vec![0.0; features.rows],
        p_dl: vec![0.0; features.rows],
        f_ap: vec![0.0; features.rows],
    };
    for i in 0..features.rows {
        if offload[i] {
            alloc.p_ul[i] = denorm(out.at(i, 0), params.p_ul_min, params.p_ul_max);
            alloc.p_dl[i] = denorm(out.at(i, 1), params.p_dl_min, params.p_dl_max);
            alloc.f_ap[i] = denorm(out.at(i, 2), params.f_ap_min, params.f_ap_max);
        }
    }
    Ok(alloc)
}

/// Result of running the full pipeline on one instance.
#[derive(Debug, Clone)]
pub struct SchedulerOutcome {
    pub schedule: Schedule,
    pub report: CostReport,
    /// Shift offset of the winning candidate.
    pub shift_index: usize,
    /// True when every candidate was structurally infeasible and the
    /// all-local schedule was substituted.
    pub fallback: bool,
    pub candidates: usize,
}

/// Full TSNet-SAC inference: `k` shifted candidates, constraint
/// clipping, and selection by the exact utility. `pad_seed` only
/// matters for the random pad mode.
#[allow(clippy::too_many_arguments)]
pub fn tsnet_sac_schedule(
    offload_net: &Network,
    resource_net: &Network,
    instance: &Instance,
    params: &SystemParams,
    normalizer: &Normalizer,
    sac: &SacConfig,
    ext: &ExtenderConfig,
    pad_seed: u64,
) -> Result<SchedulerOutcome> {
    sac.validate(ext.n_bar)?;
    let features = normalized_features(instance, normalizer);
    let (padded, mask) = pad(&features, ext, pad_seed)?;
    let mut best: Option<Candidate> = None;
    let mut candidates = 0;
    for &offset in &shift_offsets(sac.k, ext.n_bar, sac.unit_shifts) {
        let shifted = shift_rows(&padded, offset)?;
        let probs = offload_net.forward(&shifted)?;
        let probs_vec: Vec<f64> = (0..probs.rows).map(|i| probs.at(i, 0)).collect();
        let probs_orig = inverse_shift_seq(&probs_vec, offset)?;
        let offload_padded = threshold_probs(&probs_orig, &mask, sac.sigma);
        let alloc = couple_and_allocate(resource_net, &padded, &offload_padded, params)?;
        let raw = Schedule {
            offload: unpad_seq(&offload_padded, &mask)?,
            p_ul: unpad_seq(&alloc.p_ul, &mask)?,
            p_dl: unpad_seq(&alloc.p_dl, &mask)?,
            f_ap: unpad_seq(&alloc.f_ap, &mask)?,
        };
        let schedule = match clip_to_constraints(&raw, params) {
            Ok(s) => s,
            Err(Error::Infeasible(_)) => continue,
            Err(e) => return Err(e),
        };
        let report = evaluate(instance, &schedule, params)?;
        candidates += 1;
        let better = match &best {
            None => true,
            Some(b) => report.utility < b.report.utility,
        };
        if better {
            best = Some(Candidate {
                schedule,
                report,
                shift_index: offset,
            });
        }
    }
    match best {
        Some(c) => Ok(SchedulerOutcome {
            schedule: c.schedule,
            report: c.report,
            shift_index: c.shift_index,
            fallback: false,
            candidates,
        }),
        None => {
            let schedule = Schedule::all_local(instance.len());
            let report = evaluate(instance, &schedule, params)?;
            Ok(SchedulerOutcome {
                schedule,
                report,
                shift_index: 0,
                fallback: true,
                candidates: 0,
            })
        }
    }
}

/// Plain TSNet: the degenerate single-candidate pipeline.
pub fn tsnet_schedule(
    offload_net: &Network,
    resource_net: &Network,
    instance: &Instance,
    params: &SystemParams,
    normalizer: &Normalizer,
    sigma: f64,
    ext: &ExtenderConfig,
    pad_seed: u64,
) -> Result<SchedulerOutcome> {
    let sac = SacConfig {
        k: 1,
        sigma,
        unit_shifts: false,
    };
    tsnet_sac_schedule(
        offload_net,
        resource_net,
        instance,
        params,
        normalizer,
        &sac,
        ext,
        pad_seed,
    )
}

/// Analytic reference: offload everything with mid-box allocations,
/// clipped into the budget.
pub fn all_offload_schedule(instance: &Instance, params: &SystemParams) -> Result<Schedule> {
    let n = instance.len();
    let raw = Schedule {
        offload: vec![true; n],
        p_ul: vec![0.5 * (params.p_ul_min + params.p_ul_max); n],
        p_dl: vec![0.5 * (params.p_dl_min + params.p_dl_max); n],
        f_ap: vec![0.5 * (params.f_ap_min + params.f_ap_max); n],
    };
    clip_to_constraints(&raw, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{check_constraints, TaskInfo};
    use crate::neural::{BackboneKind, HeadKind, NetConfig};

    fn normalizer() -> Normalizer {
        Normalizer {
            min: [1e5, 1e8, 1e4, 1e-8],
            max: [1e6, 2e9, 1e7, 1e-6],
        }
    }

    fn tiny_nets(n_bar: usize) -> (Network, Network) {
        let cfg = NetConfig {
            embed_dim: 8,
            encoder_layers: 1,
            head_count: 2,
            ffn_dim: 8,
            seed: 1,
            ..NetConfig::default()
        };
        let offload = Network::new(cfg.clone(), HeadKind::Offload, BackboneKind::Transformer, n_bar)
            .unwrap();
        let resource =
            Network::new(cfg, HeadKind::Resource, BackboneKind::Transformer, n_bar).unwrap();
        (offload, resource)
    }

    fn instance(n: usize) -> Instance {
        Instance::new(
            (0..n)
                .map(|i| {
                    TaskInfo::symmetric(
                        2e5 + 1e4 * i as f64,
                        5e8 + 1e8 * i as f64,
                        1e5 + 1e4 * i as f64,
                        1e-7,
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn pad_fills_outlier_rows_and_mask() {
        let features = Mat::from_fn(2, 4, |i, j| (i * 4 + j) as f64 * 0.1);
        let cfg = ExtenderConfig {
            n_bar: 4,
            ..ExtenderConfig::default()
        };
        let (padded, mask) = pad(&features, &cfg, 0).unwrap();
        assert_eq!(mask, vec![true, true, false, false]);
        for i in 2..4 {
            for j in 0..4 {
                assert_eq!(padded.at(i, j), -1.0);
            }
        }
        assert_eq!(padded.at(1, 2), features.at(1, 2));
        assert_eq!(mask.iter().filter(|&&m| m).count(), 2);
    }

    #[test]
    fn pad_at_full_length_is_identity() {
        let features = Mat::from_fn(4, 4, |i, j| (i + j) as f64);
        let cfg = ExtenderConfig {
            n_bar: 4,
            ..ExtenderConfig::default()
        };
        let (padded, mask) = pad(&features, &cfg, 0).unwrap();
        assert_eq!(padded, features);
        assert!(mask.iter().all(|&m| m));
    }

    #[test]
    fn pad_rejects_oversized_instances() {
        let features = Mat::zeros(5, 4);
        let cfg = ExtenderConfig {
            n_bar: 4,
            ..ExtenderConfig::default()
        };
        assert!(pad(&features, &cfg, 0).is_err());
    }

    #[test]
    fn unpad_restores_real_rows() {
        let features = Mat::from_fn(3, 4, |i, j| (i * 10 + j) as f64);
        let cfg = ExtenderConfig {
            n_bar: 6,
            ..ExtenderConfig::default()
        };
        let (padded, mask) = pad(&features, &cfg, 0).unwrap();
        let back = unpad_rows(&padded, &mask).unwrap();
        assert_eq!(back, features);
        let all_true = vec![true; 3];
        assert_eq!(unpad_rows(&features, &all_true).unwrap(), features);
    }

    #[test]
    fn unpad_rejects_mismatched_mask() {
        let features = Mat::zeros(3, 4);
        assert!(unpad_rows(&features, &[true, false]).is_err());
    }

    #[test]
    fn shift_round_trip_and_group_property() {
        let m = Mat::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]);
        let s = shift_rows(&m, 1).unwrap();
        assert_eq!(s.data, vec![3.0, 1.0, 2.0]);
        for j in 0..3 {
            let shifted = shift_rows(&m, j).unwrap();
            let col: Vec<f64> = (0..3).map(|i| shifted.at(i, 0)).collect();
            let back = inverse_shift_seq(&col, j).unwrap();
            assert_eq!(back, vec![1.0, 2.0, 3.0]);
        }
        assert!(shift_rows(&m, 3).is_err());
        assert_eq!(shift_rows(&m, 0).unwrap(), m);
    }

    #[test]
    fn evenly_spaced_offsets_nest_for_divisor_counts() {
        let k40 = shift_offsets(40, 40, false);
        for k in [1usize, 5, 10, 20] {
            let offs = shift_offsets(k, 40, false);
            assert_eq!(offs.len(), k);
            for o in &offs {
                assert!(k40.contains(o));
            }
            // Nesting: offsets of k divide into offsets of 2k.
            let offs2 = shift_offsets(2 * k, 40, false);
            for o in &offs {
                assert!(offs2.contains(o), "offset {o} of k={k} missing at 2k");
            }
        }
        assert_eq!(shift_offsets(3, 40, true), vec![0, 1, 2]);
    }

    #[test]
    fn threshold_rule_and_monotonicity() {
        let probs = vec![0.31, 0.29, 0.5, 0.9];
        let mask = vec![true; 4];
        let m = threshold_probs(&probs, &mask, 0.3);
        assert_eq!(m, vec![true, false, true, true]);
        // Raising sigma only shrinks the offload set.
        let mut prev = m;
        for sigma in [0.4, 0.6, 0.95] {
            let next = threshold_probs(&probs, &mask, sigma);
            for i in 0..4 {
                assert!(!next[i] || prev[i]);
            }
            prev = next;
        }
        let all_local = threshold_probs(&probs, &mask, 0.99);
        assert!(all_local.iter().all(|&b| !b));
    }

    #[test]
    fn coupling_zeroes_local_rows() {
        let (_, resource) = tiny_nets(4);
        let features = Mat::from_fn(4, 4, |_, _| 0.5);
        let params = SystemParams::default();
        let alloc =
            couple_and_allocate(&resource, &features, &[false, false, false, false], &params)
                .unwrap();
        assert!(alloc.p_ul.iter().all(|&v| v == 0.0));
        assert!(alloc.f_ap.iter().all(|&v| v == 0.0));
        let alloc2 =
            couple_and_allocate(&resource, &features, &[true, true, true, true], &params).unwrap();
        for i in 0..4 {
            assert!(alloc2.p_ul[i] >= params.p_ul_min && alloc2.p_ul[i] <= params.p_ul_max);
            assert!(alloc2.f_ap[i] >= params.f_ap_min && alloc2.f_ap[i] <= params.f_ap_max);
        }
    }

    #[test]
    fn pipeline_emits_feasible_schedule_of_original_length() {
        let params = SystemParams::default();
        let (offload, resource) = tiny_nets(8);
        let ext = ExtenderConfig {
            n_bar: 8,
            ..ExtenderConfig::default()
        };
        let sac = SacConfig {
            k: 4,
            sigma: 0.3,
            unit_shifts: false,
        };
        for n in [1usize, 3, 5, 8] {
            let inst = instance(n);
            let out = tsnet_sac_schedule(
                &offload,
                &resource,
                &inst,
                &params,
                &normalizer(),
                &sac,
                &ext,
                0,
            )
            .unwrap();
            assert_eq!(out.schedule.len(), n);
            assert!(
                out.fallback || check_constraints(&out.schedule, &params).feasible,
                "n = {n}"
            );
        }
    }

    #[test]
    fn sac_never_loses_to_plain_tsnet() {
        let params = SystemParams::default();
        let (offload, resource) = tiny_nets(8);
        let ext = ExtenderConfig {
            n_bar: 8,
            ..ExtenderConfig::default()
        };
        for n in [2usize, 4, 6] {
            let inst = instance(n);
            let plain = tsnet_schedule(
                &offload,
                &resource,
                &inst,
                &params,
                &normalizer(),
                0.3,
                &ext,
                0,
            )
            .unwrap();
            let sac = tsnet_sac_schedule(
                &offload,
                &resource,
                &inst,
                &params,
                &normalizer(),
                &SacConfig {
                    k: 8,
                    sigma: 0.3,
                    unit_shifts: false,
                },
                &ext,
                0,
            )
            .unwrap();
            assert!(sac.report.utility <= plain.report.utility + 1e-12);
        }
    }

    #[test]
    fn pad_mode_changes_prediction_not_alignment() {
        let params = SystemParams::default();
        let (offload, resource) = tiny_nets(8);
        let inst = instance(3);
        for mode in [PadMode::Outlier, PadMode::Zero, PadMode::Random] {
            let ext = ExtenderConfig {
                n_bar: 8,
                pad_value: -1.0,
                pad_mode: mode,
            };
            let out = tsnet_schedule(
                &offload,
                &resource,
                &inst,
                &params,
                &normalizer(),
                0.3,
                &ext,
                7,
            )
            .unwrap();
            assert_eq!(out.schedule.len(), 3);
        }
    }

    #[test]
    fn all_offload_reference_is_feasible() {
        let params = SystemParams::default();
        let inst = instance(8);
        let sched = all_offload_schedule(&inst, &params).unwrap();
        assert!(check_constraints(&sched, &params).feasible);
        assert!(sched.offload.iter().all(|&m| m));
    }
}
