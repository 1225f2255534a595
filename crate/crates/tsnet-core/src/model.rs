//! Physical cost model of the single-station MEC system.
//!
//! A task either runs on its terminal (`m = 0`) or is offloaded to the
//! edge server (`m = 1`). Local execution costs CPU delay and energy;
//! offloading costs uplink/downlink transmission (Shannon-rate links)
//! plus execution on the server. The system objective is the utility
//! `U = lambda * T + (1 - lambda) * E` where `T` is the mean per-task
//! delay and `E` the total energy.
//!
//! All quantities are SI internally: bits, cycles, Hz, W, J, s.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// One terminal's task: the quad of uplink bits, CPU cycles, downlink
/// bits, and channel gain (stored per direction; symmetric channels set
/// both to the same value).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TaskInfo {
    /// Uplink data volume in bits.
    pub uplink_bits: f64,
    /// CPU cycles required to compute the task.
    pub cpu_cycles: f64,
    /// Downlink data volume in bits.
    pub downlink_bits: f64,
    /// Uplink channel gain (dimensionless, > 0).
    pub gain_ul: f64,
    /// Downlink channel gain (dimensionless, > 0).
    pub gain_dl: f64,
}

impl TaskInfo {
    /// Builds a task with a reciprocal channel (`gain_ul == gain_dl`).
    pub fn symmetric(uplink_bits: f64, cpu_cycles: f64, downlink_bits: f64, gain: f64) -> Self {
        Self {
            uplink_bits,
            cpu_cycles,
            downlink_bits,
            gain_ul: gain,
            gain_dl: gain,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.uplink_bits >= 0.0)
            || !(self.cpu_cycles > 0.0)
            || !(self.downlink_bits >= 0.0)
            || !(self.gain_ul > 0.0)
            || !(self.gain_dl > 0.0)
        {
            return Err(Error::InvalidArgument(String::from(
                "task requires u >= 0, c > 0, d >= 0, gains > 0",
            )));
        }
        Ok(())
    }

    /// The four network input features `[u, c, d, h]` with `h` taken
    /// from the uplink gain.
    pub fn features(&self) -> [f64; 4] {
        [
            self.uplink_bits,
            self.cpu_cycles,
            self.downlink_bits,
            self.gain_ul,
        ]
    }
}

/// All physical constants of the system plus link bandwidths and the
/// delay/energy preference coefficient.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SystemParams {
    /// Terminal CPU frequency (Hz).
    pub f_loc: f64,
    /// Terminal CPU energy constant (J·s²/cycle).
    pub k_loc: f64,
    /// MEC CPU energy constant.
    pub k_ap: f64,
    /// Terminal transmit power bounds (W).
    pub p_ul_min: f64,
    pub p_ul_max: f64,
    /// MEC transmit power bounds (W).
    pub p_dl_min: f64,
    pub p_dl_max: f64,
    /// Per-task MEC frequency bounds (Hz).
    pub f_ap_min: f64,
    pub f_ap_max: f64,
    /// Total MEC frequency budget (Hz).
    pub f_total: f64,
    /// Noise power spectral density (W/Hz).
    pub n0_w_per_hz: f64,
    /// Per-terminal link bandwidths (Hz).
    pub w_ul: f64,
    pub w_dl: f64,
    /// Preference coefficient in `[0, 1]`: weight on delay vs energy.
    pub lambda: f64,
    /// Maximum access count (padded sequence upper limit).
    pub n_bar: usize,
}

/// `-173 dBm/Hz` expressed in W/Hz.
pub fn dbm_per_hz_to_w(dbm: f64) -> f64 {
    math::powf(10.0, dbm / 10.0) * 1e-3
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            f_loc: 2e9,
            k_loc: 3e-27,
            k_ap: 1e-27,
            p_ul_min: 0.05,
            p_ul_max: 0.2,
            p_dl_min: 20.0,
            p_dl_max: 200.0,
            f_ap_min: 1e9,
            f_ap_max: 8e9,
            f_total: 140e9,
            n0_w_per_hz: dbm_per_hz_to_w(-173.0),
            w_ul: 10e6,
            w_dl: 10e6,
            lambda: 0.5,
            n_bar: 40,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.f_loc > 0.0
            && self.k_loc > 0.0
            && self.k_ap > 0.0
            && self.p_ul_min > 0.0
            && self.p_ul_min <= self.p_ul_max
            && self.p_dl_min > 0.0
            && self.p_dl_min <= self.p_dl_max
            && self.f_ap_min > 0.0
            && self.f_ap_min <= self.f_ap_max
            && self.f_total > 0.0
            && self.n0_w_per_hz > 0.0
            && self.w_ul > 0.0
            && self.w_dl > 0.0
            && (0.0..=1.0).contains(&self.lambda)
            && self.n_bar >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(String::from(
                "system parameters violate bound/ordering invariants",
            )))
        }
    }
}

/// An ordered collection of tasks; `1 <= len <= n_bar` is enforced at
/// sampling / load time.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Instance {
    pub tasks: Vec<TaskInfo>,
}

impl Instance {
    pub fn new(tasks: Vec<TaskInfo>) -> Result<Self> {
        if tasks.is_empty() {
            return Err(Error::InvalidArgument(String::from(
                "instance must contain at least one task",
            )));
        }
        for t in &tasks {
            t.validate()?;
        }
        Ok(Self { tasks })
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }
}

/// The decision variables: per-task offload bit plus continuous
/// allocations. Allocations of local tasks are stored as zero and
/// ignored by every cost formula.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Schedule {
    pub offload: Vec<bool>,
    pub p_ul: Vec<f64>,
    pub p_dl: Vec<f64>,
    pub f_ap: Vec<f64>,
}

impl Schedule {
    /// All-local schedule for `n` tasks; always feasible.
    pub fn all_local(n: usize) -> Self {
        Self {
            offload: vec![false; n],
            p_ul: vec![0.0; n],
            p_dl: vec![0.0; n],
            f_ap: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.offload.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offload.is_empty()
    }

    pub fn offloaded_count(&self) -> usize {
        self.offload.iter().filter(|&&m| m).count()
    }

    fn check_len(&self) -> Result<()> {
        let n = self.offload.len();
        for len in [self.p_ul.len(), self.p_dl.len(), self.f_ap.len()] {
            if len != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: len,
                });
            }
        }
        Ok(())
    }
}

/// Which bound of the feasibility system a violation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ConstraintId {
    /// Per-task MEC frequency box (10a).
    FreqBox,
    /// Terminal transmit power box (10b).
    UplinkPowerBox,
    /// MEC transmit power box (10c).
    DownlinkPowerBox,
    /// Total MEC frequency budget (10d).
    TotalFrequency,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Violation {
    pub constraint: ConstraintId,
    /// Task index for per-task boxes; `None` for the shared budget.
    pub task: Option<usize>,
    /// Magnitude by which the bound is exceeded (same unit as the bound).
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Feasibility {
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

/// Full evaluation of a schedule on an instance.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CostReport {
    pub per_task_delay: Vec<f64>,
    pub per_task_energy: Vec<f64>,
    /// Mean per-task delay (s).
    pub total_delay: f64,
    /// Total energy (J).
    pub total_energy: f64,
    /// `lambda * T + (1 - lambda) * E`.
    pub utility: f64,
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

/// Delay and energy of computing a task on its own terminal.
pub fn local_cost(task: &TaskInfo, params: &SystemParams) -> (f64, f64) {
    let delay = task.cpu_cycles / params.f_loc;
    let energy = params.k_loc * params.f_loc * params.f_loc * task.cpu_cycles;
    (delay, energy)
}

/// Shannon rate of a link: `W * log2(1 + p*h / (N0*W))` in bits/s.
pub fn link_rate(p: f64, h: f64, band: f64, params: &SystemParams) -> Result<f64> {
    if !(p > 0.0) || !(h > 0.0) || !(band > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "link_rate requires positive inputs, got p={p}, h={h}, W={band}"
        )));
    }
    let snr = p * h / (params.n0_w_per_hz * band);
    Ok(band * math::log2(1.0 + snr))
}

/// Delay/energy breakdown of one offloaded task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffloadCost {
    pub t_ul: f64,
    pub t_dl: f64,
    pub t_exe: f64,
    pub e_ul: f64,
    pub e_dl: f64,
    pub e_exe: f64,
}

impl OffloadCost {
    pub fn delay(&self) -> f64 {
        self.t_ul + self.t_dl + self.t_exe
    }

    pub fn energy(&self) -> f64 {
        self.e_ul + self.e_dl + self.e_exe
    }
}

/// Costs of offloading a task with the given allocation. Zero-volume
/// transfers cost nothing in either delay or energy.
pub fn offload_cost(
    task: &TaskInfo,
    p_ul: f64,
    p_dl: f64,
    f_ap: f64,
    params: &SystemParams,
) -> Result<OffloadCost> {
    if !(f_ap > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "offload_cost requires f_ap > 0, got {f_ap}"
        )));
    }
    let t_ul = if task.uplink_bits > 0.0 {
        task.uplink_bits / link_rate(p_ul, task.gain_ul, params.w_ul, params)?
    } else {
        0.0
    };
    let t_dl = if task.downlink_bits > 0.0 {
        task.downlink_bits / link_rate(p_dl, task.gain_dl, params.w_dl, params)?
    } else {
        0.0
    };
    let t_exe = task.cpu_cycles / f_ap;
    Ok(OffloadCost {
        t_ul,
        t_dl,
        t_exe,
        e_ul: p_ul * t_ul,
        e_dl: p_dl * t_dl,
        e_exe: params.k_ap * f_ap * f_ap * task.cpu_cycles,
    })
}

/// Relative slack tolerated when checking bounds, so that clipped
/// schedules are not flagged for float rounding.
const FEAS_REL_TOL: f64 = 1e-9;

fn box_violation(value: f64, lo: f64, hi: f64) -> Option<f64> {
    let tol = FEAS_REL_TOL * hi.abs().max(1.0);
    if value < lo - tol {
        Some(lo - value)
    } else if value > hi + tol {
        Some(value - hi)
    } else {
        None
    }
}

/// Checks bounds (10a)-(10c) on every offloaded task and the shared
/// budget (10d). Local tasks carry no active constraints.
pub fn check_constraints(schedule: &Schedule, params: &SystemParams) -> Feasibility {
    let mut violations = Vec::new();
    let mut f_sum = 0.0;
    for i in 0..schedule.len() {
        if !schedule.offload[i] {
            continue;
        }
        if let Some(amount) = box_violation(schedule.f_ap[i], params.f_ap_min, params.f_ap_max) {
            violations.push(Violation {
                constraint: ConstraintId::FreqBox,
                task: Some(i),
                amount,
            });
        }
        if let Some(amount) = box_violation(schedule.p_ul[i], params.p_ul_min, params.p_ul_max) {
            violations.push(Violation {
                constraint: ConstraintId::UplinkPowerBox,
                task: Some(i),
                amount,
            });
        }
        if let Some(amount) = box_violation(schedule.p_dl[i], params.p_dl_min, params.p_dl_max) {
            violations.push(Violation {
                constraint: ConstraintId::DownlinkPowerBox,
                task: Some(i),
                amount,
            });
        }
        f_sum += schedule.f_ap[i];
    }
    let budget_tol = FEAS_REL_TOL * params.f_total;
    if f_sum > params.f_total + budget_tol {
        violations.push(Violation {
            constraint: ConstraintId::TotalFrequency,
            task: None,
            amount: f_sum - params.f_total,
        });
    }
    Feasibility {
        feasible: violations.is_empty(),
        violations,
    }
}

/// Repairs a schedule into the feasible set: clamps each offloaded
/// allocation into its box, then if the frequency budget is exceeded,
/// proportionally scales down the frequencies that are not pinned at
/// the minimum until the budget holds.
pub fn clip_to_constraints(schedule: &Schedule, params: &SystemParams) -> Result<Schedule> {
    schedule.check_len()?;
    let mut out = schedule.clone();
    let n_off = out.offloaded_count();
    if n_off as f64 * params.f_ap_min > params.f_total {
        return Err(Error::Infeasible(format!(
            "{n_off} offloaded tasks at minimum frequency exceed the budget"
        )));
    }
    for i in 0..out.len() {
        if out.offload[i] {
            out.p_ul[i] = out.p_ul[i].clamp(params.p_ul_min, params.p_ul_max);
            out.p_dl[i] = out.p_dl[i].clamp(params.p_dl_min, params.p_dl_max);
            out.f_ap[i] = out.f_ap[i].clamp(params.f_ap_min, params.f_ap_max);
        } else {
            out.p_ul[i] = 0.0;
            out.p_dl[i] = 0.0;
            out.f_ap[i] = 0.0;
        }
    }
    // Budget repair: scale free (not min-pinned) frequencies, re-clamp,
    // and repeat; each round pins at least one more task or finishes.
    loop {
        let sum: f64 = out
            .f_ap
            .iter()
            .zip(&out.offload)
            .filter(|(_, &m)| m)
            .map(|(f, _)| f)
            .sum();
        if sum <= params.f_total {
            break;
        }
        let mut pinned_sum = 0.0;
        let mut free_sum = 0.0;
        for i in 0..out.len() {
            if !out.offload[i] {
                continue;
            }
            if out.f_ap[i] <= params.f_ap_min {
                pinned_sum += out.f_ap[i];
            } else {
                free_sum += out.f_ap[i];
            }
        }
        debug_assert!(free_sum > 0.0);
        let scale = (params.f_total - pinned_sum) / free_sum;
        for i in 0..out.len() {
            if out.offload[i] && out.f_ap[i] > params.f_ap_min {
                out.f_ap[i] = (out.f_ap[i] * scale).max(params.f_ap_min);
            }
        }
    }
    Ok(out)
}

/// Evaluates a schedule: per-task delay follows the local/offload case
/// split, energy sums the active branch's terms, `T` is the mean delay
/// over all tasks, `E` the total energy, and `U = lambda*T + (1-lambda)*E`.
pub fn evaluate(instance: &Instance, schedule: &Schedule, params: &SystemParams) -> Result<CostReport> {
    schedule.check_len()?;
    if schedule.len() != instance.len() {
        return Err(Error::LengthMismatch {
            expected: instance.len(),
            got: schedule.len(),
        });
    }
    let n = instance.len();
    let mut per_task_delay = Vec::with_capacity(n);
    let mut per_task_energy = Vec::with_capacity(n);
    for i in 0..n {
        let task = &instance.tasks[i];
        if schedule.offload[i] {
            let cost = offload_cost(task, schedule.p_ul[i], schedule.p_dl[i], schedule.f_ap[i], params)?;
            per_task_delay.push(cost.delay());
            per_task_energy.push(cost.energy());
        } else {
            let (delay, energy) = local_cost(task, params);
            per_task_delay.push(delay);
            per_task_energy.push(energy);
        }
    }
    let total_delay = per_task_delay.iter().sum::<f64>() / n as f64;
    let total_energy = per_task_energy.iter().sum::<f64>();
    let utility = params.lambda * total_delay + (1.0 - params.lambda) * total_energy;
    let feas = check_constraints(schedule, params);
    Ok(CostReport {
        per_task_delay,
        per_task_energy,
        total_delay,
        total_energy,
        utility,
        feasible: feas.feasible,
        violations: feas.violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> SystemParams {
        SystemParams::default()
    }

    fn tol_eq(a: f64, b: f64, rel: f64) {
        let scale = a.abs().max(b.abs()).max(1e-300);
        assert!(
            (a - b).abs() <= rel * scale,
            "expected {b}, got {a} (rel {})",
            (a - b).abs() / scale
        );
    }

    #[test]
    fn local_cost_matches_hand_values() {
        let p = params();
        let task = TaskInfo::symmetric(1e5, 2e9, 1e4, 1e-6);
        let (delay, energy) = local_cost(&task, &p);
        tol_eq(delay, 1.0, 1e-9);
        tol_eq(energy, 24.0, 1e-9);
    }

    #[test]
    fn local_cost_vanishes_with_cycles() {
        let p = params();
        let task = TaskInfo::symmetric(0.0, 0.0, 0.0, 1e-6);
        let (delay, energy) = local_cost(&task, &p);
        assert_eq!(delay, 0.0);
        assert_eq!(energy, 0.0);
    }

    #[test]
    fn link_rate_unit_snr_equals_bandwidth() {
        let p = params();
        // Choose p*h so that p*h/(N0*W) = 1.
        let band = 1e7;
        let h = 1e-6;
        let power = p.n0_w_per_hz * band / h;
        let rate = link_rate(power, h, band, &p).unwrap();
        tol_eq(rate, band, 1e-12);
    }

    #[test]
    fn link_rate_hand_value() {
        // Independently evaluated: SNR = 0.1*1e-6 / (10^-20.3 * 1e7)
        // = 10^6.3, rate = 1e7 * log2(1 + 10^6.3) = 2.0928e8 bit/s.
        let p = params();
        let rate = link_rate(0.1, 1e-6, 1e7, &p).unwrap();
        tol_eq(rate, 2.0928e8, 1e-4);
    }

    #[test]
    fn link_rate_monotone_in_power() {
        let p = params();
        let r1 = link_rate(0.05, 1e-6, 1e7, &p).unwrap();
        let r2 = link_rate(0.1, 1e-6, 1e7, &p).unwrap();
        assert!(r2 > r1);
    }

    #[test]
    fn link_rate_rejects_nonpositive() {
        let p = params();
        assert!(link_rate(0.0, 1e-6, 1e7, &p).is_err());
        assert!(link_rate(0.1, -1.0, 1e7, &p).is_err());
        assert!(link_rate(0.1, 1e-6, 0.0, &p).is_err());
    }

    #[test]
    fn offload_cost_exec_hand_values() {
        let p = params();
        let task = TaskInfo::symmetric(0.0, 2e9, 0.0, 1e-6);
        let cost = offload_cost(&task, 0.1, 20.0, 4e9, &p).unwrap();
        tol_eq(cost.t_exe, 0.5, 1e-9);
        tol_eq(cost.e_exe, 32.0, 1e-9);
        assert_eq!(cost.t_ul, 0.0);
        assert_eq!(cost.t_dl, 0.0);
        assert_eq!(cost.e_ul, 0.0);
        assert_eq!(cost.e_dl, 0.0);
    }

    #[test]
    fn transmission_energy_identity() {
        let p = params();
        let task = TaskInfo::symmetric(5e5, 1e9, 3e4, 2e-7);
        let cost = offload_cost(&task, 0.13, 55.0, 3e9, &p).unwrap();
        assert_eq!(cost.e_ul, 0.13 * cost.t_ul);
        assert_eq!(cost.e_dl, 55.0 * cost.t_dl);
    }

    #[test]
    fn offload_cost_rejects_zero_frequency() {
        let p = params();
        let task = TaskInfo::symmetric(1e5, 1e9, 1e4, 1e-6);
        assert!(offload_cost(&task, 0.1, 20.0, 0.0, &p).is_err());
    }

    #[test]
    fn evaluate_all_local_single_task() {
        let p = params();
        let inst = Instance::new(vec![TaskInfo::symmetric(1e5, 2e9, 1e4, 1e-6)]).unwrap();
        let sched = Schedule::all_local(1);
        let report = evaluate(&inst, &sched, &p).unwrap();
        tol_eq(report.total_delay, 1.0, 1e-12);
        tol_eq(report.total_energy, 24.0, 1e-12);
        tol_eq(report.utility, 12.5, 1e-12);
        assert!(report.feasible);
    }

    #[test]
    fn evaluate_lambda_one_is_pure_delay() {
        let mut p = params();
        p.lambda = 1.0;
        let inst = Instance::new(vec![TaskInfo::symmetric(1e5, 2e9, 1e4, 1e-6)]).unwrap();
        let report = evaluate(&inst, &Schedule::all_local(1), &p).unwrap();
        assert_eq!(report.utility, report.total_delay);
    }

    #[test]
    fn evaluate_mixed_two_task_hand_value() {
        // Hand-evaluated mixed schedule, N = 2:
        //   task 0 local: c = 2e9 -> T0 = 1.0 s, E0 = 24.0 J
        //   task 1 offloaded: u = 1e6, c = 1e9, d = 1e5, h = 1e-6,
        //     p_ul = 0.1, p_dl = 20, f_ap = 4e9
        //   rate_ul = 1e7*log2(1+10^6.3)      = 2.09284e8 -> T_ul = 4.77819e-3
        //   rate_dl = 1e7*log2(1+20e-6/10^-13.3) = 2.85725e8 -> T_dl = 3.49987e-4
        //   T_exe = 0.25, E_exe = 16.0
        //   T1 = 0.2551282, E1 = 0.1 *T_ul + 20*T_dl + 16 = 16.0074776
        //   T = 0.6275641, E = 40.0074776, U = 20.3175209
        let p = params();
        let inst = Instance::new(vec![
            TaskInfo::symmetric(1e5, 2e9, 1e4, 1e-6),
            TaskInfo::symmetric(1e6, 1e9, 1e5, 1e-6),
        ])
        .unwrap();
        let sched = Schedule {
            offload: vec![false, true],
            p_ul: vec![0.0, 0.1],
            p_dl: vec![0.0, 20.0],
            f_ap: vec![0.0, 4e9],
        };
        let report = evaluate(&inst, &sched, &p).unwrap();
        tol_eq(report.total_delay, 0.6275641, 1e-5);
        tol_eq(report.total_energy, 40.0074776, 1e-5);
        tol_eq(report.utility, 20.3175209, 1e-5);
        assert!(report.feasible);
    }

    #[test]
    fn evaluate_rejects_length_mismatch() {
        let p = params();
        let inst = Instance::new(vec![TaskInfo::symmetric(1e5, 2e9, 1e4, 1e-6)]).unwrap();
        let sched = Schedule::all_local(2);
        assert!(matches!(
            evaluate(&inst, &sched, &p),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn check_constraints_reports_freq_box() {
        let p = params();
        let sched = Schedule {
            offload: vec![true],
            p_ul: vec![0.1],
            p_dl: vec![20.0],
            f_ap: vec![9e9],
        };
        let feas = check_constraints(&sched, &p);
        assert!(!feas.feasible);
        assert_eq!(feas.violations.len(), 1);
        assert_eq!(feas.violations[0].constraint, ConstraintId::FreqBox);
        tol_eq(feas.violations[0].amount, 1e9, 1e-12);
    }

    #[test]
    fn check_constraints_reports_budget() {
        let p = params();
        let n = 20;
        let sched = Schedule {
            offload: vec![true; n],
            p_ul: vec![0.1; n],
            p_dl: vec![20.0; n],
            f_ap: vec![8e9; n],
        };
        let feas = check_constraints(&sched, &p);
        assert!(!feas.feasible);
        let budget: Vec<_> = feas
            .violations
            .iter()
            .filter(|v| v.constraint == ConstraintId::TotalFrequency)
            .collect();
        assert_eq!(budget.len(), 1);
        tol_eq(budget[0].amount, 20e9, 1e-9);
    }

    #[test]
    fn all_local_is_always_feasible() {
        let p = params();
        let feas = check_constraints(&Schedule::all_local(40), &p);
        assert!(feas.feasible);
    }

    #[test]
    fn clip_clamps_power_to_table_bound() {
        let p = params();
        let sched = Schedule {
            offload: vec![true],
            p_ul: vec![0.25],
            p_dl: vec![20.0],
            f_ap: vec![4e9],
        };
        let clipped = clip_to_constraints(&sched, &p).unwrap();
        assert_eq!(clipped.p_ul[0], 0.2);
    }

    #[test]
    fn clip_rescales_budget_overflow() {
        let p = params();
        let n = 20;
        let sched = Schedule {
            offload: vec![true; n],
            p_ul: vec![0.1; n],
            p_dl: vec![20.0; n],
            f_ap: vec![8e9; n],
        };
        let clipped = clip_to_constraints(&sched, &p).unwrap();
        for f in &clipped.f_ap {
            tol_eq(*f, 7e9, 1e-9);
        }
        assert!(check_constraints(&clipped, &p).feasible);
    }

    #[test]
    fn clip_is_identity_on_feasible_and_idempotent() {
        let p = params();
        let sched = Schedule {
            offload: vec![true, false],
            p_ul: vec![0.1, 0.0],
            p_dl: vec![50.0, 0.0],
            f_ap: vec![3e9, 0.0],
        };
        let once = clip_to_constraints(&sched, &p).unwrap();
        assert_eq!(once, sched);
        let twice = clip_to_constraints(&once, &p).unwrap();
        assert_eq!(twice, once);
    }

    #[test]
    fn clip_errors_when_structurally_infeasible() {
        let mut p = params();
        p.f_total = 1.5e9;
        let sched = Schedule {
            offload: vec![true, true],
            p_ul: vec![0.1, 0.1],
            p_dl: vec![20.0, 20.0],
            f_ap: vec![1e9, 1e9],
        };
        assert!(matches!(
            clip_to_constraints(&sched, &p),
            Err(Error::Infeasible(_))
        ));
    }
}
