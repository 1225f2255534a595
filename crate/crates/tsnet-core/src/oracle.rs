//! Exact reference solver for small instances.
//!
//! For a fixed offload vector the continuous subproblem separates:
//! each offloaded task's transmit powers only touch its own delay and
//! energy terms, so they are minimized per task over their boxes by a
//! coarse grid plus golden-section refinement. The server frequencies
//! couple only through the shared budget; that is solved by bisection
//! on the Lagrange multiplier of the budget constraint, with a convex
//! per-task inner minimization. `enumerate_optimal` then walks all
//! `2^N` offload vectors.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::model::{
    check_constraints, evaluate, Instance, Schedule, SystemParams, TaskInfo,
};

/// Largest instance `enumerate_optimal` accepts.
pub const ENUMERATION_LIMIT: usize = 16;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OracleConfig {
    /// Grid points for the 1-D power searches.
    pub power_grid_points: usize,
    /// Golden-section refinement steps around the best grid cell.
    pub refine_iterations: usize,
    /// Relative tolerance for the budget-multiplier bisection.
    pub multiplier_tolerance: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            power_grid_points: 64,
            refine_iterations: 40,
            multiplier_tolerance: 1e-9,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.power_grid_points == 0
            || self.refine_iterations == 0
            || !(self.multiplier_tolerance > 0.0)
        {
            return Err(Error::InvalidArgument(
                "oracle configuration fields must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Golden-section minimization of a unimodal-ish objective on `[lo, hi]`.
fn golden_section<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Coarse grid over the box, then golden-section around the best cell.
fn minimize_on_box<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, cfg: &OracleConfig) -> f64 {
    if hi <= lo {
        return lo;
    }
    let n = cfg.power_grid_points;
    let mut best_idx = 0;
    let mut best_val = f64::INFINITY;
    for i in 0..=n {
        let x = lo + (hi - lo) * i as f64 / n as f64;
        let v = f(x);
        if v < best_val {
            best_val = v;
            best_idx = i;
        }
    }
    let cell = (hi - lo) / n as f64;
    let a = (lo + cell * (best_idx as f64 - 1.0)).max(lo);
    let b = (lo + cell * (best_idx as f64 + 1.0)).min(hi);
    let refined = golden_section(f, a, b, cfg.refine_iterations);
    if f(refined) <= best_val {
        refined
    } else {
        lo + cell * best_idx as f64
    }
}

/// Optimal transmit powers of one offloaded task; independent of which
/// other tasks offload (only the instance size enters, through the
/// delay weight `lambda / N`).
#[derive(Debug, Clone, Copy)]
pub(crate) struct PowerSolution {
    pub p_ul: f64,
    pub p_dl: f64,
    /// `lambda/N * (t_ul + t_dl) + (1 - lambda) * (e_ul + e_dl)`.
    #[allow(dead_code)]
    pub link_objective: f64,
}

fn solve_link_power(
    bits: f64,
    gain: f64,
    band: f64,
    p_lo: f64,
    p_hi: f64,
    delay_weight: f64,
    energy_weight: f64,
    params: &SystemParams,
    cfg: &OracleConfig,
) -> (f64, f64, f64) {
    if bits <= 0.0 {
        return (p_lo, 0.0, 0.0);
    }
    let objective = |p: f64| {
        let rate = band * math::log2(1.0 + p * gain / (params.n0_w_per_hz * band));
        let t = bits / rate;
        delay_weight * t + energy_weight * p * t
    };
    let p = minimize_on_box(&objective, p_lo, p_hi, cfg);
    let rate = band * math::log2(1.0 + p * gain / (params.n0_w_per_hz * band));
    let t = bits / rate;
    (p, t, delay_weight * t + energy_weight * p * t)
}

pub(crate) fn solve_task_powers(
    task: &TaskInfo,
    n: usize,
    params: &SystemParams,
    cfg: &OracleConfig,
) -> PowerSolution {
    let delay_weight = params.lambda / n as f64;
    let energy_weight = 1.0 - params.lambda;
    let (p_ul, _t_ul, obj_ul) = solve_link_power(
        task.uplink_bits,
        task.gain_ul,
        params.w_ul,
        params.p_ul_min,
        params.p_ul_max,
        delay_weight,
        energy_weight,
        params,
        cfg,
    );
    let (p_dl, _t_dl, obj_dl) = solve_link_power(
        task.downlink_bits,
        task.gain_dl,
        params.w_dl,
        params.p_dl_min,
        params.p_dl_max,
        delay_weight,
        energy_weight,
        params,
        cfg,
    );
    PowerSolution {
        p_ul,
        p_dl,
        link_objective: obj_ul + obj_dl,
    }
}

/// Minimizer of `a/f + b*f^2 + mu*f` over `[lo, hi]`; the derivative
/// `-a/f^2 + 2*b*f + mu` is strictly increasing, so the objective is
/// strictly convex on f > 0 and a sign bisection suffices.
fn min_freq_for_multiplier(a: f64, b: f64, mu: f64, lo: f64, hi: f64) -> f64 {
    let deriv = |f: f64| -a / (f * f) + 2.0 * b * f + mu;
    if deriv(lo) >= 0.0 {
        return lo;
    }
    if deriv(hi) <= 0.0 {
        return hi;
    }
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if deriv(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Per-task frequency coefficients: objective `a/f + b*f^2` with
/// `a = lambda/N * c` and `b = (1 - lambda) * k_ap * c`.
fn freq_coefficients(task: &TaskInfo, n: usize, params: &SystemParams) -> (f64, f64) {
    (
        params.lambda / n as f64 * task.cpu_cycles,
        (1.0 - params.lambda) * params.k_ap * task.cpu_cycles,
    )
}

/// Solves server frequencies for the offloaded set by bisection on the
/// budget multiplier. Returns frequencies in offloaded order.
fn solve_frequencies(
    coeffs: &[(f64, f64)],
    params: &SystemParams,
    cfg: &OracleConfig,
) -> Result<Vec<f64>> {
    if coeffs.is_empty() {
        return Ok(Vec::new());
    }
    if coeffs.len() as f64 * params.f_ap_min > params.f_total {
        return Err(Error::Infeasible(format!(
            "{} offloaded tasks at minimum frequency exceed the budget",
            coeffs.len()
        )));
    }
    let solve_all = |mu: f64| -> Vec<f64> {
        coeffs
            .iter()
            .map(|&(a, b)| min_freq_for_multiplier(a, b, mu, params.f_ap_min, params.f_ap_max))
            .collect()
    };
    let total = |fs: &[f64]| fs.iter().sum::<f64>();

    let unconstrained = solve_all(0.0);
    if total(&unconstrained) <= params.f_total {
        return Ok(unconstrained);
    }
    // Find an upper multiplier driving the sum under budget, then bisect.
    let mut mu_lo = 0.0;
    let mut mu_hi = 1e-12;
    while total(&solve_all(mu_hi)) > params.f_total {
        mu_hi *= 2.0;
        if mu_hi > 1e12 {
            // All frequencies are at their minimum by now; feasibility
            // was checked above, so this cannot trigger.
            break;
        }
    }
    while (mu_hi - mu_lo) > cfg.multiplier_tolerance * mu_hi.max(1e-300) {
        let mid = 0.5 * (mu_lo + mu_hi);
        if total(&solve_all(mid)) > params.f_total {
            mu_lo = mid;
        } else {
            mu_hi = mid;
        }
    }
    // Take the feasible side of the bracket.
    Ok(solve_all(mu_hi))
}

/// Solves the continuous subproblem for a fixed offload vector and
/// returns the completed schedule and its utility.
pub fn solve_resources_given_m(
    instance: &Instance,
    offload: &[bool],
    params: &SystemParams,
    cfg: &OracleConfig,
) -> Result<(Schedule, f64)> {
    if offload.len() != instance.len() {
        return Err(Error::LengthMismatch {
            expected: instance.len(),
            got: offload.len(),
        });
    }
    let n = instance.len();
    let powers: Vec<Option<PowerSolution>> = instance
        .tasks
        .iter()
        .zip(offload)
        .map(|(t, &m)| m.then(|| solve_task_powers(t, n, params, cfg)))
        .collect();
    solve_with_powers(instance, offload, &powers, params, cfg)
}

/// Inner solve with per-task power solutions precomputed (they do not
/// depend on the offload vector, so enumeration reuses them).
fn solve_with_powers(
    instance: &Instance,
    offload: &[bool],
    powers: &[Option<PowerSolution>],
    params: &SystemParams,
    cfg: &OracleConfig,
) -> Result<(Schedule, f64)> {
    let n = instance.len();
    let offloaded: Vec<usize> = (0..n).filter(|&i| offload[i]).collect();
    let coeffs: Vec<(f64, f64)> = offloaded
        .iter()
        .map(|&i| freq_coefficients(&instance.tasks[i], n, params))
        .collect();
    let freqs = solve_frequencies(&coeffs, params, cfg)?;

    let mut schedule = Schedule::all_local(n);
    for (slot, &i) in offloaded.iter().enumerate() {
        let power = powers[i].as_ref().expect("offloaded task has power solution");
        schedule.offload[i] = true;
        schedule.p_ul[i] = power.p_ul;
        schedule.p_dl[i] = power.p_dl;
        schedule.f_ap[i] = freqs[slot];
    }
    let report = evaluate(instance, &schedule, params)?;
    Ok((schedule, report.utility))
}

/// Exhaustively enumerates all offload vectors (N <= 16), solving the
/// continuous subproblem for each, and returns the best feasible
/// schedule. Ties break toward fewer offloaded tasks, then the
/// lexicographically smallest vector.
pub fn enumerate_optimal(
    instance: &Instance,
    params: &SystemParams,
    cfg: &OracleConfig,
) -> Result<Schedule> {
    let n = instance.len();
    if n > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: ENUMERATION_LIMIT,
        });
    }
    let powers: Vec<Option<PowerSolution>> = instance
        .tasks
        .iter()
        .map(|t| Some(solve_task_powers(t, n, params, cfg)))
        .collect();

    let mut best: Option<(f64, usize, Vec<bool>, Schedule)> = None;
    for mask in 0u32..(1u32 << n) {
        let offload: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
        let (schedule, utility) = match solve_with_powers(instance, &offload, &powers, params, cfg)
        {
            Ok(r) => r,
            Err(Error::Infeasible(_)) => continue,
            Err(e) => return Err(e),
        };
        if !check_constraints(&schedule, params).feasible {
            continue;
        }
        let count = offload.iter().filter(|&&m| m).count();
        let better = match &best {
            None => true,
            Some((bu, bc, bm, _)) => {
                utility < *bu
                    || (utility == *bu && (count < *bc || (count == *bc && offload < *bm)))
            }
        };
        if better {
            best = Some((utility, count, offload, schedule));
        }
    }
    best.map(|(_, _, _, s)| s)
        .ok_or_else(|| Error::Infeasible("no feasible offload vector".into()))
}

/// Utility of the best schedule found by enumeration.
pub fn enumerate_optimal_utility(
    instance: &Instance,
    params: &SystemParams,
    cfg: &OracleConfig,
) -> Result<f64> {
    let schedule = enumerate_optimal(instance, params, cfg)?;
    Ok(evaluate(instance, &schedule, params)?.utility)
}

/// Closed-form stationary point of the uncoupled frequency objective,
/// `f* = (lambda / (2 N (1 - lambda) k_ap))^(1/3)`, before box clamping.
pub fn unconstrained_frequency(n: usize, params: &SystemParams) -> f64 {
    math::cbrt(params.lambda / (2.0 * n as f64 * (1.0 - params.lambda) * params.k_ap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::offload_cost;
    use alloc::vec;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> SystemParams {
        SystemParams::default()
    }

    #[test]
    fn all_local_vector_gives_local_utility() {
        let p = params();
        let inst = Instance::new(vec![TaskInfo::symmetric(1e5, 2e9, 1e4, 1e-6)]).unwrap();
        let (sched, utility) =
            solve_resources_given_m(&inst, &[false], &p, &OracleConfig::default()).unwrap();
        assert_eq!(sched, Schedule::all_local(1));
        let local = evaluate(&inst, &Schedule::all_local(1), &p).unwrap().utility;
        assert_eq!(utility, local);
    }

    #[test]
    fn single_offload_hits_clamped_stationary_frequency() {
        let p = params();
        let inst = Instance::new(vec![TaskInfo::symmetric(1e5, 2e9, 1e4, 1e-6)]).unwrap();
        let (sched, _) =
            solve_resources_given_m(&inst, &[true], &p, &OracleConfig::default()).unwrap();
        let f_star = unconstrained_frequency(1, &p).clamp(p.f_ap_min, p.f_ap_max);
        let rel = (sched.f_ap[0] - f_star).abs() / f_star;
        assert!(rel < 1e-6, "f_ap {} vs stationary {}", sched.f_ap[0], f_star);
    }

    #[test]
    fn inner_solver_matches_dense_grid_brute_force() {
        // Independent oracle: dense 3-axis grid over (p_ul, p_dl, f_ap)
        // per offloaded task on an N = 3 instance with a slack budget
        // (the brute force ignores the coupling constraint, which is
        // non-binding here).
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let tasks: Vec<TaskInfo> = (0..3)
            .map(|_| {
                TaskInfo::symmetric(
                    rng.gen_range(1e5..1e6),
                    rng.gen_range(1e8..2e9),
                    rng.gen_range(1e4..1e6),
                    math::powf(10.0, rng.gen_range(-7.0..-5.0)),
                )
            })
            .collect();
        let inst = Instance::new(tasks).unwrap();
        let offload = [true, true, true];
        let (_, utility) =
            solve_resources_given_m(&inst, &offload, &p, &OracleConfig::default()).unwrap();

        let grid = 400usize;
        let axis = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / grid as f64;
        let n = inst.len() as f64;
        let mut brute = 0.0;
        for (idx, task) in inst.tasks.iter().enumerate() {
            let _ = idx;
            let mut best = f64::INFINITY;
            for i in 0..=grid {
                let p_ul = axis(p.p_ul_min, p.p_ul_max, i);
                let cost_ul = {
                    let c = offload_cost(task, p_ul, p.p_dl_min, p.f_ap_min, &p).unwrap();
                    p.lambda / n * c.t_ul + (1.0 - p.lambda) * c.e_ul
                };
                if cost_ul < best {
                    best = cost_ul;
                }
            }
            let mut best_dl = f64::INFINITY;
            for i in 0..=grid {
                let p_dl = axis(p.p_dl_min, p.p_dl_max, i);
                let c = offload_cost(task, p.p_ul_min, p_dl, p.f_ap_min, &p).unwrap();
                let cost = p.lambda / n * c.t_dl + (1.0 - p.lambda) * c.e_dl;
                if cost < best_dl {
                    best_dl = cost;
                }
            }
            let mut best_f = f64::INFINITY;
            for i in 0..=grid {
                let f = axis(p.f_ap_min, p.f_ap_max, i);
                let cost = p.lambda / n * task.cpu_cycles / f
                    + (1.0 - p.lambda) * p.k_ap * f * f * task.cpu_cycles;
                if cost < best_f {
                    best_f = cost;
                }
            }
            brute += best + best_dl + best_f;
        }
        let rel = (utility - brute).abs() / brute.abs();
        assert!(rel < 1e-4, "solver {utility} vs brute {brute} (rel {rel})");
        assert!(utility <= brute * (1.0 + 1e-6), "solver must not exceed brute force");
    }

    #[test]
    fn enumeration_prefers_local_when_transmission_dominates() {
        // Negligible compute, heavy downlink on a weak channel: the
        // only benefit of offloading is a cheaper CPU, dwarfed by the
        // transmission cost. Hand comparison of the two branches:
        // local U ~ 0.5*5e-4 + 0.5*1.2e-2; offload pays > 0.1 J downlink.
        let p = params();
        let inst = Instance::new(vec![TaskInfo::symmetric(1e5, 1e6, 1e6, 1e-9)]).unwrap();
        let best = enumerate_optimal(&inst, &p, &OracleConfig::default()).unwrap();
        assert_eq!(best.offload, vec![false]);
    }

    #[test]
    fn enumeration_is_symmetric_on_duplicate_tasks() {
        let p = params();
        let task = TaskInfo::symmetric(5e5, 1.5e9, 5e4, 1e-6);
        let inst = Instance::new(vec![task, task]).unwrap();
        let best = enumerate_optimal(&inst, &p, &OracleConfig::default()).unwrap();
        assert_eq!(best.offload[0], best.offload[1]);
    }

    #[test]
    fn enumeration_rejects_large_instances() {
        let p = params();
        let tasks = vec![TaskInfo::symmetric(1e5, 1e9, 1e4, 1e-6); 17];
        let inst = Instance::new(tasks).unwrap();
        assert!(matches!(
            enumerate_optimal(&inst, &p, &OracleConfig::default()),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn enumeration_beats_random_feasible_schedules() {
        let p = params();
        let cfg = OracleConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let tasks: Vec<TaskInfo> = (0..5)
            .map(|_| {
                TaskInfo::symmetric(
                    rng.gen_range(1e5..1e6),
                    rng.gen_range(1e8..2e9),
                    rng.gen_range(1e4..1e7),
                    math::powf(10.0, rng.gen_range(-8.0..-6.0)),
                )
            })
            .collect();
        let inst = Instance::new(tasks).unwrap();
        let best_utility = enumerate_optimal_utility(&inst, &p, &cfg).unwrap();
        for _ in 0..50 {
            let offload: Vec<bool> = (0..5).map(|_| rng.gen_bool(0.5)).collect();
            let schedule = Schedule {
                offload: offload.clone(),
                p_ul: offload
                    .iter()
                    .map(|&m| if m { rng.gen_range(p.p_ul_min..p.p_ul_max) } else { 0.0 })
                    .collect(),
                p_dl: offload
                    .iter()
                    .map(|&m| if m { rng.gen_range(p.p_dl_min..p.p_dl_max) } else { 0.0 })
                    .collect(),
                f_ap: offload
                    .iter()
                    .map(|&m| if m { rng.gen_range(p.f_ap_min..p.f_ap_max) } else { 0.0 })
                    .collect(),
            };
            let schedule = crate::model::clip_to_constraints(&schedule, &p).unwrap();
            let utility = evaluate(&inst, &schedule, &p).unwrap().utility;
            assert!(best_utility <= utility * (1.0 + 1e-6));
        }
    }

    #[test]
    fn frequency_total_nonincreasing_in_multiplier() {
        let p = params();
        let coeffs: Vec<(f64, f64)> = (1..=6)
            .map(|i| {
                let task = TaskInfo::symmetric(1e5, 3e8 * i as f64, 1e4, 1e-6);
                freq_coefficients(&task, 6, &p)
            })
            .collect();
        let mut prev = f64::INFINITY;
        for exp in -14..=-6 {
            let mu = math::powf(10.0, exp as f64);
            let total: f64 = coeffs
                .iter()
                .map(|&(a, b)| min_freq_for_multiplier(a, b, mu, p.f_ap_min, p.f_ap_max))
                .sum();
            assert!(total <= prev + 1e-6);
            prev = total;
        }
    }

    #[test]
    fn solve_is_permutation_equivariant() {
        let p = params();
        let cfg = OracleConfig::default();
        let a = TaskInfo::symmetric(2e5, 1.2e9, 3e4, 1e-6);
        let b = TaskInfo::symmetric(8e5, 4e8, 9e4, 3e-7);
        let c = TaskInfo::symmetric(5e5, 1.9e9, 2e6, 2e-8);
        let inst = Instance::new(vec![a, b, c]).unwrap();
        let perm = Instance::new(vec![c, a, b]).unwrap();
        let (s1, u1) = solve_resources_given_m(&inst, &[true, false, true], &p, &cfg).unwrap();
        let (s2, u2) = solve_resources_given_m(&perm, &[true, true, false], &p, &cfg).unwrap();
        assert!((u1 - u2).abs() <= 1e-12 * u1.abs());
        assert_eq!(s1.f_ap[0], s2.f_ap[1]);
        assert_eq!(s1.f_ap[2], s2.f_ap[0]);
        assert_eq!(s1.p_dl[2], s2.p_dl[0]);
    }
}
