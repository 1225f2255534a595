//! Hybrid genetic algorithm for labeling instances.
//!
//! Chromosomes are the binary offload vector only; the continuous
//! allocation for a candidate vector is solved exactly by the oracle's
//! inner solver, so fitness is noise-free and the emitted label carries
//! the exact resources for its offload decisions.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Instance, Schedule, SystemParams};
use crate::oracle::{solve_resources_given_m, OracleConfig};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub crossover_rate: f64,
    /// Per-bit flip probability; `None` means `1 / N`.
    pub mutation_rate: Option<f64>,
    pub elitism_count: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 100,
            generations: 200,
            tournament_size: 3,
            crossover_rate: 0.9,
            mutation_rate: None,
            elitism_count: 2,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let rates_ok = (0.0..=1.0).contains(&self.crossover_rate)
            && self
                .mutation_rate
                .map_or(true, |r| (0.0..=1.0).contains(&r));
        if self.population_size < self.elitism_count + 2 || self.tournament_size == 0 || !rates_ok {
            return Err(Error::InvalidArgument(String::from(
                "GA configuration violates population/rate invariants",
            )));
        }
        Ok(())
    }
}

/// A solver-labeled instance: the training unit.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LabeledInstance {
    pub instance: Instance,
    pub schedule: Schedule,
    pub utility: f64,
    /// Provenance: "ga" or "oracle".
    pub solver_tag: String,
}

struct Evaluated {
    genes: Vec<bool>,
    utility: f64,
}

/// Runs the GA on one instance. Deterministic for a fixed seed; the
/// incumbent (best vector ever evaluated) is tracked outside the
/// population and returned with its exact resource allocation.
pub fn ga_solve(
    instance: &Instance,
    params: &SystemParams,
    cfg: &GaConfig,
    oracle_cfg: &OracleConfig,
) -> Result<LabeledInstance> {
    cfg.validate()?;
    let n = instance.len();
    let mutation_rate = cfg.mutation_rate.unwrap_or(1.0 / n as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let fitness = |genes: &[bool]| -> Result<f64> {
        match solve_resources_given_m(instance, genes, params, oracle_cfg) {
            Ok((_, utility)) => Ok(utility),
            // Over-budget offload sets are penalized, not fatal; the
            // all-local vector keeps the search space non-empty.
            Err(Error::Infeasible(_)) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    };

    // Initial population: all-local plus random vectors.
    let mut population: Vec<Evaluated> = Vec::with_capacity(cfg.population_size);
    {
        let genes = alloc::vec![false; n];
        let utility = fitness(&genes)?;
        population.push(Evaluated { genes, utility });
    }
    while population.len() < cfg.population_size {
        let genes: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        let utility = fitness(&genes)?;
        population.push(Evaluated { genes, utility });
    }

    let mut best_genes = population[0].genes.clone();
    let mut best_utility = population[0].utility;
    for ind in &population {
        if ind.utility < best_utility {
            best_utility = ind.utility;
            best_genes = ind.genes.clone();
        }
    }

    for _ in 0..cfg.generations {
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| {
            population[a]
                .utility
                .partial_cmp(&population[b].utility)
                .unwrap_or(core::cmp::Ordering::Equal)
        });

        let mut next: Vec<Evaluated> = Vec::with_capacity(cfg.population_size);
        for &idx in order.iter().take(cfg.elitism_count) {
            next.push(Evaluated {
                genes: population[idx].genes.clone(),
                utility: population[idx].utility,
            });
        }

        let tournament = |rng: &mut ChaCha8Rng| -> usize {
            let mut best = rng.gen_range(0..population.len());
            for _ in 1..cfg.tournament_size {
                let challenger = rng.gen_range(0..population.len());
                if population[challenger].utility < population[best].utility {
                    best = challenger;
                }
            }
            best
        };

        while next.len() < cfg.population_size {
            let a = tournament(&mut rng);
            let b = tournament(&mut rng);
            let (mut child_a, mut child_b) = if rng.gen_bool(cfg.crossover_rate) {
                let mut ca = Vec::with_capacity(n);
                let mut cb = Vec::with_capacity(n);
                for i in 0..n {
                    if rng.gen_bool(0.5) {
                        ca.push(population[a].genes[i]);
                        cb.push(population[b].genes[i]);
                    } else {
                        ca.push(population[b].genes[i]);
                        cb.push(population[a].genes[i]);
                    }
                }
                (ca, cb)
            } else {
                (population[a].genes.clone(), population[b].genes.clone())
            };
            for child in [&mut child_a, &mut child_b] {
                for bit in child.iter_mut() {
                    if mutation_rate > 0.0 && rng.gen_bool(mutation_rate) {
                        *bit = !*bit;
                    }
                }
            }
            for genes in [child_a, child_b] {
                if next.len() == cfg.population_size {
                    break;
                }
                let utility = fitness(&genes)?;
                if utility < best_utility {
                    best_utility = utility;
                    best_genes = genes.clone();
                }
                next.push(Evaluated { genes, utility });
            }
        }
        population = next;
    }

    if !best_utility.is_finite() {
        return Err(Error::Infeasible(String::from(
            "no feasible offload vector found",
        )));
    }
    let (schedule, utility) = solve_resources_given_m(instance, &best_genes, params, oracle_cfg)?;
    Ok(LabeledInstance {
        instance: instance.clone(),
        schedule,
        utility,
        solver_tag: String::from("ga"),
    })
}

/// Seed for the `index`-th instance of a batch; fixed derivation so
/// batch results are independent of worker count and ordering.
pub fn batch_seed(base_seed: u64, index: usize) -> u64 {
    base_seed ^ index as u64
}
