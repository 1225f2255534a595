//! Instance sampling and feature normalization.
//!
//! Volumes and cycle counts are sampled uniformly in their ranges; the
//! channel gain is sampled log-uniformly (`h = 10^x`). The normalizer
//! is a per-feature affine map fitted on the training corpus; values
//! outside the fitted bounds are deliberately not clamped so the pad
//! token `-1` stays distinguishable from real features.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::model::{Instance, SystemParams, TaskInfo};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InstanceDistribution {
    /// Uplink volume range (bits).
    pub u_range: (f64, f64),
    /// CPU cycle range.
    pub c_range: (f64, f64),
    /// Downlink volume range (bits).
    pub d_range: (f64, f64),
    /// Channel gain exponent range; `h = 10^x`, `x` uniform.
    pub h_log10_range: (f64, f64),
    /// Access counts to generate datasets for.
    pub n_values: Vec<usize>,
    pub seed: u64,
}

impl Default for InstanceDistribution {
    fn default() -> Self {
        // Ranges are wide enough that both local execution and
        // offloading win on a substantial share of tasks under the
        // default system parameters: heavy downlink on a weak channel
        // outweighs the server's cheaper CPU roughly half the time
        // (measured with the exact solver on small instances).
        Self {
            u_range: (1e5, 1e6),
            c_range: (1e8, 2e9),
            d_range: (1e5, 2e8),
            h_log10_range: (-10.0, -7.0),
            n_values: alloc::vec![10, 20, 40],
            seed: 0,
        }
    }
}

impl InstanceDistribution {
    pub fn validate(&self) -> Result<()> {
        for (lo, hi) in [self.u_range, self.c_range, self.d_range, self.h_log10_range] {
            if !(lo <= hi) {
                return Err(Error::InvalidArgument(String::from(
                    "distribution ranges must satisfy min <= max",
                )));
            }
        }
        if self.u_range.0 < 0.0 || self.c_range.0 <= 0.0 || self.d_range.0 < 0.0 {
            return Err(Error::InvalidArgument(String::from(
                "volumes must be non-negative and cycles positive",
            )));
        }
        if self.n_values.is_empty() {
            return Err(Error::InvalidArgument(String::from(
                "n_values must be non-empty",
            )));
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

/// Samples one instance of `n` tasks; deterministic per seed.
pub fn sample_instance(
    dist: &InstanceDistribution,
    n: usize,
    seed: u64,
    params: &SystemParams,
) -> Result<Instance> {
    dist.validate()?;
    if n == 0 || n > params.n_bar {
        return Err(Error::InvalidArgument(alloc::format!(
            "instance size {n} outside [1, {}]",
            params.n_bar
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tasks: Vec<TaskInfo> = (0..n)
        .map(|_| {
            let u = uniform(&mut rng, dist.u_range);
            let c = uniform(&mut rng, dist.c_range);
            let d = uniform(&mut rng, dist.d_range);
            let h = math::powf(10.0, uniform(&mut rng, dist.h_log10_range));
            TaskInfo::symmetric(u, c, d, h)
        })
        .collect();
    Instance::new(tasks)
}

pub const FEATURE_COUNT: usize = 4;

/// Per-feature min/max affine map onto `[0, 1]`, fitted on the
/// training corpus and persisted with the dataset manifest.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Normalizer {
    pub min: [f64; FEATURE_COUNT],
    pub max: [f64; FEATURE_COUNT],
}

impl Normalizer {
    /// Fits bounds over an iterator of feature quads.
    pub fn fit<'a, I: IntoIterator<Item = &'a [f64; FEATURE_COUNT]>>(rows: I) -> Result<Self> {
        let mut min = [f64::INFINITY; FEATURE_COUNT];
        let mut max = [f64::NEG_INFINITY; FEATURE_COUNT];
        let mut count = 0usize;
        for row in rows {
            count += 1;
            for j in 0..FEATURE_COUNT {
                min[j] = min[j].min(row[j]);
                max[j] = max[j].max(row[j]);
            }
        }
        if count == 0 {
            return Err(Error::InvalidState(String::from(
                "cannot fit normalizer on an empty corpus",
            )));
        }
        for j in 0..FEATURE_COUNT {
            if !(max[j] > min[j]) {
                // Degenerate feature: widen symmetrically so apply/invert
                // stay well defined.
                let pad = min[j].abs().max(1.0) * 1e-9;
                min[j] -= pad;
                max[j] += pad;
            }
        }
        Ok(Self { min, max })
    }

    pub fn validate(&self) -> Result<()> {
        for j in 0..FEATURE_COUNT {
            if !(self.max[j] > self.min[j]) {
                return Err(Error::InvalidState(String::from(
                    "normalizer bounds must satisfy max > min",
                )));
            }
        }
        Ok(())
    }

    /// Maps a feature quad toward `[0, 1]`; out-of-corpus values land
    /// outside the unit interval on purpose.
    pub fn apply(&self, features: &[f64; FEATURE_COUNT]) -> [f64; FEATURE_COUNT] {
        core::array::from_fn(|j| (features[j] - self.min[j]) / (self.max[j] - self.min[j]))
    }

    pub fn invert(&self, normalized: &[f64; FEATURE_COUNT]) -> [f64; FEATURE_COUNT] {
        core::array::from_fn(|j| normalized[j] * (self.max[j] - self.min[j]) + self.min[j])
    }
}
