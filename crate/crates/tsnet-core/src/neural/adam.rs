//! Adam with the usual defaults (lr 1e-3, betas 0.9/0.999).

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

use super::layers::Params;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(learning_rate: f64, param_count: usize) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
        }
    }

    /// One update from the gradients currently accumulated in `net`.
    pub fn step<P: Params>(&mut self, net: &mut P) {
        self.step += 1;
        let bc1 = 1.0 - math::powf(self.beta1, self.step as f64);
        let bc2 = 1.0 - math::powf(self.beta2, self.step as f64);
        let mut idx = 0;
        net.visit(&mut |p, g| {
            let m = &mut self.m[idx];
            let v = &mut self.v[idx];
            *m = self.beta1 * *m + (1.0 - self.beta1) * *g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * *g * *g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.learning_rate * m_hat / (math::sqrt(v_hat) + self.epsilon);
            idx += 1;
        });
        debug_assert_eq!(idx, self.m.len());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::layers::Linear;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_learning_rate_leaves_params_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut lin = Linear::new(3, 2, &mut rng);
        let before = lin.clone();
        lin.visit(&mut |_, g| *g = 1.0);
        let count = lin.param_count();
        let mut adam = Adam::new(0.0, count);
        adam.step(&mut lin);
        assert_eq!(lin.w, before.w);
        assert_eq!(lin.b, before.b);
    }

    #[test]
    fn step_moves_against_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut lin = Linear::new(1, 1, &mut rng);
        let before = lin.w.at(0, 0);
        lin.visit(&mut |_, g| *g = 1.0);
        let count = lin.param_count();
        let mut adam = Adam::new(1e-2, count);
        adam.step(&mut lin);
        assert!(lin.w.at(0, 0) < before);
    }
}
