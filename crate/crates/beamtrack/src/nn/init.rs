//! Seed-controlled weight initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tensor::{Parameter, Tensor};

/// Deterministic weight initializer: uniform in `±1/sqrt(fan_in)`.
pub struct Initializer {
    rng: ChaCha8Rng,
}

impl Initializer {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Matrix parameter of `rows x cols` with fan-in `fan_in`.
    pub fn matrix(&mut self, rows: usize, cols: usize, fan_in: usize) -> Parameter {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let values = (0..rows * cols)
            .map(|_| self.rng.gen_range(-bound..bound))
            .collect();
        Parameter::new(Tensor::from_values(&[rows, cols], values).expect("init shape"))
    }

    /// Bias-style vector parameter, initialized to zero.
    pub fn zero_vector(&mut self, len: usize) -> Parameter {
        Parameter::zeros(&[len])
    }
}
