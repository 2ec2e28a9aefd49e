//! Seeded parameter initialisers.

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::numerics::Tensor;

/// The RNG used for every seeded draw in this crate.
pub type ModelRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> ModelRng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ModelRng, shape: &[usize], std: f64) -> Tensor {
    let dist = Normal::new(0.0, std).expect("std must be finite and non-negative");
    let n = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| dist.sample(rng)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches data")
}

pub fn uniform(rng: &mut ModelRng, shape: &[usize], bound: f64) -> Tensor {
    let n = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches data")
}

/// Glorot/Xavier uniform for a `fan_in × fan_out` matrix.
pub fn xavier(rng: &mut ModelRng, fan_in: usize, fan_out: usize) -> Tensor {
    let bound = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
    uniform(rng, &[fan_in, fan_out], bound)
}
