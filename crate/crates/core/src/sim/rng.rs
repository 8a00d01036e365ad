//! Named random-number streams derived from one master seed.
//!
//! Each stream is seeded from a hash of `(master_seed, label)`, so adding a
//! new consumer never shifts the draws of an existing one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, Normal, Uniform};

use super::SimError;

/// Distributions a stream can draw from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dist {
    /// Half-open `[low, high)`.
    Uniform { low: f64, high: f64 },
    /// Parameterised by variance, not standard deviation.
    Normal { mean: f64, variance: f64 },
    Gamma { shape: f64, scale: f64 },
    Exponential { rate: f64 },
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn label_hash(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Seed derived for `(master_seed, label)`.
pub fn derive_seed(master_seed: u64, label: &str) -> u64 {
    splitmix64(splitmix64(master_seed) ^ label_hash(label))
}

#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    label: String,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, label: &str) -> Self {
        Self {
            master_seed,
            label: label.to_owned(),
            rng: ChaCha8Rng::seed_from_u64(derive_seed(master_seed, label)),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// A child stream labelled `"{self.label}.{suffix}"`.
    pub fn substream(&self, suffix: &str) -> RngStream {
        RngStream::new(self.master_seed, &format!("{}.{}", self.label, suffix))
    }

    pub fn draw(&mut self, dist: Dist) -> Result<f64, SimError> {
        let invalid = || SimError::InvalidDistParams(dist);
        let v = match dist {
            Dist::Uniform { low, high } => {
                if !(low < high) || !low.is_finite() || !high.is_finite() {
                    return Err(invalid());
                }
                Uniform::new(low, high)
                    .map_err(|_| invalid())?
                    .sample(&mut self.rng)
            }
            Dist::Normal { mean, variance } => {
                if !(variance > 0.0) || !mean.is_finite() {
                    return Err(invalid());
                }
                Normal::new(mean, variance.sqrt())
                    .map_err(|_| invalid())?
                    .sample(&mut self.rng)
            }
            Dist::Gamma { shape, scale } => {
                if !(shape > 0.0 && scale > 0.0) {
                    return Err(invalid());
                }
                Gamma::new(shape, scale)
                    .map_err(|_| invalid())?
                    .sample(&mut self.rng)
            }
            Dist::Exponential { rate } => {
                if !(rate > 0.0) {
                    return Err(invalid());
                }
                Exp::new(rate).map_err(|_| invalid())?.sample(&mut self.rng)
            }
        };
        Ok(v)
    }

    /// `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform integer in `[0, max]`.
    pub fn int_inclusive(&mut self, max: u32) -> u32 {
        self.rng.random_range(0..=max)
    }

    /// Uniform index in `[0, n)`; `n` must be non-zero.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }
}
