//! Seeded, splittable randomness.
//!
//! Every randomized routine in the crate takes an explicit generator. Seeds
//! are split two ways:
//!
//! * replicate `i` of an experiment with base seed `b` uses seed
//!   `b.wrapping_add(i)` ([`replicate_seed`]);
//! * within one seed, independent purposes (data generation, subsampling,
//!   noise) use distinct ChaCha streams of the same key ([`stream_rng`]).
//!
//! ChaCha20 output is platform independent, so seeded runs are bit
//! reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

pub type DpRng = ChaCha20Rng;

/// Stream used for synthetic data.
pub const STREAM_DATA: u64 = 0;
/// Stream used for subsampling masks.
pub const STREAM_SUBSAMPLE: u64 = 1;
/// Stream used for privacy noise.
pub const STREAM_NOISE: u64 = 2;
/// Stream used for train/validation splits and other bookkeeping draws.
pub const STREAM_SPLIT: u64 = 3;

pub fn seeded(seed: u64) -> DpRng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn stream_rng(seed: u64, stream: u64) -> DpRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn replicate_seed(base: u64, index: u64) -> u64 {
    base.wrapping_add(index)
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// `d` i.i.d. draws from `N(0, scale^2)`.
pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| scale * standard_normal(rng)).collect()
}

/// Laplace(0, scale) by inverting the CDF of a uniform draw on (-1/2, 1/2).
pub fn laplace<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> f64 {
    let u: f64 = rng.random::<f64>() - 0.5;
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Uniform draw on the unit sphere in `R^d` (normalized Gaussian).
pub fn unit_sphere<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v = gaussian_vector(rng, d, 1.0);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}
