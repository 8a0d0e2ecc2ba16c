//! Reproducible random streams.
//!
//! Every generator in the crate draws from xoshiro256++ seeded through
//! splitmix64 (`seed_from_u64`). Independent sub-streams of one seed are
//! obtained with the generator's `jump()` function, which advances the state by
//! 2¹²⁸ steps, so stream `k` never overlaps stream `k+1`.

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::linalg::Vector;

pub type StreamRng = Xoshiro256PlusPlus;

pub fn seeded(seed: u64) -> StreamRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// The `index`-th non-overlapping sub-stream of `seed`.
pub fn substream(seed: u64, index: u32) -> StreamRng {
    let mut rng = seeded(seed);
    for _ in 0..index {
        rng.jump();
    }
    rng
}

/// Uniform point on the unit sphere in `R^d`.
pub fn unit_sphere(rng: &mut StreamRng, d: usize) -> Vector {
    loop {
        let v = Vector::from_fn(d, |_, _| StandardNormal.sample(rng));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Uniform point in the closed unit ball of `R^d`.
pub fn unit_ball(rng: &mut StreamRng, d: usize) -> Vector {
    use rand::Rng;
    let r: f64 = rng.random::<f64>().powf(1.0 / d as f64);
    unit_sphere(rng, d) * r
}
