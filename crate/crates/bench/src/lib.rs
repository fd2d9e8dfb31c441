//! Fixed inputs shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use paneitz_core::cnc::generate::random_conformal_normal_jet;
use paneitz_core::cnc::CurvatureJet;
use paneitz_core::Point;

pub const SEED: u64 = 42;

/// `n` points with `|y| ≤ rmax`, uniform in radius.
pub fn sample_points(n: usize, rmax: f64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    (0..n)
        .map(|_| {
            let g: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let s = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            let r = rng.random_range(0.0..rmax);
            g.map(|v| v * r / s)
        })
        .collect()
}

pub fn jet() -> CurvatureJet {
    random_conformal_normal_jet(&mut ChaCha8Rng::seed_from_u64(SEED))
}
