#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reserve_lab::{Mode, RunOffTriangle};

/// Triangle with a multiplicative cohort-level x development-pattern mean
/// and lognormal-ish noise; every increment is positive.
pub fn random_triangle(rng: &mut impl Rng, m: usize) -> RunOffTriangle {
    let decay: f64 = rng.random_range(0.35..0.8);
    let rows = (0..=m)
        .map(|k| {
            let level = 1000.0 * rng.random_range(0.5..2.0) * (1.0 + 0.03 * k as f64);
            (0..=m - k)
                .map(|j| {
                    let noise: f64 = rng.random_range(-0.25..0.25);
                    (level * decay.powi(j as i32) * noise.exp()).max(0.5)
                })
                .collect()
        })
        .collect();
    RunOffTriangle::from_incremental_rows(rows, Mode::Strict).unwrap()
}

/// `n` seeded triangles with `m` cycling through `3..=12`.
pub fn random_triangles(seed: u64, n: usize) -> Vec<RunOffTriangle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| random_triangle(&mut rng, 3 + i % 10))
        .collect()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
