#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::DMatrix;
use rand::Rng;
use samgp::data::Dataset;
use samgp::rng::seeded;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(format!("{name}.csv"))
}

/// Smooth nonlinear target with a little noise.
pub fn synthetic(n: usize, p: usize, seed: u64) -> Dataset {
    let mut r = seeded(seed);
    let x: DMatrix<f64> = DMatrix::from_fn(n, p, |_, _| r.random_range(-2.0..2.0));
    let y = (0..n)
        .map(|i| x[(i, 0)] * x[(i, 1 % p)] + x[(i, p - 1)].sin() + r.random_range(-0.1..0.1))
        .collect();
    let names = (0..p).map(|j| format!("v{j}")).collect();
    Dataset::new(x, y, names, "y").unwrap()
}
