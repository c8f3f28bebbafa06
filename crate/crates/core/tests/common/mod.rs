#![allow(dead_code)]

use glm_optdesign::{LinkFamily, ModelSpec, RegressionKind};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn spec(family: LinkFamily, kind: RegressionKind, beta: &[f64]) -> ModelSpec {
    ModelSpec::new(family, kind, beta.to_vec()).unwrap()
}

pub fn corners2() -> Vec<Vec<f64>> {
    vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `A A' + shift I` from entries in `[-1, 1]`.
pub fn random_pd(rng: &mut impl Rng, p: usize, shift: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(p, p) * shift
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
