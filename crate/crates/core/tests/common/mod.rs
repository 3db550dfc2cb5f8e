#![allow(dead_code)]

use nalgebra::{DVector, Matrix3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use senstune_core::so3::flatten_rotation;
use senstune_core::types::layout::quadrotor as q;
use senstune_core::ParamVector;

pub const QUAD_GAINS: [f64; 4] = [16.0, 5.6, 8.81, 2.54];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn quad_nominal() -> ParamVector {
    let mut theta = DVector::zeros(q::P);
    for (g, r) in QUAD_GAINS.iter().zip([q::K_P, q::K_V, q::K_R, q::K_OMEGA]) {
        for i in r {
            theta[i] = *g;
        }
    }
    theta
}

/// Nominal quadrotor gains scaled componentwise by factors in [0.5, 1.5].
pub fn random_quad_gains(rng: &mut ChaCha8Rng) -> ParamVector {
    quad_nominal().map(|g| g * rng.random_range(0.5..1.5))
}

pub fn random_car_gains(rng: &mut ChaCha8Rng) -> ParamVector {
    DVector::from_fn(4, |_, _| rng.random_range(1.0..20.0))
}

pub fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    let axis = Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    let angle = rng.random_range(0.0..0.8);
    *Rotation3::from_scaled_axis(axis.normalize() * angle).matrix()
}

pub fn random_quad_state(rng: &mut ChaCha8Rng) -> DVector<f64> {
    let mut x = DVector::from_fn(q::N, |_, _| rng.random_range(-1.0..1.0));
    x.as_mut_slice()[q::ROTATION].copy_from_slice(&flatten_rotation(&random_rotation(rng)));
    x
}
