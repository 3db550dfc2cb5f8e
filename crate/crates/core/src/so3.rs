//! Rotation-matrix helpers: the hat/vee maps and the row-major flattening
//! used to carry an attitude inside a flat state vector.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Largest tolerated `|S + S^T|_F` before `vee` refuses a matrix.
pub const SKEW_TOLERANCE: f64 = 1e-9;

/// Skew-symmetric matrix such that `hat(w) * v == w.cross(v)`.
pub fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Inverse of [`hat`]. The input is symmetrized before extraction, so
/// round-off asymmetry up to [`SKEW_TOLERANCE`] is absorbed.
pub fn vee(s: &Matrix3<f64>) -> Result<Vector3<f64>> {
    let asymmetry = (s + s.transpose()).norm();
    if asymmetry > SKEW_TOLERANCE || !asymmetry.is_finite() {
        return Err(Error::NotSkewSymmetric { asymmetry });
    }
    Ok(vee_unchecked(s))
}

/// `vee` of the skew part of `s`, without the symmetry check.
pub(crate) fn vee_unchecked(s: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (s[(2, 1)] - s[(1, 2)]),
        0.5 * (s[(0, 2)] - s[(2, 0)]),
        0.5 * (s[(1, 0)] - s[(0, 1)]),
    )
}

/// Row-major flattening: `out[3 * i + j] = r[(i, j)]`.
pub fn flatten_rotation(r: &Matrix3<f64>) -> [f64; 9] {
    let mut out = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            out[3 * i + j] = r[(i, j)];
        }
    }
    out
}

pub fn unflatten_rotation(flat: &[f64]) -> Matrix3<f64> {
    debug_assert!(flat.len() >= 9);
    Matrix3::from_row_slice(&flat[..9])
}

/// `|R^T R - I|_F`
pub fn orthonormality_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).norm()
}

/// Nearest rotation matrix in the Frobenius sense (polar factor `U V^T`).
pub fn project_to_so3(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return *r,
    };
    let mut polar = u * v_t;
    if polar.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        polar = u * v_t;
    }
    polar
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Rotation3;
    use proptest::prelude::*;

    #[test]
    fn hat_of_zero_is_zero() {
        assert_eq!(hat(&Vector3::zeros()), Matrix3::zeros());
    }

    #[test]
    fn hat_is_cross_product() {
        let v = hat(&Vector3::z()) * Vector3::x();
        assert_eq!(v, Vector3::y());
    }

    #[test]
    fn vee_inverts_hat() {
        let w = Vector3::new(1.0, 2.0, 3.0);
        assert_eq!(vee(&hat(&w)).unwrap(), w);
    }

    #[test]
    fn vee_rejects_symmetric_input() {
        let s = Matrix3::new(0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert!(matches!(vee(&s), Err(Error::NotSkewSymmetric { .. })));
    }

    #[test]
    fn flatten_identity() {
        assert_eq!(
            flatten_rotation(&Matrix3::identity()),
            [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]
        );
    }

    #[test]
    fn flatten_quarter_turn_about_z() {
        let r = Rotation3::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2);
        let flat = flatten_rotation(r.matrix());
        let expected = [0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        for (a, b) in flat.iter().zip(expected) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn flatten_round_trip_on_random_rotations() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let axis = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let r = Rotation3::new(axis * rng.random_range(0.0..3.0));
            let back = unflatten_rotation(&flatten_rotation(r.matrix()));
            assert_eq!(back, *r.matrix());
        }
    }

    #[test]
    fn projection_restores_orthonormality() {
        let r = Rotation3::new(Vector3::new(0.3, -0.2, 1.1));
        let perturbed =
            r.matrix() * 1.01 + Matrix3::new(1e-3, 0.0, 2e-3, 0.0, -1e-3, 0.0, 0.0, 0.0, 0.0);
        let fixed = project_to_so3(&perturbed);
        assert!(orthonormality_error(&fixed) < 1e-14);
        assert!(fixed.determinant() > 0.0);
        assert!((fixed - r.matrix()).norm() < 1e-2);
    }

    proptest! {
        #[test]
        fn hat_matches_cross(
            w in prop::array::uniform3(-10.0f64..10.0),
            v in prop::array::uniform3(-10.0f64..10.0),
        ) {
            let w = Vector3::from(w);
            let v = Vector3::from(v);
            let diff = hat(&w) * v - w.cross(&v);
            prop_assert!(diff.norm() <= 1e-12);
        }
    }
}
