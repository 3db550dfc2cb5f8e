use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use super::{InitialCondition, MatchedChannel, NoiseLayout, SystemModel, Uncertainty};
use crate::error::{Error, Result};
use crate::types::layout::dubins::*;
use crate::types::{ControlVector, DesiredState, Dims, ParamVector, StateVector};

/// Planar unicycle with force and moment inputs, tracked by a PD law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DubinsCar {
    /// [kg]
    pub mass: f64,
    /// [kg m^2]
    pub inertia: f64,
}

impl Default for DubinsCar {
    fn default() -> Self {
        Self {
            mass: 1.0,
            inertia: 1.0,
        }
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let w = angle.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

struct Errors {
    heading: Vector2<f64>,
    pos: Vector2<f64>,
    vel: Vector2<f64>,
    yaw: f64,
    yaw_rate: f64,
    /// `k_p e_p + k_v e_v + a_hat`
    accel_cmd: Vector2<f64>,
}

impl DubinsCar {
    pub fn new(mass: f64, inertia: f64) -> Result<Self> {
        if !(mass > 0.0 && inertia > 0.0) {
            return Err(Error::Invalid(format!(
                "car mass and inertia must be positive, got {mass}, {inertia}"
            )));
        }
        Ok(Self { mass, inertia })
    }

    fn check_dims(x: &StateVector, d: &DesiredState, theta: &ParamVector) -> Result<()> {
        if x.len() != N {
            return Err(Error::dim("car state", N, x.len()));
        }
        if d.state.len() != N || d.feedforward.len() != FF_LEN {
            return Err(Error::dim(
                "car desired state",
                format!("{N}+{FF_LEN}"),
                format!("{}+{}", d.state.len(), d.feedforward.len()),
            ));
        }
        if theta.len() != P {
            return Err(Error::dim("car gains", P, theta.len()));
        }
        Ok(())
    }

    fn errors(x: &StateVector, d: &DesiredState, theta: &ParamVector) -> Errors {
        let (s, c) = x[YAW].sin_cos();
        let heading = Vector2::new(c, s);
        let (sd, cd) = d.state[YAW].sin_cos();
        let pos = Vector2::new(d.state[X] - x[X], d.state[Y] - x[Y]);
        let vel = Vector2::new(cd, sd) * d.state[SPEED] - heading * x[SPEED];
        let ff = Vector2::new(
            d.feedforward[FF_ACCEL.start],
            d.feedforward[FF_ACCEL.start + 1],
        );
        Errors {
            heading,
            pos,
            vel,
            yaw: wrap_angle(d.state[YAW] - x[YAW]),
            yaw_rate: d.state[YAW_RATE] - x[YAW_RATE],
            accel_cmd: pos * theta[K_P] + vel * theta[K_V] + ff,
        }
    }
}

impl SystemModel for DubinsCar {
    fn dims(&self) -> Dims {
        Dims { n: N, m: M, p: P }
    }

    fn position_indices(&self) -> Vec<usize> {
        POSITION.collect()
    }

    fn dynamics(&self, x: &StateVector, u: &ControlVector) -> StateVector {
        let (s, c) = x[YAW].sin_cos();
        DVector::from_vec(vec![
            x[SPEED] * c,
            x[SPEED] * s,
            x[YAW_RATE],
            u[FORCE] / self.mass,
            u[MOMENT] / self.inertia,
        ])
    }

    fn dynamics_jacobians(
        &self,
        x: &StateVector,
        _u: &ControlVector,
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        let (s, c) = x[YAW].sin_cos();
        let mut a = DMatrix::zeros(N, N);
        a[(X, YAW)] = -x[SPEED] * s;
        a[(X, SPEED)] = c;
        a[(Y, YAW)] = x[SPEED] * c;
        a[(Y, SPEED)] = s;
        a[(YAW, YAW_RATE)] = 1.0;
        let mut b = DMatrix::zeros(N, M);
        b[(SPEED, FORCE)] = 1.0 / self.mass;
        b[(YAW_RATE, MOMENT)] = 1.0 / self.inertia;
        (a, b)
    }

    fn plant_dynamics(
        &self,
        x: &StateVector,
        u: &ControlVector,
        t: f64,
        uncertainty: &Uncertainty,
    ) -> StateVector {
        let mut u = u.clone();
        u[FORCE] += 0.1 * uncertainty.force_amplitude * t.sin();
        u[MOMENT] += 0.1 * uncertainty.moment_amplitude * t.cos();
        self.dynamics(x, &u)
    }

    fn control(
        &self,
        x: &StateVector,
        d: &DesiredState,
        theta: &ParamVector,
    ) -> Result<ControlVector> {
        Self::check_dims(x, d, theta)?;
        let e = Self::errors(x, d, theta);
        let force = self.mass * e.accel_cmd.dot(&e.heading);
        let moment = self.inertia
            * (theta[K_YAW] * e.yaw + theta[K_YAW_RATE] * e.yaw_rate + d.feedforward[FF_YAW_ACCEL]);
        Ok(DVector::from_vec(vec![force, moment]))
    }

    fn control_jacobians(
        &self,
        x: &StateVector,
        d: &DesiredState,
        theta: &ParamVector,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        Self::check_dims(x, d, theta)?;
        let e = Self::errors(x, d, theta);
        let m = self.mass;
        let j = self.inertia;
        let normal = Vector2::new(-e.heading.y, e.heading.x);

        let mut jx = DMatrix::zeros(M, N);
        jx[(FORCE, X)] = -m * theta[K_P] * e.heading.x;
        jx[(FORCE, Y)] = -m * theta[K_P] * e.heading.y;
        // the velocity error rotates with the heading orthogonally to q, so
        // only the projection direction contributes
        jx[(FORCE, YAW)] = m * e.accel_cmd.dot(&normal);
        jx[(FORCE, SPEED)] = -m * theta[K_V];
        jx[(MOMENT, YAW)] = -j * theta[K_YAW];
        jx[(MOMENT, YAW_RATE)] = -j * theta[K_YAW_RATE];

        let mut jt = DMatrix::zeros(M, P);
        jt[(FORCE, K_P)] = m * e.pos.dot(&e.heading);
        jt[(FORCE, K_V)] = m * e.vel.dot(&e.heading);
        jt[(MOMENT, K_YAW)] = j * e.yaw;
        jt[(MOMENT, K_YAW_RATE)] = j * e.yaw_rate;
        Ok((jx, jt))
    }

    fn noise_layout(&self) -> NoiseLayout {
        NoiseLayout {
            position: POSITION.collect(),
            velocity: vec![SPEED],
            angular_velocity: vec![YAW_RATE],
        }
    }

    fn initial_state(&self, d: &DesiredState, ic: InitialCondition) -> StateVector {
        let mut x = d.state.clone();
        if ic == InitialCondition::AtRest {
            x[SPEED] = 0.0;
            x[YAW_RATE] = 0.0;
        }
        x
    }

    fn matched_channel(&self) -> Option<MatchedChannel> {
        Some(MatchedChannel {
            state_indices: vec![SPEED, YAW_RATE],
            control_indices: vec![FORCE, MOMENT],
        })
    }

    fn matched_drift(&self, _x: &StateVector) -> DVector<f64> {
        DVector::zeros(2)
    }

    fn matched_input_matrix(&self, _x: &StateVector) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(vec![
            1.0 / self.mass,
            1.0 / self.inertia,
        ]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::discrete_step;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn desired(state: &[f64], ff: &[f64]) -> DesiredState {
        DesiredState {
            state: v(state),
            feedforward: v(ff),
        }
    }

    #[test]
    fn unit_speed_along_x() {
        let car = DubinsCar::new(1.0, 1.0).unwrap();
        let rate = car.dynamics(&v(&[0.0, 0.0, 0.0, 1.0, 0.0]), &v(&[0.0, 0.0]));
        assert_eq!(rate, v(&[1.0, 0.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn heading_north_with_inputs() {
        let car = DubinsCar::new(2.0, 4.0).unwrap();
        let rate = car.dynamics(&v(&[0.0, 0.0, FRAC_PI_2, 2.0, 0.0]), &v(&[1.0, 2.0]));
        let expected = [0.0, 2.0, 0.0, 0.5, 0.5];
        for (a, b) in rate.iter().zip(expected) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn controller_at_equilibrium_is_zero() {
        let car = DubinsCar::default();
        let x = v(&[1.0, 2.0, 0.3, 1.5, 0.2]);
        let d = desired(x.as_slice(), &[0.0, 0.0, 0.0]);
        let u = car.control(&x, &d, &v(&[3.0, 3.0, 3.0, 3.0])).unwrap();
        assert_relative_eq!(u[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(u[1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn controller_position_error_maps_to_force() {
        let car = DubinsCar::new(1.0, 1.0).unwrap();
        let x = v(&[0.0, 0.0, 0.0, 0.0, 0.0]);
        let d = desired(&[1.0, 0.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 0.0]);
        let u = car.control(&x, &d, &v(&[2.0, 1.0, 1.0, 1.0])).unwrap();
        assert_eq!(u[FORCE], 2.0);
    }

    #[test]
    fn controller_yaw_error_maps_to_moment() {
        let car = DubinsCar::new(1.0, 2.0).unwrap();
        let x = v(&[0.0, 0.0, 0.0, 0.0, 0.0]);
        let d = desired(&[0.0, 0.0, 0.5, 0.0, 0.0], &[0.0, 0.0, 0.0]);
        let u = car.control(&x, &d, &v(&[1.0, 1.0, 4.0, 1.0])).unwrap();
        assert_eq!(u[MOMENT], 4.0);
    }

    #[test]
    fn yaw_error_wraps() {
        assert_relative_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-15);
        assert_eq!(wrap_angle(PI), PI);
        assert_relative_eq!(wrap_angle(-PI), PI, epsilon = 1e-15);
        let car = DubinsCar::default();
        let x = v(&[0.0, 0.0, 3.0, 0.0, 0.0]);
        let d = desired(&[0.0, 0.0, -3.0, 0.0, 0.0], &[0.0, 0.0, 0.0]);
        let u = car.control(&x, &d, &v(&[1.0, 1.0, 1.0, 1.0])).unwrap();
        assert_relative_eq!(u[MOMENT], 2.0 * PI - 6.0, epsilon = 1e-12);
    }

    #[test]
    fn param_jacobian_independent_of_gains() {
        let car = DubinsCar::new(1.3, 0.7).unwrap();
        let x = v(&[0.2, -0.1, 0.4, 0.9, 0.1]);
        let d = desired(&[0.0, 0.3, 0.2, 1.1, -0.2], &[0.1, -0.3, 0.05]);
        let (_, a) = car
            .control_jacobians(&x, &d, &v(&[1.0, 2.0, 3.0, 4.0]))
            .unwrap();
        let (_, b) = car
            .control_jacobians(&x, &d, &v(&[9.0, 0.5, 7.0, 0.1]))
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn euler_step() {
        let car = DubinsCar::default();
        let x = v(&[0.0, 0.0, 0.0, 1.0, 0.0]);
        let u = v(&[0.0, 0.0]);
        assert_eq!(discrete_step(&car, &x, &u, 0.0), x);
        assert_eq!(
            discrete_step(&car, &x, &u, 0.01),
            v(&[0.01, 0.0, 0.0, 1.0, 0.0])
        );
    }

    #[test]
    fn force_uncertainty_enters_speed_rate() {
        let car = DubinsCar::new(2.0, 1.0).unwrap();
        let x = v(&[0.0, 0.0, 0.0, 1.0, 0.0]);
        let u = v(&[0.0, 0.0]);
        let t = 0.7;
        let unc = Uncertainty {
            force_amplitude: 1.0,
            ..Default::default()
        };
        let rate = car.plant_dynamics(&x, &u, t, &unc);
        assert_relative_eq!(rate[SPEED], 0.1 * t.sin() / 2.0, epsilon = 1e-15);
        assert_eq!(rate[YAW_RATE], 0.0);
    }
}
