use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{InitialCondition, MatchedChannel, NoiseLayout, SystemModel, Uncertainty};
use crate::error::{Error, Result};
use crate::so3::{
    flatten_rotation, hat, orthonormality_error, project_to_so3, unflatten_rotation, vee,
    vee_unchecked,
};
use crate::types::layout::quadrotor::*;
use crate::types::{ControlVector, DesiredState, Dims, ParamVector, StateVector};

/// Largest `|R^T R - I|_F` accepted on a plant state.
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-6;
const SINGULAR_NORM: f64 = 1e-9;

/// Rigid-body quadrotor on SE(3) with collective thrust and body moments,
/// tracked by a geometric controller. The z axis points down, so hover
/// thrust balances `g e3`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrotor {
    mass: f64,
    gravity: f64,
    inertia: Matrix3<f64>,
    inertia_inv: Matrix3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadrotorParams {
    pub mass: f64,
    pub gravity: f64,
    /// Row-major symmetric positive definite inertia matrix [kg m^2].
    pub inertia: [[f64; 3]; 3],
}

impl Default for QuadrotorParams {
    fn default() -> Self {
        Self {
            mass: 4.34,
            gravity: 9.81,
            inertia: [[0.0820, 0.0, 0.0], [0.0, 0.0845, 0.0], [0.0, 0.0, 0.1377]],
        }
    }
}

/// Intermediates of one controller evaluation, reused for the Jacobians.
struct Geometry {
    e_p: Vector3<f64>,
    e_v: Vector3<f64>,
    force: Vector3<f64>,
    force_norm: f64,
    body_z: Vector3<f64>,
    b1c: Vector3<f64>,
    b2d: Vector3<f64>,
    b3d: Vector3<f64>,
    cross_norm: f64,
    r: Matrix3<f64>,
    rd: Matrix3<f64>,
    e_r: Vector3<f64>,
    omega: Vector3<f64>,
    j_omega: Vector3<f64>,
    gains: Gains,
}

struct Gains {
    p: Vector3<f64>,
    v: Vector3<f64>,
    r: Vector3<f64>,
    omega: Vector3<f64>,
}

impl Gains {
    fn from_params(theta: &ParamVector) -> Self {
        Self {
            p: seg3(theta.as_slice(), K_P.start),
            v: seg3(theta.as_slice(), K_V.start),
            r: seg3(theta.as_slice(), K_R.start),
            omega: seg3(theta.as_slice(), K_OMEGA.start),
        }
    }
}

fn seg3(v: &[f64], start: usize) -> Vector3<f64> {
    Vector3::new(v[start], v[start + 1], v[start + 2])
}

impl Quadrotor {
    pub fn new(params: QuadrotorParams) -> Result<Self> {
        let QuadrotorParams {
            mass,
            gravity,
            inertia,
        } = params;
        let j = Matrix3::from_row_slice(&inertia.concat());
        if !(mass > 0.0) || !(gravity > 0.0) {
            return Err(Error::Invalid(format!(
                "quadrotor mass and gravity must be positive, got {mass}, {gravity}"
            )));
        }
        if (j - j.transpose()).norm() > 1e-12 {
            return Err(Error::Invalid("quadrotor inertia must be symmetric".into()));
        }
        if j.cholesky().is_none() {
            return Err(Error::Invalid(
                "quadrotor inertia must be positive definite".into(),
            ));
        }
        let inertia_inv = j
            .try_inverse()
            .ok_or(Error::Singular("quadrotor inertia"))?;
        Ok(Self {
            mass,
            gravity,
            inertia: j,
            inertia_inv,
        })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }

    pub fn inertia(&self) -> &Matrix3<f64> {
        &self.inertia
    }

    pub fn rotation(x: &StateVector) -> Matrix3<f64> {
        unflatten_rotation(&x.as_slice()[ROTATION])
    }

    /// Rates of the rigid body, rejecting attitudes that drifted off SO(3).
    pub fn checked_dynamics(&self, x: &StateVector, u: &ControlVector) -> Result<StateVector> {
        self.check_plant_state(x)?;
        Ok(self.dynamics(x, u))
    }

    fn rates(&self, x: &StateVector, u: &ControlVector, inertia_scale: f64) -> StateVector {
        let s = x.as_slice();
        let v = seg3(s, VELOCITY.start);
        let r = Self::rotation(x);
        let omega = seg3(s, ANGULAR_VELOCITY.start);
        let moment = seg3(u.as_slice(), MOMENT.start);

        let accel = Vector3::z() * self.gravity - r.column(2) * (u[THRUST] / self.mass);
        let r_dot = r * hat(&omega);
        // (beta J)^-1 (M - w x beta J w) = J^-1 (M / beta - w x J w)
        let omega_dot =
            self.inertia_inv * (moment / inertia_scale - omega.cross(&(self.inertia * omega)));

        let mut out = DVector::zeros(N);
        out.as_mut_slice()[POSITION].copy_from_slice(v.as_slice());
        out.as_mut_slice()[VELOCITY].copy_from_slice(accel.as_slice());
        out.as_mut_slice()[ROTATION].copy_from_slice(&flatten_rotation(&r_dot));
        out.as_mut_slice()[ANGULAR_VELOCITY].copy_from_slice(omega_dot.as_slice());
        out
    }

    fn check_dims(x: &StateVector, d: &DesiredState, theta: &ParamVector) -> Result<()> {
        if x.len() != N {
            return Err(Error::dim("quadrotor state", N, x.len()));
        }
        if d.state.len() != N || d.feedforward.len() != FF_LEN {
            return Err(Error::dim(
                "quadrotor desired state",
                format!("{N}+{FF_LEN}"),
                format!("{}+{}", d.state.len(), d.feedforward.len()),
            ));
        }
        if theta.len() != P {
            return Err(Error::dim("quadrotor gains", P, theta.len()));
        }
        Ok(())
    }

    fn geometry(&self, x: &StateVector, d: &DesiredState, theta: &ParamVector) -> Result<Geometry> {
        Self::check_dims(x, d, theta)?;
        let s = x.as_slice();
        let ds = d.state.as_slice();
        let gains = Gains::from_params(theta);

        let e_p = seg3(s, POSITION.start) - seg3(ds, POSITION.start);
        let e_v = seg3(s, VELOCITY.start) - seg3(ds, VELOCITY.start);
        let accel_ff = seg3(d.feedforward.as_slice(), FF_ACCEL.start);
        let a_des = accel_ff - gains.p.component_mul(&e_p) - gains.v.component_mul(&e_v);
        let force = (Vector3::z() * self.gravity - a_des) * self.mass;
        let force_norm = force.norm();
        if force_norm < SINGULAR_NORM {
            return Err(Error::ControllerSingularity(
                "commanded force vanishes (free fall)",
            ));
        }
        let b3d = force / force_norm;
        let yaw = d.feedforward[FF_YAW];
        let b1c = Vector3::new(yaw.cos(), yaw.sin(), 0.0);
        let cross = b3d.cross(&b1c);
        let cross_norm = cross.norm();
        if cross_norm < SINGULAR_NORM {
            return Err(Error::ControllerSingularity(
                "thrust axis aligned with desired heading",
            ));
        }
        let b2d = cross / cross_norm;
        let b1d = b2d.cross(&b3d);
        let rd = Matrix3::from_columns(&[b1d, b2d, b3d]);

        let r = Self::rotation(x);
        let a = rd.transpose() * r;
        let e_r = vee(&(a - a.transpose()))? * 0.5;
        let omega = seg3(s, ANGULAR_VELOCITY.start);
        Ok(Geometry {
            e_p,
            e_v,
            force,
            force_norm,
            body_z: r.column(2).into_owned(),
            b1c,
            b2d,
            b3d,
            cross_norm,
            r,
            rd,
            e_r,
            omega,
            j_omega: self.inertia * omega,
            gains,
        })
    }

    fn output(g: &Geometry) -> ControlVector {
        let thrust = g.force.dot(&g.body_z);
        let moment = -g.gains.r.component_mul(&g.e_r) - g.gains.omega.component_mul(&g.omega)
            + g.omega.cross(&g.j_omega);
        DVector::from_vec(vec![thrust, moment.x, moment.y, moment.z])
    }

    /// Directional derivative of the controller output along a state tangent
    /// `dx` (length n) and a gain tangent `dtheta` (length p).
    fn tangent(&self, g: &Geometry, dx: &[f64], dtheta: &[f64]) -> [f64; M] {
        let dk_p = seg3(dtheta, K_P.start);
        let dk_v = seg3(dtheta, K_V.start);
        let dk_r = seg3(dtheta, K_R.start);
        let dk_w = seg3(dtheta, K_OMEGA.start);
        let dp = seg3(dx, POSITION.start);
        let dv = seg3(dx, VELOCITY.start);
        let dr = unflatten_rotation(&dx[ROTATION]);
        let dw = seg3(dx, ANGULAR_VELOCITY.start);

        let da = -(dk_p.component_mul(&g.e_p) + g.gains.p.component_mul(&dp))
            - (dk_v.component_mul(&g.e_v) + g.gains.v.component_mul(&dv));
        let dforce = -da * self.mass;
        let dbody_z = dr.column(2).into_owned();
        let dthrust = dforce.dot(&g.body_z) + g.force.dot(&dbody_z);

        let db3d = (dforce - g.b3d * g.b3d.dot(&dforce)) / g.force_norm;
        let dcross = db3d.cross(&g.b1c);
        let db2d = (dcross - g.b2d * g.b2d.dot(&dcross)) / g.cross_norm;
        let db1d = db2d.cross(&g.b3d) + g.b2d.cross(&db3d);
        let drd = Matrix3::from_columns(&[db1d, db2d, db3d]);

        let da_mat = drd.transpose() * g.r + g.rd.transpose() * dr;
        let de_r = vee_unchecked(&(da_mat - da_mat.transpose())) * 0.5;

        let dmoment = -(dk_r.component_mul(&g.e_r) + g.gains.r.component_mul(&de_r))
            - (dk_w.component_mul(&g.omega) + g.gains.omega.component_mul(&dw))
            + dw.cross(&g.j_omega)
            + g.omega.cross(&(self.inertia * dw));
        [dthrust, dmoment.x, dmoment.y, dmoment.z]
    }
}

impl SystemModel for Quadrotor {
    fn dims(&self) -> Dims {
        Dims { n: N, m: M, p: P }
    }

    fn position_indices(&self) -> Vec<usize> {
        POSITION.collect()
    }

    fn dynamics(&self, x: &StateVector, u: &ControlVector) -> StateVector {
        self.rates(x, u, 1.0)
    }

    fn dynamics_jacobians(
        &self,
        x: &StateVector,
        u: &ControlVector,
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        let s = x.as_slice();
        let r = Self::rotation(x);
        let omega = seg3(s, ANGULAR_VELOCITY.start);
        let w_hat = hat(&omega);
        let mut a = DMatrix::zeros(N, N);
        let mut b = DMatrix::zeros(N, M);

        for i in 0..3 {
            a[(POSITION.start + i, VELOCITY.start + i)] = 1.0;
            // v_dot_i = g e3_i - (f / m) R_i2
            a[(VELOCITY.start + i, ROTATION.start + 3 * i + 2)] = -u[THRUST] / self.mass;
            b[(VELOCITY.start + i, THRUST)] = -r[(i, 2)] / self.mass;
        }

        // R_dot = R hat(w): d(R_dot)_ij / dR_ik = hat(w)_kj
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    a[(ROTATION.start + 3 * i + j, ROTATION.start + 3 * i + k)] = w_hat[(k, j)];
                }
            }
        }
        for l in 0..3 {
            let dr = r * hat(&Vector3::ith(l, 1.0));
            for i in 0..3 {
                for j in 0..3 {
                    a[(ROTATION.start + 3 * i + j, ANGULAR_VELOCITY.start + l)] = dr[(i, j)];
                }
            }
        }

        // d/dw of -J^-1 (w x J w) = -J^-1 (hat(w) J - hat(J w))
        let dgyro = -self.inertia_inv * (w_hat * self.inertia - hat(&(self.inertia * omega)));
        for i in 0..3 {
            for j in 0..3 {
                a[(ANGULAR_VELOCITY.start + i, ANGULAR_VELOCITY.start + j)] = dgyro[(i, j)];
                b[(ANGULAR_VELOCITY.start + i, MOMENT.start + j)] = self.inertia_inv[(i, j)];
            }
        }
        (a, b)
    }

    fn plant_dynamics(
        &self,
        x: &StateVector,
        u: &ControlVector,
        _t: f64,
        uncertainty: &Uncertainty,
    ) -> StateVector {
        self.rates(x, u, uncertainty.inertia_scale)
    }

    fn check_plant_state(&self, x: &StateVector) -> Result<()> {
        let deviation = orthonormality_error(&Self::rotation(x));
        if deviation > ORTHONORMAL_TOLERANCE || !deviation.is_finite() {
            return Err(Error::NotOrthonormal { deviation });
        }
        Ok(())
    }

    fn manifold_error(&self, x: &StateVector) -> f64 {
        orthonormality_error(&Self::rotation(x))
    }

    fn project_plant_state(&self, x: &mut StateVector) {
        let r = project_to_so3(&Self::rotation(x));
        x.as_mut_slice()[ROTATION].copy_from_slice(&flatten_rotation(&r));
    }

    fn control(
        &self,
        x: &StateVector,
        d: &DesiredState,
        theta: &ParamVector,
    ) -> Result<ControlVector> {
        Ok(Self::output(&self.geometry(x, d, theta)?))
    }

    fn control_jacobians(
        &self,
        x: &StateVector,
        d: &DesiredState,
        theta: &ParamVector,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let g = self.geometry(x, d, theta)?;
        let mut jx = DMatrix::zeros(M, N);
        let mut jt = DMatrix::zeros(M, P);
        let zero_x = [0.0; N];
        let zero_t = [0.0; P];
        let mut dx = [0.0; N];
        for col in 0..N {
            dx[col] = 1.0;
            let t = self.tangent(&g, &dx, &zero_t);
            dx[col] = 0.0;
            for (row, val) in t.iter().enumerate() {
                jx[(row, col)] = *val;
            }
        }
        let mut dt = [0.0; P];
        for col in 0..P {
            dt[col] = 1.0;
            let t = self.tangent(&g, &zero_x, &dt);
            dt[col] = 0.0;
            for (row, val) in t.iter().enumerate() {
                jt[(row, col)] = *val;
            }
        }
        Ok((jx, jt))
    }

    fn noise_layout(&self) -> NoiseLayout {
        NoiseLayout {
            position: POSITION.collect(),
            velocity: VELOCITY.collect(),
            angular_velocity: ANGULAR_VELOCITY.collect(),
        }
    }

    fn initial_state(&self, d: &DesiredState, ic: InitialCondition) -> StateVector {
        let mut x = d.state.clone();
        x.as_mut_slice()[ROTATION].copy_from_slice(&flatten_rotation(&Matrix3::identity()));
        x.as_mut_slice()[ANGULAR_VELOCITY].fill(0.0);
        if ic == InitialCondition::AtRest {
            x.as_mut_slice()[VELOCITY].fill(0.0);
        }
        x
    }

    fn matched_channel(&self) -> Option<MatchedChannel> {
        Some(MatchedChannel {
            state_indices: ANGULAR_VELOCITY.collect(),
            control_indices: MOMENT.collect(),
        })
    }

    fn matched_drift(&self, x: &StateVector) -> DVector<f64> {
        let omega = seg3(x.as_slice(), ANGULAR_VELOCITY.start);
        let drift = -self.inertia_inv * omega.cross(&(self.inertia * omega));
        DVector::from_column_slice(drift.as_slice())
    }

    fn matched_input_matrix(&self, _x: &StateVector) -> DMatrix<f64> {
        DMatrix::from_fn(3, 3, |i, j| self.inertia_inv[(i, j)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn hover_state() -> StateVector {
        let mut x = DVector::zeros(N);
        x.as_mut_slice()[ROTATION].copy_from_slice(&flatten_rotation(&Matrix3::identity()));
        x
    }

    fn quad_with(j: [f64; 3]) -> Quadrotor {
        Quadrotor::new(QuadrotorParams {
            inertia: [[j[0], 0.0, 0.0], [0.0, j[1], 0.0], [0.0, 0.0, j[2]]],
            ..Default::default()
        })
        .unwrap()
    }

    fn hover_desired() -> DesiredState {
        DesiredState {
            state: hover_state(),
            feedforward: DVector::zeros(FF_LEN),
        }
    }

    fn nominal_gains() -> ParamVector {
        let mut theta = DVector::zeros(P);
        theta.as_mut_slice()[K_P].fill(16.0);
        theta.as_mut_slice()[K_V].fill(5.6);
        theta.as_mut_slice()[K_R].fill(8.81);
        theta.as_mut_slice()[K_OMEGA].fill(2.54);
        theta
    }

    #[test]
    fn hover_is_an_equilibrium() {
        let q = Quadrotor::new(QuadrotorParams::default()).unwrap();
        let mut u = DVector::zeros(M);
        u[THRUST] = q.mass() * q.gravity();
        let rate = q.checked_dynamics(&hover_state(), &u).unwrap();
        assert!(rate.iter().all(|r| r.abs() < 1e-15), "{rate}");
    }

    #[test]
    fn free_fall_accelerates_down() {
        let q = Quadrotor::new(QuadrotorParams::default()).unwrap();
        let rate = q.dynamics(&hover_state(), &DVector::zeros(M));
        assert_eq!(&rate.as_slice()[VELOCITY], &[0.0, 0.0, q.gravity()]);
    }

    #[test]
    fn principal_axis_spin_is_torque_free() {
        let q = quad_with([1.0, 2.0, 3.0]);
        let mut x = hover_state();
        x[ANGULAR_VELOCITY.start + 2] = 1.0;
        let rate = q.dynamics(&x, &DVector::zeros(M));
        assert_eq!(&rate.as_slice()[ANGULAR_VELOCITY], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_rate_leaves_attitude_fixed() {
        let q = Quadrotor::new(QuadrotorParams::default()).unwrap();
        let rate = q.dynamics(&hover_state(), &DVector::from_vec(vec![1.0, 0.1, 0.2, 0.3]));
        assert!(rate.as_slice()[ROTATION].iter().all(|r| *r == 0.0));
    }

    #[test]
    fn rejects_non_orthonormal_attitude() {
        let q = Quadrotor::new(QuadrotorParams::default()).unwrap();
        let mut x = hover_state();
        x[ROTATION.start] = 1.01;
        assert!(matches!(
            q.checked_dynamics(&x, &DVector::zeros(M)),
            Err(Error::NotOrthonormal { .. })
        ));
    }

    #[test]
    fn hover_tracking_commands_weight_and_no_moment() {
        let q = Quadrotor::new(QuadrotorParams::default()).unwrap();
        let u = q
            .control(&hover_state(), &hover_desired(), &nominal_gains())
            .unwrap();
        assert_relative_eq!(u[THRUST], q.mass() * q.gravity(), epsilon = 1e-12);
        for i in MOMENT {
            assert!(u[i].abs() <= 1e-12);
        }
    }

    #[test]
    fn attitude_error_vanishes_when_aligned() {
        let q = Quadrotor::new(QuadrotorParams::default()).unwrap();
        let g = q
            .geometry(&hover_state(), &hover_desired(), &nominal_gains())
            .unwrap();
        assert_eq!(g.rd, g.r);
        assert_eq!(g.e_r, Vector3::zeros());
    }

    #[test]
    fn free_fall_command_is_singular() {
        let q = Quadrotor::new(QuadrotorParams::default()).unwrap();
        let mut d = hover_desired();
        d.feedforward[FF_ACCEL.start + 2] = q.gravity();
        assert!(matches!(
            q.control(&hover_state(), &d, &nominal_gains()),
            Err(Error::ControllerSingularity(_))
        ));
    }

    #[test]
    fn rejects_indefinite_inertia() {
        let params = QuadrotorParams {
            inertia: [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]],
            ..Default::default()
        };
        assert!(Quadrotor::new(params).is_err());
    }

    #[test]
    fn inertia_scale_divides_moment_response() {
        let q = quad_with([0.1, 0.1, 0.2]);
        let u = DVector::from_vec(vec![0.0, 0.2, 0.0, 0.0]);
        let unc = Uncertainty {
            inertia_scale: 2.0,
            ..Default::default()
        };
        let nominal = q.plant_dynamics(&hover_state(), &u, 0.0, &Uncertainty::default());
        let scaled = q.plant_dynamics(&hover_state(), &u, 0.0, &unc);
        assert_relative_eq!(nominal[ANGULAR_VELOCITY.start], 2.0, epsilon = 1e-12);
        assert_relative_eq!(scaled[ANGULAR_VELOCITY.start], 1.0, epsilon = 1e-12);
    }
}
