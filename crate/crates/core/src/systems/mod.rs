//! Plant dynamics, feedback controllers and their Jacobians behind one
//! interface.

mod dubins;
mod quadrotor;

pub use dubins::{wrap_angle, DubinsCar};
pub use quadrotor::{Quadrotor, QuadrotorParams, ORTHONORMAL_TOLERANCE};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::types::{ControlVector, DesiredState, Dims, ParamVector, StateVector};

/// Model mismatch injected into the simulated plant only. The controller and
/// the sensitivity model always see the nominal system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Uncertainty {
    /// Car: additive force `0.1 * a1 * sin(t)` [N].
    pub force_amplitude: f64,
    /// Car: additive moment `0.1 * a2 * cos(t)` [N m].
    pub moment_amplitude: f64,
    /// Quadrotor: true inertia is `beta * J`.
    pub inertia_scale: f64,
}

impl Default for Uncertainty {
    fn default() -> Self {
        Self {
            force_amplitude: 0.0,
            moment_amplitude: 0.0,
            inertia_scale: 1.0,
        }
    }
}

impl Uncertainty {
    pub fn is_nominal(&self) -> bool {
        *self == Self::default()
    }
}

/// How the plant state is initialized from the first desired state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialCondition {
    /// Position, heading and velocities all matched to the reference.
    #[default]
    OnTrajectory,
    /// Position and heading matched, vehicle at rest.
    AtRest,
}

/// State indices that receive each class of measurement noise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoiseLayout {
    pub position: Vec<usize>,
    pub velocity: Vec<usize>,
    pub angular_velocity: Vec<usize>,
}

/// The subsystem through which matched uncertainty and the adaptive input
/// enter: `xdot_m = drift(x) + B(x) (u_c + u_ad + sigma)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchedChannel {
    pub state_indices: Vec<usize>,
    pub control_indices: Vec<usize>,
}

pub trait SystemModel: Send + Sync {
    fn dims(&self) -> Dims;

    fn position_indices(&self) -> Vec<usize>;

    /// Nominal continuous-time dynamics `f_c(x, u)`.
    fn dynamics(&self, x: &StateVector, u: &ControlVector) -> StateVector;

    /// `(df_c/dx, df_c/du)`, n x n and n x m.
    fn dynamics_jacobians(
        &self,
        x: &StateVector,
        u: &ControlVector,
    ) -> (DMatrix<f64>, DMatrix<f64>);

    /// Rate of the simulated plant, with the uncertainty applied.
    fn plant_dynamics(
        &self,
        x: &StateVector,
        u: &ControlVector,
        t: f64,
        uncertainty: &Uncertainty,
    ) -> StateVector;

    /// Precondition checked on the plant state before each plant step.
    fn check_plant_state(&self, _x: &StateVector) -> Result<()> {
        Ok(())
    }

    /// Pull a plant state back onto its manifold after a plant step.
    fn project_plant_state(&self, _x: &mut StateVector) {}

    /// Distance of a plant state from its manifold; zero for flat states.
    fn manifold_error(&self, _x: &StateVector) -> f64 {
        0.0
    }

    /// Controller `h(x, xhat, theta)`.
    fn control(
        &self,
        x: &StateVector,
        desired: &DesiredState,
        theta: &ParamVector,
    ) -> Result<ControlVector>;

    /// `(dh/dx, dh/dtheta)`, m x n and m x p.
    fn control_jacobians(
        &self,
        x: &StateVector,
        desired: &DesiredState,
        theta: &ParamVector,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)>;

    fn noise_layout(&self) -> NoiseLayout;

    fn initial_state(&self, desired: &DesiredState, ic: InitialCondition) -> StateVector;

    fn matched_channel(&self) -> Option<MatchedChannel> {
        None
    }

    /// Nominal matched-state rate excluding the input term.
    fn matched_drift(&self, _x: &StateVector) -> DVector<f64> {
        DVector::zeros(0)
    }

    /// Input matrix `B(x)` of the matched subsystem.
    fn matched_input_matrix(&self, _x: &StateVector) -> DMatrix<f64> {
        DMatrix::zeros(0, 0)
    }
}

/// Forward-Euler step map `x + dt * f_c(x, u)`; the map differentiated by the
/// sensitivity recursion.
pub fn discrete_step<S: SystemModel + ?Sized>(
    model: &S,
    x: &StateVector,
    u: &ControlVector,
    dt: f64,
) -> StateVector {
    x + model.dynamics(x, u) * dt
}

/// Jacobians of [`discrete_step`]: `(I + dt * df_c/dx, dt * df_c/du)`.
pub fn discrete_jacobians<S: SystemModel + ?Sized>(
    model: &S,
    x: &StateVector,
    u: &ControlVector,
    dt: f64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let (a, b) = model.dynamics_jacobians(x, u);
    let n = a.nrows();
    (DMatrix::identity(n, n) + a * dt, b * dt)
}
