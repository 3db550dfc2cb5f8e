//! Shared numeric and domain types.

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type StateVector = DVector<f64>;
pub type ControlVector = DVector<f64>;
pub type ParamVector = DVector<f64>;

/// Flat-index layouts of every state, control and parameter vector. Systems,
/// losses and sensitivity code all index through these constants.
pub mod layout {
    pub mod dubins {
        use std::ops::Range;

        pub const N: usize = 5;
        pub const M: usize = 2;
        pub const P: usize = 4;

        pub const X: usize = 0;
        pub const Y: usize = 1;
        pub const YAW: usize = 2;
        pub const SPEED: usize = 3;
        pub const YAW_RATE: usize = 4;
        pub const POSITION: Range<usize> = 0..2;

        pub const FORCE: usize = 0;
        pub const MOMENT: usize = 1;

        pub const K_P: usize = 0;
        pub const K_V: usize = 1;
        pub const K_YAW: usize = 2;
        pub const K_YAW_RATE: usize = 3;

        /// Feedforward slots of a desired state: linear acceleration (2) and
        /// angular acceleration.
        pub const FF_ACCEL: Range<usize> = 0..2;
        pub const FF_YAW_ACCEL: usize = 2;
        pub const FF_LEN: usize = 3;
    }

    pub mod quadrotor {
        use std::ops::Range;

        pub const N: usize = 18;
        pub const M: usize = 4;
        pub const P: usize = 12;

        pub const POSITION: Range<usize> = 0..3;
        pub const VELOCITY: Range<usize> = 3..6;
        /// Row-major 3x3 attitude.
        pub const ROTATION: Range<usize> = 6..15;
        pub const ANGULAR_VELOCITY: Range<usize> = 15..18;

        pub const THRUST: usize = 0;
        pub const MOMENT: Range<usize> = 1..4;

        pub const K_P: Range<usize> = 0..3;
        pub const K_V: Range<usize> = 3..6;
        pub const K_R: Range<usize> = 6..9;
        pub const K_OMEGA: Range<usize> = 9..12;

        /// Feedforward slots: desired acceleration (3) and desired yaw.
        pub const FF_ACCEL: Range<usize> = 0..3;
        pub const FF_YAW: usize = 3;
        pub const FF_LEN: usize = 4;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
    pub p: usize,
}

/// Reference the controller tracks at one instant: a state in the owning
/// system's layout plus the feedforward terms its controller consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct DesiredState {
    pub state: StateVector,
    pub feedforward: DVector<f64>,
}

impl DesiredState {
    pub fn is_finite(&self) -> bool {
        all_finite(self.state.as_slice()) && all_finite(self.feedforward.as_slice())
    }
}

/// Box-shaped feasible set for the controller parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleBox {
    lower: ParamVector,
    upper: ParamVector,
}

impl FeasibleBox {
    pub fn new(lower: ParamVector, upper: ParamVector) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::dim("feasible box", lower.len(), upper.len()));
        }
        for (i, (lo, hi)) in lower.iter().zip(upper.iter()).enumerate() {
            if !(lo.is_finite() && hi.is_finite()) || *lo <= 0.0 || lo >= hi {
                return Err(Error::Invalid(format!(
                    "feasible box component {i}: need 0 < lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn uniform(p: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(
            DVector::from_element(p, lower),
            DVector::from_element(p, upper),
        )
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn lower(&self) -> &ParamVector {
        &self.lower
    }

    pub fn upper(&self) -> &ParamVector {
        &self.upper
    }

    pub fn contains(&self, theta: &ParamVector) -> bool {
        theta.len() == self.len()
            && theta
                .iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(t, (lo, hi))| t >= lo && t <= hi)
    }
}

/// `dx_k/dtheta` (n x p) and `du_k/dtheta` (m x p).
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityState {
    pub dx_dtheta: DMatrix<f64>,
    pub du_dtheta: DMatrix<f64>,
}

/// Jacobians of the discretized step map and the controller at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepJacobians {
    /// `d x_{k+1} / d x_k`, n x n
    pub state: DMatrix<f64>,
    /// `d x_{k+1} / d u_k`, n x m
    pub input: DMatrix<f64>,
    /// `d u_k / d x_k`, m x n
    pub control_state: DMatrix<f64>,
    /// `d u_k / d theta`, m x p
    pub control_param: DMatrix<f64>,
}

/// Everything stored for step `k` of a rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    /// State seen by the controller and the sensitivity model (true state
    /// plus measurement noise).
    pub state: StateVector,
    /// Plant state before noise.
    pub true_state: StateVector,
    pub desired: DesiredState,
    /// Baseline controller output `h(x_k, xhat_k, theta)`.
    pub control: ControlVector,
    /// Adaptive augmentation added on top of `control` (zero when disabled).
    pub adaptive: ControlVector,
    pub sensitivity: SensitivityState,
    pub dl_dx: RowDVector<f64>,
    pub dl_du: RowDVector<f64>,
    /// Present when the rollout was asked to keep Jacobians (reverse oracle).
    /// The step-map Jacobians are absent at the final step.
    pub jacobians: Option<StepJacobians>,
}

/// Per-step log of a closed-loop rollout over `k = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutRecord {
    pub dims: Dims,
    pub dt: f64,
    pub steps: Vec<StepRecord>,
    pub loss: f64,
    /// State indices holding position (used for RMSE).
    pub position_indices: Vec<usize>,
}

impl RolloutRecord {
    /// Number of control intervals `N`.
    pub fn horizon_steps(&self) -> usize {
        self.steps.len().saturating_sub(1)
    }
}

pub(crate) fn all_finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}
