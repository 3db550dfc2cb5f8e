//! Controller auto-tuning by forward sensitivity propagation.
//!
//! A closed loop `x_{k+1} = f(x_k, u_k)`, `u_k = h(x_k, xhat_k, theta)` is
//! unrolled over a horizon while `dx_k/dtheta` and `du_k/dtheta` are carried
//! along. Weighting them with the loss partials gives the exact gradient of a
//! tracking loss in the controller gains, which projected gradient descent
//! then follows. An optional L1 adaptive loop cancels matched uncertainty in
//! the plant without touching the sensitivity model.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod l1ac;
pub mod loss;
pub mod optim;
pub mod sensprop;
pub mod sim;
pub mod so3;
pub mod systems;
pub mod trajgen;
pub mod types;
pub mod verify;

pub use error::{Error, Result};
pub use l1ac::L1Config;
pub use loss::LossSpec;
pub use optim::{tune, Termination, TuneConfig, TuneOutcome};
pub use sim::{
    evaluate, rollout, Evaluation, PlantIntegrator, RolloutOptions, Scenario, SimConfig,
};
pub use systems::{
    DubinsCar, InitialCondition, Quadrotor, QuadrotorParams, SystemModel, Uncertainty,
};
pub use trajgen::{DubinsCurve, QuadrotorCircle, Trajectory};
pub use types::{
    ControlVector, DesiredState, Dims, FeasibleBox, ParamVector, RolloutRecord, SensitivityState,
    StateVector,
};
