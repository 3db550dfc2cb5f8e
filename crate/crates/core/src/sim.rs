//! Closed-loop rollouts: the plant is integrated with the configured method
//! while the controller, sensitivities and loss all work on the measured
//! state and the Euler-discretized nominal model.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::l1ac::{l1_update, L1Config, L1State, MatchedModel};
use crate::loss::LossSpec;
use crate::sensprop::{control_sensitivity, init_sensitivity};
use crate::systems::{discrete_jacobians, InitialCondition, NoiseLayout, SystemModel, Uncertainty};
use crate::trajgen::Trajectory;
use crate::types::{
    all_finite, ControlVector, ParamVector, RolloutRecord, SensitivityState, StateVector,
    StepJacobians, StepRecord,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantIntegrator {
    /// Same map as the sensitivity model (graph-consistent mode).
    Euler,
    Rk4,
    /// Dormand-Prince 5(4) with step-size control.
    #[default]
    Adaptive,
}

/// Standard deviations of the additive Gaussian measurement noise.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    pub position: f64,
    pub velocity: f64,
    pub angular_velocity: f64,
}

impl NoiseSpec {
    pub fn is_zero(&self) -> bool {
        self.position == 0.0 && self.velocity == 0.0 && self.angular_velocity == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Control period [s].
    pub dt: f64,
    /// [s]
    pub horizon: f64,
    pub plant_integrator: PlantIntegrator,
    /// Absolute and relative tolerance of the adaptive integrator.
    pub adaptive_tol: f64,
    pub initial_condition: InitialCondition,
    pub noise: NoiseSpec,
    pub uncertainty: Uncertainty,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            horizon: 10.0,
            plant_integrator: PlantIntegrator::default(),
            adaptive_tol: 1e-8,
            initial_condition: InitialCondition::default(),
            noise: NoiseSpec::default(),
            uncertainty: Uncertainty::default(),
            seed: 0,
        }
    }
}

impl SimConfig {
    /// Euler plant, no noise, no uncertainty.
    pub fn graph_consistent(dt: f64, horizon: f64) -> Self {
        Self {
            dt,
            horizon,
            plant_integrator: PlantIntegrator::Euler,
            ..Self::default()
        }
    }

    /// Number of control intervals `N = horizon / dt`.
    pub fn steps(&self) -> Result<usize> {
        let ratio = self.horizon / self.dt;
        let n = ratio.round();
        if !(self.dt > 0.0 && self.horizon > 0.0)
            || !ratio.is_finite()
            || (ratio - n).abs() > 1e-6
            || n < 1.0
        {
            return Err(Error::Invalid(format!(
                "horizon {} must be a positive integer multiple of dt {}",
                self.horizon, self.dt
            )));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<()> {
        self.steps()?;
        let n = &self.noise;
        for (name, v) in [
            ("position", n.position),
            ("velocity", n.velocity),
            ("angular_velocity", n.angular_velocity),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Invalid(format!(
                    "noise.{name} must be non-negative, got {v}"
                )));
            }
        }
        if !(self.uncertainty.inertia_scale > 0.0 && self.uncertainty.inertia_scale.is_finite()) {
            return Err(Error::Invalid(format!(
                "uncertainty.inertia_scale must be positive, got {}",
                self.uncertainty.inertia_scale
            )));
        }
        if !(self.adaptive_tol > 0.0) {
            return Err(Error::Invalid(format!(
                "adaptive_tol must be positive, got {}",
                self.adaptive_tol
            )));
        }
        Ok(())
    }
}

/// Noise generator for one rollout: ChaCha8 keyed by the master seed, with
/// `stream` selecting an independent sequence.
pub fn noise_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Adds Gaussian noise to the configured channels. Channels with zero
/// deviation draw nothing from `rng`.
pub fn add_measurement_noise(
    x_true: &StateVector,
    noise: &NoiseSpec,
    layout: &NoiseLayout,
    rng: &mut ChaCha8Rng,
) -> StateVector {
    let mut x = x_true.clone();
    for (std, indices) in [
        (noise.position, &layout.position),
        (noise.velocity, &layout.velocity),
        (noise.angular_velocity, &layout.angular_velocity),
    ] {
        if std > 0.0 {
            let dist = Normal::new(0.0, std).expect("std validated as finite and positive");
            for &i in indices {
                x[i] += dist.sample(rng);
            }
        }
    }
    x
}

fn rk4<F: Fn(f64, &StateVector) -> StateVector>(
    f: F,
    x: &StateVector,
    t: f64,
    h: f64,
) -> StateVector {
    let k1 = f(t, x);
    let k2 = f(t + 0.5 * h, &(x + &k1 * (0.5 * h)));
    let k3 = f(t + 0.5 * h, &(x + &k2 * (0.5 * h)));
    let k4 = f(t + h, &(x + &k3 * h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

// Dormand-Prince 5(4) tableau
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `xdot = f(t, x)` from `t0` to `t0 + span` with an embedded
/// Dormand-Prince pair; `tol` is used as both absolute and relative tolerance.
pub fn dormand_prince<F: Fn(f64, &StateVector) -> StateVector>(
    f: F,
    x0: &StateVector,
    t0: f64,
    span: f64,
    tol: f64,
) -> Result<StateVector> {
    let t_end = t0 + span;
    let min_step = span * 1e-12;
    let mut t = t0;
    let mut x = x0.clone();
    let mut h = span;
    let mut k: [StateVector; 7] = std::array::from_fn(|_| DVector::zeros(0));
    while t_end - t > min_step {
        h = h.min(t_end - t);
        if h < min_step {
            return Err(Error::StepUnderflow { t });
        }
        k[0] = f(t, &x);
        for s in 1..7 {
            let mut xs = x.clone();
            for (j, kj) in k.iter().enumerate().take(s) {
                if DP_A[s][j] != 0.0 {
                    xs += kj * (h * DP_A[s][j]);
                }
            }
            k[s] = f(t + DP_C[s] * h, &xs);
        }
        let mut x5 = x.clone();
        let mut err = DVector::zeros(x.len());
        for s in 0..7 {
            x5 += &k[s] * (h * DP_B5[s]);
            err += &k[s] * (h * (DP_B5[s] - DP_B4[s]));
        }
        let mut ratio: f64 = 0.0;
        for i in 0..x.len() {
            let scale = tol + tol * x[i].abs().max(x5[i].abs());
            ratio = ratio.max((err[i] / scale).abs());
        }
        if !ratio.is_finite() {
            return Err(Error::StepUnderflow { t });
        }
        if ratio <= 1.0 {
            t += h;
            x = x5;
        }
        let factor = if ratio == 0.0 {
            5.0
        } else {
            (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
    }
    Ok(x)
}

/// Advances the plant by one control period under a zero-order-hold input.
/// The higher-order methods check the attitude before the step and project it
/// back onto SO(3) afterwards; the Euler method is left raw so it stays the
/// exact map the sensitivity model differentiates.
#[allow(clippy::too_many_arguments)]
pub fn integrate_plant<S: SystemModel + ?Sized>(
    model: &S,
    x: &StateVector,
    u: &ControlVector,
    t: f64,
    dt: f64,
    method: PlantIntegrator,
    uncertainty: &Uncertainty,
    tol: f64,
) -> Result<StateVector> {
    if !(dt > 0.0) {
        return Err(Error::Invalid(format!(
            "plant step must be positive, got {dt}"
        )));
    }
    let f = |tau: f64, xs: &StateVector| model.plant_dynamics(xs, u, tau, uncertainty);
    let mut next = match method {
        PlantIntegrator::Euler => return Ok(x + f(t, x) * dt),
        PlantIntegrator::Rk4 => {
            model.check_plant_state(x)?;
            rk4(f, x, t, dt)
        }
        PlantIntegrator::Adaptive => {
            model.check_plant_state(x)?;
            dormand_prince(f, x, t, dt, tol)?
        }
    };
    model.project_plant_state(&mut next);
    Ok(next)
}

/// One closed-loop experiment: what is simulated, tracked and scored.
#[derive(Clone, Copy)]
pub struct Scenario<'a> {
    pub model: &'a dyn SystemModel,
    pub trajectory: &'a dyn Trajectory,
    pub loss: &'a LossSpec,
    pub sim: &'a SimConfig,
    pub l1: Option<&'a L1Config>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RolloutOptions {
    /// Noise stream within the master seed.
    pub noise_stream: u64,
    /// Keep per-step Jacobians for the reverse oracle.
    pub store_jacobians: bool,
}

fn matched_parts(
    model: &dyn SystemModel,
    x: &StateVector,
) -> Result<(Vec<usize>, Vec<usize>, MatchedModel)> {
    let channel = model.matched_channel().ok_or_else(|| {
        Error::Invalid("system has no matched channel for L1 augmentation".into())
    })?;
    let matched = MatchedModel {
        drift: model.matched_drift(x),
        input: model.matched_input_matrix(x),
    };
    Ok((channel.state_indices, channel.control_indices, matched))
}

fn select(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

/// Runs the closed loop over `k = 0..=N` with sensitivity propagation.
pub fn rollout(
    scenario: &Scenario,
    theta: &ParamVector,
    opts: RolloutOptions,
) -> Result<RolloutRecord> {
    let Scenario {
        model,
        trajectory,
        loss,
        sim,
        l1,
    } = *scenario;
    sim.validate()?;
    let dims = model.dims();
    if theta.len() != dims.p {
        return Err(Error::dim("controller parameters", dims.p, theta.len()));
    }
    if let Some(cfg) = l1 {
        cfg.validate(sim.dt)?;
    }
    let n_steps = sim.steps()?;
    let dt = sim.dt;
    let layout = model.noise_layout();
    let mut rng = noise_rng(sim.seed, opts.noise_stream);

    let mut x_true = model.initial_state(&trajectory.desired(0.0)?, sim.initial_condition);
    let mut sens = init_sensitivity(dims.n, dims.m, dims.p);
    let mut l1_state: Option<L1State> = None;
    let mut steps = Vec::with_capacity(n_steps + 1);
    let mut total = 0.0;

    for k in 0..=n_steps {
        let t = k as f64 * dt;
        if !all_finite(x_true.as_slice()) {
            return Err(Error::Diverged { step: k });
        }
        let desired = trajectory.desired(t)?;
        let x = add_measurement_noise(&x_true, &sim.noise, &layout, &mut rng);
        let u = model.control(&x, &desired, theta)?;
        if !all_finite(u.as_slice()) {
            return Err(Error::Diverged { step: k });
        }
        let (jx_h, jt_h) = model.control_jacobians(&x, &desired, theta)?;
        let du_dtheta = control_sensitivity(&sens.dx_dtheta, &jx_h, &jt_h)?;

        // states are scored over 1..=N and controls over 0..N-1
        let (mut dl_dx, mut dl_du) = loss.partials(&x, &desired.state, &u);
        if k == 0 {
            dl_dx.fill(0.0);
        }
        if k == n_steps {
            dl_du.fill(0.0);
        }
        if k > 0 {
            total += loss.state_term(&x, &desired.state);
        }
        if k < n_steps {
            total += loss.control_term(&u);
        }

        let mut adaptive = DVector::zeros(dims.m);
        let mut next_sens = None;
        let mut jacobians = None;
        let mut next_true = None;
        if k < n_steps {
            if let Some(cfg) = l1 {
                let (si, ci, matched) = matched_parts(model, &x)?;
                let xm = select(&x, &si);
                let state = l1_state.get_or_insert_with(|| L1State::new(xm.clone(), ci.len()));
                let u_ad = l1_update(state, &xm, &matched, &select(&u, &ci), cfg, dt)?;
                for (j, &c) in ci.iter().enumerate() {
                    adaptive[c] = u_ad[j];
                }
            }
            let (jx_f, ju_f) = discrete_jacobians(model, &x, &u, dt);
            next_sens = Some(&jx_f * &sens.dx_dtheta + &ju_f * &du_dtheta);
            if opts.store_jacobians {
                jacobians = Some(StepJacobians {
                    state: jx_f,
                    input: ju_f,
                    control_state: jx_h,
                    control_param: jt_h,
                });
            }
            let u_total = &u + &adaptive;
            next_true = Some(integrate_plant(
                model,
                &x_true,
                &u_total,
                t,
                dt,
                sim.plant_integrator,
                &sim.uncertainty,
                sim.adaptive_tol,
            )?);
        } else if opts.store_jacobians {
            jacobians = Some(StepJacobians {
                state: nalgebra::DMatrix::zeros(0, 0),
                input: nalgebra::DMatrix::zeros(0, 0),
                control_state: jx_h,
                control_param: jt_h,
            });
        }

        steps.push(StepRecord {
            t,
            state: x,
            true_state: x_true.clone(),
            desired,
            control: u,
            adaptive,
            sensitivity: SensitivityState {
                dx_dtheta: sens.dx_dtheta.clone(),
                du_dtheta,
            },
            dl_dx,
            dl_du,
            jacobians,
        });
        if let (Some(s), Some(xn)) = (next_sens, next_true) {
            sens.dx_dtheta = s;
            x_true = xn;
        }
    }

    Ok(RolloutRecord {
        dims,
        dt,
        steps,
        loss: total,
        position_indices: model.position_indices(),
    })
}

fn rmse_of(record: &RolloutRecord, state: impl Fn(&StepRecord) -> &StateVector) -> f64 {
    if record.steps.is_empty() {
        return 0.0;
    }
    let sum: f64 = record
        .steps
        .iter()
        .map(|s| {
            let x = state(s);
            record
                .position_indices
                .iter()
                .map(|&i| (x[i] - s.desired.state[i]).powi(2))
                .sum::<f64>()
        })
        .sum();
    (sum / record.steps.len() as f64).sqrt()
}

/// Position RMSE of the measured states against the reference, over all
/// stored steps.
pub fn rmse_position(record: &RolloutRecord) -> f64 {
    rmse_of(record, |s| &s.state)
}

/// Position RMSE of the noise-free plant states.
pub fn true_rmse_position(record: &RolloutRecord) -> f64 {
    rmse_of(record, |s| &s.true_state)
}

/// Largest [`SystemModel::manifold_error`] over the recorded plant states.
pub fn manifold_error(model: &dyn SystemModel, record: &RolloutRecord) -> f64 {
    record
        .steps
        .iter()
        .map(|s| model.manifold_error(&s.true_state))
        .fold(0.0, f64::max)
}

/// First noise stream reserved for held-out evaluation. Tuning streams stay
/// below it.
pub const EVAL_STREAM_BASE: u64 = 1 << 63;

/// Loss and position RMSE averaged over evaluation rollouts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub loss: f64,
    pub rmse: f64,
    pub true_rmse: f64,
    pub realizations: usize,
    /// Worst plant-state manifold error seen in any of the rollouts.
    pub manifold_error: f64,
}

/// `count` held-out evaluation streams.
pub fn held_out_streams(count: usize) -> Vec<u64> {
    (0..count as u64).map(|j| EVAL_STREAM_BASE + j).collect()
}

/// Mean over one rollout per noise stream. Without noise the streams are
/// interchangeable, so only the first is rolled out.
pub fn evaluate(scenario: &Scenario, theta: &ParamVector, streams: &[u64]) -> Result<Evaluation> {
    if streams.is_empty() {
        return Err(Error::Invalid(
            "evaluation needs at least one noise stream".into(),
        ));
    }
    let streams = if scenario.sim.noise.is_zero() {
        &streams[..1]
    } else {
        streams
    };
    let mut acc = Evaluation {
        loss: 0.0,
        rmse: 0.0,
        true_rmse: 0.0,
        realizations: streams.len(),
        manifold_error: 0.0,
    };
    for &noise_stream in streams {
        let opts = RolloutOptions {
            noise_stream,
            store_jacobians: false,
        };
        let record = rollout(scenario, theta, opts)?;
        acc.loss += record.loss;
        acc.rmse += rmse_position(&record);
        acc.true_rmse += true_rmse_position(&record);
        acc.manifold_error = acc
            .manifold_error
            .max(manifold_error(scenario.model, &record));
    }
    let n = streams.len() as f64;
    acc.loss /= n;
    acc.rmse /= n;
    acc.true_rmse /= n;
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::DubinsCar;
    use crate::trajgen::DubinsCurve;
    use crate::types::{DesiredState, Dims};
    use nalgebra::{dvector, DMatrix, RowDVector};

    fn step(state: DVector<f64>, desired: DVector<f64>) -> StepRecord {
        let n = state.len();
        StepRecord {
            t: 0.0,
            true_state: state.clone(),
            state,
            desired: DesiredState {
                state: desired,
                feedforward: DVector::zeros(0),
            },
            control: DVector::zeros(1),
            adaptive: DVector::zeros(1),
            sensitivity: SensitivityState {
                dx_dtheta: DMatrix::zeros(n, 1),
                du_dtheta: DMatrix::zeros(1, 1),
            },
            dl_dx: RowDVector::zeros(n),
            dl_du: RowDVector::zeros(1),
            jacobians: None,
        }
    }

    fn record(steps: Vec<StepRecord>) -> RolloutRecord {
        RolloutRecord {
            dims: Dims { n: 3, m: 1, p: 1 },
            dt: 0.01,
            steps,
            loss: 0.0,
            position_indices: vec![0, 1, 2],
        }
    }

    #[test]
    fn rmse_examples() {
        let z = DVector::zeros(3);
        let r = record(vec![step(dvector![0.1, 0.0, 0.0], z.clone()); 4]);
        assert!((rmse_position(&r) - 0.1).abs() < 1e-15);
        let r = record(vec![step(z.clone(), z.clone()); 3]);
        assert_eq!(rmse_position(&r), 0.0);
        let r = record(vec![
            step(z.clone(), z.clone()),
            step(dvector![0.2, 0.0, 0.0], z),
        ]);
        assert!((rmse_position(&r) - 0.02f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn steps_must_tile_the_horizon() {
        assert_eq!(
            SimConfig::graph_consistent(0.01, 10.0).steps().unwrap(),
            1000
        );
        assert!(SimConfig::graph_consistent(0.03, 0.1).steps().is_err());
        assert!(SimConfig::graph_consistent(0.0, 1.0).steps().is_err());
    }

    #[test]
    fn zero_noise_leaves_state_untouched() {
        let car = DubinsCar::default();
        let x = dvector![1.0, 2.0, 3.0, 4.0, 5.0];
        let mut rng = noise_rng(1, 0);
        let y = add_measurement_noise(&x, &NoiseSpec::default(), &car.noise_layout(), &mut rng);
        assert_eq!(x, y);
    }

    #[test]
    fn rk4_matches_exponential() {
        let x = rk4(|_, x: &StateVector| -x, &dvector![1.0], 0.0, 0.1);
        assert!((x[0] - (-0.1f64).exp()).abs() < 1e-6);
        assert!((x[0] - 0.904837).abs() < 1e-6);
    }

    #[test]
    fn dormand_prince_matches_exponential() {
        let x = dormand_prince(|_, x: &StateVector| -x, &dvector![1.0], 0.0, 1.0, 1e-10).unwrap();
        assert!((x[0] - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn dormand_prince_handles_oscillator() {
        // xdot = (v, -x): one full period returns to the start
        let f = |_: f64, s: &StateVector| dvector![s[1], -s[0]];
        let x = dormand_prince(
            f,
            &dvector![1.0, 0.0],
            0.0,
            2.0 * std::f64::consts::PI,
            1e-10,
        )
        .unwrap();
        assert!((x[0] - 1.0).abs() < 1e-8 && x[1].abs() < 1e-8);
    }

    #[test]
    fn euler_plant_is_the_discrete_step() {
        let car = DubinsCar::default();
        let x = dvector![0.0, 0.0, 0.0, 1.0, 0.0];
        let u = dvector![0.0, 0.0];
        let next = integrate_plant(
            &car,
            &x,
            &u,
            0.0,
            0.01,
            PlantIntegrator::Euler,
            &Uncertainty::default(),
            1e-8,
        )
        .unwrap();
        assert_eq!(next, dvector![0.01, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn force_uncertainty_enters_speed_channel() {
        let car = DubinsCar::default();
        let x = dvector![0.0, 0.0, 0.0, 1.0, 0.0];
        let u = dvector![0.0, 0.0];
        let unc = Uncertainty {
            force_amplitude: 1.0,
            ..Uncertainty::default()
        };
        let t = 0.7;
        let rate = car.plant_dynamics(&x, &u, t, &unc);
        assert!((rate[3] - 0.1 * t.sin()).abs() < 1e-15);
    }

    #[test]
    fn same_seed_same_record() {
        let car = DubinsCar::default();
        let curve = DubinsCurve::Circle {
            radius: 1.0,
            rate: 1.0,
        };
        let loss = LossSpec::position(car.position_indices());
        let sim = SimConfig {
            horizon: 1.0,
            plant_integrator: PlantIntegrator::Rk4,
            noise: NoiseSpec {
                position: 0.05,
                velocity: 0.05,
                angular_velocity: 0.01,
            },
            seed: 42,
            ..SimConfig::default()
        };
        let scenario = Scenario {
            model: &car,
            trajectory: &curve,
            loss: &loss,
            sim: &sim,
            l1: None,
        };
        let theta = dvector![2.0, 2.0, 2.0, 2.0];
        let a = rollout(&scenario, &theta, RolloutOptions::default()).unwrap();
        let b = rollout(&scenario, &theta, RolloutOptions::default()).unwrap();
        assert_eq!(a, b);
        let c = rollout(
            &scenario,
            &theta,
            RolloutOptions {
                noise_stream: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert_ne!(a.loss, c.loss);
    }
}
