//! L1 adaptive augmentation on the matched channel.
//!
//! A state predictor runs the nominal matched dynamics driven by the applied
//! input and the current uncertainty estimate. The estimate is refreshed once
//! per adaptation period from the predictor error (piecewise-constant law),
//! and its low-pass-filtered negative is added to the baseline input.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct L1Config {
    /// Low-pass filter cutoff `omega_c` [rad/s].
    pub bandwidth: f64,
    /// Diagonal entry of the Hurwitz predictor matrix `A_s`.
    pub predictor_pole: f64,
    /// Adaptation period `T_s` [s]; `None` adapts every control step.
    pub adaptation_period: Option<f64>,
}

impl Default for L1Config {
    fn default() -> Self {
        Self {
            bandwidth: 20.0,
            predictor_pole: -10.0,
            adaptation_period: None,
        }
    }
}

impl L1Config {
    pub fn validate(&self, dt: f64) -> Result<()> {
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::Invalid(format!(
                "l1 bandwidth must be positive, got {}",
                self.bandwidth
            )));
        }
        if !(self.predictor_pole < 0.0 && self.predictor_pole.is_finite()) {
            return Err(Error::Invalid(format!(
                "l1 predictor pole must be negative, got {}",
                self.predictor_pole
            )));
        }
        let ts = self.period(dt);
        if !(ts > 0.0 && ts.is_finite()) || ts < dt * (1.0 - 1e-9) {
            return Err(Error::Invalid(format!(
                "l1 adaptation period must be at least the control period {dt}, got {ts}"
            )));
        }
        Ok(())
    }

    pub fn period(&self, dt: f64) -> f64 {
        self.adaptation_period.unwrap_or(dt)
    }

    /// Scalar `mu` with `Phi^-1 e^{A_s T_s} = mu I` for `A_s = a I`.
    fn adaptation_gain(&self, ts: f64) -> Result<f64> {
        let a = self.predictor_pole;
        let e = (a * ts).exp();
        let phi = (e - 1.0) / a;
        if phi.abs() < f64::EPSILON || !phi.is_finite() {
            return Err(Error::Singular("l1 adaptation matrix Phi"));
        }
        Ok(e / phi)
    }
}

/// Exact discretization of `ydot = omega_c (u - y)` over one step.
pub fn lowpass_step(y: &DVector<f64>, u: &DVector<f64>, bandwidth: f64, dt: f64) -> DVector<f64> {
    let decay = (-bandwidth * dt).exp();
    y * decay + u * (1.0 - decay)
}

#[derive(Debug, Clone, PartialEq)]
pub struct L1State {
    pub predictor: DVector<f64>,
    pub sigma_hat: DVector<f64>,
    pub u_ad: DVector<f64>,
    pub filter: DVector<f64>,
    /// Time since the last adaptation instant.
    since_update: f64,
}

impl L1State {
    /// Predictor seeded at the measured matched state; `m` matched inputs.
    pub fn new(matched_state: DVector<f64>, m: usize) -> Self {
        Self {
            predictor: matched_state,
            sigma_hat: DVector::zeros(m),
            u_ad: DVector::zeros(m),
            filter: DVector::zeros(m),
            since_update: f64::INFINITY,
        }
    }
}

/// Nominal matched model at the current measurement:
/// `xdot_m = drift + input (u + sigma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedModel {
    pub drift: DVector<f64>,
    pub input: DMatrix<f64>,
}

/// One control step of the adaptive loop. Returns the adaptive input to add
/// to `u_baseline` over the coming step.
pub fn l1_update(
    state: &mut L1State,
    matched_state: &DVector<f64>,
    model: &MatchedModel,
    u_baseline: &DVector<f64>,
    cfg: &L1Config,
    dt: f64,
) -> Result<DVector<f64>> {
    let k = matched_state.len();
    let m = u_baseline.len();
    if state.predictor.len() != k {
        return Err(Error::dim("l1 predictor", k, state.predictor.len()));
    }
    if model.input.shape() != (k, m) || model.drift.len() != k || state.u_ad.len() != m {
        return Err(Error::dim(
            "l1 matched model",
            format!("{k}x{m}"),
            format!("{:?}", model.input.shape()),
        ));
    }
    let ts = cfg.period(dt);
    let error = &state.predictor - matched_state;

    if state.since_update >= ts - 1e-9 * dt {
        let mu = cfg.adaptation_gain(ts)?;
        let b_pinv = model
            .input
            .clone()
            .pseudo_inverse(1e-12)
            .map_err(|_| Error::Singular("l1 input matrix"))?;
        state.sigma_hat = -(b_pinv * &error) * mu;
        state.since_update = 0.0;
    }
    state.since_update += dt;

    state.filter = lowpass_step(&state.filter, &state.sigma_hat, cfg.bandwidth, dt);
    state.u_ad = -&state.filter;

    let total = u_baseline + &state.u_ad + &state.sigma_hat;
    let rate = &model.drift + &model.input * total + &error * cfg.predictor_pole;
    state.predictor = matched_state + &error + rate * dt;
    Ok(state.u_ad.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn integrator() -> MatchedModel {
        MatchedModel {
            drift: dvector![0.0],
            input: DMatrix::identity(1, 1),
        }
    }

    #[test]
    fn nothing_to_compensate() {
        let cfg = L1Config::default();
        let x = dvector![0.3];
        let mut s = L1State::new(x.clone(), 1);
        let u_ad = l1_update(&mut s, &x, &integrator(), &dvector![0.0], &cfg, 0.01).unwrap();
        assert_eq!(u_ad, dvector![0.0]);
        assert_eq!(s.sigma_hat, dvector![0.0]);
    }

    #[test]
    fn lowpass_first_step() {
        let y = lowpass_step(&dvector![0.0], &dvector![1.0], 20.0, 0.001);
        assert!((y[0] - (1.0 - (-0.02f64).exp())).abs() < 1e-15);
        assert!((y[0] - 0.0198).abs() < 1e-4);
    }

    #[test]
    fn lowpass_has_unit_dc_gain() {
        let mut y = dvector![0.0];
        for _ in 0..10_000 {
            y = lowpass_step(&y, &dvector![3.5], 20.0, 0.001);
        }
        assert!((y[0] - 3.5).abs() < 1e-12);
    }

    #[test]
    fn lowpass_is_bounded() {
        let dt = 0.1 / 20.0;
        let mut y = dvector![0.0];
        for k in 0..100_000 {
            let u = if k % 3 == 0 { 1.0 } else { -1.0 };
            y = lowpass_step(&y, &dvector![u], 20.0, dt);
            assert!(y[0].abs() <= 1.0);
        }
    }

    // xdot = u + u_ad + sigma, constant sigma = 1, plant integrated exactly
    // over the zero-order hold
    #[test]
    fn cancels_constant_uncertainty() {
        let cfg = L1Config {
            bandwidth: 20.0,
            predictor_pole: -10.0,
            adaptation_period: None,
        };
        let dt = 0.001;
        let sigma = 1.0;
        let mut x = dvector![0.0];
        let mut s = L1State::new(x.clone(), 1);
        let mut u_ad = dvector![0.0];
        for _ in 0..1000 {
            u_ad = l1_update(&mut s, &x, &integrator(), &dvector![0.0], &cfg, dt).unwrap();
            x[0] += dt * (u_ad[0] + sigma);
        }
        assert!(
            (u_ad[0] + sigma).abs() <= 0.05,
            "residual {}",
            u_ad[0] + sigma
        );
    }

    #[test]
    fn slower_adaptation_period_holds_estimate() {
        let cfg = L1Config {
            adaptation_period: Some(0.004),
            ..L1Config::default()
        };
        let dt = 0.001;
        let mut x = dvector![0.0];
        let mut s = L1State::new(x.clone(), 1);
        let mut estimates = Vec::new();
        for _ in 0..8 {
            let u_ad = l1_update(&mut s, &x, &integrator(), &dvector![0.0], &cfg, dt).unwrap();
            estimates.push(s.sigma_hat[0]);
            x[0] += dt * (u_ad[0] + 1.0);
        }
        assert_eq!(estimates[1], estimates[0]);
        assert_eq!(estimates[3], estimates[0]);
        assert_ne!(estimates[4], estimates[3]);
        assert_eq!(estimates[7], estimates[4]);
    }

    #[test]
    fn invalid_settings_rejected() {
        let dt = 0.01;
        assert!(L1Config {
            bandwidth: 0.0,
            ..Default::default()
        }
        .validate(dt)
        .is_err());
        assert!(L1Config {
            predictor_pole: 1.0,
            ..Default::default()
        }
        .validate(dt)
        .is_err());
        assert!(L1Config {
            adaptation_period: Some(0.001),
            ..Default::default()
        }
        .validate(dt)
        .is_err());
        assert!(L1Config::default().validate(dt).is_ok());
    }
}
