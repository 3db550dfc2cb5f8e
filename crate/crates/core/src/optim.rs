//! Projected gradient descent over the controller gains.

use nalgebra::RowDVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensprop::assemble_gradient;
use crate::sim::{manifold_error, rollout, RolloutOptions, Scenario};
use crate::types::{all_finite, FeasibleBox, ParamVector};

/// When to stop the descent loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Termination {
    /// Stop once `(L_prev - L) < rel_tol * L`.
    pub rel_tol: f64,
    /// If set, a loss increase is tolerated unless it exceeds
    /// `increase_tol * L_prev`.
    #[serde(default)]
    pub increase_tol: Option<f64>,
    /// Upper bound on gradient updates.
    pub max_iters: usize,
}

/// Which measurement-noise realization each descent iteration sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSchedule {
    /// One realization per trajectory, reused at every iteration, so loss
    /// changes between iterations come from the gains alone.
    #[default]
    Frozen,
    /// A fresh realization per iteration, as on repeated hardware runs.
    Resample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneConfig {
    pub step_size: f64,
    pub bounds: FeasibleBox,
    pub termination: Termination,
    pub noise: NoiseSchedule,
}

impl TuneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::Invalid(format!(
                "step size must be positive, got {}",
                self.step_size
            )));
        }
        if !(self.termination.rel_tol > 0.0) {
            return Err(Error::Invalid(format!(
                "rel_tol must be positive, got {}",
                self.termination.rel_tol
            )));
        }
        if let Some(tol) = self.termination.increase_tol {
            if !(tol >= 0.0) {
                return Err(Error::Invalid(format!(
                    "increase_tol must be non-negative, got {tol}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Relative loss reduction fell below `rel_tol`.
    Converged,
    /// Loss rose by more than the tolerated fraction.
    LossIncrease,
    MaxIters,
}

/// Loss and gradient at one visited parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub iteration: usize,
    pub theta: ParamVector,
    /// Batch-mean loss.
    pub loss: f64,
    /// Batch-mean gradient.
    pub gradient: RowDVector<f64>,
    /// Per-trajectory losses in batch order.
    pub losses: Vec<f64>,
    /// Worst plant-state manifold error over the batch rollouts.
    pub manifold_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOutcome {
    /// Lowest-loss iterate; `theta0` when nothing was evaluated.
    pub theta: ParamVector,
    pub best_iteration: Option<usize>,
    pub history: Vec<Iterate>,
    pub stop: StopReason,
}

/// Elementwise clamp into the box.
pub fn project(theta: &ParamVector, bounds: &FeasibleBox) -> ParamVector {
    ParamVector::from_iterator(
        theta.len(),
        theta
            .iter()
            .zip(bounds.lower().iter().zip(bounds.upper().iter()))
            .map(|(t, (lo, hi))| t.clamp(*lo, *hi)),
    )
}

/// `P(theta - alpha * grad^T)`.
pub fn gd_step(
    theta: &ParamVector,
    grad: &RowDVector<f64>,
    step_size: f64,
    bounds: &FeasibleBox,
) -> Result<ParamVector> {
    if grad.len() != theta.len() || bounds.len() != theta.len() {
        return Err(Error::dim("gradient step", theta.len(), grad.len()));
    }
    if !all_finite(grad.as_slice()) {
        return Err(Error::NonFiniteGradient);
    }
    Ok(project(&(theta - grad.transpose() * step_size), bounds))
}

/// Whether the loop stops after seeing `current` following `previous`.
pub fn should_stop(previous: f64, current: f64, termination: &Termination) -> Option<StopReason> {
    let reduction = previous - current;
    match termination.increase_tol {
        None if reduction < termination.rel_tol * current => Some(StopReason::Converged),
        None => None,
        Some(tol) => {
            if -reduction > tol * previous {
                Some(StopReason::LossIncrease)
            } else if reduction >= 0.0 && reduction < termination.rel_tol * current {
                Some(StopReason::Converged)
            } else {
                None
            }
        }
    }
}

/// Noise stream for trajectory `index` at descent iteration `iteration`.
/// Iteration 0 of every schedule uses stream `index`.
pub fn noise_stream(schedule: NoiseSchedule, iteration: usize, index: usize) -> u64 {
    match schedule {
        NoiseSchedule::Frozen => index as u64,
        NoiseSchedule::Resample => ((iteration as u64) << 32) | index as u64,
    }
}

/// Batch-mean loss and gradient over `scenarios`, rolled out in parallel.
/// The reduction runs in batch order so results do not depend on scheduling.
pub fn batch_gradient(
    scenarios: &[Scenario],
    theta: &ParamVector,
    iteration: usize,
    schedule: NoiseSchedule,
) -> Result<Iterate> {
    if scenarios.is_empty() {
        return Err(Error::Invalid(
            "tuning needs at least one trajectory".into(),
        ));
    }
    let results: Vec<Result<(f64, RowDVector<f64>, f64)>> = scenarios
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let opts = RolloutOptions {
                noise_stream: noise_stream(schedule, iteration, i),
                store_jacobians: false,
            };
            let record = rollout(s, theta, opts)?;
            Ok((
                record.loss,
                assemble_gradient(&record)?,
                manifold_error(s.model, &record),
            ))
        })
        .collect();
    let mut losses = Vec::with_capacity(scenarios.len());
    let mut gradient = RowDVector::zeros(theta.len());
    let mut worst = 0.0f64;
    for r in results {
        let (loss, grad, manifold) = r?;
        losses.push(loss);
        gradient += grad;
        worst = worst.max(manifold);
    }
    let count = scenarios.len() as f64;
    Ok(Iterate {
        iteration,
        theta: theta.clone(),
        loss: losses.iter().sum::<f64>() / count,
        gradient: gradient / count,
        losses,
        manifold_error: worst,
    })
}

/// Batch projected gradient descent from `theta0`.
pub fn tune(scenarios: &[Scenario], theta0: &ParamVector, cfg: &TuneConfig) -> Result<TuneOutcome> {
    cfg.validate()?;
    if !cfg.bounds.contains(theta0) {
        return Err(Error::Invalid(
            "initial parameters lie outside the feasible box".into(),
        ));
    }
    let max_iters = cfg.termination.max_iters;
    let mut history: Vec<Iterate> = Vec::new();
    let mut theta = theta0.clone();
    let mut stop = StopReason::MaxIters;
    if max_iters > 0 {
        for iteration in 0..=max_iters {
            let abort = |source: Error| Error::TuneAborted {
                iteration,
                source: Box::new(source),
            };
            let current = batch_gradient(scenarios, &theta, iteration, cfg.noise).map_err(abort)?;
            if !current.loss.is_finite() {
                return Err(abort(Error::Diverged { step: 0 }));
            }
            let reason = history
                .last()
                .and_then(|prev| should_stop(prev.loss, current.loss, &cfg.termination));
            let next = if reason.is_none() && iteration < max_iters {
                Some(
                    gd_step(&theta, &current.gradient, cfg.step_size, &cfg.bounds)
                        .map_err(abort)?,
                )
            } else {
                None
            };
            history.push(current);
            if let Some(r) = reason {
                stop = r;
                break;
            }
            match next {
                Some(t) => theta = t,
                None => break,
            }
        }
    }
    let best = history
        .iter()
        .min_by(|a, b| a.loss.total_cmp(&b.loss))
        .map(|it| (it.iteration, it.theta.clone()));
    Ok(match best {
        Some((i, t)) => TuneOutcome {
            theta: t,
            best_iteration: Some(i),
            history,
            stop,
        },
        None => TuneOutcome {
            theta: theta0.clone(),
            best_iteration: None,
            history,
            stop,
        },
    })
}
