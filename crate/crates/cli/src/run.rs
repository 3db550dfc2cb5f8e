//! Subcommand implementations. Each writes its results under `out` and
//! starts by writing the resolved config, so any run can be replayed.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rayon::prelude::*;
use senstune_core::optim::{noise_stream, NoiseSchedule, StopReason};
use senstune_core::sensprop::assemble_gradient;
use senstune_core::sim::{held_out_streams, rmse_position, true_rmse_position};
use senstune_core::verify::{fd_gradient, max_relative_error, reverse_gradient};
use senstune_core::{
    evaluate, rollout, tune, Error as CoreError, Evaluation, L1Config, LossSpec, ParamVector,
    PlantIntegrator, RolloutOptions, Scenario, SimConfig, TuneOutcome, Uncertainty,
};
use serde::{Deserialize, Serialize};

use crate::config::{Ablation, ConfigError, ExperimentConfig, NamedTrajectory, System};
use crate::output::{fmt_f64, write_csv, write_json};
use crate::CliError;

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: PathBuf,
    /// Worker threads for parallel sections; `None` uses all cores.
    pub workers: Option<usize>,
    /// Replaces `sim.seed`.
    pub seed: Option<u64>,
}

pub const RESOLVED_CONFIG: &str = "resolved_config.toml";

/// Loads, applies overrides, validates and snapshots the config.
pub fn prepare(config: &Path, opts: &RunOptions) -> Result<ExperimentConfig, CliError> {
    let cfg = load(config, opts)?;
    snapshot(&cfg, opts)?;
    Ok(cfg)
}

/// As [`prepare`], also reading `--theta` before anything is written.
fn prepare_with_theta(
    config: &Path,
    theta: Option<&Path>,
    opts: &RunOptions,
) -> Result<(ExperimentConfig, ParamVector), CliError> {
    let cfg = load(config, opts)?;
    let theta = match theta {
        Some(path) => read_theta(path, cfg.param_count())?,
        None => cfg.theta0(),
    };
    snapshot(&cfg, opts)?;
    Ok((cfg, theta))
}

fn load(config: &Path, opts: &RunOptions) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(seed) = opts.seed {
        cfg.sim.seed = seed;
    }
    let cfg = cfg.resolved();
    cfg.validate()?;
    if opts.workers == Some(0) {
        return Err(ConfigError::new("--workers", "must be at least 1").into());
    }
    Ok(cfg)
}

fn snapshot(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<(), CliError> {
    fs::create_dir_all(&opts.out).map_err(|e| CliError::io(&opts.out, e))?;
    let path = opts.out.join(RESOLVED_CONFIG);
    fs::write(&path, cfg.to_toml()).map_err(|e| CliError::io(&path, e))
}

fn with_pool<T: Send>(
    workers: Option<usize>,
    job: impl FnOnce() -> T + Send,
) -> Result<T, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Other(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(job))
}

/// Everything a rollout borrows, owned in one place.
struct Setup {
    system: System,
    loss: LossSpec,
    train: Vec<NamedTrajectory>,
    eval: Vec<NamedTrajectory>,
}

impl Setup {
    fn new(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        let system = cfg.build_system()?;
        let loss = cfg.loss_spec(&system);
        Ok(Self {
            system,
            loss,
            train: cfg.training_trajectories(),
            eval: cfg.eval_trajectories(),
        })
    }

    fn scenarios<'a>(
        &'a self,
        set: &'a [NamedTrajectory],
        sim: &'a SimConfig,
        l1: Option<&'a L1Config>,
    ) -> Vec<Scenario<'a>> {
        set.iter()
            .map(|t| Scenario {
                model: self.system.model(),
                trajectory: t.trajectory.as_ref(),
                loss: &self.loss,
                sim,
                l1,
            })
            .collect()
    }
}

fn divergence_or_other(e: CoreError) -> CliError {
    if is_divergence(&e) {
        CliError::Diverged(e.to_string())
    } else {
        CliError::Other(e.to_string())
    }
}

/// Failures that mean the closed loop blew up rather than a usage error.
pub fn is_divergence(e: &CoreError) -> bool {
    match e {
        CoreError::TuneAborted { source, .. } => is_divergence(source),
        CoreError::Diverged { .. }
        | CoreError::NonFiniteGradient
        | CoreError::NotOrthonormal { .. }
        | CoreError::NotSkewSymmetric { .. }
        | CoreError::ControllerSingularity(_)
        | CoreError::StepUnderflow { .. } => true,
        _ => false,
    }
}

fn eval_streams(cfg: &ExperimentConfig, index: usize) -> Vec<u64> {
    if cfg.eval.held_out {
        held_out_streams(cfg.eval.realizations)
    } else {
        vec![noise_stream(NoiseSchedule::Frozen, 0, index)]
    }
}

fn theta_columns(prefix: &str, p: usize) -> Vec<String> {
    (0..p).map(|i| format!("{prefix}{i}")).collect()
}

fn stop_name(stop: StopReason) -> &'static str {
    match stop {
        StopReason::Converged => "converged",
        StopReason::LossIncrease => "loss_increase",
        StopReason::MaxIters => "max_iters",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaFile {
    pub theta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_iteration: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
}

pub fn read_theta(path: &Path, p: usize) -> Result<ParamVector, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let file: ThetaFile = serde_json::from_str(&text)
        .map_err(|e| ConfigError::new("--theta", format!("{}: {e}", path.display())))?;
    if file.theta.len() != p {
        return Err(ConfigError::new(
            "--theta",
            format!(
                "expected {p} gains for this system, got {}",
                file.theta.len()
            ),
        )
        .into());
    }
    if file.theta.iter().any(|v| !v.is_finite()) {
        return Err(ConfigError::new("--theta", "gains must be finite").into());
    }
    Ok(DVector::from_vec(file.theta))
}

/// Descent from `tune.theta0` on the training trajectories.
pub fn cmd_tune(config: &Path, opts: &RunOptions) -> Result<TuneOutcome, CliError> {
    let cfg = prepare(config, opts)?;
    let setup = Setup::new(&cfg)?;
    let l1 = cfg.l1();
    let scenarios = setup.scenarios(&setup.train, &cfg.sim, l1.as_ref());
    let theta0 = cfg.theta0();
    let tune_cfg = cfg.tune_config();
    let outcome = with_pool(opts.workers, || tune(&scenarios, &theta0, &tune_cfg))?;
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            write_json(
                &opts.out.join("status.json"),
                &serde_json::json!({
                    "status": if is_divergence(&e) { "diverged" } else { "error" },
                    "error": e.to_string(),
                }),
            )?;
            return Err(divergence_or_other(e));
        }
    };

    let p = theta0.len();
    let mut header = vec![
        "iteration".to_string(),
        "loss".into(),
        "gradient_norm".into(),
        "manifold_error".into(),
    ];
    header.extend(theta_columns("theta_", p));
    header.extend(theta_columns("grad_", p));
    let rows: Vec<Vec<String>> = outcome
        .history
        .iter()
        .map(|it| {
            let mut row = vec![
                it.iteration.to_string(),
                fmt_f64(it.loss),
                fmt_f64(it.gradient.norm()),
                fmt_f64(it.manifold_error),
            ];
            row.extend(it.theta.iter().map(|v| fmt_f64(*v)));
            row.extend(it.gradient.iter().map(|v| fmt_f64(*v)));
            row
        })
        .collect();
    write_csv(&opts.out.join("history.csv"), &header, &rows)?;

    let header = ["iteration", "trajectory", "loss"].map(String::from);
    let rows: Vec<Vec<String>> = outcome
        .history
        .iter()
        .flat_map(|it| {
            it.losses
                .iter()
                .zip(&setup.train)
                .map(move |(l, t)| vec![it.iteration.to_string(), t.name.clone(), fmt_f64(*l)])
        })
        .collect();
    write_csv(&opts.out.join("rollouts.csv"), &header, &rows)?;

    let best_loss = outcome
        .best_iteration
        .and_then(|i| outcome.history.iter().find(|it| it.iteration == i))
        .map(|it| it.loss);
    write_json(
        &opts.out.join("theta.json"),
        &ThetaFile {
            theta: outcome.theta.as_slice().to_vec(),
            best_iteration: outcome.best_iteration,
            best_loss,
            stop: Some(stop_name(outcome.stop).into()),
            iterations: Some(outcome.history.len()),
        },
    )?;
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub trajectory: String,
    pub status: String,
    pub evaluation: Option<Evaluation>,
}

/// Fixed gains on the evaluation trajectories.
pub fn cmd_eval(
    config: &Path,
    theta: Option<&Path>,
    opts: &RunOptions,
) -> Result<Vec<EvalRow>, CliError> {
    let (cfg, theta) = prepare_with_theta(config, theta, opts)?;
    let setup = Setup::new(&cfg)?;
    let l1 = cfg.l1();
    let scenarios = setup.scenarios(&setup.eval, &cfg.sim, l1.as_ref());
    let results: Vec<EvalRow> = with_pool(opts.workers, || {
        scenarios
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let (status, evaluation) = match evaluate(s, &theta, &eval_streams(&cfg, i)) {
                    Ok(e) => ("ok".to_string(), Some(e)),
                    Err(e) if is_divergence(&e) => ("diverged".to_string(), None),
                    Err(e) => (format!("error: {e}"), None),
                };
                EvalRow {
                    trajectory: setup.eval[i].name.clone(),
                    status,
                    evaluation,
                }
            })
            .collect()
    })?;
    let header = [
        "trajectory",
        "status",
        "loss",
        "rmse",
        "true_rmse",
        "realizations",
        "manifold_error",
    ]
    .map(String::from);
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            let mut row = vec![r.trajectory.clone(), r.status.clone()];
            match &r.evaluation {
                Some(e) => row.extend([
                    fmt_f64(e.loss),
                    fmt_f64(e.rmse),
                    fmt_f64(e.true_rmse),
                    e.realizations.to_string(),
                    fmt_f64(e.manifold_error),
                ]),
                None => row.extend(vec![String::new(); 5]),
            }
            row
        })
        .collect();
    write_csv(&opts.out.join("eval.csv"), &header, &rows)?;
    Ok(results)
}

/// One (uncertainty cell, ablation) result of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub cell: usize,
    pub uncertainty: Uncertainty,
    pub ablation: Ablation,
    pub status: String,
    pub iterations: Option<usize>,
    pub stop: Option<StopReason>,
    /// Means over the evaluation trajectories.
    pub evaluation: Option<Evaluation>,
    pub theta: Option<ParamVector>,
    /// Worst plant-state manifold error over every completed rollout of the
    /// job, tuning included.
    pub manifold_error: f64,
}

/// Cross product of the configured uncertainty axes, in row-major order.
pub fn grid_cells(cfg: &ExperimentConfig) -> Vec<Uncertainty> {
    let base = cfg.sim.uncertainty;
    let axis = |v: &Vec<f64>, fixed: f64| if v.is_empty() { vec![fixed] } else { v.clone() };
    let mut cells = Vec::new();
    for a1 in axis(&cfg.grid.force_amplitude, base.force_amplitude) {
        for a2 in axis(&cfg.grid.moment_amplitude, base.moment_amplitude) {
            for beta in axis(&cfg.grid.inertia_scale, base.inertia_scale) {
                cells.push(Uncertainty {
                    force_amplitude: a1,
                    moment_amplitude: a2,
                    inertia_scale: beta,
                });
            }
        }
    }
    cells
}

fn mean_evaluation(parts: &[Evaluation]) -> Evaluation {
    let n = parts.len() as f64;
    Evaluation {
        loss: parts.iter().map(|e| e.loss).sum::<f64>() / n,
        rmse: parts.iter().map(|e| e.rmse).sum::<f64>() / n,
        true_rmse: parts.iter().map(|e| e.true_rmse).sum::<f64>() / n,
        realizations: parts.iter().map(|e| e.realizations).min().unwrap_or(0),
        manifold_error: parts.iter().map(|e| e.manifold_error).fold(0.0, f64::max),
    }
}

fn run_grid_job(
    cfg: &ExperimentConfig,
    setup: &Setup,
    cell: usize,
    uncertainty: Uncertainty,
    ablation: Ablation,
) -> GridRow {
    let sim = SimConfig {
        uncertainty,
        ..cfg.sim.clone()
    };
    let l1_params = cfg.l1.params();
    let l1 = ablation.l1().then_some(&l1_params);
    let mut row = GridRow {
        cell,
        uncertainty,
        ablation,
        status: "ok".into(),
        iterations: None,
        stop: None,
        evaluation: None,
        theta: None,
        manifold_error: 0.0,
    };
    let theta = if ablation.tune() {
        let scenarios = setup.scenarios(&setup.train, &sim, l1);
        match tune(&scenarios, &cfg.theta0(), &cfg.tune_config()) {
            Ok(outcome) => {
                row.iterations = Some(outcome.history.len());
                row.manifold_error = outcome
                    .history
                    .iter()
                    .map(|it| it.manifold_error)
                    .fold(0.0, f64::max);
                row.stop = Some(outcome.stop);
                outcome.theta
            }
            Err(e) => {
                row.status = if is_divergence(&e) {
                    "diverged".into()
                } else {
                    format!("error: {e}")
                };
                return row;
            }
        }
    } else {
        cfg.theta0()
    };
    row.theta = Some(theta.clone());
    let scenarios = setup.scenarios(&setup.eval, &sim, l1);
    let parts: Result<Vec<Evaluation>, CoreError> = scenarios
        .iter()
        .enumerate()
        .map(|(i, s)| evaluate(s, &theta, &eval_streams(cfg, i)))
        .collect();
    match parts {
        Ok(parts) if !parts.is_empty() => {
            let e = mean_evaluation(&parts);
            row.manifold_error = row.manifold_error.max(e.manifold_error);
            row.evaluation = Some(e);
        }
        Ok(_) => {}
        Err(e) => {
            row.status = if is_divergence(&e) {
                "diverged".into()
            } else {
                format!("error: {e}")
            }
        }
    }
    row
}

/// Uncertainty sweep crossed with the ablation list. Diverged jobs are kept
/// with their status; the sweep always completes.
pub fn cmd_grid(config: &Path, opts: &RunOptions) -> Result<Vec<GridRow>, CliError> {
    let cfg = prepare(config, opts)?;
    let setup = Setup::new(&cfg)?;
    let jobs: Vec<(usize, Uncertainty, Ablation)> = grid_cells(&cfg)
        .into_iter()
        .enumerate()
        .flat_map(|(i, u)| cfg.grid.ablations.iter().map(move |a| (i, u, *a)))
        .collect();
    let rows: Vec<GridRow> = with_pool(opts.workers, || {
        jobs.par_iter()
            .map(|(cell, u, a)| run_grid_job(&cfg, &setup, *cell, *u, *a))
            .collect()
    })?;

    let p = cfg.param_count();
    let mut header: Vec<String> = [
        "cell",
        "force_amplitude",
        "moment_amplitude",
        "inertia_scale",
        "tune",
        "l1",
        "status",
        "iterations",
        "stop",
        "loss",
        "rmse",
        "true_rmse",
        "manifold_error",
    ]
    .map(String::from)
    .to_vec();
    header.extend(theta_columns("theta_", p));
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut row = vec![
                r.cell.to_string(),
                fmt_f64(r.uncertainty.force_amplitude),
                fmt_f64(r.uncertainty.moment_amplitude),
                fmt_f64(r.uncertainty.inertia_scale),
                r.ablation.tune().to_string(),
                r.ablation.l1().to_string(),
                r.status.clone(),
                r.iterations.map(|i| i.to_string()).unwrap_or_default(),
                r.stop.map(|s| stop_name(s).to_string()).unwrap_or_default(),
                opt(r.evaluation.map(|e| e.loss)),
                opt(r.evaluation.map(|e| e.rmse)),
                opt(r.evaluation.map(|e| e.true_rmse)),
                fmt_f64(r.manifold_error),
            ];
            match &r.theta {
                Some(t) => row.extend(t.iter().map(|v| fmt_f64(*v))),
                None => row.extend(vec![String::new(); p]),
            }
            row
        })
        .collect();
    write_csv(&opts.out.join("grid.csv"), &header, &csv_rows)?;
    let diverged = rows.iter().filter(|r| r.status == "diverged").count();
    let failed = rows
        .iter()
        .filter(|r| r.status.starts_with("error"))
        .count();
    write_json(
        &opts.out.join("summary.json"),
        &serde_json::json!({
            "cells": grid_cells(&cfg).len(),
            "jobs": rows.len(),
            "ok": rows.len() - diverged - failed,
            "diverged": diverged,
            "failed": failed,
        }),
    )?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientCheck {
    pub trajectory: String,
    pub loss: f64,
    pub sensitivity: Vec<f64>,
    pub reverse: Vec<f64>,
    pub finite_difference: Vec<f64>,
    /// Components whose difference step was shrunk or made one-sided.
    pub adjusted: Vec<usize>,
    pub max_rel_error_fd: f64,
    pub max_rel_error_reverse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    /// Euler plant without noise or uncertainty: the gradient is exact up
    /// to round-off and the tolerances below apply.
    pub graph_consistent: bool,
    pub eps: f64,
    pub fd_tolerance: f64,
    pub reverse_tolerance: f64,
    pub passed: bool,
    pub checks: Vec<GradientCheck>,
}

pub const FD_TOLERANCE: f64 = 1e-4;
pub const REVERSE_TOLERANCE: f64 = 1e-9;

/// Sensitivity gradient against central differences and the reverse pass,
/// one rollout per training trajectory on its first noise stream.
pub fn cmd_verify_gradient(
    config: &Path,
    theta: Option<&Path>,
    eps: f64,
    opts: &RunOptions,
) -> Result<VerifyReport, CliError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(ConfigError::new("--eps", format!("must be positive, got {eps}")).into());
    }
    let (cfg, theta) = prepare_with_theta(config, theta, opts)?;
    let setup = Setup::new(&cfg)?;
    let l1 = cfg.l1();
    let scenarios = setup.scenarios(&setup.train, &cfg.sim, l1.as_ref());
    let bounds = cfg.bounds();
    let checks: Result<Vec<GradientCheck>, CoreError> = with_pool(opts.workers, || {
        scenarios
            .iter()
            .zip(&setup.train)
            .map(|(s, t)| {
                let record = rollout(
                    s,
                    &theta,
                    RolloutOptions {
                        noise_stream: 0,
                        store_jacobians: true,
                    },
                )?;
                let forward = assemble_gradient(&record)?;
                let reverse = reverse_gradient(&record)?;
                let fd = fd_gradient(s, &theta, Some(&bounds), eps)?;
                Ok(GradientCheck {
                    trajectory: t.name.clone(),
                    loss: record.loss,
                    max_rel_error_fd: max_relative_error(
                        forward.as_slice(),
                        fd.gradient.as_slice(),
                    ),
                    max_rel_error_reverse: max_relative_error(
                        forward.as_slice(),
                        reverse.as_slice(),
                    ),
                    sensitivity: forward.iter().copied().collect(),
                    reverse: reverse.iter().copied().collect(),
                    finite_difference: fd.gradient.iter().copied().collect(),
                    adjusted: fd.adjusted(eps),
                })
            })
            .collect()
    })?;
    let checks = checks.map_err(divergence_or_other)?;
    let graph_consistent = cfg.sim.plant_integrator == PlantIntegrator::Euler
        && cfg.sim.noise.is_zero()
        && cfg.sim.uncertainty.is_nominal()
        && l1.is_none();
    let passed = checks.iter().all(|c| {
        c.max_rel_error_reverse <= REVERSE_TOLERANCE
            && (!graph_consistent || c.max_rel_error_fd <= FD_TOLERANCE)
    });
    let report = VerifyReport {
        graph_consistent,
        eps,
        fd_tolerance: FD_TOLERANCE,
        reverse_tolerance: REVERSE_TOLERANCE,
        passed,
        checks,
    };
    write_json(&opts.out.join("verify.json"), &report)?;
    Ok(report)
}

/// Per-step dump of one rollout; with `sensitivity` also the full
/// `dx/dtheta` and `du/dtheta` in long format.
pub fn cmd_simulate(
    config: &Path,
    theta: Option<&Path>,
    trajectory: usize,
    sensitivity: bool,
    opts: &RunOptions,
) -> Result<f64, CliError> {
    let (cfg, theta) = prepare_with_theta(config, theta, opts)?;
    let setup = Setup::new(&cfg)?;
    let Some(named) = setup.train.get(trajectory) else {
        return Err(ConfigError::new(
            "--trajectory",
            format!(
                "index {trajectory} out of range for {} trajectories",
                setup.train.len()
            ),
        )
        .into());
    };
    let l1 = cfg.l1();
    let scenario = Scenario {
        model: setup.system.model(),
        trajectory: named.trajectory.as_ref(),
        loss: &setup.loss,
        sim: &cfg.sim,
        l1: l1.as_ref(),
    };
    let record = rollout(
        &scenario,
        &theta,
        RolloutOptions {
            noise_stream: noise_stream(NoiseSchedule::Frozen, 0, trajectory),
            store_jacobians: false,
        },
    )
    .map_err(divergence_or_other)?;
    let gradient = assemble_gradient(&record).map_err(divergence_or_other)?;

    let dims = record.dims;
    let mut header = vec!["k".to_string(), "t".into()];
    header.extend(theta_columns("x_", dims.n));
    header.extend(theta_columns("x_true_", dims.n));
    header.extend(theta_columns("x_desired_", dims.n));
    header.extend(theta_columns("u_", dims.m));
    header.extend(theta_columns("u_ad_", dims.m));
    let rows: Vec<Vec<String>> = record
        .steps
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let mut row = vec![k.to_string(), fmt_f64(s.t)];
            for v in [
                &s.state,
                &s.true_state,
                &s.desired.state,
                &s.control,
                &s.adaptive,
            ] {
                row.extend(v.iter().map(|x| fmt_f64(*x)));
            }
            row
        })
        .collect();
    write_csv(&opts.out.join("rollout.csv"), &header, &rows)?;

    if sensitivity {
        let header = ["k", "block", "row", "col", "value"].map(String::from);
        let mut rows = Vec::new();
        for (k, s) in record.steps.iter().enumerate() {
            for (block, m) in [
                ("dx_dtheta", &s.sensitivity.dx_dtheta),
                ("du_dtheta", &s.sensitivity.du_dtheta),
            ] {
                for r in 0..m.nrows() {
                    for c in 0..m.ncols() {
                        rows.push(vec![
                            k.to_string(),
                            block.to_string(),
                            r.to_string(),
                            c.to_string(),
                            fmt_f64(m[(r, c)]),
                        ]);
                    }
                }
            }
        }
        write_csv(&opts.out.join("sensitivity.csv"), &header, &rows)?;
    }

    write_json(
        &opts.out.join("summary.json"),
        &serde_json::json!({
            "trajectory": named.name,
            "loss": record.loss,
            "rmse": rmse_position(&record),
            "true_rmse": true_rmse_position(&record),
            "gradient": gradient.iter().copied().collect::<Vec<f64>>(),
        }),
    )?;
    Ok(record.loss)
}
