//! Independent gradient oracles: central differences over whole rollouts and
//! reverse accumulation over stored step Jacobians.

use nalgebra::{DMatrix, DVector, RowDVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sim::{rollout, RolloutOptions, Scenario};
use crate::types::{FeasibleBox, ParamVector, RolloutRecord};

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Componentwise [`relative_error`], maximized.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| relative_error(*x, *y))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DifferenceKind {
    Central,
    Forward,
    Backward,
}

/// How one gradient component was differenced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdComponent {
    pub step: f64,
    pub kind: DifferenceKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdGradient {
    pub gradient: RowDVector<f64>,
    pub components: Vec<FdComponent>,
}

impl FdGradient {
    /// Components whose step was shrunk or made one-sided to stay in the box.
    pub fn adjusted(&self, eps: f64) -> Vec<usize> {
        self.components
            .iter()
            .enumerate()
            .filter(|(_, c)| c.step != eps || c.kind != DifferenceKind::Central)
            .map(|(i, _)| i)
            .collect()
    }
}

fn component_plan(theta: &ParamVector, bounds: Option<&FeasibleBox>, eps: f64) -> Vec<FdComponent> {
    (0..theta.len())
        .map(|i| {
            let Some(b) = bounds else {
                return FdComponent {
                    step: eps,
                    kind: DifferenceKind::Central,
                };
            };
            let room_down = theta[i] - b.lower()[i];
            let room_up = b.upper()[i] - theta[i];
            let room = room_down.min(room_up);
            if room >= eps {
                FdComponent {
                    step: eps,
                    kind: DifferenceKind::Central,
                }
            } else if room > 1e-3 * eps {
                FdComponent {
                    step: room,
                    kind: DifferenceKind::Central,
                }
            } else if room_up >= room_down {
                FdComponent {
                    step: eps.min(room_up),
                    kind: DifferenceKind::Forward,
                }
            } else {
                FdComponent {
                    step: eps.min(room_down),
                    kind: DifferenceKind::Backward,
                }
            }
        })
        .collect()
}

/// Finite-difference gradient of an arbitrary objective. Perturbations that
/// would leave `bounds` shrink the step, or turn one-sided on the boundary.
/// All objective evaluations run in parallel.
pub fn fd_gradient_of<F>(
    objective: F,
    theta: &ParamVector,
    bounds: Option<&FeasibleBox>,
    eps: f64,
) -> Result<FdGradient>
where
    F: Fn(&ParamVector) -> Result<f64> + Sync,
{
    if !(eps > 0.0) {
        return Err(Error::Invalid(format!(
            "finite-difference step must be positive, got {eps}"
        )));
    }
    let plan = component_plan(theta, bounds, eps);
    let mut points: Vec<ParamVector> = Vec::with_capacity(2 * theta.len() + 1);
    for (i, c) in plan.iter().enumerate() {
        let (up, down) = match c.kind {
            DifferenceKind::Central => (c.step, -c.step),
            DifferenceKind::Forward => (c.step, 0.0),
            DifferenceKind::Backward => (0.0, -c.step),
        };
        let mut p = theta.clone();
        p[i] += up;
        points.push(p);
        let mut m = theta.clone();
        m[i] += down;
        points.push(m);
    }
    let values: Vec<f64> = points.par_iter().map(&objective).collect::<Result<_>>()?;
    let gradient = RowDVector::from_iterator(
        theta.len(),
        plan.iter().enumerate().map(|(i, c)| {
            let span = match c.kind {
                DifferenceKind::Central => 2.0 * c.step,
                _ => c.step,
            };
            (values[2 * i] - values[2 * i + 1]) / span
        }),
    );
    Ok(FdGradient {
        gradient,
        components: plan,
    })
}

/// Central-difference gradient of the rollout loss with fresh deterministic
/// rollouts (noise stream 0).
pub fn fd_gradient(
    scenario: &Scenario,
    theta: &ParamVector,
    bounds: Option<&FeasibleBox>,
    eps: f64,
) -> Result<FdGradient> {
    fd_gradient_of(
        |th| Ok(rollout(scenario, th, RolloutOptions::default())?.loss),
        theta,
        bounds,
        eps,
    )
}

/// Adjoint pass from `k = N` back to `0` over the stored Jacobians:
///
/// ```text
/// lambda_N = dL/dx_N + dL/du_N Jx_h_N
/// mu_k     = dL/du_k + lambda_{k+1} Ju_f_k
/// lambda_k = dL/dx_k + lambda_{k+1} Jx_f_k + mu_k Jx_h_k
/// grad    += mu_k Jtheta_h_k
/// ```
pub fn reverse_gradient(record: &RolloutRecord) -> Result<RowDVector<f64>> {
    let dims = record.dims;
    let n_steps = record.horizon_steps();
    if record.steps.len() < 2 {
        return Err(Error::IncompleteRecord(
            "need at least one control interval",
        ));
    }
    let jac = |k: usize| {
        record.steps[k]
            .jacobians
            .as_ref()
            .ok_or(Error::IncompleteRecord("step Jacobians were not stored"))
    };
    let mut grad = RowDVector::zeros(dims.p);
    let last = &record.steps[n_steps];
    let j_last = jac(n_steps)?;
    grad += &last.dl_du * &j_last.control_param;
    let mut lambda = &last.dl_dx + &last.dl_du * &j_last.control_state;
    for k in (0..n_steps).rev() {
        let step = &record.steps[k];
        let j = jac(k)?;
        if j.state.shape() != (dims.n, dims.n) || j.input.shape() != (dims.n, dims.m) {
            return Err(Error::IncompleteRecord(
                "step-map Jacobians missing before the final step",
            ));
        }
        let mu = &step.dl_du + &lambda * &j.input;
        grad += &mu * &j.control_param;
        lambda = &step.dl_dx + &lambda * &j.state + &mu * &j.control_state;
    }
    Ok(grad)
}

/// Central-difference Jacobian of `f` at `x`; column `j` uses the step
/// `eps * max(1, |x_j|)`.
pub fn fd_jacobian<F>(f: F, x: &DVector<f64>, eps: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let f0 = f(x);
    let mut jac = DMatrix::zeros(f0.len(), x.len());
    for j in 0..x.len() {
        let h = eps * x[j].abs().max(1.0);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        let col = (f(&xp) - f(&xm)) / (2.0 * h);
        jac.set_column(j, &col);
    }
    jac
}

/// Largest entrywise mismatch between an analytic Jacobian and its
/// finite-difference estimate, relative to `max(1, |fd|)`.
pub fn jacobian_mismatch(analytic: &DMatrix<f64>, fd: &DMatrix<f64>) -> f64 {
    analytic
        .iter()
        .zip(fd.iter())
        .map(|(a, f)| (a - f).abs() / f.abs().max(1.0))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn relative_error_basics() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert_eq!(relative_error(1.0, 1.0), 0.0);
        assert!((relative_error(1.0, 1.1) - 0.1 / 1.1).abs() < 1e-15);
    }

    #[test]
    fn quadratic_objective_is_exact() {
        let f = |th: &ParamVector| Ok(3.0 * th[0] * th[0] - 2.0 * th[0] * th[1] + th[1]);
        let theta = dvector![1.5, -0.5];
        let fd = fd_gradient_of(f, &theta, None, 1e-3).unwrap();
        assert!((fd.gradient[0] - (9.0 + 1.0)).abs() < 1e-9);
        assert!((fd.gradient[1] - (-3.0 + 1.0)).abs() < 1e-9);
    }

    #[test]
    fn scalar_rollout_gradient() {
        // L(theta) = (1 - theta)^2 from the one-step scalar loop
        let f = |th: &ParamVector| Ok((1.0 - th[0]).powi(2));
        let fd = fd_gradient_of(f, &dvector![0.5], None, 1e-6).unwrap();
        assert!((fd.gradient[0] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn steps_shrink_near_the_box() {
        let b = FeasibleBox::uniform(3, 1.0, 2.0).unwrap();
        let theta = dvector![1.5, 1.0 + 1e-7, 1.0];
        let f = |th: &ParamVector| Ok(th.iter().map(|v| v * v).sum());
        let fd = fd_gradient_of(f, &theta, Some(&b), 1e-6).unwrap();
        assert_eq!(fd.components[0].kind, DifferenceKind::Central);
        assert!((fd.components[1].step - 1e-7).abs() < 1e-15);
        assert_eq!(fd.components[2].kind, DifferenceKind::Forward);
        assert_eq!(fd.adjusted(1e-6), vec![1, 2]);
        for i in 0..3 {
            assert!((fd.gradient[i] - 2.0 * theta[i]).abs() < 1e-5);
        }
    }

    #[test]
    fn fd_jacobian_of_linear_map() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, -1.0, 0.5, 4.0]);
        let jac = fd_jacobian(|x| &a * x, &dvector![0.1, -2.0, 30.0], 1e-6);
        assert!(jacobian_mismatch(&a, &jac) < 1e-8);
    }
}
