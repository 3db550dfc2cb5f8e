//! Quadratic tracking loss and its per-step partial derivatives.

use nalgebra::{DVector, RowDVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::RolloutRecord;

/// `L = sum_{k=1..N} |S (x_k - xhat_k)|^2 + lambda sum_{k=0..N-1} |u_k|^2`
/// where `S` is a 0/1 diagonal selector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    selected: Vec<usize>,
    control_penalty: f64,
}

impl LossSpec {
    pub fn new(selected: Vec<usize>, control_penalty: f64) -> Result<Self> {
        if !(control_penalty >= 0.0 && control_penalty.is_finite()) {
            return Err(Error::Invalid(format!(
                "control penalty must be finite and non-negative, got {control_penalty}"
            )));
        }
        let mut selected = selected;
        selected.sort_unstable();
        selected.dedup();
        Ok(Self {
            selected,
            control_penalty,
        })
    }

    /// Position-only loss, the setting used for both vehicles.
    pub fn position(position_indices: Vec<usize>) -> Self {
        Self::new(position_indices, 0.0).expect("zero penalty is valid")
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn control_penalty(&self) -> f64 {
        self.control_penalty
    }

    /// Diagonal of the selector for an n-dimensional state.
    pub fn selector(&self, n: usize) -> DVector<f64> {
        let mut s = DVector::zeros(n);
        for &i in &self.selected {
            if i < n {
                s[i] = 1.0;
            }
        }
        s
    }

    pub fn state_term(&self, x: &DVector<f64>, desired: &DVector<f64>) -> f64 {
        self.selected
            .iter()
            .map(|&i| (x[i] - desired[i]).powi(2))
            .sum()
    }

    pub fn control_term(&self, u: &DVector<f64>) -> f64 {
        self.control_penalty * u.norm_squared()
    }

    /// `(dL/dx_k, dL/du_k) = (2 (x_k - xhat_k)^T S, 2 lambda u_k^T)`.
    pub fn partials(
        &self,
        x: &DVector<f64>,
        desired: &DVector<f64>,
        u: &DVector<f64>,
    ) -> (RowDVector<f64>, RowDVector<f64>) {
        let mut dl_dx = RowDVector::zeros(x.len());
        for &i in &self.selected {
            dl_dx[i] = 2.0 * (x[i] - desired[i]);
        }
        let dl_du = u.transpose() * (2.0 * self.control_penalty);
        (dl_dx, dl_du)
    }

    /// Loss recomputed from the stored states and controls.
    pub fn total(&self, record: &RolloutRecord) -> f64 {
        let n = record.horizon_steps();
        let states: f64 = record.steps[1..=n]
            .iter()
            .map(|s| self.state_term(&s.state, &s.desired.state))
            .sum();
        let controls: f64 = record.steps[..n]
            .iter()
            .map(|s| self.control_term(&s.control))
            .sum();
        states + controls
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn partials_vanish_on_target() {
        let spec = LossSpec::new(vec![0, 1], 0.3).unwrap();
        let x = dvector![1.0, 2.0, 3.0];
        let (dx, _) = spec.partials(&x, &x, &dvector![0.0]);
        assert_eq!(dx, RowDVector::zeros(3));
    }

    #[test]
    fn partials_are_twice_the_selected_error() {
        let spec = LossSpec::position(vec![0, 1]);
        let x = dvector![0.5, -0.5, 7.0];
        let (dx, du) = spec.partials(&x, &DVector::zeros(3), &dvector![3.0, 4.0]);
        assert_eq!(dx.as_slice(), &[1.0, -1.0, 0.0]);
        assert_eq!(du.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn control_penalty_of_three_four_is_twenty_five() {
        let spec = LossSpec::new(vec![0], 1.0).unwrap();
        assert_eq!(spec.control_term(&dvector![3.0, 4.0]), 25.0);
    }

    #[test]
    fn negative_penalty_rejected() {
        assert!(LossSpec::new(vec![0], -1.0).is_err());
    }

    #[test]
    fn selector_is_idempotent() {
        let spec = LossSpec::new(vec![2, 0, 2], 0.0).unwrap();
        let s = spec.selector(4);
        assert_eq!(s.component_mul(&s), s);
        assert_eq!(spec.selected(), &[0, 2]);
    }

    #[test]
    fn partials_match_finite_differences() {
        let spec = LossSpec::new(vec![0, 2], 0.7).unwrap();
        let x = dvector![0.3, -1.2, 2.5, 0.1];
        let d = dvector![-0.4, 0.0, 1.0, 9.0];
        let u = dvector![1.5, -0.25];
        let (dx, du) = spec.partials(&x, &d, &u);
        let eps = 1e-6;
        for i in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += eps;
            xm[i] -= eps;
            let fd = (spec.state_term(&xp, &d) - spec.state_term(&xm, &d)) / (2.0 * eps);
            assert!((fd - dx[i]).abs() < 1e-8, "x[{i}]: {fd} vs {}", dx[i]);
        }
        for i in 0..u.len() {
            let mut up = u.clone();
            let mut um = u.clone();
            up[i] += eps;
            um[i] -= eps;
            let fd = (spec.control_term(&up) - spec.control_term(&um)) / (2.0 * eps);
            assert!((fd - du[i]).abs() < 1e-8);
        }
    }
}
