//! Forward sensitivity propagation through the unrolled closed loop.
//!
//! Alongside the rollout we carry `dx_k/dtheta` and `du_k/dtheta`:
//!
//! ```text
//! du_k/dtheta     = Jx_h dx_k/dtheta + Jtheta_h
//! dx_{k+1}/dtheta = (Jx_f + Ju_f Jx_h) dx_k/dtheta + Ju_f Jtheta_h
//! ```
//!
//! and the loss gradient is the sum of the stored sensitivities weighted by
//! the loss partials `dL/dx_k` and `dL/du_k`.

use nalgebra::{DMatrix, RowDVector};

use crate::error::{Error, Result};
use crate::types::{RolloutRecord, SensitivityState};

/// Sensitivities at `k = 0`. The initial state does not depend on the gains,
/// so `dx_0/dtheta = 0`; `du_0/dtheta` is filled by the first
/// [`propagate`].
pub fn init_sensitivity(n: usize, m: usize, p: usize) -> SensitivityState {
    SensitivityState {
        dx_dtheta: DMatrix::zeros(n, p),
        du_dtheta: DMatrix::zeros(m, p),
    }
}

/// Control sensitivity at the current step: `Jx_h dx/dtheta + Jtheta_h`.
pub fn control_sensitivity(
    dx_dtheta: &DMatrix<f64>,
    jx_h: &DMatrix<f64>,
    jtheta_h: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let (n, p) = dx_dtheta.shape();
    let m = jx_h.nrows();
    if jx_h.shape() != (m, n) {
        return Err(Error::dim(
            "dh/dx",
            format!("{m}x{n}"),
            format!("{:?}", jx_h.shape()),
        ));
    }
    if jtheta_h.shape() != (m, p) {
        return Err(Error::dim(
            "dh/dtheta",
            format!("{m}x{p}"),
            format!("{:?}", jtheta_h.shape()),
        ));
    }
    Ok(jx_h * dx_dtheta + jtheta_h)
}

/// One step of the recursion. Returns the state `k + 1` sensitivities with
/// `du_dtheta` holding `du_k/dtheta` (the control sensitivity computed from
/// the pre-step state sensitivity).
pub fn propagate(
    s: &SensitivityState,
    jx_f: &DMatrix<f64>,
    ju_f: &DMatrix<f64>,
    jx_h: &DMatrix<f64>,
    jtheta_h: &DMatrix<f64>,
) -> Result<SensitivityState> {
    let (n, _) = s.dx_dtheta.shape();
    let m = jx_h.nrows();
    if jx_f.shape() != (n, n) {
        return Err(Error::dim(
            "df/dx",
            format!("{n}x{n}"),
            format!("{:?}", jx_f.shape()),
        ));
    }
    if ju_f.shape() != (n, m) {
        return Err(Error::dim(
            "df/du",
            format!("{n}x{m}"),
            format!("{:?}", ju_f.shape()),
        ));
    }
    let du_dtheta = control_sensitivity(&s.dx_dtheta, jx_h, jtheta_h)?;
    // (Jx_f + Ju_f Jx_h) S + Ju_f Jtheta_h == Jx_f S + Ju_f (Jx_h S + Jtheta_h)
    let dx_dtheta = jx_f * &s.dx_dtheta + ju_f * &du_dtheta;
    Ok(SensitivityState {
        dx_dtheta,
        du_dtheta,
    })
}

/// `sum_k dL/dx_k dx_k/dtheta + dL/du_k du_k/dtheta` over the stored steps.
/// Partials outside the loss ranges (`dL/dx_0`, `dL/du_N`) are stored as zero.
pub fn assemble_gradient(record: &RolloutRecord) -> Result<RowDVector<f64>> {
    let dims = record.dims;
    if record.steps.len() < 2 {
        return Err(Error::IncompleteRecord(
            "need at least one control interval",
        ));
    }
    let mut grad = RowDVector::zeros(dims.p);
    for step in &record.steps {
        let s = &step.sensitivity;
        if s.dx_dtheta.shape() != (dims.n, dims.p)
            || s.du_dtheta.shape() != (dims.m, dims.p)
            || step.dl_dx.len() != dims.n
            || step.dl_du.len() != dims.m
        {
            return Err(Error::IncompleteRecord(
                "step shapes disagree with record dimensions",
            ));
        }
        grad += &step.dl_dx * &s.dx_dtheta;
        grad += &step.dl_du * &s.du_dtheta;
    }
    Ok(grad)
}
