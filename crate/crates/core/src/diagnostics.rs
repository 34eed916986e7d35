//! Numerical checks of the a priori guarantees for the second-order model:
//! the sphere/tangency invariants, the well-posedness smallness condition and
//! the resulting speed bound.

use serde::Serialize;

use crate::dynamics::ModelParams;
use crate::error::{Error, Result};
use crate::geometry::{dot, norm, norm_sq};
use crate::integrate::{ControlGrid, SwarmState, TimeGrid, Trajectory};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct InvariantReport {
    /// max over particles and nodes of `| |x_i| - 1 |`
    pub max_norm_drift: f64,
    /// max over particles and nodes of `|<x_i, v_i>|` (0 for first order)
    pub max_tangency_drift: f64,
    /// `sup_t max_i |v_i(t)|` (0 for first order)
    pub max_speed: f64,
    /// `max_i` of the weighted L2 norm of `u_i` over the horizon
    pub control_bound_m: f64,
}

/// `max_i (sum_k w_k dt |u_i(t_k)|^2)^(1/2)`
pub fn control_bound(u: &ControlGrid, grid: &TimeGrid) -> f64 {
    (0..u.n())
        .map(|i| {
            grid.integrate((0..u.nodes()).map(|k| norm_sq(u.particle(k, i))))
                .sqrt()
        })
        .fold(0.0, f64::max)
}

/// Largest particle speed in a state.
pub fn max_speed(state: &SwarmState) -> f64 {
    state
        .v
        .as_ref()
        .map_or(0.0, |v| v.rows().map(norm).fold(0.0, f64::max))
}

/// Scans every stored node of `traj`.
pub fn check_invariants(traj: &Trajectory, u: &ControlGrid) -> InvariantReport {
    let mut r = InvariantReport {
        control_bound_m: control_bound(u, &traj.grid),
        ..Default::default()
    };
    for s in &traj.states {
        for (i, x) in s.x.rows().enumerate() {
            r.max_norm_drift = r.max_norm_drift.max((norm(x) - 1.0).abs());
            if let Some(v) = &s.v {
                r.max_tangency_drift = r.max_tangency_drift.max(dot(x, v.row(i)).abs());
            }
        }
        r.max_speed = r.max_speed.max(max_speed(s));
    }
    r
}

fn speed_budget(params: &ModelParams, v0: f64, m: f64) -> f64 {
    v0 + 2.0 * params.kappa * params.horizon / params.mass + 2.0 * m * params.horizon.sqrt()
}

/// `(m/gamma)(V0 + 2 kappa T/m + 2 M T^(1/2))(exp(gamma T/m) - 1)`.
///
/// The existence result needs this below 1. Without friction the bound is
/// vacuous and `+inf` is returned.
pub fn wellposedness_margin(params: &ModelParams, v0: f64, m: f64) -> f64 {
    if !(params.gamma > 0.0) {
        return f64::INFINITY;
    }
    let rate = params.gamma / params.mass;
    speed_budget(params, v0, m) * (rate * params.horizon).exp_m1() / rate
}

/// A priori bound `C_V` on `sup_t max_i |v_i(t)|`, defined when the margin is
/// below 1.
pub fn velocity_bound_cv(params: &ModelParams, v0: f64, m: f64) -> Result<f64> {
    let margin = wellposedness_margin(params, v0, m);
    if !(margin < 1.0) {
        return Err(Error::BoundUndefined { margin });
    }
    let growth = (params.gamma / params.mass * params.horizon).exp();
    Ok(growth * speed_budget(params, v0, m) / (1.0 - margin))
}
