//! Gradient descent on the control grid with Barzilai-Borwein step sizes.
//!
//! Iteration 0 takes a plain step of length `alpha0` from `u = 0`; later
//! iterations use `alpha = <du, dg> / |dg|^2`, clamped to
//! `[alpha_min, alpha_max]`. The method is non-monotone, so the best iterate
//! seen is returned.
//!
//! The control problem is nonconvex and the quotient is often negative near
//! `u = 0`, where the cost is concave along the gradient. The default
//! [`BbFallback::Grow`] then multiplies the previous step by ten; restarting
//! from `alpha0` instead can stall for hundreds of iterations.

use serde::Serialize;

use crate::diagnostics::{control_bound, max_speed, wellposedness_margin};
use crate::dynamics::Order;
use crate::error::{Error, Result};
use crate::integrate::{ControlGrid, GradientGrid, TimeGrid};
use crate::objective::{CostBreakdown, Evaluation, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizeConfig {
    /// Stop once the weighted L2 gradient norm is at or below this.
    pub tol: f64,
    pub k_max: usize,
    pub alpha0: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub fallback: BbFallback,
}

/// Step used when the BB quotient is non-positive or undefined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BbFallback {
    /// Restart with `alpha0`.
    Alpha0,
    /// Ten times the previous step, capped at `alpha_max`.
    Grow,
    /// `alpha_max`.
    AlphaMax,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            k_max: 200,
            alpha0: 1e-2,
            alpha_min: 1e-6,
            alpha_max: 1e2,
            fallback: BbFallback::Grow,
        }
    }
}

impl OptimizeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::param("tol", "must be > 0"));
        }
        if self.k_max < 1 {
            return Err(Error::param("k_max", "must be >= 1"));
        }
        if !(self.alpha_min > 0.0) {
            return Err(Error::param("alpha_min", "must be > 0"));
        }
        if !(self.alpha_min <= self.alpha0) {
            return Err(Error::param("alpha0", "must be >= alpha_min"));
        }
        if !(self.alpha0 <= self.alpha_max) || !self.alpha_max.is_finite() {
            return Err(Error::param("alpha_max", "must be finite and >= alpha0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BbStep {
    /// Step length actually used.
    pub alpha: f64,
    /// Unclamped quotient.
    pub raw: f64,
    /// True when `raw` was unusable and the fallback rule chose the step.
    pub fallback: bool,
}

/// Barzilai-Borwein quotient `<u_cur - u_prev, g_cur - g_prev> / |g_cur - g_prev|^2`
/// in the weighted inner product of `grid`.
pub fn bb_step(
    u_prev: &ControlGrid,
    u_cur: &ControlGrid,
    g_prev: &GradientGrid,
    g_cur: &GradientGrid,
    grid: &TimeGrid,
    cfg: &OptimizeConfig,
    prev_alpha: f64,
) -> Result<BbStep> {
    if !(u_prev.same_shape(u_cur) && g_prev.same_shape(g_cur) && u_cur.same_shape(g_cur)) {
        return Err(Error::ShapeMismatch(
            "BB step inputs differ in shape".into(),
        ));
    }
    let du = u_cur.add_scaled(-1.0, u_prev);
    let dg = g_cur.add_scaled(-1.0, g_prev);
    let den = dg.weighted_dot(&dg, grid);
    let raw = du.weighted_dot(&dg, grid) / den;
    Ok(if raw.is_finite() && raw > 0.0 {
        BbStep {
            alpha: raw.clamp(cfg.alpha_min, cfg.alpha_max),
            raw,
            fallback: false,
        }
    } else {
        let alpha = match cfg.fallback {
            BbFallback::Alpha0 => cfg.alpha0,
            BbFallback::Grow => (10.0 * prev_alpha).clamp(cfg.alpha_min, cfg.alpha_max),
            BbFallback::AlphaMax => cfg.alpha_max,
        };
        BbStep {
            alpha,
            raw,
            fallback: true,
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    TolReached,
    KMaxReached,
    StepFailure,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::TolReached => "tol-reached",
            Termination::KMaxReached => "k_max-reached",
            Termination::StepFailure => "step-failure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub cost: CostBreakdown,
    pub grad_norm: f64,
    /// Step that produced this iterate (0 for the starting point).
    pub step: f64,
    pub bb_fallback: bool,
    pub control_bound_m: f64,
    /// Second order only.
    pub wellposedness_margin: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct OptimizeReport {
    pub u_star: ControlGrid,
    pub best_iteration: usize,
    pub iterations: usize,
    pub history: Vec<IterationRecord>,
    pub termination: Termination,
    /// Control whose forward or backward solve failed, with the error.
    pub failed: Option<(ControlGrid, Error)>,
    pub warnings: Vec<String>,
}

impl OptimizeReport {
    pub fn best(&self) -> &IterationRecord {
        &self.history[self.best_iteration]
    }

    pub fn cost_history(&self) -> Vec<CostBreakdown> {
        self.history.iter().map(|r| r.cost).collect()
    }

    pub fn grad_norm_history(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.grad_norm).collect()
    }
}

fn record(
    problem: &Problem,
    grid: &TimeGrid,
    iteration: usize,
    u: &ControlGrid,
    eval: &Evaluation,
    step: f64,
    bb_fallback: bool,
) -> IterationRecord {
    let m = control_bound(u, grid);
    let margin = (problem.order == Order::Second)
        .then(|| wellposedness_margin(&problem.params, max_speed(&problem.initial), m));
    IterationRecord {
        iteration,
        cost: eval.cost,
        grad_norm: eval.gradient.weighted_norm(grid),
        step,
        bb_fallback,
        control_bound_m: m,
        wellposedness_margin: margin,
    }
}

fn is_step_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::IntegratorAbort { .. } | Error::AdjointNonFinite { .. } | Error::NonFinite(_)
    )
}

/// Runs the descent loop from `u = 0`.
///
/// Errors only when the problem is inconsistent or the uncontrolled solve
/// itself fails; breakdowns at later iterates end the loop with
/// [`Termination::StepFailure`].
pub fn optimize(problem: &Problem, cfg: &OptimizeConfig) -> Result<OptimizeReport> {
    cfg.validate()?;
    if problem.params.has_frequencies() {
        return Err(Error::param(
            "omega",
            "controlled problems require zero natural frequencies",
        ));
    }
    let grid = problem.grid();
    let mut warnings = Vec::new();

    let mut u = problem.zero_control();
    let mut eval = problem.evaluate(&u)?;
    let first = record(problem, &grid, 0, &u, &eval, 0.0, false);
    if let Some(margin) = first.wellposedness_margin {
        if !(margin < 1.0) {
            warnings.push(format!(
                "well-posedness margin {margin:.6e} >= 1 at u = 0; the a priori speed bound does not apply"
            ));
        }
    }
    let mut history = vec![first];
    let mut best = (first.cost.total, 0, u.clone());
    let mut prev: Option<(ControlGrid, GradientGrid)> = None;
    let mut failed = None;
    let mut k = 0;

    while history[k].grad_norm > cfg.tol && k < cfg.k_max {
        let step = match &prev {
            None => BbStep {
                alpha: cfg.alpha0,
                raw: f64::NAN,
                fallback: false,
            },
            Some((u_prev, g_prev)) => bb_step(
                u_prev,
                &u,
                g_prev,
                &eval.gradient,
                &grid,
                cfg,
                history[k].step,
            )?,
        };
        let next = u.add_scaled(-step.alpha, &eval.gradient);
        let next_eval = match problem.evaluate(&next) {
            Ok(e) if e.gradient.is_finite() && e.cost.total.is_finite() => e,
            Ok(_) => {
                failed = Some((next, Error::NonFinite(format!("iterate {}", k + 1))));
                break;
            }
            Err(e) if is_step_failure(&e) => {
                failed = Some((next, e));
                break;
            }
            Err(e) => return Err(e),
        };
        k += 1;
        let rec = record(
            problem,
            &grid,
            k,
            &next,
            &next_eval,
            step.alpha,
            step.fallback,
        );
        if rec.cost.total < best.0 {
            best = (rec.cost.total, k, next.clone());
        }
        history.push(rec);
        prev = Some((std::mem::replace(&mut u, next), eval.gradient));
        eval = next_eval;
    }

    let termination = if failed.is_some() {
        Termination::StepFailure
    } else if history[k].grad_norm <= cfg.tol {
        Termination::TolReached
    } else {
        Termination::KMaxReached
    };
    if let Some((_, e)) = &failed {
        warnings.push(format!("step failure after iteration {k}: {e}"));
    }
    Ok(OptimizeReport {
        u_star: best.2,
        best_iteration: best.1,
        iterations: k,
        history,
        termination,
        failed,
        warnings,
    })
}
