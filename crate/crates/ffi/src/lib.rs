//! C ABI for `swarmctl`.
//!
//! All objects are opaque handles created by `swarm_*_new`/producer
//! functions and released with the matching `*_free`. Every fallible call
//! returns a [`SwarmStatus`]; on failure a message is available from
//! [`swarm_last_error`] on the same thread. Arrays are copied into
//! caller-owned buffers in row-major order (node, particle, component).
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use swarmctl::config::RunConfig;
use swarmctl::integrate::{ControlGrid, Trajectory};
use swarmctl::objective::{finite_difference_gradient, probe_control, relative_error, Problem};
use swarmctl::optimizer::{optimize, OptimizeReport, Termination};
use swarmctl::Error;

/// Gradient checks pass at or below this relative error.
pub const SWARM_GRADCHECK_TOL: f64 = 1e-3;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwarmStatus {
    Ok = 0,
    NullPointer = 1,
    /// Malformed text, unknown key or out-of-range parameter.
    InvalidParam = 2,
    ShapeMismatch = 3,
    /// A forward or backward solve left the admissible region.
    IntegratorAbort = 4,
    /// The optimizer stopped on a failed step; the result is still returned.
    StepFailure = 5,
    GradcheckFailed = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwarmTermination {
    TolReached = 0,
    KMaxReached = 1,
    StepFailure = 2,
}

/// Scalar results of an optimization run.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwarmSummary {
    pub iterations: usize,
    pub best_iteration: usize,
    pub termination: SwarmTermination,
    pub initial_cost: f64,
    pub best_cost: f64,
    pub best_tracking: f64,
    pub best_energy: f64,
    pub best_grad_norm: f64,
}

/// Run configuration (model, initial data, optimizer and oracle settings).
pub struct SwarmConfig(RunConfig);

/// Sampled forward trajectory.
pub struct SwarmTrajectory(Trajectory);

/// Optimizer output: best control, its trajectory and the run summary.
pub struct SwarmOptimization {
    report: OptimizeReport,
    trajectory: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Fail(SwarmStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::IntegratorAbort { .. }
            | Error::AdjointNonFinite { .. }
            | Error::NonFinite(_) => SwarmStatus::IntegratorAbort,
            Error::ShapeMismatch(_) => SwarmStatus::ShapeMismatch,
            _ => SwarmStatus::InvalidParam,
        };
        Fail(status, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(SwarmStatus::NullPointer, format!("{what} is NULL"))
}

fn set_last_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn guard(f: impl FnOnce() -> Result<SwarmStatus, Fail>) -> SwarmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            SwarmStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        Fail(
            SwarmStatus::InvalidParam,
            format!("{what} is not valid UTF-8"),
        )
    })
}

unsafe fn obj<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> Result<SwarmStatus, Fail> {
    if len < src.len() {
        return Err(Fail(
            SwarmStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    if buf.is_null() {
        return Err(null("buffer"));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(SwarmStatus::Ok)
}

fn problem(cfg: &RunConfig) -> Result<Problem, Fail> {
    cfg.validate()?;
    Ok(Problem::new(
        cfg.order,
        cfg.initial_state()?,
        cfg.model_params(),
        cfg.renorm,
    )?)
}

/// Copies the last error message of this thread into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length
/// including the terminator, so a NULL `buf` queries the size.
///
/// # Safety
/// `buf` must be NULL or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn swarm_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len() + 1
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn swarm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a configuration holding the defaults.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn swarm_config_new(out: *mut *mut SwarmConfig) -> SwarmStatus {
    guard(|| {
        *out_ptr(out, "out")? = Box::into_raw(Box::new(SwarmConfig(RunConfig::default())));
        Ok(SwarmStatus::Ok)
    })
}

/// Parses a `key = value` config text.
///
/// # Safety
/// `text` must be a NUL-terminated string, `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn swarm_config_parse(
    text: *const c_char,
    out: *mut *mut SwarmConfig,
) -> SwarmStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let cfg = RunConfig::parse(str_arg(text, "text")?)?;
        *out = Box::into_raw(Box::new(SwarmConfig(cfg)));
        Ok(SwarmStatus::Ok)
    })
}

/// Sets one key. Cross-field validation happens when the config is used.
///
/// # Safety
/// `cfg` must be a live handle, `key` and `value` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn swarm_config_set(
    cfg: *mut SwarmConfig,
    key: *const c_char,
    value: *const c_char,
) -> SwarmStatus {
    guard(|| {
        let cfg = out_ptr(cfg, "cfg")?;
        cfg.0.set(str_arg(key, "key")?, str_arg(value, "value")?)?;
        Ok(SwarmStatus::Ok)
    })
}

/// # Safety
/// `cfg` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn swarm_config_free(cfg: *mut SwarmConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Integrates the uncontrolled dynamics.
///
/// # Safety
/// `cfg` must be a live handle, `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn swarm_simulate(
    cfg: *const SwarmConfig,
    out: *mut *mut SwarmTrajectory,
) -> SwarmStatus {
    guard(|| {
        let cfg = &obj(cfg, "cfg")?.0;
        let out = out_ptr(out, "out")?;
        let p = problem(cfg)?;
        let traj = p.forward(&p.zero_control())?;
        *out = Box::into_raw(Box::new(SwarmTrajectory(traj)));
        Ok(SwarmStatus::Ok)
    })
}

/// Reports the number of stored nodes, particles, dimension and whether
/// velocities are present (second order). Any output pointer may be NULL.
///
/// # Safety
/// `traj` must be a live handle; non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn swarm_trajectory_shape(
    traj: *const SwarmTrajectory,
    nodes: *mut usize,
    n: *mut usize,
    d: *mut usize,
    second_order: *mut bool,
) -> SwarmStatus {
    guard(|| {
        let t = &obj(traj, "traj")?.0;
        let s = t.initial();
        for (p, v) in [(nodes, t.states.len()), (n, s.n()), (d, s.d())] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        if let Some(p) = second_order.as_mut() {
            *p = s.v.is_some();
        }
        Ok(SwarmStatus::Ok)
    })
}

/// Copies the node times (`nodes` values).
///
/// # Safety
/// `traj` must be a live handle and `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn swarm_trajectory_times(
    traj: *const SwarmTrajectory,
    buf: *mut f64,
    len: usize,
) -> SwarmStatus {
    guard(|| {
        let t = &obj(traj, "traj")?.0;
        let times: Vec<f64> = (0..t.states.len()).map(|k| t.grid.t(k)).collect();
        copy_out(&times, buf, len)
    })
}

/// Copies positions (`nodes * n * d` values).
///
/// # Safety
/// `traj` must be a live handle and `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn swarm_trajectory_positions(
    traj: *const SwarmTrajectory,
    buf: *mut f64,
    len: usize,
) -> SwarmStatus {
    guard(|| {
        let t = &obj(traj, "traj")?.0;
        let flat: Vec<f64> = t
            .states
            .iter()
            .flat_map(|s| s.x.as_slice().iter().copied())
            .collect();
        copy_out(&flat, buf, len)
    })
}

/// Copies velocities (`nodes * n * d` values); second order only.
///
/// # Safety
/// `traj` must be a live handle and `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn swarm_trajectory_velocities(
    traj: *const SwarmTrajectory,
    buf: *mut f64,
    len: usize,
) -> SwarmStatus {
    guard(|| {
        let t = &obj(traj, "traj")?.0;
        let flat: Option<Vec<f64>> = t
            .states
            .iter()
            .map(|s| s.v.as_ref().map(|v| v.as_slice().to_vec()))
            .collect::<Option<Vec<_>>>()
            .map(|rows| rows.concat());
        match flat {
            Some(flat) => copy_out(&flat, buf, len),
            None => Err(Fail(
                SwarmStatus::ShapeMismatch,
                "first-order trajectories have no velocities".into(),
            )),
        }
    })
}

/// # Safety
/// `traj` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn swarm_trajectory_free(traj: *mut SwarmTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Runs Barzilai-Borwein descent from `u = 0`.
///
/// Returns `SWARM_STATUS_STEP_FAILURE` when a step breaks down; `*out` is
/// still set and holds the best iterate found before the failure.
///
/// # Safety
/// `cfg` must be a live handle, `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn swarm_optimize(
    cfg: *const SwarmConfig,
    out: *mut *mut SwarmOptimization,
) -> SwarmStatus {
    guard(|| {
        let cfg = &obj(cfg, "cfg")?.0;
        let out = out_ptr(out, "out")?;
        let p = problem(cfg)?;
        let report = optimize(&p, &cfg.optimize)?;
        let trajectory = p.forward(&report.u_star)?;
        let failure = report.failed.as_ref().map(|(_, e)| e.to_string());
        *out = Box::into_raw(Box::new(SwarmOptimization { report, trajectory }));
        match failure {
            Some(msg) => Err(Fail(SwarmStatus::StepFailure, msg)),
            None => Ok(SwarmStatus::Ok),
        }
    })
}

/// # Safety
/// `res` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn swarm_optimization_summary(
    res: *const SwarmOptimization,
    out: *mut SwarmSummary,
) -> SwarmStatus {
    guard(|| {
        let r = &obj(res, "res")?.report;
        let best = r.best();
        *out_ptr(out, "out")? = SwarmSummary {
            iterations: r.iterations,
            best_iteration: r.best_iteration,
            termination: match r.termination {
                Termination::TolReached => SwarmTermination::TolReached,
                Termination::KMaxReached => SwarmTermination::KMaxReached,
                Termination::StepFailure => SwarmTermination::StepFailure,
            },
            initial_cost: r.history[0].cost.total,
            best_cost: best.cost.total,
            best_tracking: best.cost.tracking,
            best_energy: best.cost.energy,
            best_grad_norm: best.grad_norm,
        };
        Ok(SwarmStatus::Ok)
    })
}

/// Copies the best control (`nodes * n * d` values).
///
/// # Safety
/// `res` must be a live handle and `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn swarm_optimization_control(
    res: *const SwarmOptimization,
    buf: *mut f64,
    len: usize,
) -> SwarmStatus {
    guard(|| {
        let u: &ControlGrid = &obj(res, "res")?.report.u_star;
        copy_out(u.as_slice(), buf, len)
    })
}

/// Copies the total cost of every iterate (`iterations + 1` values).
///
/// # Safety
/// `res` must be a live handle and `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn swarm_optimization_costs(
    res: *const SwarmOptimization,
    buf: *mut f64,
    len: usize,
) -> SwarmStatus {
    guard(|| {
        let r = &obj(res, "res")?.report;
        let costs: Vec<f64> = r.history.iter().map(|h| h.cost.total).collect();
        copy_out(&costs, buf, len)
    })
}

/// Returns a new trajectory handle for the best control.
///
/// # Safety
/// `res` must be a live handle, `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn swarm_optimization_trajectory(
    res: *const SwarmOptimization,
    out: *mut *mut SwarmTrajectory,
) -> SwarmStatus {
    guard(|| {
        let t = obj(res, "res")?.trajectory.clone();
        *out_ptr(out, "out")? = Box::into_raw(Box::new(SwarmTrajectory(t)));
        Ok(SwarmStatus::Ok)
    })
}

/// # Safety
/// `res` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn swarm_optimization_free(res: *mut SwarmOptimization) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Compares the adjoint gradient with central differences at the seeded
/// probe control. Returns `SWARM_STATUS_GRADCHECK_FAILED` when the relative
/// error exceeds [`SWARM_GRADCHECK_TOL`]; the outputs are written either way.
///
/// # Safety
/// `cfg` must be a live handle; non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn swarm_gradcheck(
    cfg: *const SwarmConfig,
    relative_error_out: *mut f64,
    coords_checked: *mut usize,
) -> SwarmStatus {
    guard(|| {
        let cfg = &obj(cfg, "cfg")?.0;
        let p = problem(cfg)?;
        let grid = p.grid();
        let u = probe_control(&grid, cfg.params.n, cfg.params.d, cfg.seed);
        let mut g = p.evaluate(&u)?.gradient;
        if cfg.gradcheck_flip_sign {
            g = g.scaled(-1.0);
        }
        let fd = finite_difference_gradient(&p, &u, &cfg.fd_options())?;
        let err = relative_error(&g, &fd, &grid);
        if let Some(o) = relative_error_out.as_mut() {
            *o = err;
        }
        if let Some(o) = coords_checked.as_mut() {
            *o = fd.coords.len();
        }
        if err <= SWARM_GRADCHECK_TOL {
            Ok(SwarmStatus::Ok)
        } else {
            Err(Fail(
                SwarmStatus::GradcheckFailed,
                format!("relative error {err:e} exceeds {SWARM_GRADCHECK_TOL:e}"),
            ))
        }
    })
}
