//! The `simulate`, `optimize`, `compare` and `gradcheck` commands.
//!
//! Each command resolves a [`RunConfig`], writes its outputs into the
//! output directory and returns a process exit code:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | configuration or I/O error |
//! | 2 | integrator abort |
//! | 3 | optimizer step failure (best iterate still written) |
//! | 4 | gradient check above tolerance |

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::config::RunConfig;
use crate::diagnostics::{check_invariants, max_speed, velocity_bound_cv, wellposedness_margin};
use crate::dynamics::Order;
use crate::error::Error;
use crate::integrate::{integrate_forward, ControlGrid, TimeGrid, Trajectory};
use crate::objective::{
    evaluate_cost, finite_difference_gradient, position_variance, probe_control, relative_error,
    velocity_variance, Problem,
};
use crate::optimizer::{optimize, OptimizeReport, Termination};
use crate::output::{self, json_f64};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_INTEGRATOR: i32 = 2;
pub const EXIT_STEP_FAILURE: i32 = 3;
pub const EXIT_GRADCHECK: i32 = 4;

/// Pass threshold of the gradient check.
pub const GRADCHECK_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Optimize,
    Compare,
    Gradcheck,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Optimize => "optimize",
            Command::Compare => "compare",
            Command::Gradcheck => "gradcheck",
        }
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct RunArgs {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub order: Option<Order>,
}

#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub message: String,
}

impl Outcome {
    fn ok(message: String) -> Self {
        Self {
            code: EXIT_OK,
            message,
        }
    }
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(format!("i/o error: {e}"))
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::IntegratorAbort { .. } | Error::AdjointNonFinite { .. } | Error::NonFinite(_) => {
            EXIT_INTEGRATOR
        }
        _ => EXIT_CONFIG,
    }
}

/// Reads the config file (if any) and applies the overrides.
pub fn resolve_config(args: &RunArgs) -> Result<RunConfig, String> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
            RunConfig::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(order) = args.order {
        cfg.order = order;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

struct Writer<'a> {
    dir: &'a Path,
    report: Map<String, Value>,
}

impl<'a> Writer<'a> {
    fn new(dir: &'a Path, cmd: Command, cfg: &RunConfig) -> Result<Self, Failure> {
        fs::create_dir_all(dir)?;
        let mut w = Self {
            dir,
            report: Map::new(),
        };
        w.set("command", cmd.as_str());
        w.set("status", "ok");
        w.file("config.txt", &cfg.to_text())?;
        for (k, v) in cfg.echo() {
            w.set(&format!("config.{k}"), v);
        }
        Ok(w)
    }

    fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.report.insert(key.to_string(), value.into());
    }

    fn num(&mut self, key: &str, value: f64) {
        self.set(key, json_f64(value));
    }

    fn fail(&mut self, err: &str) {
        self.set("status", "FAILED");
        self.set("error", err);
    }

    fn file(&self, name: &str, contents: &str) -> Result<(), Failure> {
        Ok(output::write_atomic(
            &self.dir.join(name),
            contents.as_bytes(),
        )?)
    }

    fn finish(self) -> Result<(), Failure> {
        self.file("report.json", &output::report_json(&self.report))
    }

    /// Invariants, variances and speed-bound diagnostics of one run.
    fn trajectory_summary(
        &mut self,
        prefix: &str,
        traj: &Trajectory,
        u: &ControlGrid,
        cfg: &RunConfig,
    ) {
        let inv = check_invariants(traj, u);
        self.num(&format!("{prefix}max_norm_drift"), inv.max_norm_drift);
        self.num(
            &format!("{prefix}max_tangency_drift"),
            inv.max_tangency_drift,
        );
        self.num(
            &format!("{prefix}pre_renorm_norm_drift"),
            traj.drift.max_norm_drift,
        );
        self.num(
            &format!("{prefix}pre_renorm_tangency_drift"),
            traj.drift.max_tangency_drift,
        );
        self.num(&format!("{prefix}max_speed"), inv.max_speed);
        self.num(&format!("{prefix}control_bound_m"), inv.control_bound_m);
        self.num(
            &format!("{prefix}terminal_position_variance"),
            position_variance(traj.terminal()),
        );
        if let Ok(vv) = velocity_variance(traj.terminal()) {
            self.num(&format!("{prefix}terminal_velocity_variance"), vv);
        }
        if cfg.order == Order::Second {
            let v0 = max_speed(traj.initial());
            let margin = wellposedness_margin(&cfg.params, v0, inv.control_bound_m);
            self.num(&format!("{prefix}wellposedness_margin"), margin);
            let cv = velocity_bound_cv(&cfg.params, v0, inv.control_bound_m).ok();
            self.set(
                &format!("{prefix}velocity_bound_cv"),
                cv.map_or(Value::Null, json_f64),
            );
        }
    }
}

/// Runs one command and maps every failure to its exit code.
pub fn run(cmd: Command, args: &RunArgs) -> Outcome {
    let cfg = match resolve_config(args) {
        Ok(c) => c,
        Err(message) => {
            return Outcome {
                code: EXIT_CONFIG,
                message,
            }
        }
    };
    let result = match cmd {
        Command::Simulate => simulate(&cfg, &args.out),
        Command::Optimize => optimize_cmd(&cfg, &args.out, false),
        Command::Compare => optimize_cmd(&cfg, &args.out, true),
        Command::Gradcheck => gradcheck(&cfg, &args.out),
    };
    match result {
        Ok(o) => o,
        Err(Failure::Config(message)) => Outcome {
            code: EXIT_CONFIG,
            message,
        },
        Err(Failure::Lib(e)) => Outcome {
            code: exit_code(&e),
            message: e.to_string(),
        },
    }
}

/// Records a library error in `report.json` before propagating it.
fn fail_with(mut w: Writer, e: Error) -> Result<Outcome, Failure> {
    w.fail(&e.to_string());
    w.finish()?;
    Err(e.into())
}

fn simulate(cfg: &RunConfig, out: &Path) -> Result<Outcome, Failure> {
    let params = cfg.model_params();
    let initial = cfg.initial_state()?;
    let grid = TimeGrid::from_params(&params)?;
    let u = ControlGrid::zeros(&grid, params.n, params.d);
    let mut w = Writer::new(out, Command::Simulate, cfg)?;
    let traj = match integrate_forward(cfg.order, &initial, &u, &params, cfg.renorm) {
        Ok(t) => t,
        Err(e) => return fail_with(w, e),
    };
    let cost = evaluate_cost(&traj, &u, &params)?;
    w.file("trajectory.csv", &output::trajectory_csv(&traj))?;
    w.file("metrics.csv", &output::metrics_csv(&traj))?;
    w.num("tracking_cost", cost.tracking);
    w.trajectory_summary("", &traj, &u, cfg);
    w.finish()?;
    Ok(Outcome::ok(format!(
        "simulated {} steps; terminal position variance {:.6e}",
        grid.steps(),
        position_variance(traj.terminal())
    )))
}

fn optimizer_summary(w: &mut Writer, report: &OptimizeReport) {
    let best = report.best();
    let start = &report.history[0];
    w.set("termination", report.termination.as_str());
    w.set("iterations", report.iterations);
    w.set("best_iteration", report.best_iteration);
    w.num("initial_cost", start.cost.total);
    w.num("best_cost", best.cost.total);
    w.num("best_tracking", best.cost.tracking);
    w.num("best_energy", best.cost.energy);
    w.num("best_grad_norm", best.grad_norm);
    w.num(
        "final_grad_norm",
        report.history.last().map_or(f64::NAN, |r| r.grad_norm),
    );
    w.set("warnings", report.warnings.clone());
}

fn optimize_cmd(cfg: &RunConfig, out: &Path, compare: bool) -> Result<Outcome, Failure> {
    let cmd = if compare {
        Command::Compare
    } else {
        Command::Optimize
    };
    let problem = Problem::new(
        cfg.order,
        cfg.initial_state()?,
        cfg.model_params(),
        cfg.renorm,
    )?;
    let grid = problem.grid();
    let mut w = Writer::new(out, cmd, cfg)?;
    let report = match optimize(&problem, &cfg.optimize) {
        Ok(r) => r,
        Err(e) => return fail_with(w, e),
    };
    optimizer_summary(&mut w, &report);
    let u = &report.u_star;
    w.file("control.csv", &output::control_csv(u, &grid))?;
    w.file("history.csv", &output::history_csv(&report.history))?;
    // u_star was solved successfully during the run, so this cannot abort
    let controlled = problem.forward(u)?;
    if compare {
        let zero = problem.zero_control();
        let uncontrolled = problem.forward(&zero)?;
        w.file(
            "compare.csv",
            &output::compare_csv(&controlled, &uncontrolled),
        )?;
        w.file(
            "trajectory_controlled.csv",
            &output::trajectory_csv(&controlled),
        )?;
        w.file(
            "trajectory_uncontrolled.csv",
            &output::trajectory_csv(&uncontrolled),
        )?;
        w.trajectory_summary("controlled.", &controlled, u, cfg);
        w.trajectory_summary("uncontrolled.", &uncontrolled, &zero, cfg);
        let ratio =
            position_variance(controlled.terminal()) / position_variance(uncontrolled.terminal());
        w.num("terminal_variance_ratio", ratio);
    } else {
        w.file("trajectory.csv", &output::trajectory_csv(&controlled))?;
        w.file("metrics.csv", &output::metrics_csv(&controlled))?;
        w.trajectory_summary("", &controlled, u, cfg);
    }

    let message = format!(
        "{} after {} iterations; best cost {:.6e} at iteration {}",
        report.termination.as_str(),
        report.iterations,
        report.best().cost.total,
        report.best_iteration
    );
    if report.termination == Termination::StepFailure {
        let reason = report
            .failed
            .as_ref()
            .map_or_else(|| "step failure".to_string(), |(_, e)| e.to_string());
        w.fail(&reason);
        w.finish()?;
        return Ok(Outcome {
            code: EXIT_STEP_FAILURE,
            message: format!("{message}; step failure: {reason}"),
        });
    }
    w.finish()?;
    Ok(Outcome::ok(message))
}

fn gradcheck(cfg: &RunConfig, out: &Path) -> Result<Outcome, Failure> {
    let problem = Problem::new(
        cfg.order,
        cfg.initial_state()?,
        cfg.model_params(),
        cfg.renorm,
    )?;
    let grid = problem.grid();
    let mut w = Writer::new(out, Command::Gradcheck, cfg)?;
    let u = probe_control(&grid, cfg.params.n, cfg.params.d, cfg.seed);
    let (eval, fd) = match problem.evaluate(&u).and_then(|e| {
        Ok((
            e,
            finite_difference_gradient(&problem, &u, &cfg.fd_options())?,
        ))
    }) {
        Ok(r) => r,
        Err(e) => return fail_with(w, e),
    };
    let gradient = if cfg.gradcheck_flip_sign {
        eval.gradient.scaled(-1.0)
    } else {
        eval.gradient
    };
    let err = relative_error(&gradient, &fd, &grid);
    let pass = err <= GRADCHECK_TOL;
    w.file(
        "gradcheck.csv",
        &output::gradcheck_csv(&gradient, &fd, &grid),
    )?;
    w.num("relative_error", err);
    w.num("threshold", GRADCHECK_TOL);
    w.set("pass", pass);
    w.set("coords_checked", fd.coords.len());
    w.set("coords_total", grid.nodes() * cfg.params.n * cfg.params.d);
    if !pass {
        w.set("status", "FAILED");
    }
    w.finish()?;
    let message = format!(
        "relative error {err:.3e} over {} coordinates ({})",
        fd.coords.len(),
        if pass { "pass" } else { "FAIL" }
    );
    Ok(Outcome {
        code: if pass { EXIT_OK } else { EXIT_GRADCHECK },
        message,
    })
}
