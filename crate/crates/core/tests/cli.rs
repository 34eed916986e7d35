//! End-to-end runs of the `swarmctl` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

/// Small instance so debug builds stay fast.
const SMALL: &str = "n = 4\nhorizon = 0.5\ndt = 0.05\n";

fn swarmctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swarmctl"))
        .args(args)
        .output()
        .expect("binary runs")
}

struct Run {
    dir: TempDir,
}

impl Run {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("run.cfg"), config).unwrap();
        Self { dir }
    }

    fn cfg(&self) -> PathBuf {
        self.dir.path().join("run.cfg")
    }

    fn out(&self) -> PathBuf {
        self.dir.path().join("out")
    }

    fn exec(&self, cmd: &str, extra: &[&str]) -> i32 {
        let cfg = self.cfg();
        let out = self.out();
        let mut args = vec![
            cmd,
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        let o = swarmctl(&args);
        o.status.code().expect("exited normally")
    }

    fn read(&self, name: &str) -> String {
        fs::read_to_string(self.out().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
    }

    fn report(&self) -> Value {
        serde_json::from_str(&self.read("report.json")).unwrap()
    }
}

fn csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap()
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    (header, rows)
}

/// Every float cell carries 17 significant digits.
fn assert_full_precision(rows: &[Vec<String>], skip: usize) {
    for row in rows {
        for cell in &row[skip..] {
            let mantissa = cell.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.len(), 18, "cell {cell}");
            cell.parse::<f64>().unwrap();
        }
    }
}

#[test]
fn simulate_writes_trajectory_and_metrics() {
    let run = Run::new(SMALL);
    assert_eq!(run.exec("simulate", &["--order", "2"]), 0);

    let (header, rows) = csv(&run.read("trajectory.csv"));
    assert_eq!(
        header,
        ["t", "particle", "x0", "x1", "x2", "v0", "v1", "v2"]
    );
    assert_eq!(rows.len(), 11 * 4);
    assert_full_precision(&rows, 2);
    assert!(rows.iter().all(|r| r[1].parse::<usize>().unwrap() < 4));

    let (header, rows) = csv(&run.read("metrics.csv"));
    assert_eq!(header, ["t", "position_variance", "velocity_variance"]);
    assert_eq!(rows.len(), 11);
    assert_full_precision(&rows, 0);

    let r = run.report();
    assert_eq!(r["status"], "ok");
    assert_eq!(r["config.order"], "2");
    assert!(r["max_norm_drift"].as_f64().unwrap() <= 1e-12);
    assert!(r["wellposedness_margin"].as_f64().is_some());
    assert!(run.read("config.txt").contains("order = 2"));
}

#[test]
fn first_order_metrics_have_no_velocity_column() {
    let run = Run::new(SMALL);
    assert_eq!(run.exec("simulate", &[]), 0);
    let (header, _) = csv(&run.read("metrics.csv"));
    assert_eq!(header, ["t", "position_variance"]);
    let (header, _) = csv(&run.read("trajectory.csv"));
    assert_eq!(header.len(), 5);
}

#[test]
fn optimize_writes_control_and_history() {
    let run = Run::new(SMALL);
    assert_eq!(run.exec("optimize", &[]), 0);
    let (header, rows) = csv(&run.read("control.csv"));
    assert_eq!(header, ["t", "particle", "u0", "u1", "u2"]);
    assert_eq!(rows.len(), 11 * 4);
    assert_full_precision(&rows, 2);

    let (header, rows) = csv(&run.read("history.csv"));
    assert_eq!(
        header[..6],
        [
            "iteration",
            "total",
            "tracking",
            "energy",
            "grad_norm",
            "step"
        ]
    );
    let totals: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    let r = run.report();
    assert_eq!(r["status"], "ok");
    assert_eq!(r["termination"], "tol-reached");
    let best = r["best_cost"].as_f64().unwrap();
    let min = totals.iter().copied().fold(f64::INFINITY, f64::min);
    assert!((best - min).abs() <= 1e-14 * min);
    assert!(best < totals[0]);
    for f in ["trajectory.csv", "metrics.csv"] {
        assert!(run.out().join(f).exists());
    }
}

#[test]
fn compare_pairs_controlled_and_uncontrolled() {
    let run = Run::new(SMALL);
    assert_eq!(run.exec("compare", &["--order", "2"]), 0);
    let (header, rows) = csv(&run.read("compare.csv"));
    assert_eq!(
        header,
        [
            "t",
            "position_variance_controlled",
            "position_variance_uncontrolled",
            "velocity_variance_controlled",
            "velocity_variance_uncontrolled"
        ]
    );
    // identical initial data
    assert_eq!(rows[0][1], rows[0][2]);
    let last = rows.last().unwrap();
    assert!(last[1].parse::<f64>().unwrap() < last[2].parse::<f64>().unwrap());
    assert_eq!(
        run.read("trajectory_uncontrolled.csv").lines().nth(1),
        run.read("trajectory_controlled.csv").lines().nth(1)
    );
    assert!(run.report()["terminal_variance_ratio"].as_f64().unwrap() < 1.0);
}

#[test]
fn gradcheck_passes_and_sign_flip_fails() {
    let run = Run::new("n = 3\nhorizon = 0.5\nfd_max_coords = 60\n");
    assert_eq!(run.exec("gradcheck", &["--order", "2"]), 0);
    let r = run.report();
    assert_eq!(r["pass"], true);
    assert!(r["relative_error"].as_f64().unwrap() <= 1e-3);
    assert_eq!(r["coords_checked"], 60);
    let (header, rows) = csv(&run.read("gradcheck.csv"));
    assert_eq!(
        header,
        [
            "node",
            "particle",
            "component",
            "t",
            "adjoint",
            "finite_difference"
        ]
    );
    assert_eq!(rows.len(), 60);

    let flipped =
        Run::new("n = 3\nhorizon = 0.5\nfd_max_coords = 60\ngradcheck_flip_sign = true\n");
    assert_eq!(flipped.exec("gradcheck", &[]), 4);
    let r = flipped.report();
    assert_eq!(r["pass"], false);
    assert_eq!(r["status"], "FAILED");
    assert!((r["relative_error"].as_f64().unwrap() - 2.0).abs() < 1e-2);
}

#[test]
fn seeded_runs_are_reproducible() {
    let a = Run::new(SMALL);
    let b = Run::new(SMALL);
    assert_eq!(a.exec("optimize", &["--seed", "7", "--order", "2"]), 0);
    assert_eq!(b.exec("optimize", &["--seed", "7", "--order", "2"]), 0);
    for f in [
        "trajectory.csv",
        "control.csv",
        "history.csv",
        "report.json",
    ] {
        assert_eq!(a.read(f), b.read(f), "{f}");
    }
    let c = Run::new(SMALL);
    assert_eq!(c.exec("optimize", &["--seed", "8", "--order", "2"]), 0);
    assert_ne!(a.read("trajectory.csv"), c.read("trajectory.csv"));
    assert_eq!(c.report()["config.seed"], "8");
}

#[test]
fn config_errors_exit_1() {
    for (text, needle) in [
        ("bogus = 1\n", "bogus"),
        ("lambda = -1\n", "lambda"),
        ("dt = 0.3\n", "dt"),
        ("order = 2\nomega_scale = 1\n", "omega_scale"),
    ] {
        let run = Run::new(text);
        let cfg = run.cfg();
        let o = swarmctl(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            run.out().to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(1), "{text}");
        assert!(
            String::from_utf8_lossy(&o.stderr).contains(needle),
            "{text}"
        );
        assert!(!run.out().exists());
    }
    assert_eq!(
        swarmctl(&["simulate", "--config", "/nonexistent/run.cfg"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        swarmctl(&["simulate", "--order", "3"]).status.code(),
        Some(1)
    );
    assert_eq!(swarmctl(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn frequencies_are_rejected_by_optimize() {
    let run = Run::new(&format!("{SMALL}omega_scale = 0.5\n"));
    assert_eq!(run.exec("simulate", &[]), 0);
    assert_eq!(run.exec("optimize", &[]), 1);
    assert_eq!(run.report()["status"], "FAILED");
}

#[test]
fn integrator_abort_exits_2() {
    let run = Run::new(&format!("{SMALL}omega_scale = 1000\nrenorm = false\n"));
    assert_eq!(run.exec("simulate", &[]), 2);
    let r = run.report();
    assert_eq!(r["status"], "FAILED");
    assert!(r["error"].as_str().unwrap().contains("integrator abort"));
}

#[test]
fn step_failure_exits_3_and_keeps_best_iterate() {
    let run = Run::new(
        "n = 4\nhorizon = 1\ndt = 0.1\nalpha0 = 1e6\nalpha_max = 1e6\nrenorm = false\nseed = 4\n",
    );
    assert_eq!(run.exec("optimize", &[]), 3);
    let r = run.report();
    assert_eq!(r["status"], "FAILED");
    assert_eq!(r["termination"], "step-failure");
    assert_eq!(r["best_iteration"], 0);
    let (_, rows) = csv(&run.read("control.csv"));
    assert!(rows
        .iter()
        .all(|r| r[2..].iter().all(|c| c.parse::<f64>().unwrap() == 0.0)));
    assert!(Path::new(&run.out().join("trajectory.csv")).exists());
}

#[test]
fn help_exits_0() {
    let o = swarmctl(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("gradcheck"));
}
