//! CSV and JSON writers for command outputs.
//!
//! Floats are written as `{:.16e}` (17 significant digits, round-trips
//! exactly). Files are written to a temporary sibling and renamed into place
//! so readers never see a partial file.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::Path;

use serde_json::{Map, Value};

use crate::integrate::{ControlGrid, GradientGrid, TimeGrid, Trajectory};
use crate::objective::{position_variance, velocity_variance, SampledGradient};
use crate::optimizer::IterationRecord;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `contents` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let name = path.file_name().ok_or_else(|| {
        io::Error::new(io::ErrorKind::InvalidInput, "output path has no file name")
    })?;
    let tmp = path.with_file_name(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

fn push_row(s: &mut String, lead: &[String], values: impl IntoIterator<Item = f64>) {
    let mut first = true;
    for cell in lead.iter().cloned().chain(values.into_iter().map(fmt_f64)) {
        if !first {
            s.push(',');
        }
        s.push_str(&cell);
        first = false;
    }
    s.push('\n');
}

fn component_header(prefix: &str, d: usize) -> Vec<String> {
    (0..d).map(|k| format!("{prefix}{k}")).collect()
}

/// Long format: one row per (node, particle) with `x0..`, then `v0..` for
/// second-order runs.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let first = traj.initial();
    let d = first.d();
    let mut header = vec!["t".to_string(), "particle".to_string()];
    header.extend(component_header("x", d));
    if first.v.is_some() {
        header.extend(component_header("v", d));
    }
    let mut s = header.join(",") + "\n";
    for (k, state) in traj.states.iter().enumerate() {
        let t = fmt_f64(traj.grid.t(k));
        for i in 0..state.n() {
            let x = state.x.row(i).iter().copied();
            let v = state
                .v
                .as_ref()
                .map(|v| v.row(i))
                .unwrap_or(&[])
                .iter()
                .copied();
            push_row(&mut s, &[t.clone(), i.to_string()], x.chain(v));
        }
    }
    s
}

/// `t, position_variance` plus `velocity_variance` for second-order runs.
pub fn metrics_csv(traj: &Trajectory) -> String {
    let second = traj.initial().v.is_some();
    let mut s = String::from("t,position_variance");
    s.push_str(if second { ",velocity_variance\n" } else { "\n" });
    for (k, state) in traj.states.iter().enumerate() {
        let mut row = vec![traj.grid.t(k), position_variance(state)];
        if let Ok(vv) = velocity_variance(state) {
            row.push(vv);
        }
        push_row(&mut s, &[], row);
    }
    s
}

pub fn control_csv(u: &ControlGrid, grid: &TimeGrid) -> String {
    let mut header = vec!["t".to_string(), "particle".to_string()];
    header.extend(component_header("u", u.d()));
    let mut s = header.join(",") + "\n";
    for k in 0..u.nodes() {
        let t = fmt_f64(grid.t(k));
        for i in 0..u.n() {
            push_row(
                &mut s,
                &[t.clone(), i.to_string()],
                u.particle(k, i).iter().copied(),
            );
        }
    }
    s
}

pub fn history_csv(history: &[IterationRecord]) -> String {
    let mut s = String::from("iteration,total,tracking,energy,grad_norm,step,bb_fallback\n");
    for r in history {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.iteration,
            fmt_f64(r.cost.total),
            fmt_f64(r.cost.tracking),
            fmt_f64(r.cost.energy),
            fmt_f64(r.grad_norm),
            fmt_f64(r.step),
            u8::from(r.bb_fallback)
        );
    }
    s
}

/// Paired variance columns of a controlled and an uncontrolled run on the
/// same grid.
pub fn compare_csv(controlled: &Trajectory, uncontrolled: &Trajectory) -> String {
    let second = controlled.initial().v.is_some();
    let mut s = String::from("t,position_variance_controlled,position_variance_uncontrolled");
    s.push_str(if second {
        ",velocity_variance_controlled,velocity_variance_uncontrolled\n"
    } else {
        "\n"
    });
    for (k, (a, b)) in controlled
        .states
        .iter()
        .zip(&uncontrolled.states)
        .enumerate()
    {
        let mut row = vec![
            controlled.grid.t(k),
            position_variance(a),
            position_variance(b),
        ];
        if let (Ok(va), Ok(vb)) = (velocity_variance(a), velocity_variance(b)) {
            row.extend([va, vb]);
        }
        push_row(&mut s, &[], row);
    }
    s
}

/// The sampled coordinates with both gradient estimates.
pub fn gradcheck_csv(gradient: &GradientGrid, fd: &SampledGradient, grid: &TimeGrid) -> String {
    let mut s = String::from("node,particle,component,t,adjoint,finite_difference\n");
    for (c, &f) in fd.coords.iter().zip(&fd.values) {
        push_row(
            &mut s,
            &[
                c.node.to_string(),
                c.particle.to_string(),
                c.component.to_string(),
            ],
            [
                grid.t(c.node),
                gradient.particle(c.node, c.particle)[c.component],
                f,
            ],
        );
    }
    s
}

/// Flat JSON object of scalars, written with a trailing newline.
pub fn report_json(report: &Map<String, Value>) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("JSON maps always serialize");
    s.push('\n');
    s
}

/// JSON number, or `null` for non-finite values.
pub fn json_f64(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}
