//! Fixed-step RK4 on a uniform time grid: forward state solves and backward
//! costate solves.
//!
//! Controls are stored at the grid nodes and interpolated linearly inside
//! each step, so stage `k1` uses `u(t_k)`, stages `k2`/`k3` use the average
//! of the two nodes and `k4` uses `u(t_{k+1})`. The backward solve needs the
//! state at step midpoints and takes it as the average of the two stored
//! neighbours.

use crate::dynamics::{
    first_order_costate, first_order_field, second_order_costate, second_order_field, ModelParams,
    Order,
};
use crate::error::{Error, Result};
use crate::geometry::{dot, norm, renormalize_in_place, Particles};

/// Norms outside `[MIN_RADIUS, MAX_RADIUS]` abort a forward solve.
pub const MAX_RADIUS: f64 = 1.5;
pub use crate::geometry::MIN_RADIUS;

/// Initial data must sit on the constraint manifold within this tolerance.
pub const INITIAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::param("horizon", "must be finite and > 0"));
        }
        if steps == 0 {
            return Err(Error::param("dt", "grid needs at least one step"));
        }
        Ok(Self { horizon, steps })
    }

    pub fn from_params(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        Self::new(
            params.horizon,
            (params.horizon / params.dt).round() as usize,
        )
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of steps `K`; there are `K + 1` nodes.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn nodes(&self) -> usize {
        self.steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Node time computed from the index, so `t(K)` is exactly the horizon.
    pub fn t(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            self.horizon * k as f64 / self.steps as f64
        }
    }

    /// Trapezoidal weight of node `k` (without the `dt` factor).
    pub fn weight(&self, k: usize) -> f64 {
        if k == 0 || k == self.steps {
            0.5
        } else {
            1.0
        }
    }

    /// Trapezoidal quadrature of node samples.
    pub fn integrate(&self, samples: impl IntoIterator<Item = f64>) -> f64 {
        samples
            .into_iter()
            .enumerate()
            .map(|(k, s)| self.weight(k) * s)
            .sum::<f64>()
            * self.dt()
    }
}

/// A per-node, per-particle vector field on a [`TimeGrid`]: controls and
/// gradients share this layout.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    nodes: usize,
    n: usize,
    d: usize,
    data: Vec<f64>,
}

pub type ControlGrid = GridField;
pub type GradientGrid = GridField;

impl GridField {
    pub fn zeros(grid: &TimeGrid, n: usize, d: usize) -> Self {
        Self {
            nodes: grid.nodes(),
            n,
            d,
            data: vec![0.0; grid.nodes() * n * d],
        }
    }

    /// Samples `f(t, particle)` at every node.
    pub fn from_fn<F>(grid: &TimeGrid, n: usize, d: usize, mut f: F) -> Self
    where
        F: FnMut(f64, usize) -> Vec<f64>,
    {
        let mut out = Self::zeros(grid, n, d);
        for k in 0..grid.nodes() {
            for i in 0..n {
                let v = f(grid.t(k), i);
                out.particle_mut(k, i).copy_from_slice(&v);
            }
        }
        out
    }

    pub fn from_flat(nodes: usize, n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nodes * n * d {
            return Err(Error::ShapeMismatch(format!(
                "grid field needs {} values, got {}",
                nodes * n * d,
                data.len()
            )));
        }
        Ok(Self { nodes, n, d, data })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    fn stride(&self) -> usize {
        self.n * self.d
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.data[k * self.stride()..(k + 1) * self.stride()]
    }

    pub fn node_mut(&mut self, k: usize) -> &mut [f64] {
        let s = self.stride();
        &mut self.data[k * s..(k + 1) * s]
    }

    pub fn node_particles(&self, k: usize) -> Particles {
        Particles::from_flat(self.n, self.d, self.node(k).to_vec()).expect("consistent layout")
    }

    pub fn particle(&self, k: usize, i: usize) -> &[f64] {
        let o = k * self.stride() + i * self.d;
        &self.data[o..o + self.d]
    }

    pub fn particle_mut(&mut self, k: usize, i: usize) -> &mut [f64] {
        let o = k * self.stride() + i * self.d;
        &mut self.data[o..o + self.d]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &GridField) -> bool {
        self.nodes == other.nodes && self.n == other.n && self.d == other.d
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.is_finite())
    }

    pub fn check_grid(&self, grid: &TimeGrid, params: &ModelParams) -> Result<()> {
        if self.nodes != grid.nodes() || self.n != params.n || self.d != params.d {
            return Err(Error::ShapeMismatch(format!(
                "grid field is {}x{}x{}, expected {}x{}x{}",
                self.nodes,
                self.n,
                self.d,
                grid.nodes(),
                params.n,
                params.d
            )));
        }
        Ok(())
    }

    /// `sum_k w_k dt sum_i <a_i(t_k), b_i(t_k)>`
    pub fn weighted_dot(&self, other: &GridField, grid: &TimeGrid) -> f64 {
        debug_assert!(self.same_shape(other));
        (0..self.nodes)
            .map(|k| grid.weight(k) * dot(self.node(k), other.node(k)))
            .sum::<f64>()
            * grid.dt()
    }

    pub fn weighted_norm(&self, grid: &TimeGrid) -> f64 {
        self.weighted_dot(self, grid).sqrt()
    }

    /// `self + a * other`
    pub fn add_scaled(&self, a: f64, other: &GridField) -> GridField {
        let mut out = self.clone();
        out.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(s, o)| *s += a * o);
        out
    }

    pub fn scaled(&self, a: f64) -> GridField {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|s| *s *= a);
        out
    }

    /// Largest pointwise Euclidean norm of any particle vector.
    pub fn max_norm(&self) -> f64 {
        self.data
            .chunks_exact(self.d.max(1))
            .map(norm)
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    pub x: Particles,
    /// Velocities, present for the second-order model only.
    pub v: Option<Particles>,
}

impl SwarmState {
    pub fn first_order(x: Particles) -> Self {
        Self { x, v: None }
    }

    pub fn second_order(x: Particles, v: Particles) -> Result<Self> {
        if !x.same_shape(&v) {
            return Err(Error::ShapeMismatch(
                "positions and velocities differ".into(),
            ));
        }
        Ok(Self { x, v: Some(v) })
    }

    pub fn order(&self) -> Order {
        if self.v.is_some() {
            Order::Second
        } else {
            Order::First
        }
    }

    pub fn n(&self) -> usize {
        self.x.n()
    }

    pub fn d(&self) -> usize {
        self.x.d()
    }

    /// Largest `| |x_i| - 1 |` and `|<x_i, v_i>|`.
    pub fn drift(&self) -> (f64, f64) {
        let norm_drift = self
            .x
            .rows()
            .map(|x| (norm(x) - 1.0).abs())
            .fold(0.0, f64::max);
        let tangency = match &self.v {
            Some(v) => self
                .x
                .rows()
                .zip(v.rows())
                .map(|(x, v)| dot(x, v).abs())
                .fold(0.0, f64::max),
            None => 0.0,
        };
        (norm_drift, tangency)
    }

    fn flat(&self) -> Vec<f64> {
        let mut y = self.x.as_slice().to_vec();
        if let Some(v) = &self.v {
            y.extend_from_slice(v.as_slice());
        }
        y
    }

    fn from_flat(order: Order, n: usize, d: usize, y: Vec<f64>) -> Self {
        let nd = n * d;
        match order {
            Order::First => Self::first_order(Particles::from_flat(n, d, y).expect("layout")),
            Order::Second => {
                let v = y[nd..].to_vec();
                let mut x = y;
                x.truncate(nd);
                Self {
                    x: Particles::from_flat(n, d, x).expect("layout"),
                    v: Some(Particles::from_flat(n, d, v).expect("layout")),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjointState {
    pub p: Particles,
    /// Velocity costate, second order only.
    pub q: Option<Particles>,
}

impl AdjointState {
    pub fn zeros(order: Order, n: usize, d: usize) -> Self {
        Self {
            p: Particles::zeros(n, d),
            q: (order == Order::Second).then(|| Particles::zeros(n, d)),
        }
    }

    /// The costate that the control acts against: `q` for second order,
    /// `p` for first order.
    pub fn control_costate(&self) -> &Particles {
        self.q.as_ref().unwrap_or(&self.p)
    }

    pub fn is_finite(&self) -> bool {
        self.p.is_finite() && self.q.as_ref().is_none_or(Particles::is_finite)
    }
}

/// Largest constraint violations observed before any renormalization.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DriftReport {
    pub max_norm_drift: f64,
    pub max_tangency_drift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub order: Order,
    pub grid: TimeGrid,
    pub states: Vec<SwarmState>,
    pub drift: DriftReport,
}

impl Trajectory {
    pub fn initial(&self) -> &SwarmState {
        &self.states[0]
    }

    pub fn terminal(&self) -> &SwarmState {
        self.states.last().expect("non-empty trajectory")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjointTrajectory {
    pub grid: TimeGrid,
    pub states: Vec<AdjointState>,
}

#[derive(Clone, Copy)]
enum Stage {
    Start,
    Mid,
    End,
}

/// One classical RK4 step `y + h/6 (k1 + 2 k2 + 2 k3 + k4)`.
fn rk4_step<F>(y: &[f64], h: f64, mut field: F) -> Vec<f64>
where
    F: FnMut(Stage, &[f64], &mut [f64]),
{
    let len = y.len();
    let mut k1 = vec![0.0; len];
    let mut k2 = vec![0.0; len];
    let mut k3 = vec![0.0; len];
    let mut k4 = vec![0.0; len];
    let mut tmp = vec![0.0; len];

    field(Stage::Start, y, &mut k1);
    for j in 0..len {
        tmp[j] = y[j] + 0.5 * h * k1[j];
    }
    field(Stage::Mid, &tmp, &mut k2);
    for j in 0..len {
        tmp[j] = y[j] + 0.5 * h * k2[j];
    }
    field(Stage::Mid, &tmp, &mut k3);
    for j in 0..len {
        tmp[j] = y[j] + h * k3[j];
    }
    field(Stage::End, &tmp, &mut k4);
    (0..len)
        .map(|j| y[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
        .collect()
}

fn average(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(s, t)| 0.5 * (s + t)).collect()
}

fn check_forward_inputs(
    order: Order,
    initial: &SwarmState,
    u: &ControlGrid,
    params: &ModelParams,
) -> Result<TimeGrid> {
    let grid = TimeGrid::from_params(params)?;
    if initial.order() != order {
        return Err(Error::ShapeMismatch(format!(
            "initial state is {:?} order, solve requested {:?}",
            initial.order(),
            order
        )));
    }
    if initial.n() != params.n || initial.d() != params.d {
        return Err(Error::ShapeMismatch(format!(
            "initial state is {}x{}, parameters say {}x{}",
            initial.n(),
            initial.d(),
            params.n,
            params.d
        )));
    }
    if order == Order::Second && params.has_frequencies() {
        return Err(Error::param(
            "omega",
            "natural frequencies are only supported by the first-order model",
        ));
    }
    u.check_grid(&grid, params)?;
    if !u.is_finite() {
        return Err(Error::NonFinite("control grid".into()));
    }
    if !initial.x.is_finite() || initial.v.as_ref().is_some_and(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial state".into()));
    }
    let (nd, td) = initial.drift();
    if nd > INITIAL_TOL {
        return Err(Error::param(
            "initial",
            format!("positions must be unit vectors (drift {nd:e})"),
        ));
    }
    if td > INITIAL_TOL {
        return Err(Error::param(
            "initial",
            format!("velocities must be tangent (drift {td:e})"),
        ));
    }
    Ok(grid)
}

/// Checks the norm band and records drift; returns an abort error on breach.
fn inspect_step(state: &SwarmState, step: usize, drift: &mut DriftReport) -> Result<()> {
    for (i, x) in state.x.rows().enumerate() {
        let r = norm(x);
        if !r.is_finite() || !(MIN_RADIUS..=MAX_RADIUS).contains(&r) {
            return Err(Error::IntegratorAbort {
                step,
                particle: i,
                reason: format!("|x| = {r} left [{MIN_RADIUS}, {MAX_RADIUS}]"),
            });
        }
    }
    if let Some(v) = &state.v {
        if let Some(i) = v.rows().position(|r| r.iter().any(|c| !c.is_finite())) {
            return Err(Error::IntegratorAbort {
                step,
                particle: i,
                reason: "non-finite velocity".into(),
            });
        }
    }
    let (nd, td) = state.drift();
    drift.max_norm_drift = drift.max_norm_drift.max(nd);
    drift.max_tangency_drift = drift.max_tangency_drift.max(td);
    Ok(())
}

/// Solves the state equation forward from `initial` under control `u`.
///
/// With `renorm`, each new state is projected back onto the sphere and its
/// tangent bundle after the drift has been recorded.
pub fn integrate_forward(
    order: Order,
    initial: &SwarmState,
    u: &ControlGrid,
    params: &ModelParams,
    renorm: bool,
) -> Result<Trajectory> {
    let grid = check_forward_inputs(order, initial, u, params)?;
    let (n, d) = (params.n, params.d);
    let nd = n * d;
    let h = grid.dt();

    let mut drift = DriftReport::default();
    inspect_step(initial, 0, &mut drift)?;
    let mut states = Vec::with_capacity(grid.nodes());
    states.push(initial.clone());

    for k in 0..grid.steps() {
        let (u0, u1) = (u.node(k), u.node(k + 1));
        let um = average(u0, u1);
        let pick = |s: Stage| match s {
            Stage::Start => u0,
            Stage::Mid => um.as_slice(),
            Stage::End => u1,
        };
        let y = states[k].flat();
        let next = match order {
            Order::First => rk4_step(&y, h, |s, y, out| {
                first_order_field(y, pick(s), params, out)
            }),
            Order::Second => rk4_step(&y, h, |s, y, out| {
                let (ox, ov) = out.split_at_mut(nd);
                second_order_field(&y[..nd], &y[nd..], pick(s), params, ox, ov)
            }),
        };
        let mut state = SwarmState::from_flat(order, n, d, next);
        inspect_step(&state, k + 1, &mut drift)?;
        if renorm {
            let SwarmState { x, v } = &mut state;
            for i in 0..n {
                renormalize_in_place(x.row_mut(i), v.as_mut().map(|v| v.row_mut(i)));
            }
        }
        states.push(state);
    }

    Ok(Trajectory {
        order,
        grid,
        states,
        drift,
    })
}

/// Solves the costate equation backward from zero terminal data along
/// `traj`.
pub fn integrate_adjoint_backward(
    order: Order,
    traj: &Trajectory,
    u: &ControlGrid,
    params: &ModelParams,
) -> Result<AdjointTrajectory> {
    let grid = TimeGrid::from_params(params)?;
    if traj.grid != grid || traj.order != order || traj.states.len() != grid.nodes() {
        return Err(Error::ShapeMismatch(
            "trajectory does not match the parameter grid or order".into(),
        ));
    }
    u.check_grid(&grid, params)?;
    let (n, d) = (params.n, params.d);
    let nd = n * d;
    let h = grid.dt();

    let mut states = vec![AdjointState::zeros(order, n, d); grid.nodes()];
    let mut y = vec![0.0; if order == Order::Second { 2 * nd } else { nd }];

    for k in (0..grid.steps()).rev() {
        let (s0, s1) = (&traj.states[k], &traj.states[k + 1]);
        let xm = average(s0.x.as_slice(), s1.x.as_slice());
        let um = average(u.node(k), u.node(k + 1));
        // Reversed time: Start is t_{k+1}, End is t_k.
        let x_at = |s: Stage| match s {
            Stage::Start => s1.x.as_slice(),
            Stage::Mid => xm.as_slice(),
            Stage::End => s0.x.as_slice(),
        };
        let u_at = |s: Stage| match s {
            Stage::Start => u.node(k + 1),
            Stage::Mid => um.as_slice(),
            Stage::End => u.node(k),
        };
        y = match order {
            Order::First => rk4_step(&y, h, |s, p, out| {
                first_order_costate(p, x_at(s), u_at(s), params, out)
            }),
            Order::Second => {
                let v0 = s0.v.as_ref().expect("second-order state").as_slice();
                let v1 = s1.v.as_ref().expect("second-order state").as_slice();
                let vm = average(v0, v1);
                let v_at = |s: Stage| match s {
                    Stage::Start => v1,
                    Stage::Mid => vm.as_slice(),
                    Stage::End => v0,
                };
                rk4_step(&y, h, |s, pq, out| {
                    let (op, oq) = out.split_at_mut(nd);
                    second_order_costate(
                        &pq[..nd],
                        &pq[nd..],
                        x_at(s),
                        v_at(s),
                        u_at(s),
                        params,
                        op,
                        oq,
                    )
                })
            }
        };
        if y.iter().any(|c| !c.is_finite()) {
            return Err(Error::AdjointNonFinite { step: k });
        }
        let state = &mut states[k];
        state.p.as_mut_slice().copy_from_slice(&y[..nd]);
        if let Some(q) = &mut state.q {
            q.as_mut_slice().copy_from_slice(&y[nd..]);
        }
    }

    Ok(AdjointTrajectory { grid, states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sample_sphere;
    use approx::assert_abs_diff_eq;

    fn single_particle(horizon: f64, dt: f64) -> ModelParams {
        ModelParams {
            n: 1,
            d: 3,
            kappa: 0.0,
            gamma: 0.0,
            horizon,
            dt,
            ..ModelParams::default()
        }
    }

    fn geodesic_error(dt: f64) -> f64 {
        let p = single_particle(1.0, dt);
        let grid = TimeGrid::from_params(&p).unwrap();
        let init = SwarmState::second_order(
            Particles::from_rows(&[vec![1.0, 0.0, 0.0]]).unwrap(),
            Particles::from_rows(&[vec![0.0, 1.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let traj = integrate_forward(
            Order::Second,
            &init,
            &ControlGrid::zeros(&grid, 1, 3),
            &p,
            false,
        )
        .unwrap();
        let x = traj.terminal().x.row(0).to_vec();
        let exact = [1f64.cos(), 1f64.sin(), 0.0];
        x.iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn geodesic_matches_closed_form() {
        let err = geodesic_error(0.01);
        assert!(err <= 1e-8, "error {err:e}");
    }

    #[test]
    fn geodesic_step_halving_is_fourth_order() {
        let ratio = geodesic_error(0.02) / geodesic_error(0.01);
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn uncoupled_first_order_is_constant() {
        let p = ModelParams {
            n: 4,
            kappa: 0.0,
            horizon: 1.0,
            ..ModelParams::default()
        };
        let grid = TimeGrid::from_params(&p).unwrap();
        let x = Particles::from_rows(&sample_sphere(2, 4, 3).unwrap()).unwrap();
        let init = SwarmState::first_order(x);
        let traj = integrate_forward(
            Order::First,
            &init,
            &ControlGrid::zeros(&grid, 4, 3),
            &p,
            false,
        )
        .unwrap();
        assert_eq!(traj.states.len(), grid.nodes());
        assert!(traj.states.iter().all(|s| s == &init));
        assert_eq!(traj.drift.max_norm_drift, traj.initial().drift().0);
    }

    #[test]
    fn tangency_decays_exponentially() {
        let (gamma, eps) = (0.8, 1e-3);
        let p = ModelParams {
            n: 1,
            gamma,
            horizon: 1.0,
            ..ModelParams::default()
        };
        let grid = TimeGrid::from_params(&p).unwrap();
        // <x, v> = eps; the initial-data check is bypassed by building the
        // trajectory from a tangent start and perturbing through the kernel.
        let x = vec![1.0, 0.0, 0.0];
        let v = vec![eps, 0.4, 0.0];
        let mut y = x.clone();
        y.extend_from_slice(&v);
        let u = ControlGrid::zeros(&grid, 1, 3);
        for k in 0..grid.steps() {
            y = rk4_step(&y, grid.dt(), |_, y, out| {
                let (ox, ov) = out.split_at_mut(3);
                second_order_field(&y[..3], &y[3..], u.node(k), &p, ox, ov)
            });
        }
        let observed = dot(&y[..3], &y[3..]);
        let expected = eps * (-gamma).exp();
        assert_abs_diff_eq!(observed, expected, epsilon = 1e-6);
    }

    #[test]
    fn rejects_off_manifold_initial_data() {
        let p = ModelParams {
            n: 1,
            horizon: 0.1,
            ..ModelParams::default()
        };
        let grid = TimeGrid::from_params(&p).unwrap();
        let u = ControlGrid::zeros(&grid, 1, 3);
        let bad = SwarmState::first_order(Particles::from_rows(&[vec![1.1, 0.0, 0.0]]).unwrap());
        assert!(integrate_forward(Order::First, &bad, &u, &p, true).is_err());
        let bad = SwarmState::second_order(
            Particles::from_rows(&[vec![1.0, 0.0, 0.0]]).unwrap(),
            Particles::from_rows(&[vec![0.1, 0.0, 0.0]]).unwrap(),
        )
        .unwrap();
        assert!(integrate_forward(Order::Second, &bad, &u, &p, true).is_err());
        let ok = SwarmState::first_order(Particles::from_rows(&[vec![1.0, 0.0, 0.0]]).unwrap());
        assert!(integrate_forward(Order::Second, &ok, &u, &p, true).is_err());
    }

    #[test]
    fn huge_control_triggers_band_abort() {
        let p = ModelParams {
            n: 2,
            horizon: 1.0,
            dt: 0.5,
            ..ModelParams::default()
        };
        let grid = TimeGrid::from_params(&p).unwrap();
        let u = ControlGrid::from_fn(&grid, 2, 3, |_, i| {
            if i == 0 {
                vec![0.0, 1e3, 0.0]
            } else {
                vec![0.0; 3]
            }
        });
        let x = Particles::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let err =
            integrate_forward(Order::First, &SwarmState::first_order(x), &u, &p, true).unwrap_err();
        assert!(
            matches!(
                err,
                Error::IntegratorAbort {
                    step: 1,
                    particle: 0,
                    ..
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn consensus_adjoint_vanishes() {
        for order in [Order::First, Order::Second] {
            let p = ModelParams {
                n: 3,
                horizon: 0.5,
                ..ModelParams::default()
            };
            let grid = TimeGrid::from_params(&p).unwrap();
            let x = Particles::from_rows(&vec![vec![0.0, 1.0, 0.0]; 3]).unwrap();
            let init = match order {
                Order::First => SwarmState::first_order(x),
                Order::Second => SwarmState::second_order(x, Particles::zeros(3, 3)).unwrap(),
            };
            let u = ControlGrid::zeros(&grid, 3, 3);
            let traj = integrate_forward(order, &init, &u, &p, true).unwrap();
            let adj = integrate_adjoint_backward(order, &traj, &u, &p).unwrap();
            for s in &adj.states {
                assert!(s.p.as_slice().iter().all(|c| c.abs() < 1e-15));
                if let Some(q) = &s.q {
                    assert!(q.as_slice().iter().all(|c| c.abs() < 1e-15));
                }
            }
        }
    }

    #[test]
    fn adjoint_terminal_state_is_zero() {
        let p = ModelParams {
            n: 5,
            horizon: 0.5,
            ..ModelParams::default()
        };
        let grid = TimeGrid::from_params(&p).unwrap();
        let x = Particles::from_rows(&sample_sphere(3, 5, 3).unwrap()).unwrap();
        let u = ControlGrid::zeros(&grid, 5, 3);
        let traj =
            integrate_forward(Order::First, &SwarmState::first_order(x), &u, &p, true).unwrap();
        let adj = integrate_adjoint_backward(Order::First, &traj, &u, &p).unwrap();
        assert!(adj.states[grid.steps()]
            .p
            .as_slice()
            .iter()
            .all(|&c| c == 0.0));
        assert!(adj.states[0].p.as_slice().iter().any(|&c| c != 0.0));
    }

    #[test]
    fn grid_weights_and_quadrature() {
        let g = TimeGrid::new(2.0, 4).unwrap();
        assert_eq!(g.t(4), 2.0);
        assert_eq!(g.weight(0), 0.5);
        assert_eq!(g.weight(2), 1.0);
        assert_abs_diff_eq!(g.integrate((0..5).map(|_| 3.0)), 6.0, epsilon = 1e-14);
        // trapezoid is exact for linear integrands
        assert_abs_diff_eq!(g.integrate((0..5).map(|k| g.t(k))), 2.0, epsilon = 1e-14);
        assert!(TimeGrid::new(1.0, 0).is_err());
    }
}
