//! Cost evaluation, costate-based gradients and the finite-difference
//! oracle used to validate them.
//!
//! Gradients are expressed against the discrete inner product
//! `<a, b> = sum_k w_k dt sum_i <a_i(t_k), b_i(t_k)>` with trapezoidal
//! weights `w_k`, which makes step sizes independent of the mesh.

use rand::seq::index;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{ModelParams, Order};
use crate::error::{Error, Result};
use crate::geometry::{norm_sq, project_into, GaussianStream, Particles, CONTROL_STREAM};
use crate::integrate::{
    integrate_adjoint_backward, integrate_forward, AdjointState, AdjointTrajectory, ControlGrid,
    GradientGrid, SwarmState, TimeGrid, Trajectory,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct CostBreakdown {
    /// Time integral of the position variance.
    pub tracking: f64,
    /// `lambda` times the time integral of `(1/N) sum |u_i|^2`.
    pub energy: f64,
    pub total: f64,
}

fn variance(p: &Particles) -> f64 {
    let m = p.mean();
    p.rows()
        .map(|r| {
            r.iter()
                .zip(&m)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum::<f64>()
        / p.n() as f64
}

/// `(1/N) sum_i |x_i - xbar|^2`
pub fn position_variance(state: &SwarmState) -> f64 {
    variance(&state.x)
}

/// `(1/N) sum_i |v_i - vbar|^2`; requires a second-order state.
pub fn velocity_variance(state: &SwarmState) -> Result<f64> {
    state
        .v
        .as_ref()
        .map(variance)
        .ok_or_else(|| Error::ShapeMismatch("velocity variance of a first-order state".into()))
}

pub fn evaluate_cost(
    traj: &Trajectory,
    u: &ControlGrid,
    params: &ModelParams,
) -> Result<CostBreakdown> {
    let grid = traj.grid;
    if traj.states.len() != grid.nodes() {
        return Err(Error::ShapeMismatch(
            "trajectory length differs from its grid".into(),
        ));
    }
    u.check_grid(&grid, params)?;
    let nf = params.n as f64;
    let tracking = grid.integrate(traj.states.iter().map(position_variance));
    let energy = params.lambda * grid.integrate((0..grid.nodes()).map(|k| norm_sq(u.node(k)) / nf));
    Ok(CostBreakdown {
        tracking,
        energy,
        total: tracking + energy,
    })
}

/// Pointwise minimiser of the Hamiltonian:
/// `u_j = -(N / 2 lambda) P(x_j) c_j` with `c` the control costate.
pub fn pmp_control(
    adjoint: &AdjointState,
    state: &SwarmState,
    params: &ModelParams,
) -> Result<Particles> {
    if !(params.lambda > 0.0) {
        return Err(Error::param("lambda", "must be > 0"));
    }
    let c = adjoint.control_costate();
    if !c.same_shape(&state.x) {
        return Err(Error::ShapeMismatch(
            "adjoint and state differ in shape".into(),
        ));
    }
    let scale = -(params.n as f64) / (2.0 * params.lambda);
    let mut out = Particles::zeros(c.n(), c.d());
    for i in 0..c.n() {
        let o = out.row_mut(i);
        project_into(state.x.row(i), c.row(i), o);
        o.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(out)
}

/// `grad_i(t_k) = (2 lambda / N) u_i(t_k) + G_i(t_k)` with
/// `G = P(x) c` the projected control costate.
///
/// Controls are nodal values of a piecewise-linear signal, so the two end
/// nodes own half-width hat functions. Their adjoint term is the
/// hat-weighted mean over that half cell, `(2 G_0 + G_1) / 3` and
/// `(2 G_K + G_{K-1}) / 3`; a plain point value there would be first-order
/// accurate only.
///
/// For the first-order model the control moves `x` directly, and the
/// trapezoidal rule used for the tracking cost is off by `-/+ dt^2/12` in the
/// two end cells (the errors cancel between neighbouring cells elsewhere).
/// The end nodes therefore also receive `-/+ (dt/6) P(x) grad l(x)` with
/// `grad_i l = (2/N)(x_i - xbar)`, so the result is the gradient of the cost
/// that [`evaluate_cost`] actually computes.
pub fn assemble_gradient(
    u: &ControlGrid,
    traj: &Trajectory,
    adj: &AdjointTrajectory,
    params: &ModelParams,
) -> Result<GradientGrid> {
    let grid = traj.grid;
    if adj.grid != grid || adj.states.len() != grid.nodes() || traj.states.len() != grid.nodes() {
        return Err(Error::ShapeMismatch(
            "trajectory and adjoint grids differ".into(),
        ));
    }
    u.check_grid(&grid, params)?;
    let mut projected = GradientGrid::zeros(&grid, params.n, params.d);
    for k in 0..grid.nodes() {
        let c = adj.states[k].control_costate();
        let x = &traj.states[k].x;
        for i in 0..params.n {
            project_into(x.row(i), c.row(i), projected.particle_mut(k, i));
        }
    }
    let last = grid.steps();
    let coef = 2.0 * params.lambda / params.n as f64;
    let mut g = u.scaled(coef);
    for k in 0..grid.nodes() {
        let neighbour = match k {
            0 => Some(1),
            _ if k == last => Some(last - 1),
            _ => None,
        };
        let (gk, pk) = (g.node_mut(k), projected.node(k));
        match neighbour {
            None => gk.iter_mut().zip(pk).for_each(|(a, b)| *a += b),
            Some(j) => {
                let pj = projected.node(j);
                for ((a, b), c) in gk.iter_mut().zip(pk).zip(pj) {
                    *a += (2.0 * b + c) / 3.0;
                }
            }
        }
    }
    if traj.order == Order::First {
        let h = grid.dt();
        for (k, sign) in [(0, -1.0), (last, 1.0)] {
            let x = &traj.states[k].x;
            let xbar = x.mean();
            let mut src = vec![0.0; params.d];
            let mut tmp = vec![0.0; params.d];
            for i in 0..params.n {
                for (j, s) in src.iter_mut().enumerate() {
                    *s = 2.0 / params.n as f64 * (x.row(i)[j] - xbar[j]);
                }
                project_into(x.row(i), &src, &mut tmp);
                for (a, b) in g.particle_mut(k, i).iter_mut().zip(&tmp) {
                    *a += sign * h / 6.0 * b;
                }
            }
        }
    }
    Ok(g)
}

/// A fully specified optimal control instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub order: Order,
    pub initial: SwarmState,
    pub params: ModelParams,
    pub renorm: bool,
}

/// Everything produced by one forward/backward pass.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub trajectory: Trajectory,
    pub adjoint: AdjointTrajectory,
    pub cost: CostBreakdown,
    pub gradient: GradientGrid,
}

impl Problem {
    pub fn new(
        order: Order,
        initial: SwarmState,
        params: ModelParams,
        renorm: bool,
    ) -> Result<Self> {
        params.validate()?;
        if initial.order() != order {
            return Err(Error::ShapeMismatch(
                "initial state order differs from problem order".into(),
            ));
        }
        Ok(Self {
            order,
            initial,
            params,
            renorm,
        })
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid::from_params(&self.params).expect("validated parameters")
    }

    pub fn zero_control(&self) -> ControlGrid {
        ControlGrid::zeros(&self.grid(), self.params.n, self.params.d)
    }

    pub fn forward(&self, u: &ControlGrid) -> Result<Trajectory> {
        integrate_forward(self.order, &self.initial, u, &self.params, self.renorm)
    }

    pub fn cost(&self, u: &ControlGrid) -> Result<CostBreakdown> {
        evaluate_cost(&self.forward(u)?, u, &self.params)
    }

    pub fn evaluate(&self, u: &ControlGrid) -> Result<Evaluation> {
        let trajectory = self.forward(u)?;
        let cost = evaluate_cost(&trajectory, u, &self.params)?;
        let adjoint = integrate_adjoint_backward(self.order, &trajectory, u, &self.params)?;
        let gradient = assemble_gradient(u, &trajectory, &adjoint, &self.params)?;
        Ok(Evaluation {
            trajectory,
            adjoint,
            cost,
            gradient,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GridCoord {
    pub node: usize,
    pub particle: usize,
    pub component: usize,
}

/// Finite-difference gradient entries on a subset of grid coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledGradient {
    pub coords: Vec<GridCoord>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdOptions {
    pub eps: f64,
    /// Cap on the number of perturbed coordinates.
    pub max_coords: usize,
    /// Seed of the coordinate subsample.
    pub seed: u64,
}

impl Default for FdOptions {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            max_coords: 500,
            seed: 0,
        }
    }
}

/// Coordinates probed by the oracle: all of them when they fit under the
/// cap, otherwise a seeded sample without replacement in ascending order.
pub fn oracle_coords(grid: &TimeGrid, n: usize, d: usize, opts: &FdOptions) -> Vec<GridCoord> {
    let total = grid.nodes() * n * d;
    let flat: Vec<usize> = if total <= opts.max_coords {
        (0..total).collect()
    } else {
        let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
        let mut v = index::sample(&mut rng, total, opts.max_coords).into_vec();
        v.sort_unstable();
        v
    };
    flat.into_iter()
        .map(|f| GridCoord {
            node: f / (n * d),
            particle: (f / d) % n,
            component: f % d,
        })
        .collect()
}

/// Central differences of the discrete cost, rescaled by `1 / (w_k dt)` so
/// the entries are comparable with [`assemble_gradient`].
pub fn finite_difference_gradient(
    problem: &Problem,
    u: &ControlGrid,
    opts: &FdOptions,
) -> Result<SampledGradient> {
    if !(opts.eps > 0.0) {
        return Err(Error::param("fd_eps", "must be > 0"));
    }
    let grid = problem.grid();
    u.check_grid(&grid, &problem.params)?;
    let coords = oracle_coords(&grid, problem.params.n, problem.params.d, opts);
    let values = coords
        .par_iter()
        .map(|c| {
            let mut up = u.clone();
            up.particle_mut(c.node, c.particle)[c.component] += opts.eps;
            let mut um = u.clone();
            um.particle_mut(c.node, c.particle)[c.component] -= opts.eps;
            let jp = problem.cost(&up)?.total;
            let jm = problem.cost(&um)?.total;
            let g = (jp - jm) / (2.0 * opts.eps * grid.weight(c.node) * grid.dt());
            if g.is_finite() {
                Ok(g)
            } else {
                Err(Error::NonFinite(format!("finite-difference cost at {c:?}")))
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SampledGradient { coords, values })
}

/// Weighted relative L2 error `|g - g_fd| / |g_fd|` over the sampled
/// coordinates.
pub fn relative_error(gradient: &GradientGrid, fd: &SampledGradient, grid: &TimeGrid) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (c, &f) in fd.coords.iter().zip(&fd.values) {
        let w = grid.weight(c.node);
        let a = gradient.particle(c.node, c.particle)[c.component];
        num += w * (a - f) * (a - f);
        den += w * f * f;
    }
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (num / den).sqrt()
    }
}

/// Smooth seeded control `0.5 a_i + 0.5 b_i sin(2 pi t / T)` used as the
/// evaluation point of gradient checks.
pub fn probe_control(grid: &TimeGrid, n: usize, d: usize, seed: u64) -> ControlGrid {
    let mut g = GaussianStream::new(seed, CONTROL_STREAM);
    let a = g.gaussian_vec(n * d);
    let b = g.gaussian_vec(n * d);
    let horizon = grid.horizon();
    ControlGrid::from_fn(grid, n, d, |t, i| {
        (0..d)
            .map(|k| {
                0.5 * a[i * d + k]
                    + 0.5 * b[i * d + k] * (2.0 * std::f64::consts::PI * t / horizon).sin()
            })
            .collect()
    })
}
