//! Right-hand sides of the swarm models and of their costate equations.
//!
//! Writing `P(x) w = w - <w,x>/|x|^2 x` for the tangent projection and
//! `xbar` for the population mean, the fields are
//!
//! ```text
//! first order:   dx_i/dt = Omega_i x_i + P(x_i) (kappa xbar + u_i)
//! second order:  dx_i/dt = v_i
//!                dv_i/dt = -|v_i|^2/|x_i|^2 x_i - (gamma/m) v_i
//!                          + P(x_i) ((kappa/m) xbar + u_i)
//! ```
//!
//! The costate fields are the exact transposed Jacobians of these maps plus
//! the gradient `(2/N)(x_i - xbar)` of the position-variance running cost.
//! Norms are divided out literally, so the fields stay well defined slightly
//! off the sphere.

use crate::error::{Error, Result};
use crate::geometry::{dot, mean_of, norm_sq, project_into, Particles};

/// Skew-symmetry tolerance for natural frequency matrices.
pub const SKEW_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Order {
    First,
    Second,
}

impl Order {
    pub fn as_u8(self) -> u8 {
        match self {
            Order::First => 1,
            Order::Second => 2,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            1 => Some(Order::First),
            2 => Some(Order::Second),
            _ => None,
        }
    }
}

/// A `d x d` skew-symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewMatrix {
    d: usize,
    data: Vec<f64>,
}

impl SkewMatrix {
    pub fn new(d: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != d * d {
            return Err(Error::ShapeMismatch(format!(
                "skew matrix needs {} entries, got {}",
                d * d,
                data.len()
            )));
        }
        for r in 0..d {
            for c in 0..d {
                if (data[r * d + c] + data[c * d + r]).abs() > SKEW_TOL {
                    return Err(Error::param(
                        "omega",
                        format!("entry ({r},{c}) breaks skew symmetry"),
                    ));
                }
            }
        }
        Ok(Self { d, data })
    }

    /// Skew part `(A - A^T)/2` of a seeded Gaussian matrix times `scale`.
    pub fn random(seed: u64, stream: u64, d: usize, scale: f64) -> Self {
        let mut g = crate::geometry::GaussianStream::new(seed, stream);
        let a = g.gaussian_vec(d * d);
        let mut data = vec![0.0; d * d];
        for r in 0..d {
            for c in 0..d {
                data[r * d + c] = 0.5 * scale * (a[r * d + c] - a[c * d + r]);
            }
        }
        Self { d, data }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&c| c == 0.0)
    }

    /// `out += sign * A x`
    fn apply_add(&self, x: &[f64], sign: f64, out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o += sign * dot(&self.data[r * self.d..(r + 1) * self.d], x);
        }
    }
}

/// Physical and numerical parameters shared by every solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub n: usize,
    pub d: usize,
    pub kappa: f64,
    pub mass: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub horizon: f64,
    pub dt: f64,
    /// Natural frequencies; empty means all zero.
    pub omega: Vec<SkewMatrix>,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            n: 20,
            d: 3,
            kappa: 0.5,
            mass: 1.0,
            gamma: 1.0,
            lambda: 0.1,
            horizon: 4.0,
            dt: 0.01,
            omega: Vec::new(),
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::param("n", "need at least one particle"));
        }
        if self.d < 2 {
            return Err(Error::param("d", "dimension must be at least 2"));
        }
        if !(self.kappa >= 0.0) || !self.kappa.is_finite() {
            return Err(Error::param("kappa", "must be finite and >= 0"));
        }
        if !(self.mass > 0.0) || !self.mass.is_finite() {
            return Err(Error::param("mass", "must be finite and > 0"));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::param("gamma", "must be finite and >= 0"));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::param("lambda", "must be finite and > 0"));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::param("horizon", "must be finite and > 0"));
        }
        if !(self.dt > 0.0) || self.dt > self.horizon {
            return Err(Error::param("dt", "must satisfy 0 < dt <= horizon"));
        }
        let steps = (self.horizon / self.dt).round();
        if (steps * self.dt - self.horizon).abs() > 1e-9 * self.horizon {
            return Err(Error::param("dt", "horizon / dt must be an integer"));
        }
        if !self.omega.is_empty() {
            if self.omega.len() != self.n {
                return Err(Error::param(
                    "omega",
                    format!("expected {} matrices, got {}", self.n, self.omega.len()),
                ));
            }
            if self.omega.iter().any(|o| o.dim() != self.d) {
                return Err(Error::param("omega", "matrix dimension differs from d"));
            }
        }
        Ok(())
    }

    pub fn has_frequencies(&self) -> bool {
        self.omega.iter().any(|o| !o.is_zero())
    }

    pub(crate) fn omega_for(&self, i: usize) -> Option<&SkewMatrix> {
        self.omega.get(i).filter(|o| !o.is_zero())
    }
}

/// Position-dependent velocity field `dx/dt` of the first-order model.
pub(crate) fn first_order_field(x: &[f64], u: &[f64], params: &ModelParams, out: &mut [f64]) {
    let (n, d) = (params.n, params.d);
    let xbar = mean_of(x, n, d);
    let mut w = vec![0.0; d];
    for i in 0..n {
        let r = i * d..(i + 1) * d;
        let xi = &x[r.clone()];
        for k in 0..d {
            w[k] = params.kappa * xbar[k] + u[i * d + k];
        }
        let oi = &mut out[r];
        project_into(xi, &w, oi);
        if let Some(om) = params.omega_for(i) {
            om.apply_add(xi, 1.0, oi);
        }
    }
}

/// Fields `(dx/dt, dv/dt)` of the second-order model.
pub(crate) fn second_order_field(
    x: &[f64],
    v: &[f64],
    u: &[f64],
    params: &ModelParams,
    out_x: &mut [f64],
    out_v: &mut [f64],
) {
    let (n, d) = (params.n, params.d);
    out_x.copy_from_slice(v);
    let xbar = mean_of(x, n, d);
    let coupling = params.kappa / params.mass;
    let friction = params.gamma / params.mass;
    let mut w = vec![0.0; d];
    for i in 0..n {
        let r = i * d..(i + 1) * d;
        let (xi, vi) = (&x[r.clone()], &v[r.clone()]);
        for k in 0..d {
            w[k] = coupling * xbar[k] + u[i * d + k];
        }
        let oi = &mut out_v[r];
        project_into(xi, &w, oi);
        let centripetal = norm_sq(vi) / norm_sq(xi);
        for k in 0..d {
            oi[k] += -centripetal * xi[k] - friction * vi[k];
        }
    }
}

/// `out += D_x[P(x) w]^T p`
fn add_projection_jacobian_t(x: &[f64], w: &[f64], p: &[f64], out: &mut [f64]) {
    let r2 = norm_sq(x);
    let xp = dot(x, p);
    let wx = dot(w, x);
    let radial = 2.0 * wx * xp / (r2 * r2);
    for k in 0..x.len() {
        out[k] += -(xp * w[k] + wx * p[k]) / r2 + radial * x[k];
    }
}

/// `out = sum_j P(x_j) c_j * scale`
fn projected_sum(x: &[f64], c: &[f64], n: usize, d: usize, scale: f64) -> Vec<f64> {
    let mut acc = vec![0.0; d];
    let mut tmp = vec![0.0; d];
    for j in 0..n {
        let r = j * d..(j + 1) * d;
        project_into(&x[r.clone()], &c[r], &mut tmp);
        acc.iter_mut().zip(&tmp).for_each(|(a, t)| *a += t);
    }
    acc.iter_mut().for_each(|a| *a *= scale);
    acc
}

/// `-dp/dt` for the first-order costate.
pub(crate) fn first_order_costate(
    p: &[f64],
    x: &[f64],
    u: &[f64],
    params: &ModelParams,
    out: &mut [f64],
) {
    let (n, d) = (params.n, params.d);
    let nf = n as f64;
    let xbar = mean_of(x, n, d);
    let shared = projected_sum(x, p, n, d, params.kappa / nf);
    let mut w = vec![0.0; d];
    for i in 0..n {
        let r = i * d..(i + 1) * d;
        let (xi, pi) = (&x[r.clone()], &p[r.clone()]);
        for k in 0..d {
            w[k] = params.kappa * xbar[k] + u[i * d + k];
        }
        let oi = &mut out[r];
        for k in 0..d {
            oi[k] = 2.0 / nf * (xi[k] - xbar[k]) + shared[k];
        }
        add_projection_jacobian_t(xi, &w, pi, oi);
        if let Some(om) = params.omega_for(i) {
            om.apply_add(pi, -1.0, oi);
        }
    }
}

/// `(-dp/dt, -dq/dt)` for the second-order costate.
#[allow(clippy::too_many_arguments)]
pub(crate) fn second_order_costate(
    p: &[f64],
    q: &[f64],
    x: &[f64],
    v: &[f64],
    u: &[f64],
    params: &ModelParams,
    out_p: &mut [f64],
    out_q: &mut [f64],
) {
    let (n, d) = (params.n, params.d);
    let nf = n as f64;
    let coupling = params.kappa / params.mass;
    let friction = params.gamma / params.mass;
    let xbar = mean_of(x, n, d);
    let shared = projected_sum(x, q, n, d, coupling / nf);
    let mut w = vec![0.0; d];
    for i in 0..n {
        let r = i * d..(i + 1) * d;
        let (xi, vi) = (&x[r.clone()], &v[r.clone()]);
        let (pi, qi) = (&p[r.clone()], &q[r.clone()]);
        let r2 = norm_sq(xi);
        let s = norm_sq(vi);
        let xq = dot(xi, qi);
        for k in 0..d {
            w[k] = coupling * xbar[k] + u[i * d + k];
        }
        let op = &mut out_p[r.clone()];
        for k in 0..d {
            op[k] = 2.0 / nf * (xi[k] - xbar[k]) + shared[k] - s * qi[k] / r2
                + 2.0 * s * xq * xi[k] / (r2 * r2);
        }
        add_projection_jacobian_t(xi, &w, qi, op);
        let oq = &mut out_q[r];
        for k in 0..d {
            oq[k] = pi[k] - 2.0 * xq / r2 * vi[k] - friction * qi[k];
        }
    }
}

fn check_particles(name: &str, a: &Particles, params: &ModelParams) -> Result<()> {
    if a.n() != params.n || a.d() != params.d {
        return Err(Error::ShapeMismatch(format!(
            "{name} is {}x{}, parameters say {}x{}",
            a.n(),
            a.d(),
            params.n,
            params.d
        )));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite(name.to_string()));
    }
    Ok(())
}

pub fn first_order_rhs(x: &Particles, u: &Particles, params: &ModelParams) -> Result<Particles> {
    check_particles("x", x, params)?;
    check_particles("u", u, params)?;
    let mut out = Particles::zeros(params.n, params.d);
    first_order_field(x.as_slice(), u.as_slice(), params, out.as_mut_slice());
    Ok(out)
}

pub fn second_order_rhs(
    x: &Particles,
    v: &Particles,
    u: &Particles,
    params: &ModelParams,
) -> Result<(Particles, Particles)> {
    check_particles("x", x, params)?;
    check_particles("v", v, params)?;
    check_particles("u", u, params)?;
    let mut dx = Particles::zeros(params.n, params.d);
    let mut dv = Particles::zeros(params.n, params.d);
    second_order_field(
        x.as_slice(),
        v.as_slice(),
        u.as_slice(),
        params,
        dx.as_mut_slice(),
        dv.as_mut_slice(),
    );
    Ok((dx, dv))
}

/// Returns `-dp/dt`.
pub fn first_order_adjoint_rhs(
    p: &Particles,
    x: &Particles,
    u: &Particles,
    params: &ModelParams,
) -> Result<Particles> {
    check_particles("p", p, params)?;
    check_particles("x", x, params)?;
    check_particles("u", u, params)?;
    let mut out = Particles::zeros(params.n, params.d);
    first_order_costate(
        p.as_slice(),
        x.as_slice(),
        u.as_slice(),
        params,
        out.as_mut_slice(),
    );
    Ok(out)
}

/// Returns `(-dp/dt, -dq/dt)`.
pub fn second_order_adjoint_rhs(
    p: &Particles,
    q: &Particles,
    x: &Particles,
    v: &Particles,
    u: &Particles,
    params: &ModelParams,
) -> Result<(Particles, Particles)> {
    for (name, a) in [("p", p), ("q", q), ("x", x), ("v", v), ("u", u)] {
        check_particles(name, a, params)?;
    }
    let mut op = Particles::zeros(params.n, params.d);
    let mut oq = Particles::zeros(params.n, params.d);
    second_order_costate(
        p.as_slice(),
        q.as_slice(),
        x.as_slice(),
        v.as_slice(),
        u.as_slice(),
        params,
        op.as_mut_slice(),
        oq.as_mut_slice(),
    );
    Ok((op, oq))
}
