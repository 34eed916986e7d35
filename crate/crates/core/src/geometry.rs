//! Unit-sphere primitives: tangent projection, renormalization and seeded
//! sampling of positions and tangent velocities.
//!
//! Random draws use ChaCha20 keyed by the user seed. Each particle gets its
//! own ChaCha stream so that particle `i` always sees the same numbers no
//! matter how many particles are drawn:
//!
//! | purpose              | stream id              |
//! |----------------------|------------------------|
//! | positions            | `i`                    |
//! | tangent velocities   | `VELOCITY_STREAM + i`  |
//! | test/oracle controls | `CONTROL_STREAM + i`   |
//! | natural frequencies  | `FREQUENCY_STREAM + i` |
//!
//! Gaussians come from the Box-Muller transform applied to 53-bit uniforms,
//! so the only data-dependent loop is the re-draw of an all-zero vector.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

/// Base points with a norm below this are rejected by [`tangent_project`].
pub const DEGENERATE_NORM: f64 = 1e-8;

/// Lower edge of the neighbourhood of the sphere on which the model
/// equations are trusted.
pub const MIN_RADIUS: f64 = 0.5;

pub const VELOCITY_STREAM: u64 = 1 << 32;
pub const CONTROL_STREAM: u64 = 2 << 32;
pub const FREQUENCY_STREAM: u64 = 3 << 32;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// Writes `w - <w,x>/|x|^2 x` into `out` without checking `x`.
#[inline]
pub(crate) fn project_into(x: &[f64], w: &[f64], out: &mut [f64]) {
    let s = dot(w, x) / norm_sq(x);
    for ((o, wi), xi) in out.iter_mut().zip(w).zip(x) {
        *o = wi - s * xi;
    }
}

/// Removes the radial component of `u` at base point `x`.
pub fn tangent_project(x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    if x.len() != u.len() {
        return Err(Error::ShapeMismatch(format!(
            "base point has dimension {}, vector has {}",
            x.len(),
            u.len()
        )));
    }
    let r = norm(x);
    if !(r >= DEGENERATE_NORM) {
        return Err(Error::DegenerateBasePoint {
            norm: r,
            threshold: DEGENERATE_NORM,
        });
    }
    let mut out = vec![0.0; u.len()];
    project_into(x, u, &mut out);
    Ok(out)
}

/// Pulls `x` back onto the sphere and `v` back onto the tangent space at
/// the new base point.
pub fn renormalize(x: &[f64], v: Option<&[f64]>) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let r = norm(x);
    if !(r > MIN_RADIUS) {
        return Err(Error::DegenerateBasePoint {
            norm: r,
            threshold: MIN_RADIUS,
        });
    }
    let xn: Vec<f64> = x.iter().map(|c| c / r).collect();
    let vn = match v {
        Some(v) => Some(tangent_project(&xn, v)?),
        None => None,
    };
    Ok((xn, vn))
}

/// In-place variant used by the integrator; the caller has already checked
/// the radius.
pub(crate) fn renormalize_in_place(x: &mut [f64], v: Option<&mut [f64]>) {
    let r = norm(x);
    x.iter_mut().for_each(|c| *c /= r);
    if let Some(v) = v {
        let s = dot(v, x) / norm_sq(x);
        v.iter_mut()
            .zip(x.iter())
            .for_each(|(vi, xi)| *vi -= s * xi);
    }
}

/// Standard normal generator over one ChaCha20 stream.
pub struct GaussianStream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    /// Uniform in [0, 1) with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 - U lies in (0, 1], so the logarithm is finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn gaussian_vec(&mut self, d: usize) -> Vec<f64> {
        (0..d).map(|_| self.next_gaussian()).collect()
    }

    /// Gaussian vector that is not (numerically) zero.
    fn nonzero_gaussian_vec(&mut self, d: usize) -> Vec<f64> {
        loop {
            let g = self.gaussian_vec(d);
            if norm(&g) > 1e-300 {
                return g;
            }
        }
    }
}

fn check_dims(n: usize, d: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::param("n", "need at least one particle"));
    }
    if d < 2 {
        return Err(Error::param("d", "dimension must be at least 2"));
    }
    Ok(())
}

fn unit_from_stream(stream: &mut GaussianStream, d: usize) -> Vec<f64> {
    let g = stream.nonzero_gaussian_vec(d);
    let r = norm(&g);
    g.into_iter().map(|c| c / r).collect()
}

/// Draws `n` points uniformly on the unit sphere in `R^d`.
pub fn sample_sphere(seed: u64, n: usize, d: usize) -> Result<Vec<Vec<f64>>> {
    check_dims(n, d)?;
    Ok((0..n as u64)
        .map(|i| unit_from_stream(&mut GaussianStream::new(seed, i), d))
        .collect())
}

/// Like [`sample_sphere`] but folded onto the closed upper hemisphere
/// `x[d-1] >= 0`.
pub fn sample_hemisphere(seed: u64, n: usize, d: usize) -> Result<Vec<Vec<f64>>> {
    let mut pts = sample_sphere(seed, n, d)?;
    for p in &mut pts {
        if p[d - 1] < 0.0 {
            p.iter_mut().for_each(|c| *c = -*c);
        }
    }
    Ok(pts)
}

fn tangent_from_stream(stream: &mut GaussianStream, x: &[f64], scale: f64) -> Result<Vec<f64>> {
    if !(scale >= 0.0) || !scale.is_finite() {
        return Err(Error::param("scale", "must be finite and non-negative"));
    }
    if scale == 0.0 {
        return Ok(vec![0.0; x.len()]);
    }
    loop {
        let g = stream.nonzero_gaussian_vec(x.len());
        let t = tangent_project(x, &g)?;
        let r = norm(&t);
        if r > 1e-12 {
            return Ok(t.into_iter().map(|c| scale * c / r).collect());
        }
    }
}

/// A tangent vector at unit `x` with norm `scale` and uniformly random
/// direction, drawn from stream `VELOCITY_STREAM` of `seed`.
pub fn sample_tangent(seed: u64, x: &[f64], scale: f64) -> Result<Vec<f64>> {
    tangent_from_stream(&mut GaussianStream::new(seed, VELOCITY_STREAM), x, scale)
}

/// One tangent vector per base point, each from its own particle stream.
pub fn sample_tangents(seed: u64, xs: &[Vec<f64>], scale: f64) -> Result<Vec<Vec<f64>>> {
    xs.iter()
        .enumerate()
        .map(|(i, x)| {
            tangent_from_stream(
                &mut GaussianStream::new(seed, VELOCITY_STREAM + i as u64),
                x,
                scale,
            )
        })
        .collect()
}

/// `n` points in `R^d` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Particles {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl Particles {
    pub fn zeros(n: usize, d: usize) -> Self {
        Self {
            n,
            d,
            data: vec![0.0; n * d],
        }
    }

    pub fn from_flat(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * d {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values for {n} particles in dimension {d}, got {}",
                n * d,
                data.len()
            )));
        }
        Ok(Self { n, d, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::ShapeMismatch("ragged particle rows".into()));
        }
        Ok(Self {
            n,
            d,
            data: rows.concat(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d.max(1))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.is_finite())
    }

    pub fn same_shape(&self, other: &Particles) -> bool {
        self.n == other.n && self.d == other.d
    }

    pub fn mean(&self) -> Vec<f64> {
        mean_of(&self.data, self.n, self.d)
    }
}

/// Mean of `n` row-major points of dimension `d`, summed in index order.
pub(crate) fn mean_of(data: &[f64], n: usize, d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d];
    for row in data.chunks_exact(d) {
        m.iter_mut().zip(row).for_each(|(a, b)| *a += b);
    }
    let inv = 1.0 / n as f64;
    m.iter_mut().for_each(|a| *a *= inv);
    m
}
