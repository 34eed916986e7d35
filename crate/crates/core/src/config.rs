//! Flat `key = value` run configuration.
//!
//! One assignment per line, `#` starts a comment, unknown or repeated keys
//! are rejected. Every key has a default, so an empty file reproduces the
//! reference first-order experiment (N=20, d=3, dt=0.01, T=4, lambda=0.1,
//! kappa=0.5, m=gamma=1).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::dynamics::{ModelParams, Order, SkewMatrix};
use crate::error::{Error, Result};
use crate::geometry::{
    sample_hemisphere, sample_sphere, sample_tangents, Particles, FREQUENCY_STREAM,
};
use crate::integrate::SwarmState;
use crate::objective::FdOptions;
use crate::optimizer::{BbFallback, OptimizeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialData {
    /// Uniform on the sphere.
    Sphere,
    /// Uniform on the upper hemisphere `x[d-1] >= 0`.
    Hemisphere,
    /// Every particle at the first sphere sample, at rest.
    Consensus,
}

impl InitialData {
    fn as_str(self) -> &'static str {
        match self {
            InitialData::Sphere => "sphere",
            InitialData::Hemisphere => "hemisphere",
            InitialData::Consensus => "consensus",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub order: Order,
    pub seed: u64,
    pub initial: InitialData,
    /// Initial speed of every particle (second order).
    pub velocity_scale: f64,
    /// Scale of the random natural frequencies (first-order simulate only).
    pub omega_scale: f64,
    pub renorm: bool,
    pub optimize: OptimizeConfig,
    pub fd_eps: f64,
    pub fd_max_coords: usize,
    pub oracle_seed: u64,
    /// Test hook: negate the adjoint gradient before comparing.
    pub gradcheck_flip_sign: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let fd = FdOptions::default();
        Self {
            params: ModelParams::default(),
            order: Order::First,
            seed: 0,
            initial: InitialData::Sphere,
            velocity_scale: 0.1,
            omega_scale: 0.0,
            renorm: true,
            optimize: OptimizeConfig::default(),
            fd_eps: fd.eps,
            fd_max_coords: fd.max_coords,
            oracle_seed: fd.seed,
            gradcheck_flip_sign: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::param(key, format!("cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::param(
            key,
            format!("expected true/false, got `{value}`"),
        )),
    }
}

fn parse_order(key: &str, value: &str) -> Result<Order> {
    parse::<u8>(key, value)
        .ok()
        .and_then(Order::from_u8)
        .ok_or_else(|| Error::param(key, format!("expected 1 or 2, got `{value}`")))
}

impl RunConfig {
    /// Parses a config file body and validates the result.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::param(&format!("line {}", lineno + 1), "expected `key = value`")
            })?;
            let (key, value) = (key.trim(), value.trim());
            if seen.insert(key.to_string(), lineno + 1).is_some() {
                return Err(Error::param(key, "given more than once"));
            }
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let p = &mut self.params;
        let o = &mut self.optimize;
        match key {
            "n" => p.n = parse(key, value)?,
            "d" => p.d = parse(key, value)?,
            "kappa" => p.kappa = parse(key, value)?,
            "mass" => p.mass = parse(key, value)?,
            "gamma" => p.gamma = parse(key, value)?,
            "lambda" => p.lambda = parse(key, value)?,
            "horizon" => p.horizon = parse(key, value)?,
            "dt" => p.dt = parse(key, value)?,
            "order" => self.order = parse_order(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "initial" => {
                self.initial = match value {
                    "sphere" => InitialData::Sphere,
                    "hemisphere" => InitialData::Hemisphere,
                    "consensus" => InitialData::Consensus,
                    _ => {
                        return Err(Error::param(
                            key,
                            "expected sphere, hemisphere or consensus",
                        ))
                    }
                }
            }
            "velocity_scale" => self.velocity_scale = parse(key, value)?,
            "omega_scale" => self.omega_scale = parse(key, value)?,
            "renorm" => self.renorm = parse_bool(key, value)?,
            "tol" => o.tol = parse(key, value)?,
            "k_max" => o.k_max = parse(key, value)?,
            "alpha0" => o.alpha0 = parse(key, value)?,
            "alpha_min" => o.alpha_min = parse(key, value)?,
            "alpha_max" => o.alpha_max = parse(key, value)?,
            "bb_fallback" => {
                o.fallback = match value {
                    "alpha0" => BbFallback::Alpha0,
                    "grow" => BbFallback::Grow,
                    "alpha-max" => BbFallback::AlphaMax,
                    _ => return Err(Error::param(key, "expected alpha0, grow or alpha-max")),
                }
            }
            "fd_eps" => self.fd_eps = parse(key, value)?,
            "fd_max_coords" => self.fd_max_coords = parse(key, value)?,
            "oracle_seed" => self.oracle_seed = parse(key, value)?,
            "gradcheck_flip_sign" => self.gradcheck_flip_sign = parse_bool(key, value)?,
            _ => return Err(Error::param(key, "unknown key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.optimize.validate()?;
        if !(self.velocity_scale >= 0.0) || !self.velocity_scale.is_finite() {
            return Err(Error::param("velocity_scale", "must be finite and >= 0"));
        }
        if !(self.omega_scale >= 0.0) || !self.omega_scale.is_finite() {
            return Err(Error::param("omega_scale", "must be finite and >= 0"));
        }
        if self.omega_scale > 0.0 && self.order == Order::Second {
            return Err(Error::param(
                "omega_scale",
                "natural frequencies are only supported by the first-order model",
            ));
        }
        if !(self.fd_eps > 0.0) {
            return Err(Error::param("fd_eps", "must be > 0"));
        }
        if self.fd_max_coords == 0 {
            return Err(Error::param("fd_max_coords", "must be >= 1"));
        }
        Ok(())
    }

    /// Model parameters including any natural frequencies.
    pub fn model_params(&self) -> ModelParams {
        let mut p = self.params.clone();
        if self.omega_scale > 0.0 {
            p.omega = (0..p.n as u64)
                .map(|i| SkewMatrix::random(self.seed, FREQUENCY_STREAM + i, p.d, self.omega_scale))
                .collect();
        }
        p
    }

    /// Seeded initial data shared by every command.
    pub fn initial_state(&self) -> Result<SwarmState> {
        let (n, d) = (self.params.n, self.params.d);
        let xs = match self.initial {
            InitialData::Sphere => sample_sphere(self.seed, n, d)?,
            InitialData::Hemisphere => sample_hemisphere(self.seed, n, d)?,
            InitialData::Consensus => vec![sample_sphere(self.seed, 1, d)?.remove(0); n],
        };
        let x = Particles::from_rows(&xs)?;
        match self.order {
            Order::First => Ok(SwarmState::first_order(x)),
            Order::Second => {
                let v = if self.initial == InitialData::Consensus {
                    Particles::zeros(n, d)
                } else {
                    Particles::from_rows(&sample_tangents(self.seed, &xs, self.velocity_scale)?)?
                };
                SwarmState::second_order(x, v)
            }
        }
    }

    pub fn fd_options(&self) -> FdOptions {
        FdOptions {
            eps: self.fd_eps,
            max_coords: self.fd_max_coords,
            seed: self.oracle_seed,
        }
    }

    /// Resolved configuration as ordered key/value pairs; feeding
    /// [`RunConfig::to_text`] back to [`RunConfig::parse`] reproduces `self`.
    pub fn echo(&self) -> Vec<(&'static str, String)> {
        let p = &self.params;
        let o = &self.optimize;
        let f = |x: f64| format!("{x:?}");
        vec![
            ("n", p.n.to_string()),
            ("d", p.d.to_string()),
            ("kappa", f(p.kappa)),
            ("mass", f(p.mass)),
            ("gamma", f(p.gamma)),
            ("lambda", f(p.lambda)),
            ("horizon", f(p.horizon)),
            ("dt", f(p.dt)),
            ("order", self.order.as_u8().to_string()),
            ("seed", self.seed.to_string()),
            ("initial", self.initial.as_str().to_string()),
            ("velocity_scale", f(self.velocity_scale)),
            ("omega_scale", f(self.omega_scale)),
            ("renorm", self.renorm.to_string()),
            ("tol", f(o.tol)),
            ("k_max", o.k_max.to_string()),
            ("alpha0", f(o.alpha0)),
            ("alpha_min", f(o.alpha_min)),
            ("alpha_max", f(o.alpha_max)),
            (
                "bb_fallback",
                match o.fallback {
                    BbFallback::Alpha0 => "alpha0",
                    BbFallback::Grow => "grow",
                    BbFallback::AlphaMax => "alpha-max",
                }
                .to_string(),
            ),
            ("fd_eps", f(self.fd_eps)),
            ("fd_max_coords", self.fd_max_coords.to_string()),
            ("oracle_seed", self.oracle_seed.to_string()),
            ("gradcheck_flip_sign", self.gradcheck_flip_sign.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.echo() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}
