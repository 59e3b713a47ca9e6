//! Closed-form reference solutions: the Barenblatt source solution and
//! steady states with `u^m` affine in `x`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Cylinder;
use crate::grid::GridFunction;
use crate::nonlinearity::Exponent;
use crate::quadrature::{integrate, QuadratureError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExactError {
    #[error("Barenblatt constant C = {0} must be > 0")]
    BadConstant(f64),
    #[error("dimension must be >= 1")]
    BadDimension,
    #[error("mass is only defined for t > 0, got {0}")]
    NonPositiveTime(f64),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// `n / (n (m - 1) + 2)`.
pub fn lambda_exponent(m: Exponent, n_dim: u32) -> f64 {
    let n = n_dim as f64;
    n / (n * (m.get() - 1.0) + 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarenblattParams {
    pub m: Exponent,
    pub n_dim: u32,
    pub c: f64,
}

impl BarenblattParams {
    pub fn new(m: Exponent, n_dim: u32, c: f64) -> Result<Self, ExactError> {
        if n_dim == 0 {
            return Err(ExactError::BadDimension);
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(ExactError::BadConstant(c));
        }
        Ok(Self { m, n_dim, c })
    }

    pub fn lambda(&self) -> f64 {
        lambda_exponent(self.m, self.n_dim)
    }

    /// Coefficient `lambda (m - 1) / (2 m n)` of `|x|^2 / t^(2 lambda / n)`.
    pub fn profile_coefficient(&self) -> f64 {
        let m = self.m.get();
        self.lambda() * (m - 1.0) / (2.0 * m * self.n_dim as f64)
    }

    /// Radius of the support at time `t > 0`.
    pub fn support_radius(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        (self.c / self.profile_coefficient()).sqrt() * t.powf(self.lambda() / self.n_dim as f64)
    }

    /// Self-similar profile `F(xi) = (C - k xi^2)_+^(1/(m-1))`, so that
    /// `B(x, t) = t^(-lambda) F(|x| t^(-lambda/n))`.
    pub fn profile(&self, xi: f64) -> f64 {
        let base = self.c - self.profile_coefficient() * xi * xi;
        if base <= 0.0 {
            0.0
        } else {
            base.powf(1.0 / (self.m.get() - 1.0))
        }
    }

    /// Value at radius `r = |x|`.
    pub fn radial(&self, r: f64, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let lam = self.lambda();
        let base = self.c - self.profile_coefficient() * r * r / t.powf(2.0 * lam / self.n_dim as f64);
        if base <= 0.0 {
            0.0
        } else {
            t.powf(-lam) * base.powf(1.0 / (self.m.get() - 1.0))
        }
    }

    /// One-dimensional evaluation (`n_dim` is still used in the exponents).
    pub fn value_1d(&self, x: f64, t: f64) -> f64 {
        self.radial(x.abs(), t)
    }
}

/// The Barenblatt solution at `x` (any dimension) and time `t`; zero for
/// `t <= 0`.
pub fn barenblatt(x: &[f64], t: f64, p: &BarenblattParams) -> f64 {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    p.radial(r, t)
}

/// Surface measure of the unit sphere in `R^n`.
fn sphere_area(n: u32) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI * sphere_area(n - 2) / (n - 2) as f64,
    }
}

/// Total mass `int B(x, t) dx`, by adaptive quadrature of the radial
/// integral up to the free boundary.
pub fn barenblatt_mass(p: &BarenblattParams, t: f64, tol: f64) -> Result<f64, ExactError> {
    if !(t > 0.0) {
        return Err(ExactError::NonPositiveTime(t));
    }
    let radius = p.support_radius(t);
    let n = p.n_dim;
    let radial = integrate(|r| r.powi(n as i32 - 1) * p.radial(r, t), 0.0, radius, tol)?;
    Ok(sphere_area(n) * radial)
}

/// Sample the one-dimensional Barenblatt solution on a cylinder lattice.
pub fn barenblatt_grid(c: &Cylinder, p: &BarenblattParams) -> GridFunction {
    GridFunction::from_fn(*c, |x, t| p.value_1d(x, t))
}

/// Time-independent solution `u(x) = (a x + b)_+^(1/m)`; `u^m` is affine
/// wherever it is positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub a: f64,
    pub b: f64,
    pub m: Exponent,
}

impl SteadyState {
    pub fn value(&self, x: f64) -> f64 {
        (self.a * x + self.b).max(0.0).powf(1.0 / self.m.get())
    }

    pub fn grid(&self, c: &Cylinder) -> GridFunction {
        GridFunction::from_fn(*c, |x, _| self.value(x))
    }
}

pub fn steady_state(a: f64, b: f64, m: Exponent) -> SteadyState {
    SteadyState { a, b, m }
}
