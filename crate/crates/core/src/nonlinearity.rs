//! The porous-medium nonlinearity `phi(s) = |s|^(m-1) s` and its smooth
//! regularizations `phi_n(s) = n^(-m) phi_1(n s)`.
//!
//! `phi_1` is linear (`c s`) on `|s| <= 1/2`, equal to `phi` on `|s| >= 1`
//! and a quintic Hermite blend on `1/2 < |s| < 1` matching value, slope and
//! curvature at both knots, so every `phi_n` is C² and odd.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NonlinearityError {
    #[error("exponent m = {0} must be a finite number > 1")]
    BadExponent(f64),
    #[error("regularization index must be >= 1")]
    ZeroIndex,
    #[error("linear-core slope c = {0} must be finite and > 0")]
    BadSlope(f64),
    #[error("blend with slope c = {c} is not strictly increasing (min phi_1' = {min_slope:e})")]
    NonMonotoneBlend { c: f64, min_slope: f64 },
}

/// The exponent `m > 1` of the degenerate equation.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Exponent(f64);

impl Exponent {
    pub fn new(m: f64) -> Result<Self, NonlinearityError> {
        if m.is_finite() && m > 1.0 {
            Ok(Self(m))
        } else {
            Err(NonlinearityError::BadExponent(m))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Exponent {
    type Error = NonlinearityError;
    fn try_from(m: f64) -> Result<Self, Self::Error> {
        Exponent::new(m)
    }
}

impl From<Exponent> for f64 {
    fn from(m: Exponent) -> f64 {
        m.0
    }
}

/// `|s|^(m-1) s`.
pub fn phi(s: f64, m: Exponent) -> f64 {
    s.abs().powf(m.0 - 1.0) * s
}

/// `m |s|^(m-1)`.
pub fn phi_prime(s: f64, m: Exponent) -> f64 {
    m.0 * s.abs().powf(m.0 - 1.0)
}

/// Inverse of `phi`: `sign(v) |v|^(1/m)`.
pub fn phi_inverse(v: f64, m: Exponent) -> f64 {
    v.signum() * v.abs().powf(1.0 / m.0)
}

/// Half-width of the blend interval in `phi_1`'s variable.
const BLEND: f64 = 0.5;

/// The regularized nonlinearity `phi_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizedPhi {
    m: Exponent,
    n_reg: u64,
    c_lin: f64,
    /// Monomial coefficients of the blend in `t = (s - 1/2) / (1/2)`.
    coeffs: [f64; 6],
    convex: bool,
}

impl RegularizedPhi {
    /// Default linear-core slope `0.7^(m-1)`; the resulting blend is
    /// monotone and convex for every `m` in `(1, 5]`.
    pub fn default_slope(m: Exponent) -> f64 {
        0.7f64.powf(m.0 - 1.0)
    }

    pub fn new(m: Exponent, n_reg: u64) -> Result<Self, NonlinearityError> {
        Self::with_slope(m, n_reg, Self::default_slope(m))
    }

    /// Rejects slopes for which the blend fails to be strictly increasing.
    pub fn with_slope(m: Exponent, n_reg: u64, c_lin: f64) -> Result<Self, NonlinearityError> {
        if n_reg == 0 {
            return Err(NonlinearityError::ZeroIndex);
        }
        if !c_lin.is_finite() || c_lin <= 0.0 {
            return Err(NonlinearityError::BadSlope(c_lin));
        }
        let mm = m.0;
        let l = BLEND;
        // Hermite data in the t variable: derivatives scale by l, l^2.
        let (p0, d0, a0) = (c_lin * 0.5, c_lin * l, 0.0);
        let (p1, d1, a1) = (1.0, mm * l, mm * (mm - 1.0) * l * l);
        let coeffs = [
            p0,
            d0,
            a0 / 2.0,
            -10.0 * p0 - 6.0 * d0 - 1.5 * a0 + 0.5 * a1 - 4.0 * d1 + 10.0 * p1,
            15.0 * p0 + 8.0 * d0 + 1.5 * a0 - a1 + 7.0 * d1 - 15.0 * p1,
            -6.0 * p0 - 3.0 * d0 - 0.5 * a0 + 0.5 * a1 - 3.0 * d1 + 6.0 * p1,
        ];
        let mut r = Self { m, n_reg, c_lin, coeffs, convex: true };
        let samples = 4000;
        let mut min_slope = f64::INFINITY;
        let mut min_curv = f64::INFINITY;
        for j in 0..=samples {
            let s = 0.5 + 0.5 * j as f64 / samples as f64;
            min_slope = min_slope.min(r.base_derivative(s));
            min_curv = min_curv.min(r.base_second(s));
        }
        if min_slope <= 0.0 {
            return Err(NonlinearityError::NonMonotoneBlend { c: c_lin, min_slope });
        }
        r.convex = min_curv >= -1e-12;
        Ok(r)
    }

    pub fn exponent(&self) -> Exponent {
        self.m
    }

    pub fn n_reg(&self) -> u64 {
        self.n_reg
    }

    pub fn c_lin(&self) -> f64 {
        self.c_lin
    }

    /// Whether `phi_1` is convex on `s >= 0` (checked at construction).
    pub fn is_convex(&self) -> bool {
        self.convex
    }

    /// Knots `1/(2n)` and `1/n` of `phi_n`.
    pub fn knots(&self) -> (f64, f64) {
        let n = self.n_reg as f64;
        (0.5 / n, 1.0 / n)
    }

    fn poly(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    fn poly_d1(&self, t: f64) -> f64 {
        let c = &self.coeffs;
        (((5.0 * c[5] * t + 4.0 * c[4]) * t + 3.0 * c[3]) * t + 2.0 * c[2]) * t + c[1]
    }

    fn poly_d2(&self, t: f64) -> f64 {
        let c = &self.coeffs;
        ((20.0 * c[5] * t + 12.0 * c[4]) * t + 6.0 * c[3]) * t + 2.0 * c[2]
    }

    fn poly_integral(&self, t: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .rev()
            .fold(0.0, |acc, (k, &c)| acc * t + c / (k + 1) as f64)
            * t
    }

    // phi_1 and its derivatives for s >= 0.
    fn base_value(&self, s: f64) -> f64 {
        if s <= 0.5 {
            self.c_lin * s
        } else if s < 1.0 {
            self.poly((s - 0.5) / BLEND)
        } else {
            s.powf(self.m.0)
        }
    }

    fn base_derivative(&self, s: f64) -> f64 {
        if s <= 0.5 {
            self.c_lin
        } else if s < 1.0 {
            self.poly_d1((s - 0.5) / BLEND) / BLEND
        } else {
            self.m.0 * s.powf(self.m.0 - 1.0)
        }
    }

    fn base_second(&self, s: f64) -> f64 {
        if s <= 0.5 {
            0.0
        } else if s < 1.0 {
            self.poly_d2((s - 0.5) / BLEND) / (BLEND * BLEND)
        } else {
            self.m.0 * (self.m.0 - 1.0) * s.powf(self.m.0 - 2.0)
        }
    }

    fn base_primitive(&self, s: f64) -> f64 {
        let core = self.c_lin * 0.125;
        if s <= 0.5 {
            0.5 * self.c_lin * s * s
        } else if s < 1.0 {
            core + BLEND * self.poly_integral((s - 0.5) / BLEND)
        } else {
            let mm = self.m.0;
            core + BLEND * self.poly_integral(1.0) + (s.powf(mm + 1.0) - 1.0) / (mm + 1.0)
        }
    }

    /// `phi_n(s)`.
    pub fn value(&self, s: f64) -> f64 {
        let n = self.n_reg as f64;
        let ns = n * s.abs();
        if ns >= 1.0 {
            return phi(s, self.m);
        }
        s.signum() * n.powf(-self.m.0) * self.base_value(ns)
    }

    /// `phi_n'(s)`, strictly positive.
    pub fn derivative(&self, s: f64) -> f64 {
        let n = self.n_reg as f64;
        let ns = n * s.abs();
        if ns >= 1.0 {
            return phi_prime(s, self.m);
        }
        n.powf(1.0 - self.m.0) * self.base_derivative(ns)
    }

    /// `phi_n''(s)`.
    pub fn second_derivative(&self, s: f64) -> f64 {
        let n = self.n_reg as f64;
        s.signum() * n.powf(2.0 - self.m.0) * self.base_second(n * s.abs())
    }

    /// `Psi_n(s) = int_0^s phi_n`, even and nonnegative.
    pub fn primitive(&self, s: f64) -> f64 {
        let n = self.n_reg as f64;
        n.powf(-self.m.0 - 1.0) * self.base_primitive(n * s.abs())
    }
}

pub fn phi_reg(s: f64, r: &RegularizedPhi) -> f64 {
    r.value(s)
}

pub fn phi_reg_prime(s: f64, r: &RegularizedPhi) -> f64 {
    r.derivative(s)
}

pub fn phi_reg_primitive(s: f64, r: &RegularizedPhi) -> f64 {
    r.primitive(s)
}

/// Either the exact nonlinearity or a regularization of it, as used by the
/// solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Nonlinearity {
    Exact(Exponent),
    Regularized(RegularizedPhi),
}

impl Nonlinearity {
    /// `n_reg == 0` selects the exact nonlinearity.
    pub fn select(m: Exponent, n_reg: u64) -> Result<Self, NonlinearityError> {
        if n_reg == 0 {
            Ok(Self::Exact(m))
        } else {
            RegularizedPhi::new(m, n_reg).map(Self::Regularized)
        }
    }

    pub fn exponent(&self) -> Exponent {
        match self {
            Self::Exact(m) => *m,
            Self::Regularized(r) => r.exponent(),
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        match self {
            Self::Exact(m) => phi(s, *m),
            Self::Regularized(r) => r.value(s),
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match self {
            Self::Exact(m) => phi_prime(s, *m),
            Self::Regularized(r) => r.derivative(s),
        }
    }
}
