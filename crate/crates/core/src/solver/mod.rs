//! Implicit Euler solver for the Dirichlet problem
//!
//! ```text
//! u_t - (phi(u))_xx = 0  in (a, b) x (t1, t2)
//! u(., t1) = u0,   u^m = g  on the lateral boundary
//! ```
//!
//! in conservative three-point form. Each step is solved by damped Newton on
//! the nodal `u` values with a tridiagonal Jacobian, falling back to a
//! bracketed nonlinear Gauss–Seidel iteration when Newton stalls (typically
//! at degenerate points where `phi'(u) = 0`). Iterates are projected to the
//! range of the boundary data, which contains the solution by the discrete
//! maximum principle.
//!
//! The Newton tolerance bounds the per-step residual measured in `u` units:
//! `max_i |u_i - u_i^old - tau/h^2 (phi_{i+1} - 2 phi_i + phi_{i-1})|`.

mod level;
mod obstacle;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Cylinder, NodeClass};
use crate::grid::{space_time_trapezoid, trapezoid_weights, GridError};
use crate::nonlinearity::{phi, phi_inverse, Exponent, Nonlinearity, NonlinearityError};

pub use crate::grid::GridFunction;
pub use level::solve_tridiagonal;
pub use obstacle::{obstacle_residuals, solve_obstacle};

use level::{LevelProblem, LevelSettings};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("boundary data shape does not match the cylinder: {0}")]
    Shape(String),
    #[error("incompatible data at the {corner} corner: |g^(1/m) - u0| = {gap:e} > {tol:e}")]
    Incompatible { corner: &'static str, gap: f64, tol: f64 },
    #[error("negative boundary data in a nonnegative solve (min {0:e}); use solve_signed")]
    NegativeData(f64),
    #[error("signed solves need a regularization index n_reg >= 1")]
    RegularizationRequired,
    #[error("obstacle exceeds boundary data at node ({i}, {k}) by {excess:e}")]
    InfeasibleObstacle { i: usize, k: usize, excess: f64 },
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("nonlinear solve failed at step {step}: residual {residual:e}")]
    NewtonDiverged {
        step: usize,
        residual: f64,
        last_iterate: Box<GridFunction>,
        report: Box<SolveReport>,
    },
    #[error(transparent)]
    Nonlinearity(#[from] NonlinearityError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Initial values and lateral data for the Dirichlet problem. Lateral data
/// is stored on the `u^m` scale (one value per time level at each end);
/// the initial trace on the `u` scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryData {
    m: Exponent,
    u0: Vec<f64>,
    g_left: Vec<f64>,
    g_right: Vec<f64>,
    compatibility_tol: f64,
}

pub const DEFAULT_COMPATIBILITY_TOL: f64 = 1e-9;

impl BoundaryData {
    pub fn new(
        m: Exponent,
        u0: Vec<f64>,
        g_left: Vec<f64>,
        g_right: Vec<f64>,
        compatibility_tol: f64,
    ) -> Result<Self, SolveError> {
        if u0.len() < 3 || g_left.len() < 2 || g_left.len() != g_right.len() {
            return Err(SolveError::Shape(format!(
                "u0 has {} values, lateral columns {} and {}",
                u0.len(),
                g_left.len(),
                g_right.len()
            )));
        }
        if u0.iter().chain(&g_left).chain(&g_right).any(|v| !v.is_finite()) {
            return Err(SolveError::Shape("non-finite boundary value".into()));
        }
        if !(compatibility_tol >= 0.0) {
            return Err(SolveError::Config("compatibility tolerance must be >= 0".into()));
        }
        let bd = Self { m, u0, g_left, g_right, compatibility_tol };
        bd.check_compatibility()?;
        Ok(bd)
    }

    /// Build from `u`-scale lateral values.
    pub fn from_u_scale(
        m: Exponent,
        u0: Vec<f64>,
        left_u: &[f64],
        right_u: &[f64],
    ) -> Result<Self, SolveError> {
        let g = |v: &[f64]| v.iter().map(|&x| phi(x, m)).collect();
        Self::new(m, u0, g(left_u), g(right_u), DEFAULT_COMPATIBILITY_TOL)
    }

    /// Data given by a function `f(x, t)` on the `u` scale.
    pub fn from_fn(c: &Cylinder, m: Exponent, f: impl Fn(f64, f64) -> f64) -> Result<Self, SolveError> {
        let u0: Vec<f64> = (0..c.nx()).map(|i| f(c.x(i), c.t(0))).collect();
        let left: Vec<f64> = (0..c.nt()).map(|k| f(c.x(0), c.t(k))).collect();
        let right: Vec<f64> = (0..c.nt()).map(|k| f(c.x(c.nx() - 1), c.t(k))).collect();
        Self::from_u_scale(m, u0, &left, &right)
    }

    /// The parabolic-boundary trace of a grid function.
    pub fn from_trace(u: &GridFunction, m: Exponent) -> Result<Self, SolveError> {
        let c = u.cylinder();
        let last = c.nx() - 1;
        let left: Vec<f64> = (0..c.nt()).map(|k| u.get(0, k)).collect();
        let right: Vec<f64> = (0..c.nt()).map(|k| u.get(last, k)).collect();
        Self::from_u_scale(m, u.level(0).to_vec(), &left, &right)
    }

    pub fn exponent(&self) -> Exponent {
        self.m
    }

    pub fn u0(&self) -> &[f64] {
        &self.u0
    }

    pub fn g_left(&self) -> &[f64] {
        &self.g_left
    }

    pub fn g_right(&self) -> &[f64] {
        &self.g_right
    }

    pub fn compatibility_tol(&self) -> f64 {
        self.compatibility_tol
    }

    pub fn left_u(&self, k: usize) -> f64 {
        phi_inverse(self.g_left[k], self.m)
    }

    pub fn right_u(&self, k: usize) -> f64 {
        phi_inverse(self.g_right[k], self.m)
    }

    /// Data value on the `u` scale at a parabolic-boundary node of `c`.
    pub fn value_at(&self, c: &Cylinder, i: usize, k: usize) -> Option<f64> {
        if c.classify(i, k) != NodeClass::Boundary {
            return None;
        }
        Some(if k == 0 {
            self.u0[i]
        } else if i == 0 {
            self.left_u(k)
        } else {
            self.right_u(k)
        })
    }

    fn check_compatibility(&self) -> Result<(), SolveError> {
        let last = self.u0.len() - 1;
        for (corner, g, u) in [("left", self.g_left[0], self.u0[0]), ("right", self.g_right[0], self.u0[last])] {
            let gap = (phi_inverse(g, self.m) - u).abs();
            if gap > self.compatibility_tol {
                return Err(SolveError::Incompatible { corner, gap, tol: self.compatibility_tol });
            }
        }
        Ok(())
    }

    fn u_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.u0
            .iter()
            .copied()
            .chain((1..self.g_left.len()).flat_map(move |k| [self.left_u(k), self.right_u(k)]))
    }

    pub fn max_u(&self) -> f64 {
        self.u_values().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_u(&self) -> f64 {
        self.u_values().fold(f64::INFINITY, f64::min)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.min_u() >= 0.0
    }

    /// Apply `f` to every boundary value on the `u` scale.
    pub fn map_u(&self, f: impl Fn(f64) -> f64) -> Result<Self, SolveError> {
        let nt = self.g_left.len();
        let left: Vec<f64> = (0..nt).map(|k| f(self.left_u(k))).collect();
        let right: Vec<f64> = (0..nt).map(|k| f(self.right_u(k))).collect();
        let u0 = self.u0.iter().map(|&v| f(v)).collect();
        let mut out = Self::from_u_scale(self.m, u0, &left, &right)?;
        out.compatibility_tol = self.compatibility_tol.max(DEFAULT_COMPATIBILITY_TOL);
        Ok(out)
    }

    /// Lift the `u`-scale data by `eps`.
    pub fn lifted(&self, eps: f64) -> Result<Self, SolveError> {
        self.map_u(|v| v + eps)
    }

    pub(crate) fn check_shape(&self, c: &Cylinder) -> Result<(), SolveError> {
        if self.u0.len() != c.nx() || self.g_left.len() != c.nt() {
            return Err(SolveError::Shape(format!(
                "data is {}x{}, cylinder lattice is {}x{}",
                self.u0.len(),
                self.g_left.len(),
                c.nx(),
                c.nt()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Regularization index of `phi_n`; 0 selects the exact `phi`.
    pub n_reg: u64,
    pub newton_tol: f64,
    pub max_newton_iter: usize,
    /// Initial Newton step length in `(0, 1]`.
    pub damping: f64,
    /// Sweep cap for the Gauss–Seidel fallback.
    pub max_fallback_sweeps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n_reg: 0,
            newton_tol: 1e-10,
            max_newton_iter: 50,
            damping: 1.0,
            max_fallback_sweeps: 200_000,
        }
    }
}

impl SolverConfig {
    pub fn with_regularization(mut self, n_reg: u64) -> Self {
        self.n_reg = n_reg;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.newton_tol = tol;
        self
    }

    fn validate(&self) -> Result<(), SolveError> {
        if !(self.newton_tol > 0.0) {
            return Err(SolveError::Config("newton_tol must be > 0".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(SolveError::Config("damping must lie in (0, 1]".into()));
        }
        if self.max_newton_iter == 0 {
            return Err(SolveError::Config("max_newton_iter must be >= 1".into()));
        }
        Ok(())
    }

    fn level_settings(&self) -> LevelSettings {
        LevelSettings {
            tol: self.newton_tol,
            max_iter: self.max_newton_iter,
            damping: self.damping,
            max_sweeps: self.max_fallback_sweeps,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// Nonlinear iterations per time step (Newton plus fallback sweeps).
    pub newton_iterations: Vec<usize>,
    /// Final residual per time step, `u` units.
    pub max_residual: Vec<f64>,
    /// Trapezoidal mass at every time level, starting with the initial one.
    pub mass: Vec<f64>,
    /// Steps that needed the Gauss–Seidel fallback.
    pub fallback_steps: Vec<usize>,
}

impl SolveReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }

    pub fn max_residual_overall(&self) -> f64 {
        self.max_residual.iter().copied().fold(0.0, f64::max)
    }

    pub fn relative_mass_drift(&self) -> f64 {
        let m0 = self.mass[0];
        self.mass.iter().map(|m| (m - m0).abs()).fold(0.0, f64::max) / m0.abs()
    }
}

fn march(
    c: &Cylinder,
    bd: &BoundaryData,
    nl: &Nonlinearity,
    cfg: &SolverConfig,
    obstacle: Option<&GridFunction>,
) -> Result<(GridFunction, SolveReport), SolveError> {
    cfg.validate()?;
    bd.check_shape(c)?;
    bd.check_compatibility()?;
    let nx = c.nx();
    let last = nx - 1;
    let mut lower = bd.min_u();
    let mut upper = bd.max_u();
    if let Some(psi) = obstacle {
        upper = upper.max(psi.max());
        lower = lower.min(upper);
    }
    let mut values = vec![0.0; c.node_count()];
    values[..nx].copy_from_slice(bd.u0());
    let mut report = SolveReport::default();
    report.mass.push(mass_of_level(&values[..nx], c.h()));
    let settings = cfg.level_settings();
    let ratio = c.tau() / (c.h() * c.h());
    for k in 1..c.nt() {
        let (done, rest) = values.split_at_mut(k * nx);
        let prev = &done[(k - 1) * nx..];
        let cur = &mut rest[..nx];
        cur.copy_from_slice(prev);
        cur[0] = bd.left_u(k);
        cur[last] = bd.right_u(k);
        let problem = LevelProblem {
            prev,
            ratio,
            nl,
            lower,
            upper,
            obstacle: obstacle.map(|p| p.level(k)),
        };
        match problem.solve(cur, &settings) {
            Ok(stats) => {
                report.newton_iterations.push(stats.iterations);
                report.max_residual.push(stats.residual);
                if stats.fallback {
                    report.fallback_steps.push(k);
                }
            }
            Err(fail) => {
                for v in values.iter_mut().skip((k + 1) * nx) {
                    *v = 0.0;
                }
                let last_iterate = GridFunction::new(*c, values)?;
                return Err(SolveError::NewtonDiverged {
                    step: k,
                    residual: fail.residual,
                    last_iterate: Box::new(last_iterate),
                    report: Box::new(report),
                });
            }
        }
        report.mass.push(mass_of_level(&values[k * nx..(k + 1) * nx], c.h()));
    }
    Ok((GridFunction::new(*c, values)?, report))
}

/// Solve the nonnegative Dirichlet problem. `cfg.n_reg > 0` replaces `phi`
/// by `phi_n`.
pub fn solve_bvp(
    c: &Cylinder,
    bd: &BoundaryData,
    cfg: &SolverConfig,
) -> Result<(GridFunction, SolveReport), SolveError> {
    if !bd.is_nonnegative() {
        return Err(SolveError::NegativeData(bd.min_u()));
    }
    let nl = Nonlinearity::select(bd.exponent(), cfg.n_reg)?;
    march(c, bd, &nl, cfg, None)
}

/// Solve with sign-changing data using the regularized nonlinearity; the
/// result satisfies `-N <= u <= M` with `N`, `M` the data extremes.
pub fn solve_signed(
    c: &Cylinder,
    bd: &BoundaryData,
    cfg: &SolverConfig,
) -> Result<(GridFunction, SolveReport), SolveError> {
    if cfg.n_reg == 0 {
        return Err(SolveError::RegularizationRequired);
    }
    let nl = Nonlinearity::select(bd.exponent(), cfg.n_reg)?;
    march(c, bd, &nl, cfg, None)
}

pub(crate) fn march_obstacle(
    c: &Cylinder,
    psi: &GridFunction,
    bd: &BoundaryData,
    cfg: &SolverConfig,
) -> Result<(GridFunction, SolveReport), SolveError> {
    let nl = Nonlinearity::select(bd.exponent(), cfg.n_reg)?;
    march(c, bd, &nl, cfg, Some(psi))
}

fn mass_of_level(level: &[f64], h: f64) -> f64 {
    trapezoid_weights(level.len(), h)
        .iter()
        .zip(level)
        .map(|(w, u)| w * u)
        .sum()
}

/// Trapezoidal integral of `u(., t_level)`. Panics if `level` is out of range.
pub fn mass(u: &GridFunction, level: usize) -> f64 {
    assert!(level < u.cylinder().nt(), "time level {level} out of range");
    mass_of_level(u.level(level), u.cylinder().h())
}

/// Space-time trapezoid of `(u - v)(phi(u) - phi(v))`, nonnegative for
/// monotone `phi`.
pub fn oleinik_gap(u: &GridFunction, v: &GridFunction, m: Exponent) -> Result<f64, GridError> {
    u.check_same_lattice(v)?;
    Ok(space_time_trapezoid(u.cylinder(), |i, k| {
        let (a, b) = (u.get(i, k), v.get(i, k));
        (a - b) * (phi(a, m) - phi(b, m))
    }))
}

/// Discrete scheme residual per unit time at a node with `k >= 1` and
/// `0 < i < nx - 1`:
/// `(u_i^k - u_i^{k-1}) / tau - (phi_{i+1} - 2 phi_i + phi_{i-1}) / h^2`.
/// Nonnegative values mean supersolution behaviour.
pub fn scheme_residual(u: &GridFunction, m: Exponent, i: usize, k: usize) -> f64 {
    let c = u.cylinder();
    let h2 = c.h() * c.h();
    let p = |j: usize| phi(u.get(j, k), m);
    (u.get(i, k) - u.get(i, k - 1)) / c.tau() - (p(i + 1) - 2.0 * p(i) + p(i - 1)) / h2
}

/// Largest violation of the scheme equation over the cylinder's unknown
/// nodes, per unit time.
pub fn max_scheme_residual(u: &GridFunction, m: Exponent) -> f64 {
    let c = u.cylinder();
    let mut worst: f64 = 0.0;
    for k in 1..c.nt() {
        for i in 1..c.nx() - 1 {
            worst = worst.max(scheme_residual(u, m, i, k).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests;
