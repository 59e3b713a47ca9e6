//! Obstacle problem: per time step, find `w >= psi` with scheme residual
//! `r(w) >= 0` and `r(w) = 0` wherever `w > psi`. Solved by semismooth
//! Newton on `min(w - psi, r(w)) = 0` (active-set updates), with projected
//! Gauss–Seidel as fallback.

use crate::domain::Cylinder;
use crate::nonlinearity::phi;

use super::{march_obstacle, BoundaryData, GridFunction, SolveError, SolveReport, SolverConfig};

/// Slack allowed when checking data against the obstacle on the
/// parabolic boundary.
const FEASIBILITY_TOL: f64 = 1e-12;

pub fn solve_obstacle(
    c: &Cylinder,
    psi: &GridFunction,
    bd: &BoundaryData,
    cfg: &SolverConfig,
) -> Result<(GridFunction, SolveReport), SolveError> {
    if psi.cylinder() != c {
        return Err(crate::grid::GridError::LatticeMismatch.into());
    }
    if !bd.is_nonnegative() {
        return Err(SolveError::NegativeData(bd.min_u()));
    }
    bd.check_shape(c)?;
    for &(i, k) in c.parabolic_boundary().iter() {
        let data = bd.value_at(c, i, k).expect("boundary node");
        let excess = psi.get(i, k) - data;
        if excess > FEASIBILITY_TOL {
            return Err(SolveError::InfeasibleObstacle { i, k, excess });
        }
    }
    march_obstacle(c, psi, bd, cfg)
}

/// One entry per unknown node: `(i, k, w - psi, r)` where `r` is the
/// scheme residual in `u` units (`tau` times the per-unit-time residual),
/// the quantity the Newton tolerance controls.
pub fn obstacle_residuals(
    w: &GridFunction,
    psi: &GridFunction,
    m: crate::nonlinearity::Exponent,
) -> Vec<(usize, usize, f64, f64)> {
    let c = w.cylinder();
    let ratio = c.tau() / (c.h() * c.h());
    let mut out = Vec::new();
    for k in 1..c.nt() {
        for i in 1..c.nx() - 1 {
            let p = |j: usize| phi(w.get(j, k), m);
            let r = w.get(i, k) - w.get(i, k - 1) - ratio * (p(i + 1) - 2.0 * p(i) + p(i - 1));
            out.push((i, k, w.get(i, k) - psi.get(i, k), r));
        }
    }
    out
}
