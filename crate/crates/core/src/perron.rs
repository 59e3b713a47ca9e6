//! Perturbed-data experiments: the gap between solutions with data lifted
//! by `eps`, a ladder of solutions squeezing the direct solve from below
//! and above, and how closely a solution attains its boundary values.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Cylinder, NodeClass};
use crate::grid::{GridError, GridFunction};
use crate::nonlinearity::Exponent;
use crate::solver::{oleinik_gap, solve_bvp, BoundaryData, SolveError, SolverConfig};

#[derive(Debug, Error)]
pub enum PerronError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("rung eps = {eps}: {source}")]
    Rung {
        eps: f64,
        #[source]
        source: SolveError,
    },
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("eps sequence must be nonempty, nonnegative and strictly decreasing")]
    BadSequence,
    #[error("node ({i}, {k}) is not on the parabolic boundary")]
    NotBoundary { i: usize, k: usize },
    #[error("no lattice node within radius {radius} of ({i}, {k})")]
    EmptyNeighbourhood { i: usize, k: usize, radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapMeasurement {
    /// `int (u_eps - u)(u_eps^m - u^m)`.
    pub lhs: f64,
    /// `eps |Omega_T| ((M + 1) + (M + 1)^m)`.
    pub rhs: f64,
}

impl GapMeasurement {
    /// `max(0, lhs - rhs) / (h + tau)`.
    pub fn slack(&self, c: &Cylinder) -> f64 {
        (self.lhs - self.rhs).max(0.0) / (c.h() + c.tau())
    }
}

pub fn perturbation_gap(
    u: &GridFunction,
    u_eps: &GridFunction,
    eps: f64,
    big_m: f64,
    m: Exponent,
) -> Result<GapMeasurement, GridError> {
    let lhs = oleinik_gap(u_eps, u, m)?;
    let volume = u.cylinder().volume();
    let rhs = eps * volume * ((big_m + 1.0) + (big_m + 1.0).powf(m.get()));
    Ok(GapMeasurement { lhs, rhs })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rung {
    pub eps: f64,
    /// `max (v_j - u_j)`.
    pub sup_gap: f64,
    /// `max (u_j - u)`, positive values break the sandwich.
    pub lower_excess: f64,
    /// `max (u - v_j)`.
    pub upper_excess: f64,
    pub gap: GapMeasurement,
}

/// Rung `j` solves with data `max(phi - eps_j, 0)` (lower) and that plus
/// `eps_j` (upper), where `phi` is the base data on the `u` scale.
#[derive(Debug, Clone)]
pub struct PerturbationLadder {
    pub direct: GridFunction,
    pub lower: Vec<GridFunction>,
    pub upper: Vec<GridFunction>,
    pub rungs: Vec<Rung>,
}

impl PerturbationLadder {
    /// Every rung brackets the direct solve within `tol`.
    pub fn sandwiched(&self, tol: f64) -> bool {
        self.rungs.iter().all(|r| r.lower_excess <= tol && r.upper_excess <= tol)
    }

    /// Lower solutions nondecreasing and upper solutions nonincreasing
    /// along the ladder, nodewise within `tol`.
    pub fn monotone(&self, tol: f64) -> bool {
        let ordered = |a: &GridFunction, b: &GridFunction| {
            a.values().iter().zip(b.values()).all(|(x, y)| *x <= y + tol)
        };
        self.lower.windows(2).all(|w| ordered(&w[0], &w[1])) && self.upper.windows(2).all(|w| ordered(&w[1], &w[0]))
    }

    /// CSV with header `eps,sup_gap,lhs,rhs,lower_excess,upper_excess`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "eps,sup_gap,lhs,rhs,lower_excess,upper_excess")?;
        for r in &self.rungs {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.eps, r.sup_gap, r.gap.lhs, r.gap.rhs, r.lower_excess, r.upper_excess
            )?;
        }
        Ok(())
    }
}

fn max_diff(a: &GridFunction, b: &GridFunction) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| x - y).fold(f64::NEG_INFINITY, f64::max)
}

pub fn perron_ladder(
    c: &Cylinder,
    bd: &BoundaryData,
    eps_sequence: &[f64],
    cfg: &SolverConfig,
) -> Result<PerturbationLadder, PerronError> {
    let valid = !eps_sequence.is_empty()
        && eps_sequence.iter().all(|&e| e >= 0.0 && e.is_finite())
        && eps_sequence.windows(2).all(|w| w[1] < w[0]);
    if !valid {
        return Err(PerronError::BadSequence);
    }
    let m = bd.exponent();
    let (direct, _) = solve_bvp(c, bd, cfg)?;
    let solved: Vec<(GridFunction, GridFunction, f64)> = eps_sequence
        .par_iter()
        .map(|&eps| {
            let wrap = |source| PerronError::Rung { eps, source };
            let lower_bd = bd.map_u(|v| (v - eps).max(0.0)).map_err(wrap)?;
            let upper_bd = lower_bd.lifted(eps).map_err(wrap)?;
            let (lo, _) = solve_bvp(c, &lower_bd, cfg).map_err(wrap)?;
            let (up, _) = solve_bvp(c, &upper_bd, cfg).map_err(wrap)?;
            Ok((lo, up, lower_bd.max_u()))
        })
        .collect::<Result<_, PerronError>>()?;
    let mut rungs = Vec::with_capacity(solved.len());
    let (mut lower, mut upper) = (Vec::new(), Vec::new());
    for (&eps, (lo, up, big_m)) in eps_sequence.iter().zip(solved) {
        rungs.push(Rung {
            eps,
            sup_gap: max_diff(&up, &lo),
            lower_excess: max_diff(&lo, &direct),
            upper_excess: max_diff(&direct, &up),
            gap: perturbation_gap(&lo, &up, eps, big_m, m)?,
        });
        lower.push(lo);
        upper.push(up);
    }
    Ok(PerturbationLadder { direct, lower, upper, rungs })
}

/// `sup |u(z) - phi(xi)|` over lattice nodes `z != xi` within Euclidean
/// space-time distance `radius` of the parabolic-boundary node `xi`.
pub fn boundary_attainment(
    u: &GridFunction,
    bd: &BoundaryData,
    xi: (usize, usize),
    radius: f64,
) -> Result<f64, PerronError> {
    let c = u.cylinder();
    let (i, k) = xi;
    if i >= c.nx() || k >= c.nt() || c.classify(i, k) != NodeClass::Boundary {
        return Err(PerronError::NotBoundary { i, k });
    }
    let target = bd.value_at(c, i, k).ok_or(PerronError::NotBoundary { i, k })?;
    let (x0, t0) = (c.x(i), c.t(k));
    let di = (radius / c.h()).floor() as usize;
    let dk = (radius / c.tau()).floor() as usize;
    let mut worst: Option<f64> = None;
    for kk in k.saturating_sub(dk)..=(k + dk).min(c.nt() - 1) {
        for ii in i.saturating_sub(di)..=(i + di).min(c.nx() - 1) {
            if (ii, kk) == xi {
                continue;
            }
            let d = (c.x(ii) - x0).hypot(c.t(kk) - t0);
            if d <= radius * (1.0 + 1e-12) {
                let dev = (u.get(ii, kk) - target).abs();
                worst = Some(worst.map_or(dev, |w: f64| w.max(dev)));
            }
        }
    }
    worst.ok_or(PerronError::EmptyNeighbourhood { i, k, radius })
}

/// Deviations at radii `4h, 2h, h`.
pub fn attainment_profile(u: &GridFunction, bd: &BoundaryData, xi: (usize, usize)) -> Result<[f64; 3], PerronError> {
    let h = u.cylinder().h();
    Ok([
        boundary_attainment(u, bd, xi, 4.0 * h)?,
        boundary_attainment(u, bd, xi, 2.0 * h)?,
        boundary_attainment(u, bd, xi, h)?,
    ])
}
