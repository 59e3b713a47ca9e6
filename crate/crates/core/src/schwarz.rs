//! Alternating Schwarz iteration on a finite union of cylinders.
//!
//! Starting from a discrete subsolution `v_0` that carries the data on the
//! union's parabolic boundary, each sweep visits the members in index order,
//! solves the Dirichlet problem on the member with the current iterate as
//! boundary data, and writes the result back on the member's unknown nodes.
//! Because the scheme is monotone the iterates increase nodewise; every
//! write-back is checked.
//!
//! Ambient nodes outside the union carry the value 0 and are never read.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{CylinderUnion, NodeClass};
use crate::grid::{GridError, GridFunction};
use crate::nonlinearity::{phi, phi_inverse, Exponent};
use crate::solver::{solve_bvp, BoundaryData, SolveError, SolverConfig};

#[derive(Debug, Error)]
pub enum SchwarzError {
    #[error("data lattice does not match the ambient lattice of the union")]
    Lattice(#[from] GridError),
    #[error("negative data {value:e} at node ({i}, {k})")]
    NegativeData { i: usize, k: usize, value: f64 },
    #[error("initial iterate is not a subsolution at ({i}, {k}): residual {residual:e}")]
    NotSubsolution { i: usize, k: usize, residual: f64 },
    #[error("member {member} solve failed in sweep {sweep}: {source}")]
    Member {
        member: usize,
        sweep: usize,
        #[source]
        source: SolveError,
    },
    #[error("iterate decreased at {violations} nodes in sweep {sweep}; worst {drop:e} at ({i}, {k}), member {member}")]
    NotMonotone { sweep: usize, violations: usize, member: usize, i: usize, k: usize, drop: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub sweep: usize,
    pub sup_change: f64,
    pub min: f64,
    pub max: f64,
    /// Nodes that decreased by more than the allowed slack (a sweep with
    /// violations is reported as an error, so recorded sweeps carry 0).
    pub violations: usize,
}

#[derive(Debug, Clone)]
pub struct SchwarzState {
    union: CylinderUnion,
    m: Exponent,
    iterate: GridFunction,
    sweeps: usize,
    history: Vec<SweepRecord>,
}

impl SchwarzState {
    /// Start from [`initial_subsolution`] built from `data`.
    pub fn new(union: CylinderUnion, data: &GridFunction, m: Exponent) -> Result<Self, SchwarzError> {
        let iterate = initial_subsolution(&union, data, m)?;
        Ok(Self { union, m, iterate, sweeps: 0, history: Vec::new() })
    }

    pub fn union(&self) -> &CylinderUnion {
        &self.union
    }

    pub fn iterate(&self) -> &GridFunction {
        &self.iterate
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn history(&self) -> &[SweepRecord] {
        &self.history
    }

    pub fn history_json(&self) -> String {
        serde_json::to_string_pretty(&self.history).expect("plain records serialize")
    }
}

/// Time-independent subsolution: at each column `i`, take the smallest data
/// value on the union's parabolic boundary in that column, form the lower
/// convex envelope of those minima on the `u^m` scale, and map back. A
/// profile whose `u^m` is convex in `x` and constant in `t` has scheme
/// residual `<= 0`; raising the parabolic-boundary nodes to the data keeps
/// it so. The residual is verified at every unknown node.
pub fn initial_subsolution(
    k: &CylinderUnion,
    data: &GridFunction,
    m: Exponent,
) -> Result<GridFunction, SchwarzError> {
    let amb = *k.ambient();
    if data.cylinder() != &amb {
        return Err(GridError::LatticeMismatch.into());
    }
    let pb = k.parabolic_boundary();
    let mut column_min = vec![f64::INFINITY; amb.nx()];
    for &(i, t) in pb.iter() {
        let v = data.get(i, t);
        if v < 0.0 {
            return Err(SchwarzError::NegativeData { i, k: t, value: v });
        }
        column_min[i] = column_min[i].min(v);
    }
    let points: Vec<(f64, f64)> = column_min
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .map(|(i, &v)| (amb.x(i), phi(v, m)))
        .collect();
    let hull = lower_hull(&points);

    let mut out = GridFunction::constant(amb, 0.0);
    for &(i, t) in &k.nodes() {
        let v = if pb.contains(i, t) {
            data.get(i, t)
        } else {
            phi_inverse(eval_hull(&hull, amb.x(i)).max(0.0), m)
        };
        out.set(i, t, v);
    }
    check_subsolution(k, &out, m)?;
    Ok(out)
}

/// Lower convex hull of points sorted by abscissa (monotone chain).
fn lower_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for &p in points {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

fn eval_hull(hull: &[(f64, f64)], x: f64) -> f64 {
    if hull.len() == 1 {
        return hull[0].1;
    }
    let j = hull
        .windows(2)
        .position(|w| x <= w[1].0)
        .unwrap_or(hull.len() - 2);
    let (a, b) = (hull[j], hull[j + 1]);
    let s = ((x - a.0) / (b.0 - a.0)).clamp(0.0, 1.0);
    a.1 + s * (b.1 - a.1)
}

fn check_subsolution(k: &CylinderUnion, v: &GridFunction, m: Exponent) -> Result<(), SchwarzError> {
    let c = k.ambient();
    let ratio = c.tau() / (c.h() * c.h());
    let scale = 1e-12 * (1.0 + ratio) * (1.0 + phi(v.max(), m));
    for &(i, t) in &k.nodes() {
        if matches!(k.classify(i, t), Some(NodeClass::Boundary) | None) {
            continue;
        }
        let p = |j: usize| phi(v.get(j, t), m);
        let residual = v.get(i, t) - v.get(i, t - 1) - ratio * (p(i + 1) - 2.0 * p(i) + p(i - 1));
        if residual > scale {
            return Err(SchwarzError::NotSubsolution { i, k: t, residual });
        }
    }
    Ok(())
}

/// One full sweep over the members in index order.
pub fn schwarz_sweep(mut state: SchwarzState, cfg: &SolverConfig) -> Result<SchwarzState, SchwarzError> {
    let sweep = state.sweeps + 1;
    let slack = 10.0 * cfg.newton_tol;
    let mut sup_change: f64 = 0.0;
    let mut violations = 0;
    let mut worst: Option<(usize, usize, usize, f64)> = None;
    for (member, bx) in state.union.members().iter().enumerate() {
        let local = state.iterate.restrict(bx)?;
        let attach = |source| SchwarzError::Member { member, sweep, source };
        let bd = BoundaryData::from_trace(&local, state.m).map_err(attach)?;
        let sub = state.union.member_cylinder(member);
        let (solved, _) = solve_bvp(&sub, &bd, cfg).map_err(attach)?;
        for t in bx.k0 + 1..=bx.k1 {
            for i in bx.i0 + 1..bx.i1 {
                let new = solved.get(i - bx.i0, t - bx.k0);
                let old = state.iterate.get(i, t);
                if new < old - slack {
                    violations += 1;
                    if worst.map_or(true, |w| old - new > w.3) {
                        worst = Some((member, i, t, old - new));
                    }
                }
                sup_change = sup_change.max((new - old).abs());
                state.iterate.set(i, t, new);
            }
        }
    }
    if let Some((member, i, k, drop)) = worst {
        return Err(SchwarzError::NotMonotone { sweep, violations, member, i, k, drop });
    }
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(i, t) in &state.union.nodes() {
        min = min.min(state.iterate.get(i, t));
        max = max.max(state.iterate.get(i, t));
    }
    state.sweeps = sweep;
    state.history.push(SweepRecord { sweep, sup_change, min, max, violations });
    Ok(state)
}

#[derive(Debug, Clone)]
pub struct SchwarzOutcome {
    pub solution: GridFunction,
    pub history: Vec<SweepRecord>,
    pub converged: bool,
}

impl SchwarzOutcome {
    pub fn history_json(&self) -> String {
        serde_json::to_string_pretty(&self.history).expect("plain records serialize")
    }
}

/// Sweep until the sup-norm change of a sweep drops below `sweep_tol` or
/// `max_sweeps` is reached (then `converged` is false).
pub fn schwarz_solve(
    k: &CylinderUnion,
    data: &GridFunction,
    m: Exponent,
    cfg: &SolverConfig,
    sweep_tol: f64,
    max_sweeps: usize,
) -> Result<SchwarzOutcome, SchwarzError> {
    let mut state = SchwarzState::new(k.clone(), data, m)?;
    let mut converged = false;
    while state.sweeps < max_sweeps {
        state = schwarz_sweep(state, cfg)?;
        if state.history.last().is_some_and(|r| r.sup_change < sweep_tol) {
            converged = true;
            break;
        }
    }
    Ok(SchwarzOutcome { solution: state.iterate, history: state.history, converged })
}
