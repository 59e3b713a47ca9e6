//! Discrete classifiers for supersolutions of `u_t = (u^m)_xx`.
//!
//! * weak: `int -u phi_t + (u^m)_x phi_x >= 0` for nonnegative test
//!   functions, with `(u^m)_x` a centered difference of nodal values;
//! * very weak: `int -u phi_t - u^m phi_xx >= 0`, no derivative of `u`;
//! * superporous: on sampled sub-cylinders, the solution with `u`'s trace
//!   as data stays below `u`.
//!
//! Integrals use the lattice trapezoid rule; test-function derivatives are
//! analytic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Cylinder, LatticeBox};
use crate::exact::BarenblattParams;
use crate::grid::{trapezoid_weights, GridFunction};
use crate::nonlinearity::{phi, Exponent};
use crate::solver::{solve_bvp, BoundaryData, SolveError, SolverConfig};

/// `int_{-1}^{1} (1 - q^2)^4 dq`.
const BUMP_INTEGRAL: f64 = 256.0 / 315.0;

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("test function support {support:?} leaves the cylinder {domain:?}")]
    Support { support: [f64; 4], domain: [f64; 4] },
    #[error("input is negative ({value:e} at node ({i}, {k}))")]
    Negative { i: usize, k: usize, value: f64 },
    #[error("input exceeds the bound M = {bound}: {value} at node ({i}, {k})")]
    AboveBound { i: usize, k: usize, value: f64, bound: f64 },
    #[error("cutoff support leaves the spatial interval")]
    CutoffSupport,
    #[error("empty test family or sample set")]
    Empty,
    #[error("sample {sample:?}: {source}")]
    Solve {
        sample: LatticeBox,
        #[source]
        source: SolveError,
    },
}

/// `(1 - q^2)^4` and its first two derivatives in `q`, zero for `|q| >= 1`.
fn bump(q: f64) -> (f64, f64, f64) {
    let w = 1.0 - q * q;
    if w <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let w2 = w * w;
    (w2 * w2, -8.0 * q * w2 * w, w2 * (56.0 * q * q - 8.0))
}

/// Separable bump `A b((x - x0)/rx) b((t - t0)/rt)` with `b(q) = (1-q^2)^4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub x0: f64,
    pub t0: f64,
    pub rx: f64,
    pub rt: f64,
    pub amplitude: f64,
}

impl TestFunction {
    /// Amplitude chosen so the space-time integral is 1.
    pub fn normalized(x0: f64, t0: f64, rx: f64, rt: f64) -> Self {
        let amplitude = 1.0 / (BUMP_INTEGRAL * BUMP_INTEGRAL * rx * rt);
        Self { x0, t0, rx, rt, amplitude }
    }

    pub fn value(&self, x: f64, t: f64) -> f64 {
        self.amplitude * bump((x - self.x0) / self.rx).0 * bump((t - self.t0) / self.rt).0
    }

    pub fn dt(&self, x: f64, t: f64) -> f64 {
        self.amplitude * bump((x - self.x0) / self.rx).0 * bump((t - self.t0) / self.rt).1 / self.rt
    }

    pub fn dx(&self, x: f64, t: f64) -> f64 {
        self.amplitude * bump((x - self.x0) / self.rx).1 / self.rx * bump((t - self.t0) / self.rt).0
    }

    pub fn dxx(&self, x: f64, t: f64) -> f64 {
        let rx2 = self.rx * self.rx;
        self.amplitude * bump((x - self.x0) / self.rx).2 / rx2 * bump((t - self.t0) / self.rt).0
    }

    /// `[x_lo, x_hi, t_lo, t_hi]`.
    pub fn support(&self) -> [f64; 4] {
        [self.x0 - self.rx, self.x0 + self.rx, self.t0 - self.rt, self.t0 + self.rt]
    }

    fn check_inside(&self, c: &Cylinder) -> Result<(), ClassifyError> {
        let s = self.support();
        let d = [c.mesh.a(), c.mesh.b(), c.times.t_start(), c.times.t_end()];
        let slack = 1e-12 * (1.0 + d.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        if s[0] < d[0] - slack || s[1] > d[1] + slack || s[2] < d[2] - slack || s[3] > d[3] + slack {
            return Err(ClassifyError::Support { support: s, domain: d });
        }
        Ok(())
    }

    /// Lattice index ranges covering the support.
    fn index_ranges(&self, c: &Cylinder) -> (std::ops::RangeInclusive<usize>, std::ops::RangeInclusive<usize>) {
        let s = self.support();
        let (a, t0) = (c.mesh.a(), c.times.t_start());
        let lo = |v: f64, o: f64, d: f64| (((v - o) / d).floor().max(0.0)) as usize;
        let i0 = lo(s[0], a, c.h());
        let i1 = (((s[1] - a) / c.h()).ceil() as usize).min(c.nx() - 1);
        let k0 = lo(s[2], t0, c.tau());
        let k1 = (((s[3] - t0) / c.tau()).ceil() as usize).min(c.nt() - 1);
        (i0..=i1, k0..=k1)
    }
}

fn centered_dx(p: &[f64], i: usize, h: f64) -> f64 {
    let n = p.len();
    if i == 0 {
        (p[1] - p[0]) / h
    } else if i == n - 1 {
        (p[n - 1] - p[n - 2]) / h
    } else {
        (p[i + 1] - p[i - 1]) / (2.0 * h)
    }
}

/// Nodal samples of the spatial and temporal bump factors, zero past the
/// last level.
fn bump_samples(c: &Cylinder, tf: &TestFunction) -> (Vec<f64>, Vec<f64>) {
    let bx = (0..c.nx()).map(|i| bump((c.x(i) - tf.x0) / tf.rx).0).collect();
    let bt = (0..=c.nt()).map(|k| if k < c.nt() { bump((c.t(k) - tf.t0) / tf.rt).0 } else { 0.0 }).collect();
    (bx, bt)
}

/// `int -u phi_t + D(u^m) phi_x`, discretized as the adjoint of the
/// implicit scheme: forward differences of the test function in time,
/// cell differences in space. Lattice solutions give zero up to the solver
/// tolerance and lattice supersolutions give nonnegative values.
pub fn weak_residual(u: &GridFunction, m: Exponent, tf: &TestFunction) -> Result<f64, ClassifyError> {
    let c = u.cylinder();
    tf.check_inside(c)?;
    let (is, ks) = tf.index_ranges(c);
    let (bx, bt) = bump_samples(c, tf);
    let (h, tau) = (c.h(), c.tau());
    let mut total = 0.0;
    for k in ks {
        let dt = bt[k + 1] - bt[k];
        let mut flux = 0.0;
        for i in is.clone() {
            total -= h * u.get(i, k) * bx[i] * dt;
            if i < *is.end() {
                flux += (phi(u.get(i + 1, k), m) - phi(u.get(i, k), m)) * (bx[i + 1] - bx[i]) / h;
            }
        }
        total += tau * bt[k] * flux;
    }
    Ok(tf.amplitude * total)
}

/// `int -u phi_t - u^m phi_xx`. In space the piecewise linear interpolant
/// of `u` and `u^m` is integrated exactly against the bump; in time the
/// forward difference of the implicit scheme is used.
pub fn very_weak_residual(u: &GridFunction, m: Exponent, tf: &TestFunction) -> Result<f64, ClassifyError> {
    let c = u.cylinder();
    tf.check_inside(c)?;
    let (is, ks) = tf.index_ranges(c);
    let xw = HatWeights::new(c.mesh.a(), c.h(), c.nx(), tf.x0, tf.rx);
    let (_, bt) = bump_samples(c, tf);
    let mut total = 0.0;
    for k in ks {
        let dt = bt[k + 1] - bt[k];
        for i in is.clone() {
            let v = u.get(i, k);
            total -= v * xw.value[i] * dt + c.tau() * phi(v, m) * xw.second[i] * bt[k];
        }
    }
    Ok(tf.amplitude * total)
}

/// `P(q) = int_0^q (1 - s^2)^4 ds`, clamped to the support.
fn bump_primitive(q: f64) -> f64 {
    let q = q.clamp(-1.0, 1.0);
    let q2 = q * q;
    q * (1.0 + q2 * (-4.0 / 3.0 + q2 * (6.0 / 5.0 + q2 * (-4.0 / 7.0 + q2 / 9.0))))
}

/// `Q(q) = int q (1 - q^2)^4 dq = -(1 - q^2)^5 / 10`, clamped.
fn bump_moment(q: f64) -> f64 {
    let w = 1.0 - q.clamp(-1.0, 1.0).powi(2);
    -w.powi(5) / 10.0
}

/// Integrals of `b(s) = (1 - ((s - center)/r)^2)^4` against the hat
/// functions of the grid `origin + j d`: `value[j] = int hat_j b` and
/// `second[j] = int hat_j b''`, the latter being the second difference of
/// `b` divided by `d`. The support of `b` must lie inside the grid.
struct HatWeights {
    value: Vec<f64>,
    second: Vec<f64>,
}

impl HatWeights {
    fn new(origin: f64, d: f64, n: usize, center: f64, r: f64) -> Self {
        let s = |j: usize| origin + j as f64 * d;
        let q = |x: f64| (x - center) / r;
        let b = |x: f64| bump(q(x)).0;
        // Integral of b and of (x - from) b over [from, to].
        let mass = |from: f64, to: f64| r * (bump_primitive(q(to)) - bump_primitive(q(from)));
        let moment = |from: f64, to: f64| {
            r * ((center - from) * (bump_primitive(q(to)) - bump_primitive(q(from)))
                + r * (bump_moment(q(to)) - bump_moment(q(from))))
        };
        let cells: Vec<(f64, f64)> = (0..n - 1).map(|j| (mass(s(j), s(j + 1)), moment(s(j), s(j + 1)))).collect();
        let mut value = vec![0.0; n];
        let mut second = vec![0.0; n];
        for j in 0..n {
            let mut v = 0.0;
            if j > 0 {
                v += cells[j - 1].1 / d;
            }
            if j + 1 < n {
                let (cm, cmo) = cells[j];
                v += cm - cmo / d;
            }
            value[j] = v;
            let left = if j > 0 { b(s(j - 1)) } else { 0.0 };
            let right = if j + 1 < n { b(s(j + 1)) } else { 0.0 };
            second[j] = (right - 2.0 * b(s(j)) + left) / d;
        }
        Self { value, second }
    }
}

/// Deterministic family: centers on every `stride`-th node (space and
/// time); radii are fractions of the spatial length and of the duration,
/// so the family is the same set of functions at every resolution up to
/// the center lattice. Bumps whose support leaves the cylinder are dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFamily {
    pub stride: usize,
    /// Radius fractions `(of length, of duration)`, one pair per scale.
    pub radii: Vec<(f64, f64)>,
}

impl TestFamily {
    /// Stride 2 and radius fractions 1/8, 3/16 and 1/4.
    pub fn standard() -> Self {
        Self { stride: 2, radii: vec![(0.125, 0.125), (0.1875, 0.1875), (0.25, 0.25)] }
    }

    pub fn members(&self, c: &Cylinder) -> Vec<TestFunction> {
        let mut out = Vec::new();
        let stride = self.stride.max(1);
        for &(fx, ft) in &self.radii {
            let (rx, rt) = (fx * c.mesh.length(), ft * c.times.duration());
            for k in (0..c.nt()).step_by(stride) {
                for i in (0..c.nx()).step_by(stride) {
                    let tf = TestFunction::normalized(c.x(i), c.t(k), rx, rt);
                    if tf.check_inside(c).is_ok() {
                        out.push(tf);
                    }
                }
            }
        }
        out
    }

    pub fn describe(&self) -> String {
        let radii: Vec<String> = self.radii.iter().map(|(a, b)| format!("{a}L x {b}T")).collect();
        format!("bumps (1-q^2)^4 centred on every {}th node, radii [{}]", self.stride, radii.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub weak_min: f64,
    pub very_weak_min: f64,
    pub weak_argmin: TestFunction,
    pub very_weak_argmin: TestFunction,
    pub count: usize,
}

/// Minimum weak and very weak residual over a test family.
pub fn residual_scan(u: &GridFunction, m: Exponent, family: &TestFamily) -> Result<ScanResult, ClassifyError> {
    let tfs = family.members(u.cylinder());
    if tfs.is_empty() {
        return Err(ClassifyError::Empty);
    }
    let values: Vec<(f64, f64)> = tfs
        .par_iter()
        .map(|tf| Ok((weak_residual(u, m, tf)?, very_weak_residual(u, m, tf)?)))
        .collect::<Result<_, ClassifyError>>()?;
    let argmin = |f: fn(&(f64, f64)) -> f64| {
        let mut best = 0;
        for (j, v) in values.iter().enumerate() {
            if f(v) < f(&values[best]) {
                best = j;
            }
        }
        best
    };
    let (w, v) = (argmin(|p| p.0), argmin(|p| p.1));
    Ok(ScanResult {
        weak_min: values[w].0,
        very_weak_min: values[v].1,
        weak_argmin: tfs[w],
        very_weak_argmin: tfs[v],
        count: tfs.len(),
    })
}

/// Sub-cylinders with spatial width in `{1/4, 1/2}` of the cells and depth
/// in `{1/4, 1/2}` of the steps, anchored every `n/8` cells and `s/8`
/// steps, compactly inside the lattice (no node on the outer parabolic
/// boundary or the final slice).
pub fn superporous_samples(c: &Cylinder) -> Vec<LatticeBox> {
    let (n, s) = (c.nx() - 1, c.nt() - 1);
    let (si, sk) = ((n / 8).max(1), (s / 8).max(1));
    let mut out = Vec::new();
    for w in [n / 4, n / 2] {
        for d in [s / 4, s / 2] {
            if w < 2 || d < 1 {
                continue;
            }
            let mut k0 = 1;
            while k0 + d < s {
                let mut i0 = 1;
                while i0 + w < n {
                    out.push(LatticeBox::new(i0, i0 + w, k0, k0 + d));
                    i0 += si;
                }
                k0 += sk;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuperporousOutcome {
    /// `max (h - u)` over unknown nodes of every sample.
    pub worst_violation: f64,
    pub worst_sample: LatticeBox,
    pub samples: usize,
    pub pass: bool,
}

/// Solve on each sample with `u`'s trace as data and report how far the
/// solution rises above `u`.
pub fn superporous_check(
    u: &GridFunction,
    m: Exponent,
    samples: &[LatticeBox],
    cfg: &SolverConfig,
    tol: f64,
) -> Result<SuperporousOutcome, ClassifyError> {
    if samples.is_empty() {
        return Err(ClassifyError::Empty);
    }
    let worst: Vec<f64> = samples
        .par_iter()
        .map(|bx| {
            let wrap = |source| ClassifyError::Solve { sample: *bx, source };
            let local = u.restrict(bx).map_err(|e| wrap(e.into()))?;
            let bd = BoundaryData::from_trace(&local, m).map_err(wrap)?;
            let (h, _) = solve_bvp(local.cylinder(), &bd, cfg).map_err(wrap)?;
            let c = h.cylinder();
            let mut v = f64::NEG_INFINITY;
            for k in 1..c.nt() {
                for i in 1..c.nx() - 1 {
                    v = v.max(h.get(i, k) - local.get(i, k));
                }
            }
            Ok(v)
        })
        .collect::<Result<_, ClassifyError>>()?;
    let mut j = 0;
    for (idx, v) in worst.iter().enumerate() {
        if *v > worst[j] {
            j = idx;
        }
    }
    Ok(SuperporousOutcome {
        worst_violation: worst[j],
        worst_sample: samples[j],
        samples: samples.len(),
        pass: worst[j] <= tol,
    })
}

/// Spatial cutoff `A (1 - ((x - x0)/r)^2)^2` on `|x - x0| < r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialCutoff {
    pub x0: f64,
    pub r: f64,
    pub amplitude: f64,
}

impl SpatialCutoff {
    pub fn value(&self, x: f64) -> f64 {
        let q = (x - self.x0) / self.r;
        let w = 1.0 - q * q;
        if w <= 0.0 {
            0.0
        } else {
            self.amplitude * w * w
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let q = (x - self.x0) / self.r;
        let w = 1.0 - q * q;
        if w <= 0.0 {
            0.0
        } else {
            -4.0 * self.amplitude * q * w / self.r
        }
    }

    /// `int zeta^2 dx` in closed form.
    pub fn l2_squared(&self) -> f64 {
        self.amplitude * self.amplitude * self.r * BUMP_INTEGRAL
    }

    /// `int zeta'^2 dx` in closed form.
    pub fn gradient_l2_squared(&self) -> f64 {
        self.amplitude * self.amplitude * 256.0 / (105.0 * self.r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaccioppoliOutcome {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// `lhs = int zeta^2 |D(u^m)|^2`,
/// `rhs = 16 M^(2m) T int |zeta'|^2 + 4 M^(m+1) int zeta^2`,
/// with `T` the length of the time interval.
pub fn caccioppoli_check(
    u: &GridFunction,
    m: Exponent,
    zeta: &SpatialCutoff,
    big_m: f64,
) -> Result<CaccioppoliOutcome, ClassifyError> {
    let c = u.cylinder();
    if zeta.amplitude != 0.0 && (zeta.x0 - zeta.r < c.mesh.a() - 1e-12 || zeta.x0 + zeta.r > c.mesh.b() + 1e-12) {
        return Err(ClassifyError::CutoffSupport);
    }
    for k in 0..c.nt() {
        for i in 0..c.nx() {
            let v = u.get(i, k);
            if v > big_m {
                return Err(ClassifyError::AboveBound { i, k, value: v, bound: big_m });
            }
        }
    }
    let lhs = gradient_energy(u, m, zeta);
    let mm = m.get();
    let rhs = 16.0 * big_m.powf(2.0 * mm) * c.times.duration() * zeta.gradient_l2_squared()
        + 4.0 * big_m.powf(mm + 1.0) * zeta.l2_squared();
    Ok(CaccioppoliOutcome { lhs, rhs, pass: lhs <= rhs })
}

/// `int zeta^2 |D(u^m)|^2` over the whole cylinder.
pub fn gradient_energy(u: &GridFunction, m: Exponent, zeta: &SpatialCutoff) -> f64 {
    let c = u.cylinder();
    let wx = trapezoid_weights(c.nx(), c.h());
    let wt = trapezoid_weights(c.nt(), c.tau());
    let z2: Vec<f64> = (0..c.nx()).map(|i| zeta.value(c.x(i)).powi(2)).collect();
    let mut total = 0.0;
    for k in 0..c.nt() {
        let p: Vec<f64> = u.level(k).iter().map(|&v| phi(v, m)).collect();
        for i in 0..c.nx() {
            if z2[i] != 0.0 {
                total += wx[i] * wt[k] * z2[i] * centered_dx(&p, i, c.h()).powi(2);
            }
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub radius: f64,
    pub n_cells: usize,
    pub h: f64,
    pub energy: f64,
}

/// Gradient energy of the tabulated Barenblatt solution on
/// `[-r, r] x [0, r]` with cutoff of radius `r`, for each radius and each
/// resolution (cells across the neighbourhood).
pub fn barenblatt_energy_table(p: &BarenblattParams, radii: &[f64], cells: &[usize]) -> Vec<EnergyRow> {
    let mut rows = Vec::new();
    for &r in radii {
        for &n in cells {
            let c = crate::domain::build_cylinder(-r, r, 0.0, r, n, n).expect("positive radius");
            let u = GridFunction::from_fn(c, |x, t| p.value_1d(x, t));
            let zeta = SpatialCutoff { x0: 0.0, r, amplitude: 1.0 };
            rows.push(EnergyRow { radius: r, n_cells: n, h: c.h(), energy: gradient_energy(&u, p.m, &zeta) });
        }
    }
    rows
}

/// Verdict tolerances. `None` selects the default formulas.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub residual: Option<f64>,
    pub superporous: Option<f64>,
    pub solver: SolverConfig,
}

pub const RESIDUAL_TOL_FORMULA: &str = "5 (h + tau) (1 + sup u)^m";
pub const SUPERPOROUS_TOL_FORMULA: &str = "(h + tau) (1 + sup u)^m / 20";

pub fn default_residual_tol(u: &GridFunction, m: Exponent) -> f64 {
    let c = u.cylinder();
    5.0 * (c.h() + c.tau()) * (1.0 + u.max()).powf(m.get())
}

pub fn default_superporous_tol(u: &GridFunction, m: Exponent) -> f64 {
    let c = u.cylinder();
    0.05 * (c.h() + c.tau()) * (1.0 + u.max()).powf(m.get())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub weak_min_residual: f64,
    pub very_weak_min_residual: f64,
    pub superporous_worst_violation: f64,
    pub weak: bool,
    pub very_weak: bool,
    pub superporous: bool,
    pub residual_tol: f64,
    pub residual_tol_formula: String,
    pub superporous_tol: f64,
    pub superporous_tol_formula: String,
    pub test_family: String,
    pub test_functions: usize,
    pub samples: usize,
    pub h: f64,
    pub tau: f64,
}

impl ClassificationReport {
    /// All three verdicts coincide.
    pub fn agrees(&self) -> bool {
        self.weak == self.very_weak && self.very_weak == self.superporous
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain report serializes")
    }
}

/// Run the residual scan and the superporous check and report verdicts.
pub fn classify(u: &GridFunction, m: Exponent, tol: &Tolerances) -> Result<ClassificationReport, ClassifyError> {
    let c = u.cylinder();
    for k in 0..c.nt() {
        for i in 0..c.nx() {
            if u.get(i, k) < 0.0 {
                return Err(ClassifyError::Negative { i, k, value: u.get(i, k) });
            }
        }
    }
    let family = TestFamily::standard();
    let scan = residual_scan(u, m, &family)?;
    let samples = superporous_samples(c);
    let residual_tol = tol.residual.unwrap_or_else(|| default_residual_tol(u, m));
    let superporous_tol = tol.superporous.unwrap_or_else(|| default_superporous_tol(u, m));
    let sp = superporous_check(u, m, &samples, &tol.solver, superporous_tol)?;
    let formula = |given: Option<f64>, f: &str| if given.is_some() { "fixed".to_string() } else { f.to_string() };
    Ok(ClassificationReport {
        weak_min_residual: scan.weak_min,
        very_weak_min_residual: scan.very_weak_min,
        superporous_worst_violation: sp.worst_violation,
        weak: scan.weak_min >= -residual_tol,
        very_weak: scan.very_weak_min >= -residual_tol,
        superporous: sp.pass,
        residual_tol,
        residual_tol_formula: formula(tol.residual, RESIDUAL_TOL_FORMULA),
        superporous_tol,
        superporous_tol_formula: formula(tol.superporous, SUPERPOROUS_TOL_FORMULA),
        test_family: family.describe(),
        test_functions: scan.count,
        samples: sp.samples,
        h: c.h(),
        tau: c.tau(),
    })
}
