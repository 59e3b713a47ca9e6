//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Reference values come from closed forms and brute-force
//! computations written here, independent of the library code paths.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use pme_core::classify::{barenblatt_energy_table, caccioppoli_check, SpatialCutoff};
use pme_core::corpus::{build_corpus, CorpusConfig};
use pme_core::exact::{lambda_exponent, BarenblattParams};
use pme_core::experiment::{equivalence_rows, ExperimentConfig, Scenario};
use pme_core::perron::{boundary_attainment, perron_ladder, perturbation_gap};
use pme_core::schwarz::{schwarz_sweep, SchwarzState};
use pme_core::solver::{solve_obstacle, solve_signed};
use pme_core::{build_cylinder, solve_bvp, BoundaryData, Cylinder, CylinderUnion, Exponent, GridFunction, LatticeBox, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn m2() -> Exponent {
    Exponent::new(2.0).unwrap()
}

/// `t^(-1/3) (1 - x^2 t^(-2/3) / 12)_+`, zero for `t <= 0`.
fn barenblatt_m2(x: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    t.powf(-1.0 / 3.0) * (1.0 - x * x * t.powf(-2.0 / 3.0) / 12.0).max(0.0)
}

fn trapezoid(values: impl Iterator<Item = f64>, n: usize, d: f64) -> f64 {
    values.enumerate().map(|(i, v)| if i == 0 || i == n - 1 { 0.5 * v } else { v }).sum::<f64>() * d
}

fn level_mass(u: &GridFunction, k: usize) -> f64 {
    let c = u.cylinder();
    trapezoid((0..c.nx()).map(|i| u.get(i, k)), c.nx(), c.h())
}

fn space_time_integral(c: &Cylinder, f: impl Fn(usize, usize) -> f64) -> f64 {
    let inner: Vec<f64> = (0..c.nt()).map(|k| trapezoid((0..c.nx()).map(|i| f(i, k)), c.nx(), c.h())).collect();
    trapezoid(inner.into_iter(), c.nt(), c.tau())
}

fn barenblatt_run(cells: usize, steps: usize) -> (GridFunction, Cylinder) {
    let c = build_cylinder(-6.0, 6.0, 1.0, 2.0, cells, steps).unwrap();
    let bd = BoundaryData::from_fn(&c, m2(), barenblatt_m2).unwrap();
    (solve_bvp(&c, &bd, &SolverConfig::default()).unwrap().0, c)
}

fn rel_l1_at_end(u: &GridFunction) -> f64 {
    let c = u.cylinder();
    let k = c.nt() - 1;
    let t = c.t(k);
    let err = trapezoid((0..c.nx()).map(|i| (u.get(i, k) - barenblatt_m2(c.x(i), t)).abs()), c.nx(), c.h());
    let norm = trapezoid((0..c.nx()).map(|i| barenblatt_m2(c.x(i), t)), c.nx(), c.h());
    err / norm
}

fn barenblatt_reproduction() -> Outcome {
    let (coarse, _) = barenblatt_run(600, 2000);
    let (fine, _) = barenblatt_run(1200, 4000);
    let (e0, e1) = (rel_l1_at_end(&coarse), rel_l1_at_end(&fine));
    let p = BarenblattParams::new(m2(), 1, 1.0).unwrap();
    let lambda_exact = p.lambda() == 1.0 / 3.0 && lambda_exponent(m2(), 1) == 1.0 / 3.0;
    let formula_matches = (0..=240).all(|j| {
        let x = -6.0 + j as f64 * 0.05;
        [1.0, 1.37, 2.0].iter().all(|&t| (p.value_1d(x, t) - barenblatt_m2(x, t)).abs() <= 1e-14)
    });
    Outcome {
        pass: e0 <= 0.03 && e1 < e0 && lambda_exact && formula_matches,
        detail: format!(
            "rel L1 {e0:.3e} (h=0.02), {e1:.3e} (h=0.01); lambda = {} ; closed form match {formula_matches}",
            p.lambda()
        ),
    }
}

fn mass_conservation() -> Outcome {
    let (u, c) = barenblatt_run(600, 2000);
    let m0 = level_mass(&u, 0);
    let drift = (0..c.nt()).map(|k| (level_mass(&u, k) - m0).abs() / m0).fold(0.0, f64::max);
    let p = BarenblattParams::new(m2(), 1, 1.0).unwrap();
    let inside = p.support_radius(2.0) < 6.0 - c.h();
    Outcome {
        pass: inside && drift <= 1e-6,
        detail: format!("relative drift {drift:.3e}, support radius at t=2 {:.4}", p.support_radius(2.0)),
    }
}

/// Lower data `max(0, a + b sin(w pi x + p)(1 + c t))` and a nonnegative
/// increment for the upper data.
fn random_pair(rng: &mut ChaCha8Rng) -> (impl Fn(f64, f64) -> f64, impl Fn(f64, f64) -> f64) {
    let (a, b, w, p, c) =
        (rng.gen_range(0.0..0.4), rng.gen_range(0.1..0.6), rng.gen_range(0.5..3.0), rng.gen_range(0.0..2.0 * PI), rng.gen_range(-0.5..1.0));
    let (d, w2, p2) = (rng.gen_range(0.0..0.3), rng.gen_range(0.5..4.0), rng.gen_range(0.0..2.0 * PI));
    let lower = move |x: f64, t: f64| (a + b * (w * PI * x + p).sin() * (1.0 + c * t)).max(0.0);
    let upper = move |x: f64, t: f64| lower(x, t) + d * (1.0 + (w2 * PI * x + p2 + t).cos()) * 0.5;
    (lower, upper)
}

fn discrete_comparison() -> Outcome {
    let c = build_cylinder(0.0, 1.0, 0.0, 0.5, 64, 64).unwrap();
    let cfg = SolverConfig::default();
    let tol = 10.0 * cfg.newton_tol;
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let (mut nodes, mut ordered, mut pairs_ok) = (0usize, 0usize, 0usize);
    for _ in 0..50 {
        let (lo, up) = random_pair(&mut rng);
        let u = solve_bvp(&c, &BoundaryData::from_fn(&c, m2(), &lo).unwrap(), &cfg).unwrap().0;
        let v = solve_bvp(&c, &BoundaryData::from_fn(&c, m2(), &up).unwrap(), &cfg).unwrap().0;
        let ok = u.values().iter().zip(v.values()).filter(|(a, b)| **a <= **b + tol).count();
        nodes += u.values().len();
        ordered += ok;
        pairs_ok += (ok == u.values().len()) as usize;
    }
    Outcome { pass: ordered == nodes, detail: format!("{pairs_ok}/50 pairs, {ordered}/{nodes} nodes ordered within {tol:e}") }
}

fn perturbation_bound() -> Outcome {
    let eps = [0.1, 0.01, 0.001];
    let mut slack = vec![Vec::new(); eps.len()];
    let mut ratios = Vec::new();
    let mut library_matches = true;
    for (cells, steps) in [(120, 100), (240, 200), (480, 400)] {
        let c = build_cylinder(-6.0, 6.0, 1.0, 2.0, cells, steps).unwrap();
        let bd = BoundaryData::from_fn(&c, m2(), barenblatt_m2).unwrap();
        let cfg = SolverConfig::default();
        let u = solve_bvp(&c, &bd, &cfg).unwrap().0;
        let big_m = (0..c.nx()).map(|i| barenblatt_m2(c.x(i), 1.0)).fold(0.0, f64::max);
        for (j, &e) in eps.iter().enumerate() {
            let v = solve_bvp(&c, &bd.lifted(e).unwrap(), &cfg).unwrap().0;
            let lhs = space_time_integral(&c, |i, k| {
                let (a, b) = (v.get(i, k), u.get(i, k));
                (a - b) * (a * a - b * b)
            });
            let rhs = e * 12.0 * ((big_m + 1.0) + (big_m + 1.0).powi(2));
            let lib = perturbation_gap(&u, &v, e, big_m, m2()).unwrap();
            library_matches &= (lib.lhs - lhs).abs() <= 1e-12 * (1.0 + lhs) && (lib.rhs - rhs).abs() <= 1e-12 * rhs;
            slack[j].push((lhs - rhs).max(0.0) / (c.h() + c.tau()));
            ratios.push(lhs / rhs);
        }
    }
    let stable = slack.iter().all(|s| {
        let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = s.iter().cloned().fold(0.0, f64::max);
        hi == 0.0 || (lo > 0.0 && hi <= 2.0 * lo)
    });
    let worst = ratios.iter().cloned().fold(0.0, f64::max);
    Outcome {
        pass: stable && library_matches,
        detail: format!("max lhs/rhs {worst:.3e}, slack constants {slack:?}, library agrees {library_matches}"),
    }
}

fn schwarz_alternating() -> Outcome {
    let c = build_cylinder(0.0, 1.0, 0.0, 0.5, 64, 64).unwrap();
    let data_fn = |x: f64, t: f64| 0.3 + 0.6 * (-(x - 0.35).powi(2) / 0.04).exp() * (1.0 + t) + 0.2 * x;
    let union = CylinderUnion::new(
        c,
        vec![LatticeBox::new(0, 30, 0, 64), LatticeBox::new(20, 44, 0, 64), LatticeBox::new(34, 64, 0, 64)],
    )
    .unwrap();
    let data = GridFunction::from_fn(c, data_fn);
    let cfg = SolverConfig::default();
    let sweep_tol = 1e-6;
    let mut state = SchwarzState::new(union, &data, m2()).unwrap();
    let mut prev = state.iterate().clone();
    // Ordering is judged to the same 10x Newton tolerance as the comparison
    // criterion; the largest raw drop is reported alongside.
    let slack = 10.0 * cfg.newton_tol;
    let (mut violations, mut changes, mut max_drop) = (0usize, Vec::new(), 0.0f64);
    while state.sweeps() < 50 {
        state = schwarz_sweep(state, &cfg).unwrap();
        let next = state.iterate();
        violations += prev.values().iter().zip(next.values()).filter(|(a, b)| **b < **a - slack).count();
        max_drop = prev.values().iter().zip(next.values()).map(|(a, b)| a - b).fold(max_drop, f64::max);
        changes.push(prev.values().iter().zip(next.values()).map(|(a, b)| (b - a).abs()).fold(0.0, f64::max));
        prev = next.clone();
        if *changes.last().unwrap() < sweep_tol {
            break;
        }
    }
    let converged = *changes.last().unwrap() < sweep_tol;
    let decreasing = changes.windows(2).all(|w| w[1] < w[0]);
    let direct = solve_bvp(&c, &BoundaryData::from_fn(&c, m2(), data_fn).unwrap(), &cfg).unwrap().0;
    let dist = prev.sup_distance(&direct).unwrap();
    Outcome {
        pass: converged && violations == 0 && decreasing && dist <= 10.0 * sweep_tol,
        detail: format!(
            "{} sweeps, {violations} nodes dropping by more than {slack:e} (largest drop {max_drop:.1e}), sup-change monotone {decreasing}, distance to direct {dist:.3e}",
            changes.len()
        ),
    }
}

fn regularization_consistency() -> Outcome {
    let c = build_cylinder(0.0, 1.0, 0.0, 0.5, 64, 64).unwrap();
    let cfg = SolverConfig::default();
    let positive = BoundaryData::from_fn(&c, m2(), |x, t| 0.5 + 0.3 * (6.0 * x).sin() * (1.0 - t)).unwrap();
    let plain = solve_bvp(&c, &positive, &cfg).unwrap().0;
    let reg = solve_bvp(&c, &positive, &cfg.with_regularization(1_000_000)).unwrap().0;
    let agree = plain.sup_distance(&reg).unwrap();
    let signed = BoundaryData::from_fn(&c, m2(), |x, t| x - 0.3 + 0.2 * t).unwrap();
    let sols: Vec<GridFunction> =
        [4u64, 16, 64, 256].iter().map(|&n| solve_signed(&c, &signed, &cfg.with_regularization(n)).unwrap().0).collect();
    let gaps: Vec<f64> = sols.windows(2).map(|w| w[0].sup_distance(&w[1]).unwrap()).collect();
    let ratios: Vec<f64> = gaps.windows(2).map(|w| w[1] / w[0]).collect();
    let cauchy = gaps.windows(2).all(|w| w[0] < 1e-13 || w[1] <= 0.7 * w[0]);
    Outcome {
        pass: agree <= cfg.newton_tol && cauchy,
        detail: format!("positive data sup difference {agree:.2e}; signed gaps {gaps:.3?}, ratios {ratios:.3?}"),
    }
}

fn equivalence_suite() -> Outcome {
    let cfg = ExperimentConfig::new(Scenario::EquivalenceSuite);
    let rows = equivalence_rows(&cfg).unwrap();
    let agree = rows.iter().filter(|r| r.report.agrees()).count();
    let unresolved = rows.iter().filter(|r| !r.final_report().agrees()).count();
    let negatives: Vec<_> = rows.iter().filter(|r| !r.expected_supersolution).collect();
    let neg_fail = negatives.iter().all(|r| {
        let f = r.final_report();
        !(f.weak || f.very_weak || f.superporous)
    });
    let kinds = ["solution_", "min_", "lifted_"].iter().all(|p| rows.iter().any(|r| r.name.starts_with(p)));
    Outcome {
        pass: rows.len() >= 20 && kinds && agree * 100 >= 95 * rows.len() && unresolved == 0 && negatives.len() == 2 && neg_fail,
        detail: format!(
            "{agree}/{} agree at {} cells, {unresolved} unresolved after refinement, {} negative controls failing all: {neg_fail}",
            rows.len(),
            cfg.corpus.cells,
            negatives.len()
        ),
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    (0..=n).map(|j| f(a + j as f64 * h) * if j == 0 || j == n { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 }).sum::<f64>() * h / 3.0
}

/// `int zeta^2 |(u^2)_x|^2` with one-sided cell differences and the cutoff
/// at cell midpoints.
fn energy_oracle(u: &GridFunction, zeta: impl Fn(f64) -> f64) -> f64 {
    let c = u.cylinder();
    let per_level: Vec<f64> = (0..c.nt())
        .map(|k| {
            (0..c.nx() - 1)
                .map(|i| {
                    let d = (u.get(i + 1, k).powi(2) - u.get(i, k).powi(2)) / c.h();
                    zeta(0.5 * (c.x(i) + c.x(i + 1))).powi(2) * d * d * c.h()
                })
                .sum::<f64>()
        })
        .collect();
    trapezoid(per_level.into_iter(), c.nt(), c.tau())
}

fn caccioppoli() -> Outcome {
    let entries = build_corpus(&CorpusConfig::new(0, 32, m2()), &SolverConfig::default()).unwrap();
    let (x0, r) = (0.5, 0.5);
    let zeta = |x: f64| (1.0 - ((x - x0) / r).powi(2)).max(0.0).powi(2);
    let dzeta = |x: f64| {
        let q = (x - x0) / r;
        if q.abs() >= 1.0 {
            0.0
        } else {
            -4.0 * q * (1.0 - q * q) / r
        }
    };
    let z2 = simpson(|x| zeta(x).powi(2), 0.0, 1.0, 2000);
    let dz2 = simpson(|x| dzeta(x).powi(2), 0.0, 1.0, 2000);
    let (mut checked, mut held, mut library_agrees) = (0, 0, true);
    for e in entries.iter().filter(|e| e.kind.expected_supersolution()) {
        let big_m = e.u.max();
        let lhs = energy_oracle(&e.u, zeta);
        let rhs = 16.0 * big_m.powi(4) * 0.5 * dz2 + 4.0 * big_m.powi(3) * z2;
        let lib = caccioppoli_check(&e.u, m2(), &SpatialCutoff { x0, r, amplitude: 1.0 }, big_m).unwrap();
        library_agrees &= lib.pass == (lhs <= rhs) && (lib.rhs - rhs).abs() <= 1e-9 * rhs;
        checked += 1;
        held += (lhs <= rhs) as usize;
    }
    let radii = [1.0, 0.5, 0.25];
    let cells = [16, 32, 64, 128, 256];
    let mut growth = true;
    let mut summary = Vec::new();
    let table = barenblatt_energy_table(&BarenblattParams::new(m2(), 1, 1.0).unwrap(), &radii, &cells);
    for &rad in &radii {
        let oracle: Vec<f64> = cells
            .iter()
            .map(|&n| {
                let c = build_cylinder(-rad, rad, 0.0, rad, n, n).unwrap();
                let u = GridFunction::from_fn(c, barenblatt_m2);
                energy_oracle(&u, |x| (1.0 - (x / rad).powi(2)).max(0.0).powi(2))
            })
            .collect();
        let lib: Vec<f64> = table.iter().filter(|row| row.radius == rad).map(|row| row.energy).collect();
        growth &= oracle.windows(2).all(|w| w[1] > 1.5 * w[0]) && lib.windows(2).all(|w| w[1] > 1.5 * w[0]);
        summary.push(format!("r={rad}: {:.3} -> {:.3}", oracle[0], oracle[oracle.len() - 1]));
    }
    Outcome {
        pass: held == checked && checked >= 19 && library_agrees && growth,
        detail: format!(
            "{held}/{checked} supersolutions satisfy the estimate, library agrees {library_agrees}; Barenblatt energy {} over h/16",
            summary.join(", ")
        ),
    }
}

/// Scheme residual `w_i - w_i^old - (tau/h^2) D^2 (w^2)` at interior nodes.
fn residual(w: &GridFunction, i: usize, k: usize) -> f64 {
    let c = w.cylinder();
    let r = c.tau() / (c.h() * c.h());
    let p = |j: usize| w.get(j, k).powi(2);
    w.get(i, k) - w.get(i, k - 1) - r * (p(i + 1) - 2.0 * p(i) + p(i - 1))
}

/// All active sets per time step on a tiny lattice; the unique one whose
/// inactive equations solve (by bisection Gauss-Seidel) above the obstacle
/// with nonnegative residual on the active nodes.
fn brute_force_obstacle(c: &Cylinder, psi: &GridFunction, bd: &BoundaryData) -> Option<Vec<Vec<f64>>> {
    let nx = c.nx();
    let r = c.tau() / (c.h() * c.h());
    let mut levels = vec![bd.u0().to_vec()];
    for k in 1..c.nt() {
        let prev = levels[k - 1].clone();
        let mut found = Vec::new();
        for mask in 0u32..(1 << (nx - 2)) {
            let active = |i: usize| mask & (1 << (i - 1)) != 0;
            let mut u = prev.clone();
            u[0] = bd.left_u(k);
            u[nx - 1] = bd.right_u(k);
            for i in 1..nx - 1 {
                if active(i) {
                    u[i] = psi.get(i, k);
                }
            }
            for _ in 0..4000 {
                let mut change: f64 = 0.0;
                for i in (1..nx - 1).filter(|&i| !active(i)) {
                    let rest = prev[i] + r * (u[i - 1].powi(2) + u[i + 1].powi(2));
                    let (mut a, mut b) = (0.0, 10.0);
                    for _ in 0..120 {
                        let mid = 0.5 * (a + b);
                        if mid + 2.0 * r * mid * mid > rest {
                            b = mid;
                        } else {
                            a = mid;
                        }
                    }
                    change = change.max((0.5 * (a + b) - u[i]).abs());
                    u[i] = 0.5 * (a + b);
                }
                if change < 1e-15 {
                    break;
                }
            }
            let ok = (1..nx - 1).all(|i| {
                let res = u[i] - prev[i] - r * (u[i + 1].powi(2) - 2.0 * u[i].powi(2) + u[i - 1].powi(2));
                if active(i) {
                    res >= -1e-12
                } else {
                    u[i] >= psi.get(i, k) - 1e-12
                }
            });
            if ok {
                found.push(u);
            }
        }
        if found.len() != 1 {
            return None;
        }
        levels.push(found.pop().unwrap());
    }
    Some(levels)
}

fn obstacle_problem() -> Outcome {
    let data = |x: f64, t: f64| 0.2 + 0.1 * x + 0.2 * t * x;
    let c = build_cylinder(0.0, 1.0, 0.0, 0.5, 32, 32).unwrap();
    let bd = BoundaryData::from_fn(&c, m2(), data).unwrap();
    let cfg = SolverConfig::default();
    let tol = 10.0 * cfg.newton_tol;
    let heights = [0.3, 0.6, 1.2];
    let mut sols: Vec<GridFunction> = Vec::new();
    let (mut above, mut signed, mut complementary, mut contacts) = (true, true, true, Vec::new());
    for (j, hgt) in heights.iter().enumerate() {
        let psi = GridFunction::from_fn(c, |x, t| 0.1 + 0.02 * j as f64 + hgt * (PI * x).sin() * (t / 0.5).powf(0.7));
        let w = solve_obstacle(&c, &psi, &bd, &cfg).unwrap().0;
        let mut n_contact = 0;
        for k in 1..c.nt() {
            for i in 1..c.nx() - 1 {
                let (gap, res) = (w.get(i, k) - psi.get(i, k), residual(&w, i, k));
                above &= gap >= -tol;
                signed &= res >= -tol;
                if gap > tol {
                    complementary &= res.abs() <= tol;
                } else {
                    n_contact += 1;
                }
            }
        }
        contacts.push(n_contact);
        sols.push(w);
    }
    let ordered = sols.windows(2).all(|p| p[0].values().iter().zip(p[1].values()).all(|(a, b)| *a <= b + tol));

    let tiny = build_cylinder(0.0, 1.0, 0.0, 0.5, 5, 5).unwrap();
    let tiny_bd = BoundaryData::from_fn(&tiny, m2(), data).unwrap();
    let tight = SolverConfig::default().with_tolerance(1e-13);
    let mut oracle_agrees = true;
    let mut worst: f64 = 0.0;
    for hgt in heights {
        let psi = GridFunction::from_fn(tiny, |x, t| 0.15 + hgt * (PI * x).sin() * (t / 0.5).powf(0.7));
        let w = solve_obstacle(&tiny, &psi, &tiny_bd, &tight).unwrap().0;
        match brute_force_obstacle(&tiny, &psi, &tiny_bd) {
            Some(levels) => {
                for k in 1..tiny.nt() {
                    for i in 1..tiny.nx() - 1 {
                        let d = (w.get(i, k) - levels[k][i]).abs();
                        worst = worst.max(d);
                        let contact_w = w.get(i, k) - psi.get(i, k) <= 1e-10;
                        let contact_o = levels[k][i] - psi.get(i, k) <= 1e-10;
                        oracle_agrees &= d <= 1e-10 && contact_w == contact_o;
                    }
                }
            }
            None => oracle_agrees = false,
        }
    }
    Outcome {
        pass: ordered && above && signed && complementary && contacts.iter().all(|&n| n > 0) && oracle_agrees,
        detail: format!(
            "ordered {ordered}, w >= psi {above}, residual >= 0 {signed}, complementarity {complementary}, contacts {contacts:?}; 6x6 oracle max difference {worst:.1e}"
        ),
    }
}

fn boundary_attainment_and_ladder() -> Outcome {
    let c = build_cylinder(0.0, 1.0, 0.0, 0.5, 64, 64).unwrap();
    let data = |x: f64, t: f64| 0.3 + 0.5 * (2.0 * x).sin() + 0.4 * t;
    let bd = BoundaryData::from_fn(&c, m2(), data).unwrap();
    let cfg = SolverConfig::default();
    let u = solve_bvp(&c, &bd, &cfg).unwrap().0;
    let points = [(0, 8), (0, 24), (0, 40), (0, 56), (64, 12), (64, 44), (6, 0), (22, 0), (38, 0), (54, 0)];
    let h = c.h();
    let mut monotone = 0;
    let mut library_agrees = true;
    for &(i0, k0) in &points {
        let target = data(c.x(i0), c.t(k0));
        let dev = |radius: f64| {
            let mut worst: f64 = 0.0;
            for k in 0..c.nt() {
                for i in 0..c.nx() {
                    let d = (c.x(i) - c.x(i0)).hypot(c.t(k) - c.t(k0));
                    if (i, k) != (i0, k0) && d <= radius * (1.0 + 1e-12) {
                        worst = worst.max((u.get(i, k) - target).abs());
                    }
                }
            }
            worst
        };
        let d: Vec<f64> = [4.0 * h, 2.0 * h, h].iter().map(|&r| dev(r)).collect();
        for (j, &r) in [4.0 * h, 2.0 * h, h].iter().enumerate() {
            library_agrees &= (boundary_attainment(&u, &bd, (i0, k0), r).unwrap() - d[j]).abs() <= 1e-14;
        }
        monotone += (d[0] > d[1] && d[1] > d[2]) as usize;
    }
    let eps: Vec<f64> = (1..=10).map(|j| 0.5f64.powi(j)).collect();
    let ladder = perron_ladder(&c, &bd, &eps, &cfg).unwrap();
    let tol = 10.0 * cfg.newton_tol;
    let sandwich = ladder.lower.iter().zip(&ladder.upper).all(|(lo, up)| {
        lo.values().iter().zip(u.values()).zip(up.values()).all(|((a, b), v)| *a <= b + tol && *b <= v + tol)
    });
    let gaps: Vec<f64> = ladder
        .lower
        .iter()
        .zip(&ladder.upper)
        .map(|(lo, up)| up.values().iter().zip(lo.values()).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    let last = gaps[gaps.len() - 1];
    Outcome {
        pass: monotone == points.len() && library_agrees && sandwich && decreasing && last <= 1e-3,
        detail: format!(
            "{monotone}/10 points decrease over radii 4h, 2h, h; ladder sandwich {sandwich}, gap decreasing {decreasing}, gap at eps=2^-10 {last:.4e}"
        ),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("Barenblatt reproduction", barenblatt_reproduction),
        ("mass conservation", mass_conservation),
        ("discrete comparison", discrete_comparison),
        ("perturbation bound", perturbation_bound),
        ("Schwarz alternating method", schwarz_alternating),
        ("regularization consistency", regularization_consistency),
        ("equivalence suite", equivalence_suite),
        ("Caccioppoli estimate", caccioppoli),
        ("obstacle problem", obstacle_problem),
        ("boundary attainment and Perron ladder", boundary_attainment_and_ladder),
    ];
    let mut failures = 0;
    for (j, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|e| Outcome { pass: false, detail: format!("panicked: {:?}", e.downcast_ref::<String>()) });
        failures += (!outcome.pass) as usize;
        println!(
            "{} {:>2}. {name}: {} [{:.1}s]",
            if outcome.pass { "PASS" } else { "FAIL" },
            j + 1,
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
    println!("all 10 criteria passed");
}
