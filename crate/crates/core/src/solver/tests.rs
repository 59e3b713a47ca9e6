use proptest::prelude::*;

use super::*;
use crate::domain::build_cylinder;
use crate::exact::BarenblattParams;

fn m2() -> Exponent {
    Exponent::new(2.0).unwrap()
}

/// Independent oracle: implicit Euler step solved by plain nonlinear
/// Jacobi-free Gauss–Seidel with bisection, iterated to a tiny residual.
fn oracle_solve(c: &Cylinder, u0: &[f64], left: &[f64], right: &[f64], f: impl Fn(f64) -> f64) -> Vec<Vec<f64>> {
    let nx = c.nx();
    let ratio = c.tau() / (c.h() * c.h());
    let mut levels = vec![u0.to_vec()];
    let lo = u0.iter().chain(left).chain(right).copied().fold(f64::INFINITY, f64::min);
    let hi = u0.iter().chain(left).chain(right).copied().fold(f64::NEG_INFINITY, f64::max);
    for k in 1..c.nt() {
        let prev = levels[k - 1].clone();
        let mut u = prev.clone();
        u[0] = left[k];
        u[nx - 1] = right[k];
        for _ in 0..20_000 {
            let mut change: f64 = 0.0;
            for i in 1..nx - 1 {
                let rest = prev[i] + ratio * (f(u[i - 1]) + f(u[i + 1]));
                let (mut a, mut b) = (lo, hi);
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    if mid + 2.0 * ratio * f(mid) - rest > 0.0 {
                        b = mid;
                    } else {
                        a = mid;
                    }
                }
                let v = 0.5 * (a + b);
                change = change.max((v - u[i]).abs());
                u[i] = v;
            }
            if change < 1e-15 {
                break;
            }
        }
        levels.push(u);
    }
    levels
}

#[test]
fn constants_are_reproduced() {
    let c = build_cylinder(0.0, 1.0, 0.0, 1.0, 10, 7).unwrap();
    for val in [0.0, 0.3, 2.0] {
        let bd = BoundaryData::from_fn(&c, m2(), |_, _| val).unwrap();
        let (u, rep) = solve_bvp(&c, &bd, &SolverConfig::default()).unwrap();
        assert!(u.values().iter().all(|&v| (v - val).abs() < 1e-14));
        assert!(rep.fallback_steps.is_empty());
    }
}

#[test]
fn matches_independent_oracle_on_6x6() {
    let c = build_cylinder(0.0, 1.0, 0.0, 0.5, 5, 5).unwrap();
    let m = m2();
    let data = |x: f64, t: f64| 0.2 + x * (1.0 - x) * 2.0 + 0.5 * t * x;
    let bd = BoundaryData::from_fn(&c, m, data).unwrap();
    let (u, _) = solve_bvp(&c, &bd, &SolverConfig::default().with_tolerance(1e-13)).unwrap();
    let left: Vec<f64> = (0..c.nt()).map(|k| data(0.0, c.t(k))).collect();
    let right: Vec<f64> = (0..c.nt()).map(|k| data(1.0, c.t(k))).collect();
    let u0: Vec<f64> = (0..c.nx()).map(|i| data(c.x(i), 0.0)).collect();
    let oracle = oracle_solve(&c, &u0, &left, &right, |s| phi(s, m));
    for k in 0..c.nt() {
        for i in 0..c.nx() {
            assert!((u.get(i, k) - oracle[k][i]).abs() < 1e-11, "({i},{k})");
        }
    }
}

#[test]
fn barenblatt_error_decreases_under_refinement() {
    let m = m2();
    let p = BarenblattParams::new(m, 1, 1.0).unwrap();
    let mut table = Vec::new();
    for (nc, ns) in [(60, 50), (120, 100), (240, 200)] {
        let c = build_cylinder(-6.0, 6.0, 1.0, 2.0, nc, ns).unwrap();
        let bd = BoundaryData::from_fn(&c, m, |x, t| p.value_1d(x, t)).unwrap();
        let (u, rep) = solve_bvp(&c, &bd, &SolverConfig::default()).unwrap();
        let last = c.nt() - 1;
        let err: f64 = (0..c.nx())
            .map(|i| (u.get(i, last) - p.value_1d(c.x(i), 2.0)).abs())
            .sum::<f64>()
            * c.h();
        assert!(rep.relative_mass_drift() < 1e-9);
        table.push((c.h(), err));
    }
    for w in table.windows(2) {
        assert!(w[1].1 < w[0].1, "{table:?}");
    }
    let rate = (table[0].1 / table[2].1).log2() / 2.0;
    assert!(rate >= 0.8, "rate {rate}, {table:?}");
}

#[test]
fn rejects_incompatible_and_negative_data() {
    let c = build_cylinder(0.0, 1.0, 0.0, 1.0, 4, 2).unwrap();
    let m = m2();
    let err = BoundaryData::new(m, vec![1.0; 5], vec![4.0; 3], vec![1.0; 3], 1e-9);
    assert!(matches!(err, Err(SolveError::Incompatible { corner: "left", .. })));
    let bd = BoundaryData::from_fn(&c, m, |x, _| x - 0.5).unwrap();
    assert!(matches!(
        solve_bvp(&c, &bd, &SolverConfig::default()),
        Err(SolveError::NegativeData(_))
    ));
    assert!(matches!(
        solve_signed(&c, &bd, &SolverConfig::default()),
        Err(SolveError::RegularizationRequired)
    ));
    let wrong = build_cylinder(0.0, 1.0, 0.0, 1.0, 6, 2).unwrap();
    let bd = BoundaryData::from_fn(&wrong, m, |_, _| 1.0).unwrap();
    assert!(matches!(solve_bvp(&c, &bd, &SolverConfig::default()), Err(SolveError::Shape(_))));
}

#[test]
fn newton_failure_carries_last_iterate() {
    let c = build_cylinder(-1.0, 1.0, 0.0, 0.1, 40, 4).unwrap();
    let bd = BoundaryData::from_fn(&c, m2(), |x, _| (1.0 - 4.0 * x * x).max(0.0)).unwrap();
    let cfg = SolverConfig {
        max_newton_iter: 1,
        max_fallback_sweeps: 1,
        newton_tol: 1e-14,
        ..SolverConfig::default()
    };
    match solve_bvp(&c, &bd, &cfg) {
        Err(SolveError::NewtonDiverged { step, last_iterate, .. }) => {
            assert_eq!(step, 1);
            assert_eq!(last_iterate.level(0), bd.u0());
        }
        other => panic!("expected failure, got {other:?}"),
    }
}

#[test]
fn signed_constant_and_oddness() {
    let m = m2();
    let c = build_cylinder(-1.0, 1.0, 0.0, 0.2, 20, 10).unwrap();
    let cfg = SolverConfig::default().with_regularization(8);
    let bd = BoundaryData::from_fn(&c, m, |_, _| -1.0).unwrap();
    let (u, _) = solve_signed(&c, &bd, &cfg).unwrap();
    assert!(u.values().iter().all(|&v| (v + 1.0).abs() < 1e-13));

    let odd = |x: f64, t: f64| (std::f64::consts::PI * x).sin() * (1.0 + t) * 0.5;
    let bd = BoundaryData::from_fn(&c, m, odd).unwrap();
    let (u, _) = solve_signed(&c, &bd, &cfg.with_tolerance(1e-13)).unwrap();
    let n = c.nx() - 1;
    for k in 0..c.nt() {
        for i in 0..=n {
            assert!((u.get(i, k) + u.get(n - i, k)).abs() < 1e-11);
        }
    }
    let (lo, hi) = (bd.min_u(), bd.max_u());
    assert!(u.min() >= lo - 1e-12 && u.max() <= hi + 1e-12);
}

#[test]
fn signed_regularization_sweep_is_cauchy() {
    let m = m2();
    let c = build_cylinder(-1.0, 1.0, 0.0, 0.25, 40, 25).unwrap();
    let data = |x: f64, _t: f64| 0.6 * (std::f64::consts::PI * x).sin() + 0.2 * x;
    let bd = BoundaryData::from_fn(&c, m, data).unwrap();
    let sols: Vec<_> = [4u64, 16, 64, 256]
        .iter()
        .map(|&n| solve_signed(&c, &bd, &SolverConfig::default().with_regularization(n)).unwrap().0)
        .collect();
    let gaps: Vec<f64> = sols.windows(2).map(|w| w[0].sup_distance(&w[1]).unwrap()).collect();
    for w in gaps.windows(2) {
        assert!(w[1] < w[0], "{gaps:?}");
    }
}

#[test]
fn regularization_inactive_on_positive_data() {
    let m = m2();
    let c = build_cylinder(0.0, 1.0, 0.0, 0.5, 32, 16).unwrap();
    let bd = BoundaryData::from_fn(&c, m, |x, t| 0.5 + 0.3 * (6.0 * x).sin() * (1.0 - t)).unwrap();
    let (a, _) = solve_bvp(&c, &bd, &SolverConfig::default()).unwrap();
    let (b, _) = solve_bvp(&c, &bd, &SolverConfig::default().with_regularization(1_000_000)).unwrap();
    assert!(a.sup_distance(&b).unwrap() <= 1e-10);
}

#[test]
fn mass_examples() {
    let c = build_cylinder(0.0, 1.0, 0.0, 1.0, 8, 2).unwrap();
    assert!((mass(&GridFunction::constant(c, 1.0), 1) - 1.0).abs() < 1e-15);
    let hat = GridFunction::from_fn(c, |x, _| 1.0 - (2.0 * x - 1.0).abs());
    assert!((mass(&hat, 0) - 0.5).abs() < 1e-15);
}

#[test]
fn oleinik_gap_examples() {
    let m = m2();
    let c = build_cylinder(0.0, 1.0, 0.0, 1.0, 6, 3).unwrap();
    let one = GridFunction::constant(c, 1.0);
    let zero = GridFunction::constant(c, 0.0);
    assert_eq!(oleinik_gap(&one, &one, m).unwrap(), 0.0);
    assert!((oleinik_gap(&one, &zero, m).unwrap() - 1.0).abs() < 1e-14);
    let other = GridFunction::constant(build_cylinder(0.0, 1.0, 0.0, 1.0, 5, 3).unwrap(), 0.0);
    assert!(oleinik_gap(&one, &other, m).is_err());
}

fn smooth_data(c: &Cylinder, coeffs: [f64; 4]) -> impl Fn(f64, f64) -> f64 {
    let (a, b) = (c.mesh.a(), c.mesh.b());
    move |x, t| {
        let s = (x - a) / (b - a);
        (coeffs[0] + coeffs[1] * (3.0 * s).sin().powi(2) + coeffs[2] * s + coeffs[3] * t).max(0.0)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn comparison_and_maximum_principle(
        base in proptest::array::uniform4(0.0f64..1.0),
        lift in proptest::array::uniform4(0.0f64..0.5),
    ) {
        let m = m2();
        let c = build_cylinder(0.0, 1.0, 0.0, 0.5, 20, 20).unwrap();
        let low = BoundaryData::from_fn(&c, m, smooth_data(&c, base)).unwrap();
        let hi_coeffs = [base[0] + lift[0], base[1] + lift[1], base[2] + lift[2], base[3] + lift[3]];
        let high = BoundaryData::from_fn(&c, m, smooth_data(&c, hi_coeffs)).unwrap();
        let cfg = SolverConfig::default();
        let (u, _) = solve_bvp(&c, &low, &cfg).unwrap();
        let (v, _) = solve_bvp(&c, &high, &cfg).unwrap();
        for (a, b) in u.values().iter().zip(v.values()) {
            prop_assert!(*a <= b + 10.0 * cfg.newton_tol);
        }
        prop_assert!(u.min() >= low.min_u() - 1e-12);
        prop_assert!(u.max() <= low.max_u() + 1e-12);
    }
}

/// Brute-force obstacle oracle on a tiny lattice: for every time step,
/// enumerate all active sets, solve the remaining equations with the
/// bisection oracle, and keep the one satisfying complementarity.
fn enumerate_obstacle(c: &Cylinder, psi: &GridFunction, bd: &BoundaryData, m: Exponent) -> (Vec<Vec<f64>>, Vec<Vec<bool>>) {
    let nx = c.nx();
    let ratio = c.tau() / (c.h() * c.h());
    let f = |s: f64| phi(s, m);
    let mut levels = vec![bd.u0().to_vec()];
    let mut actives = vec![vec![false; nx]];
    let hi = bd.max_u().max(psi.max()) + 1.0;
    for k in 1..c.nt() {
        let prev = levels[k - 1].clone();
        let interior: Vec<usize> = (1..nx - 1).collect();
        let mut found: Option<(Vec<f64>, Vec<bool>)> = None;
        for mask in 0u32..(1 << interior.len()) {
            let active: Vec<bool> = (0..nx)
                .map(|i| i > 0 && i < nx - 1 && mask & (1 << (i - 1)) != 0)
                .collect();
            let mut u = prev.clone();
            u[0] = bd.left_u(k);
            u[nx - 1] = bd.right_u(k);
            for &i in &interior {
                if active[i] {
                    u[i] = psi.get(i, k);
                }
            }
            for _ in 0..5000 {
                let mut change: f64 = 0.0;
                for &i in interior.iter().filter(|&&i| !active[i]) {
                    let rest = prev[i] + ratio * (f(u[i - 1]) + f(u[i + 1]));
                    let (mut a, mut b) = (-hi, hi);
                    for _ in 0..200 {
                        let mid = 0.5 * (a + b);
                        if mid + 2.0 * ratio * f(mid) - rest > 0.0 {
                            b = mid;
                        } else {
                            a = mid;
                        }
                    }
                    change = change.max((0.5 * (a + b) - u[i]).abs());
                    u[i] = 0.5 * (a + b);
                }
                if change < 1e-16 {
                    break;
                }
            }
            let feasible = interior.iter().all(|&i| {
                let r = u[i] - prev[i] - ratio * (f(u[i + 1]) - 2.0 * f(u[i]) + f(u[i - 1]));
                if active[i] {
                    r >= -1e-13
                } else {
                    u[i] >= psi.get(i, k) - 1e-13
                }
            });
            if feasible {
                assert!(found.is_none(), "two feasible active sets at level {k}");
                found = Some((u, active));
            }
        }
        let (u, active) = found.expect("no feasible active set");
        levels.push(u);
        actives.push(active);
    }
    (levels, actives)
}

fn obstacle_setup() -> (Cylinder, BoundaryData) {
    let c = build_cylinder(0.0, 1.0, 0.0, 0.5, 5, 5).unwrap();
    let bd = BoundaryData::from_fn(&c, m2(), |x, t| 0.2 + 0.1 * x + 0.2 * t * x).unwrap();
    (c, bd)
}

fn bump_obstacle(c: &Cylinder, height: f64) -> GridFunction {
    GridFunction::from_fn(*c, |x, t| {
        0.15 + height * (std::f64::consts::PI * x).sin() * (t / 0.5).powf(0.7)
    })
}

#[test]
fn obstacle_matches_active_set_enumeration() {
    let m = m2();
    let (c, bd) = obstacle_setup();
    let cfg = SolverConfig::default().with_tolerance(1e-13);
    for height in [0.3, 0.6, 1.2] {
        let psi = bump_obstacle(&c, height);
        let (w, _) = solve_obstacle(&c, &psi, &bd, &cfg).unwrap();
        let (oracle, actives) = enumerate_obstacle(&c, &psi, &bd, m);
        let mut contacts = 0;
        for k in 1..c.nt() {
            for i in 1..c.nx() - 1 {
                assert!((w.get(i, k) - oracle[k][i]).abs() < 1e-10, "h {height} ({i},{k})");
                let contact = w.get(i, k) - psi.get(i, k) <= 1e-10;
                assert_eq!(contact, actives[k][i], "h {height} ({i},{k})");
                contacts += contact as usize;
            }
        }
        assert!(contacts > 0);
    }
}

#[test]
fn obstacle_complementarity_and_ordering() {
    let m = m2();
    let c = build_cylinder(0.0, 1.0, 0.0, 0.5, 40, 40).unwrap();
    let bd = BoundaryData::from_fn(&c, m, |x, _| 0.2 + 0.1 * x).unwrap();
    let cfg = SolverConfig::default();
    let mut prev: Option<GridFunction> = None;
    for height in [0.2, 0.4, 0.8] {
        let psi = bump_obstacle(&c, height);
        let (w, _) = solve_obstacle(&c, &psi, &bd, &cfg).unwrap();
        for (i, k, gap, r) in obstacle_residuals(&w, &psi, m) {
            assert!(gap >= -1e-12, "({i},{k})");
            assert!(r >= -cfg.newton_tol, "({i},{k}) r {r}");
            if gap > cfg.newton_tol {
                assert!(r.abs() <= cfg.newton_tol, "({i},{k}) r {r}");
            }
        }
        if let Some(p) = prev {
            assert!(p.values().iter().zip(w.values()).all(|(a, b)| *a <= b + 1e-12));
        }
        prev = Some(w);
    }
}

#[test]
fn constant_obstacle_touches() {
    let m = m2();
    let c = build_cylinder(0.0, 1.0, 0.0, 0.5, 20, 20).unwrap();
    let bd = BoundaryData::from_fn(&c, m, |_, _| 0.2).unwrap();
    let psi = GridFunction::from_fn(c, |x, t| if x > 0.0 && x < 1.0 && t > 0.0 { 0.5 } else { 0.2 });
    let (w, _) = solve_obstacle(&c, &psi, &bd, &SolverConfig::default()).unwrap();
    let res = obstacle_residuals(&w, &psi, m);
    assert!(res.iter().any(|&(_, _, gap, _)| gap.abs() < 1e-12));
    assert!(res.iter().all(|&(_, _, gap, r)| gap >= -1e-12 && r >= -1e-10));
}

#[test]
fn inactive_obstacle_is_plain_solve() {
    let (c, bd) = obstacle_setup();
    let cfg = SolverConfig::default();
    let psi = GridFunction::constant(c, -10.0);
    let (w, _) = solve_obstacle(&c, &psi, &bd, &cfg).unwrap();
    let (u, _) = solve_bvp(&c, &bd, &cfg).unwrap();
    assert!(w.sup_distance(&u).unwrap() < 1e-12);
}

#[test]
fn infeasible_obstacle_rejected() {
    let (c, bd) = obstacle_setup();
    let psi = GridFunction::constant(c, 1.0);
    assert!(matches!(
        solve_obstacle(&c, &psi, &bd, &SolverConfig::default()),
        Err(SolveError::InfeasibleObstacle { .. })
    ));
}
