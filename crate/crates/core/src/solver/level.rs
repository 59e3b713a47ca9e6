//! One implicit Euler step: solve
//!
//! ```text
//! u_i - prev_i - (tau/h^2) (phi(u_{i+1}) - 2 phi(u_i) + phi(u_{i-1})) = 0
//! ```
//!
//! at interior nodes, with the two end values fixed. With an obstacle the
//! system becomes `min(u_i - psi_i, r_i(u)) = 0`.

use crate::nonlinearity::Nonlinearity;

/// Thomas algorithm for a tridiagonal system. `lower[0]` and
/// `upper[n-1]` are ignored. The systems built here are column diagonally
/// dominant, so no pivoting is needed.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

pub(crate) struct LevelProblem<'a> {
    pub prev: &'a [f64],
    pub ratio: f64,
    pub nl: &'a Nonlinearity,
    pub lower: f64,
    pub upper: f64,
    pub obstacle: Option<&'a [f64]>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LevelStats {
    pub iterations: usize,
    pub residual: f64,
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LevelFailure {
    pub residual: f64,
}

pub(crate) struct LevelSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub max_sweeps: usize,
}

impl LevelProblem<'_> {
    fn phis(&self, u: &[f64]) -> Vec<f64> {
        u.iter().map(|&v| self.nl.value(v)).collect()
    }

    /// Scheme residual at node `i` given precomputed `phi(u)`.
    fn scheme(&self, u: &[f64], p: &[f64], i: usize) -> f64 {
        u[i] - self.prev[i] - self.ratio * (p[i + 1] - 2.0 * p[i] + p[i - 1])
    }

    /// Complementarity (or plain) residual, interior nodes only.
    fn residual(&self, u: &[f64], out: &mut [f64]) -> f64 {
        let p = self.phis(u);
        let n = u.len();
        let mut worst: f64 = 0.0;
        out[0] = 0.0;
        out[n - 1] = 0.0;
        for i in 1..n - 1 {
            let mut r = self.scheme(u, &p, i);
            if let Some(psi) = self.obstacle {
                r = r.min(u[i] - psi[i]);
            }
            out[i] = r;
            worst = worst.max(r.abs());
        }
        worst
    }

    fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lower, self.upper)
    }

    pub fn solve(&self, u: &mut [f64], s: &LevelSettings) -> Result<LevelStats, LevelFailure> {
        let n = u.len();
        for v in u[1..n - 1].iter_mut() {
            *v = self.clamp(*v);
        }
        if let Some(psi) = self.obstacle {
            for i in 1..n - 1 {
                u[i] = u[i].max(psi[i]);
            }
        }
        let mut r = vec![0.0; n];
        let mut norm = self.residual(u, &mut r);
        let mut iterations = 0;
        let mut stalled = false;
        while norm > s.tol {
            if iterations >= s.max_iter {
                stalled = true;
                break;
            }
            iterations += 1;
            let delta = self.newton_direction(u, &r);
            let mut alpha = s.damping;
            let mut trial = u.to_vec();
            let mut trial_r = vec![0.0; n];
            let mut trial_norm;
            loop {
                for i in 1..n - 1 {
                    trial[i] = self.clamp(u[i] + alpha * delta[i]);
                }
                trial_norm = self.residual(&trial, &mut trial_r);
                if trial_norm < norm || alpha < 1e-3 {
                    break;
                }
                alpha *= 0.5;
            }
            if trial_norm >= norm {
                stalled = true;
                break;
            }
            u.copy_from_slice(&trial);
            r = trial_r;
            norm = trial_norm;
        }
        if !stalled {
            return Ok(LevelStats { iterations, residual: norm, fallback: false });
        }
        self.gauss_seidel(u, s)
            .map(|(sweeps, residual)| LevelStats { iterations: iterations + sweeps, residual, fallback: true })
    }

    fn newton_direction(&self, u: &[f64], r: &[f64]) -> Vec<f64> {
        let n = u.len();
        let dp: Vec<f64> = u.iter().map(|&v| self.nl.derivative(v)).collect();
        let p = self.obstacle.map(|_| self.phis(u));
        let mut lo = vec![0.0; n];
        let mut di = vec![1.0; n];
        let mut up = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 1..n - 1 {
            let active = match (self.obstacle, &p) {
                (Some(psi), Some(p)) => u[i] - psi[i] <= self.scheme(u, p, i),
                _ => false,
            };
            if active {
                rhs[i] = -(u[i] - self.obstacle.unwrap()[i]);
                continue;
            }
            di[i] = 1.0 + 2.0 * self.ratio * dp[i];
            if i > 1 {
                lo[i] = -self.ratio * dp[i - 1];
            }
            if i < n - 2 {
                up[i] = -self.ratio * dp[i + 1];
            }
            rhs[i] = -r[i];
        }
        solve_tridiagonal(&lo, &di, &up, &rhs)
    }

    /// Nonlinear Gauss–Seidel with a bracketed scalar solve per node. Each
    /// scalar map `v + 2 ratio phi(v) - ...` is strictly increasing, and the
    /// root lies in `[lower, upper]` whenever the neighbours do.
    fn gauss_seidel(&self, u: &mut [f64], s: &LevelSettings) -> Result<(usize, f64), LevelFailure> {
        let n = u.len();
        let mut r = vec![0.0; n];
        let mut norm = self.residual(u, &mut r);
        let mut sweeps = 0;
        while norm > s.tol {
            if sweeps >= s.max_sweeps {
                return Err(LevelFailure { residual: norm });
            }
            sweeps += 1;
            for i in 1..n - 1 {
                let rest = self.prev[i] + self.ratio * (self.nl.value(u[i - 1]) + self.nl.value(u[i + 1]));
                let mut v = self.scalar_root(rest, u[i]);
                if let Some(psi) = self.obstacle {
                    v = v.max(psi[i]);
                }
                u[i] = v;
            }
            norm = self.residual(u, &mut r);
        }
        Ok((sweeps, norm))
    }

    fn scalar_root(&self, rest: f64, guess: f64) -> f64 {
        let f = |v: f64| v + 2.0 * self.ratio * self.nl.value(v) - rest;
        let (mut a, mut b) = (self.lower, self.upper);
        if f(a) >= 0.0 {
            return a;
        }
        if f(b) <= 0.0 {
            return b;
        }
        let mut x = guess.clamp(a, b);
        for _ in 0..200 {
            let fx = f(x);
            if fx == 0.0 {
                return x;
            }
            if fx < 0.0 {
                a = x;
            } else {
                b = x;
            }
            let dfx = 1.0 + 2.0 * self.ratio * self.nl.derivative(x);
            let newton = x - fx / dfx;
            x = if newton > a && newton < b { newton } else { 0.5 * (a + b) };
            if b - a <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
                break;
            }
        }
        x
    }
}
