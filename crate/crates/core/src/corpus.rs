//! Deterministic corpus of continuous nonnegative functions used by the
//! classification and Caccioppoli experiments.
//!
//! Parameters are drawn once from a seeded ChaCha stream, so the same seed
//! gives the same family at every resolution and entry `j` of a coarse
//! corpus is the coarse version of entry `j` of a fine one.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{build_cylinder, Cylinder, DomainError};
use crate::grid::GridFunction;
use crate::nonlinearity::Exponent;
use crate::solver::{solve_bvp, BoundaryData, SolveError, SolverConfig};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("entry {name}: {source}")]
    Solve {
        name: String,
        #[source]
        source: SolveError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Solution,
    MinOfSolutions,
    LiftedSolution,
    /// `1 + t`.
    LinearInTime,
    NegativeControl,
}

impl EntryKind {
    pub fn expected_supersolution(self) -> bool {
        self != EntryKind::NegativeControl
    }
}

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub name: String,
    pub kind: EntryKind,
    pub u: GridFunction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub seed: u64,
    /// Cells in space and steps in time on `[0, 1] x [0, 0.5]`.
    pub cells: usize,
    pub m: Exponent,
    pub solutions: usize,
    pub minima: usize,
    pub lifted: usize,
}

impl CorpusConfig {
    pub fn new(seed: u64, cells: usize, m: Exponent) -> Self {
        Self { seed, cells, m, solutions: 8, minima: 6, lifted: 4 }
    }

    pub fn cylinder(&self) -> Result<Cylinder, DomainError> {
        build_cylinder(0.0, 1.0, 0.0, 0.5, self.cells, self.cells)
    }

    pub fn len(&self) -> usize {
        self.solutions + self.minima + self.lifted + 3
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Random boundary data `max(0, a + b sin(w pi x + p) (1 + c t))` on
/// `[0, 1] x [0, 0.5]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomData {
    pub a: f64,
    pub b: f64,
    pub w: f64,
    pub p: f64,
    pub c: f64,
}

impl RandomData {
    pub fn draw(rng: &mut impl Rng) -> Self {
        Self {
            a: rng.gen_range(0.0..0.4),
            b: rng.gen_range(0.1..0.6),
            w: rng.gen_range(0.5..3.0),
            p: rng.gen_range(0.0..2.0 * PI),
            c: rng.gen_range(-0.5..1.0),
        }
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        (self.a + self.b * (self.w * PI * x + self.p).sin() * (1.0 + self.c * t)).max(0.0)
    }
}

enum Recipe {
    Solve(RandomData, f64),
    Min(RandomData, RandomData),
    Closed(fn(f64, f64) -> f64),
}

pub fn build_corpus(cfg: &CorpusConfig, solver: &SolverConfig) -> Result<Vec<CorpusEntry>, CorpusError> {
    let c = cfg.cylinder()?;
    let m = cfg.m;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut recipes: Vec<(String, EntryKind, Recipe)> = Vec::with_capacity(cfg.len());
    for j in 0..cfg.solutions {
        recipes.push((format!("solution_{j:02}"), EntryKind::Solution, Recipe::Solve(RandomData::draw(&mut rng), 0.0)));
    }
    for j in 0..cfg.minima {
        let (p, q) = (RandomData::draw(&mut rng), RandomData::draw(&mut rng));
        recipes.push((format!("min_{j:02}"), EntryKind::MinOfSolutions, Recipe::Min(p, q)));
    }
    for j in 0..cfg.lifted {
        let p = RandomData::draw(&mut rng);
        let eps = [0.05, 0.1, 0.2][rng.gen_range(0..3)];
        recipes.push((format!("lifted_{j:02}"), EntryKind::LiftedSolution, Recipe::Solve(p, eps)));
    }
    recipes.push(("one_plus_t".into(), EntryKind::LinearInTime, Recipe::Closed(|_, t| 1.0 + t)));
    recipes.push((
        "parabola_steady".into(),
        EntryKind::NegativeControl,
        Recipe::Closed(|x, _| x * (1.0 - x)),
    ));
    recipes.push((
        "one_minus_t".into(),
        EntryKind::NegativeControl,
        Recipe::Closed(|_, t| 1.0 - t),
    ));

    let solve = |name: &str, p: &RandomData, eps: f64| -> Result<GridFunction, CorpusError> {
        let wrap = |source| CorpusError::Solve { name: name.to_string(), source };
        let bd = BoundaryData::from_fn(&c, m, |x, t| p.eval(x, t)).map_err(wrap)?;
        let bd = if eps > 0.0 { bd.lifted(eps).map_err(wrap)? } else { bd };
        Ok(solve_bvp(&c, &bd, solver).map_err(wrap)?.0)
    };
    recipes
        .par_iter()
        .map(|(name, kind, recipe)| {
            let u = match recipe {
                Recipe::Solve(p, eps) => solve(name, p, *eps)?,
                Recipe::Min(p, q) => {
                    let (a, b) = (solve(name, p, 0.0)?, solve(name, q, 0.0)?);
                    a.min_with(&b).expect("same lattice")
                }
                Recipe::Closed(f) => GridFunction::from_fn(c, f),
            };
            Ok(CorpusEntry { name: name.clone(), kind: *kind, u })
        })
        .collect()
}
