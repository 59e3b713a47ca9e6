//! Configuration-driven experiments behind the `pme-lab` binary.
//!
//! A run reads a TOML [`ExperimentConfig`], executes one [`Scenario`],
//! writes CSV and JSON artifacts plus `verdict.json`, and finishes with a
//! `manifest.json` listing every file with its SHA-256 digest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::classify::{
    barenblatt_energy_table, caccioppoli_check, classify, ClassificationReport, SpatialCutoff, Tolerances,
};
use crate::corpus::{build_corpus, CorpusConfig, CorpusEntry, RandomData};
use crate::domain::{build_cylinder, Cylinder, CylinderUnion, LatticeBox};
use crate::exact::BarenblattParams;
use crate::grid::GridFunction;
use crate::nonlinearity::Exponent;
use crate::perron::{attainment_profile, perron_ladder, perturbation_gap};
use crate::schwarz::schwarz_solve;
use crate::solver::{obstacle_residuals, solve_bvp, solve_obstacle, BoundaryData, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    BarenblattValidation,
    ComparisonSweep,
    PerturbationGap,
    SchwarzUnion,
    ObstacleDemo,
    EquivalenceSuite,
    CaccioppoliSuite,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::BarenblattValidation,
        Scenario::ComparisonSweep,
        Scenario::PerturbationGap,
        Scenario::SchwarzUnion,
        Scenario::ObstacleDemo,
        Scenario::EquivalenceSuite,
        Scenario::CaccioppoliSuite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::BarenblattValidation => "barenblatt_validation",
            Scenario::ComparisonSweep => "comparison_sweep",
            Scenario::PerturbationGap => "perturbation_gap",
            Scenario::SchwarzUnion => "schwarz_union",
            Scenario::ObstacleDemo => "obstacle_demo",
            Scenario::EquivalenceSuite => "equivalence_suite",
            Scenario::CaccioppoliSuite => "caccioppoli_suite",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Scenario::BarenblattValidation => "Barenblatt solution from t=1 to t=2: L1 error under refinement and mass drift",
            Scenario::ComparisonSweep => "random ordered data pairs: nodewise ordering of the solutions",
            Scenario::PerturbationGap => "gap between lifted and unlifted solutions, Perron ladder and boundary attainment",
            Scenario::SchwarzUnion => "Schwarz alternating method on three overlapping cylinders against the direct solve",
            Scenario::ObstacleDemo => "ladder of three obstacles: ordering, constraint and complementarity",
            Scenario::EquivalenceSuite => "weak, very weak and superporous verdicts on the seeded corpus",
            Scenario::CaccioppoliSuite => "energy estimate on corpus supersolutions and Barenblatt energy blow-up",
        }
    }
}

/// `scenario  description` lines, one per scenario.
pub fn list_scenarios() -> String {
    let mut out = String::new();
    for s in Scenario::ALL {
        writeln!(out, "{:<24}{}", s.name(), s.description()).expect("write to string");
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub cells: usize,
    pub steps: usize,
}

impl GridConfig {
    fn cylinder(&self, level: u32) -> Result<Cylinder, RunError> {
        let f = 1usize << level;
        build_cylinder(self.x_min, self.x_max, self.t_start, self.t_end, self.cells * f, self.steps * f)
            .map_err(|e| RunError::Config(ConfigError::Invalid { key: "grid".into(), reason: e.to_string() }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    #[serde(default = "default_corpus_cells")]
    pub cells: usize,
}

fn default_corpus_cells() -> usize {
    32
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self { cells: default_corpus_cells() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSection {
    pub residual: Option<f64>,
    pub superporous: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    #[serde(default = "default_m")]
    pub m: f64,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    /// Scenario default when absent.
    pub grid: Option<GridConfig>,
    /// Number of resolutions in refinement studies, each halving `h` and `tau`.
    #[serde(default = "default_refinements")]
    pub refinements: u32,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub tolerances: ToleranceSection,
    #[serde(default)]
    pub corpus: CorpusSection,
    pub eps: Option<Vec<f64>>,
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default = "default_sweep_tol")]
    pub sweep_tol: f64,
    #[serde(default = "default_max_sweeps")]
    pub max_sweeps: usize,
}

fn default_m() -> f64 {
    2.0
}
fn default_refinements() -> u32 {
    2
}
fn default_pairs() -> usize {
    50
}
fn default_sweep_tol() -> f64 {
    1e-6
}
fn default_max_sweeps() -> usize {
    50
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

impl ExperimentConfig {
    /// Config with every optional key at its default.
    pub fn new(scenario: Scenario) -> Self {
        toml::from_str(&format!("scenario = \"{}\"", scenario.name())).expect("minimal config parses")
    }

    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, reason: &str| Err(ConfigError::Invalid { key: key.into(), reason: reason.into() });
        if !(self.m.is_finite() && self.m > 1.0) {
            return bad("m", "must be a finite number greater than 1");
        }
        if let Some(g) = &self.grid {
            if !(g.x_max > g.x_min) {
                return bad("grid.x_max", "must exceed grid.x_min");
            }
            if !(g.t_end > g.t_start) {
                return bad("grid.t_end", "must exceed grid.t_start");
            }
            if g.cells < 2 {
                return bad("grid.cells", "must be at least 2");
            }
            if g.steps < 1 {
                return bad("grid.steps", "must be at least 1");
            }
        }
        if self.refinements < 1 || self.refinements > 6 {
            return bad("refinements", "must be between 1 and 6");
        }
        if self.scenario == Scenario::BarenblattValidation && self.refinements < 2 {
            return bad("refinements", "barenblatt_validation needs at least 2 resolutions");
        }
        if let Some(eps) = &self.eps {
            let ok = !eps.is_empty()
                && eps.iter().all(|e| e.is_finite() && *e > 0.0)
                && eps.windows(2).all(|w| w[1] < w[0]);
            if !ok {
                return bad("eps", "must be a nonempty strictly decreasing list of positive numbers");
            }
        }
        if self.pairs == 0 {
            return bad("pairs", "must be positive");
        }
        if !(self.sweep_tol > 0.0) {
            return bad("sweep_tol", "must be positive");
        }
        if self.max_sweeps == 0 {
            return bad("max_sweeps", "must be positive");
        }
        if self.corpus.cells < 8 || self.corpus.cells % 8 != 0 {
            return bad("corpus.cells", "must be a positive multiple of 8");
        }
        if !(self.solver.newton_tol > 0.0) {
            return bad("solver.newton_tol", "must be positive");
        }
        for (key, v) in [("tolerances.residual", self.tolerances.residual), ("tolerances.superporous", self.tolerances.superporous)] {
            if v.is_some_and(|v| !(v >= 0.0)) {
                return bad(key, "must be nonnegative");
            }
        }
        Ok(())
    }

    fn exponent(&self) -> Exponent {
        Exponent::new(self.m).expect("validated")
    }

    fn grid_or(&self, default: GridConfig) -> GridConfig {
        self.grid.unwrap_or(default)
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 2,
            RunError::Solver(_) => 3,
            RunError::Io { .. } => 4,
        }
    }
}

fn solver_err(e: impl std::fmt::Display) -> RunError {
    RunError::Solver(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Self { name: name.into(), pass, detail }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub scenario: Scenario,
    pub pass: bool,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub scenario: Scenario,
    pub seed: u64,
    pub files: Vec<ManifestEntry>,
}

/// Single writer for all artifacts of a run; records each file for the
/// manifest.
pub struct ArtifactWriter {
    root: PathBuf,
    files: Vec<ManifestEntry>,
}

impl ArtifactWriter {
    pub fn new(root: &Path) -> Result<Self, RunError> {
        fs::create_dir_all(root).map_err(|source| RunError::Io { path: root.into(), source })?;
        Ok(Self { root: root.into(), files: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), RunError> {
        let path = self.root.join(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|source| RunError::Io { path: dir.into(), source })?;
        }
        fs::write(&path, bytes).map_err(|source| RunError::Io { path: path.clone(), source })?;
        self.files.push(ManifestEntry { path: name.into(), bytes: bytes.len(), sha256: hex::encode(Sha256::digest(bytes)) });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn write_grid(&mut self, name: &str, u: &GridFunction) -> Result<(), RunError> {
        let mut buf = Vec::new();
        u.write_csv(&mut buf).expect("write to memory");
        self.write(name, &buf)
    }

    /// Write `manifest.json` (sorted by path) and return it.
    pub fn finish(mut self, scenario: Scenario, seed: u64) -> Result<Manifest, RunError> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest { scenario, seed, files: self.files.clone() };
        let mut text = serde_json::to_string_pretty(&manifest).expect("plain data serializes");
        text.push('\n');
        let path = self.root.join("manifest.json");
        fs::write(&path, text).map_err(|source| RunError::Io { path, source })?;
        Ok(manifest)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub verdict: Verdict,
    pub manifest: Manifest,
    pub output_dir: PathBuf,
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    out: ArtifactWriter,
    verbose: bool,
}

impl Ctx<'_> {
    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("[{}] {}", self.cfg.scenario.name(), msg.as_ref());
        }
    }
}

/// Execute the configured scenario into `output_dir` (falling back to the
/// config's `output_dir`, then `pme-lab-out/<scenario>`).
pub fn run(cfg: &ExperimentConfig, output_dir: Option<&Path>, verbose: bool) -> Result<RunOutcome, RunError> {
    cfg.validate()?;
    let dir = output_dir
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("pme-lab-out").join(cfg.scenario.name()));
    let mut ctx = Ctx { cfg, out: ArtifactWriter::new(&dir)?, verbose };
    ctx.out.write("config.toml", toml::to_string(cfg).expect("config serializes").as_bytes())?;
    let checks = match cfg.scenario {
        Scenario::BarenblattValidation => barenblatt_validation(&mut ctx)?,
        Scenario::ComparisonSweep => comparison_sweep(&mut ctx)?,
        Scenario::PerturbationGap => perturbation_scenario(&mut ctx)?,
        Scenario::SchwarzUnion => schwarz_union(&mut ctx)?,
        Scenario::ObstacleDemo => obstacle_demo(&mut ctx)?,
        Scenario::EquivalenceSuite => equivalence_suite(&mut ctx)?,
        Scenario::CaccioppoliSuite => caccioppoli_suite(&mut ctx)?,
    };
    for c in &checks {
        ctx.log(format!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail));
    }
    let verdict = Verdict { scenario: cfg.scenario, pass: checks.iter().all(|c| c.pass), checks };
    ctx.out.write_json("verdict.json", &verdict)?;
    let manifest = ctx.out.finish(cfg.scenario, cfg.seed)?;
    Ok(RunOutcome { verdict, manifest, output_dir: dir })
}

fn csv(header: &str, rows: impl IntoIterator<Item = String>) -> Vec<u8> {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s.into_bytes()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarenblattLevel {
    pub cells: usize,
    pub steps: usize,
    pub h: f64,
    pub tau: f64,
    pub rel_l1: f64,
    pub mass_drift: f64,
}

/// Relative discrete L1 error of the last time level against `exact`.
pub fn final_level_rel_l1(u: &GridFunction, exact: impl Fn(f64) -> f64) -> f64 {
    let c = u.cylinder();
    let k = c.nt() - 1;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..c.nx() {
        let e = exact(c.x(i));
        num += (u.get(i, k) - e).abs();
        den += e.abs();
    }
    num / den
}

fn barenblatt_validation(ctx: &mut Ctx) -> Result<Vec<Check>, RunError> {
    let cfg = ctx.cfg;
    let m = cfg.exponent();
    let grid = cfg.grid_or(GridConfig { x_min: -6.0, x_max: 6.0, t_start: 1.0, t_end: 2.0, cells: 600, steps: 2000 });
    let p = BarenblattParams::new(m, 1, 1.0).map_err(solver_err)?;
    let mut levels = Vec::new();
    for level in 0..cfg.refinements {
        let c = grid.cylinder(level)?;
        let bd = BoundaryData::from_fn(&c, m, |x, t| p.value_1d(x, t)).map_err(solver_err)?;
        let (u, report) = solve_bvp(&c, &bd, &cfg.solver).map_err(solver_err)?;
        let row = BarenblattLevel {
            cells: c.nx() - 1,
            steps: c.nt() - 1,
            h: c.h(),
            tau: c.tau(),
            rel_l1: final_level_rel_l1(&u, |x| p.value_1d(x, grid.t_end)),
            mass_drift: report.relative_mass_drift(),
        };
        ctx.log(format!("{} cells: rel L1 {:.3e}, mass drift {:.3e}", row.cells, row.rel_l1, row.mass_drift));
        if level == 0 {
            let k = c.nt() - 1;
            let rows = (0..c.nx()).map(|i| format!("{},{},{},{}", c.x(i), c.t(k), u.get(i, k), p.value_1d(c.x(i), c.t(k))));
            ctx.out.write("final_profile.csv", &csv("x,t,u,exact", rows))?;
        }
        levels.push(row);
    }
    let rows = levels
        .iter()
        .map(|l| format!("{},{},{},{},{},{}", l.cells, l.steps, l.h, l.tau, l.rel_l1, l.mass_drift));
    ctx.out.write("error_table.csv", &csv("cells,steps,h,tau,rel_l1,mass_drift", rows))?;
    let support = p.support_radius(grid.t_end);
    ctx.out.write_json(
        "barenblatt.json",
        &serde_json::json!({
            "m": cfg.m,
            "lambda": p.lambda(),
            "support_radius_at_end": support,
            "levels": levels,
        }),
    )?;
    let lambda_expected = 1.0 / (cfg.m + 1.0);
    let drift = levels.iter().map(|l| l.mass_drift).fold(0.0, f64::max);
    Ok(vec![
        Check::new("rel_l1_within_3_percent", levels[0].rel_l1 <= 0.03, format!("{:.4e}", levels[0].rel_l1)),
        Check::new(
            "rel_l1_decreases_under_refinement",
            levels.windows(2).all(|w| w[1].rel_l1 < w[0].rel_l1),
            levels.iter().map(|l| format!("{:.4e}", l.rel_l1)).collect::<Vec<_>>().join(" > "),
        ),
        Check::new(
            "support_inside_interval",
            support < grid.x_max.min(-grid.x_min),
            format!("support radius {support:.4} at t = {}", grid.t_end),
        ),
        Check::new("mass_drift_below_1e-6", drift <= 1e-6, format!("{drift:.3e}")),
        Check::new("lambda_is_1_over_m_plus_1", p.lambda() == lambda_expected, format!("{}", p.lambda())),
    ])
}

/// Nonnegative increment added to the lower data of a comparison pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Increment {
    pub delta: f64,
    pub w: f64,
    pub p: f64,
}

impl Increment {
    pub fn draw(rng: &mut impl Rng) -> Self {
        Self { delta: rng.gen_range(0.0..0.3), w: rng.gen_range(0.5..4.0), p: rng.gen_range(0.0..std::f64::consts::TAU) }
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        self.delta * 0.5 * (1.0 + (self.w * std::f64::consts::PI * x + self.p + t).sin())
    }
}

/// `(lower, increment)` pairs drawn from the seeded stream.
pub fn comparison_pairs(seed: u64, count: usize) -> Vec<(RandomData, Increment)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (RandomData::draw(&mut rng), Increment::draw(&mut rng))).collect()
}

fn comparison_sweep(ctx: &mut Ctx) -> Result<Vec<Check>, RunError> {
    let cfg = ctx.cfg;
    let m = cfg.exponent();
    let c = cfg.grid_or(GridConfig { x_min: 0.0, x_max: 1.0, t_start: 0.0, t_end: 0.5, cells: 64, steps: 64 }).cylinder(0)?;
    let slack = 10.0 * cfg.solver.newton_tol;
    let pairs = comparison_pairs(cfg.seed, cfg.pairs);
    let results: Vec<(f64, usize)> = pairs
        .par_iter()
        .map(|(lo, inc)| {
            let lower = BoundaryData::from_fn(&c, m, |x, t| lo.eval(x, t)).map_err(solver_err)?;
            let upper = BoundaryData::from_fn(&c, m, |x, t| lo.eval(x, t) + inc.eval(x, t)).map_err(solver_err)?;
            let (u, _) = solve_bvp(&c, &lower, &cfg.solver).map_err(solver_err)?;
            let (v, _) = solve_bvp(&c, &upper, &cfg.solver).map_err(solver_err)?;
            let diffs = v.values().iter().zip(u.values()).map(|(a, b)| a - b);
            let min_gap = diffs.clone().fold(f64::INFINITY, f64::min);
            Ok((min_gap, diffs.filter(|d| *d < -slack).count()))
        })
        .collect::<Result<_, RunError>>()?;
    let rows = results.iter().zip(&pairs).enumerate().map(|(j, ((g, v), (_, inc)))| format!("{j},{},{g},{v}", inc.delta));
    ctx.out.write("comparison.csv", &csv("pair,delta,min_gap,violations", rows))?;
    let violations: usize = results.iter().map(|r| r.1).sum();
    let ordered = results.iter().filter(|r| r.1 == 0).count();
    Ok(vec![Check::new(
        "all_pairs_ordered",
        violations == 0,
        format!("{ordered}/{} pairs ordered within {slack:e}, {violations} violating nodes", pairs.len()),
    )])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub cells: usize,
    pub steps: usize,
    pub eps: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

/// Slack constants are stable when all vanish or when the largest is at
/// most twice the smallest.
pub fn slack_stable(slacks: &[f64]) -> bool {
    if slacks.iter().all(|s| *s == 0.0) {
        return true;
    }
    let lo = slacks.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = slacks.iter().cloned().fold(0.0, f64::max);
    lo > 0.0 && hi <= 2.0 * lo
}

/// Smooth compatible data used for the ladder and attainment checks.
pub fn attainment_data(x: f64, t: f64) -> f64 {
    0.3 + 0.5 * (2.0 * x).sin() + 0.4 * t
}

/// Ten parabolic-boundary nodes spread over both lateral sides and the
/// initial level of a lattice with `n` cells and `s` steps.
pub fn attainment_points(n: usize, s: usize) -> Vec<(usize, usize)> {
    let mut pts: Vec<(usize, usize)> = [1, 3, 5, 7].iter().map(|j| (0, j * s / 8)).collect();
    pts.extend([3, 5].iter().map(|j| (n, j * s / 8)));
    pts.extend([1, 3, 5, 7].iter().map(|j| (j * n / 8, 0)));
    pts
}

fn perturbation_scenario(ctx: &mut Ctx) -> Result<Vec<Check>, RunError> {
    let cfg = ctx.cfg;
    let m = cfg.exponent();
    let grid = cfg.grid_or(GridConfig { x_min: -6.0, x_max: 6.0, t_start: 1.0, t_end: 2.0, cells: 120, steps: 100 });
    let eps = cfg.eps.clone().unwrap_or_else(|| vec![0.1, 0.01, 0.001]);
    let p = BarenblattParams::new(m, 1, 1.0).map_err(solver_err)?;
    let mut rows = Vec::new();
    for level in 0..cfg.refinements {
        let c = grid.cylinder(level)?;
        let bd = BoundaryData::from_fn(&c, m, |x, t| p.value_1d(x, t)).map_err(solver_err)?;
        let (u, _) = solve_bvp(&c, &bd, &cfg.solver).map_err(solver_err)?;
        let lifted: Vec<GapRow> = eps
            .par_iter()
            .map(|&e| {
                let (ue, _) = solve_bvp(&c, &bd.lifted(e).map_err(solver_err)?, &cfg.solver).map_err(solver_err)?;
                let g = perturbation_gap(&u, &ue, e, bd.max_u(), m).map_err(solver_err)?;
                Ok(GapRow { cells: c.nx() - 1, steps: c.nt() - 1, eps: e, lhs: g.lhs, rhs: g.rhs, slack: g.slack(&c) })
            })
            .collect::<Result<_, RunError>>()?;
        rows.extend(lifted);
    }
    let text = rows.iter().map(|r| format!("{},{},{},{},{},{}", r.cells, r.steps, r.eps, r.lhs, r.rhs, r.slack));
    ctx.out.write("gap_table.csv", &csv("cells,steps,eps,lhs,rhs,slack", text))?;
    let mut checks = Vec::new();
    checks.push(Check::new(
        "gap_nonnegative",
        rows.iter().all(|r| r.lhs >= 0.0),
        format!("max lhs/rhs {:.3e}", rows.iter().map(|r| r.lhs / r.rhs).fold(0.0, f64::max)),
    ));
    let stable = eps.iter().all(|&e| {
        let s: Vec<f64> = rows.iter().filter(|r| r.eps == e).map(|r| r.slack).collect();
        slack_stable(&s)
    });
    checks.push(Check::new(
        "slack_stable_under_refinement",
        stable,
        format!("max slack {:.3e}", rows.iter().map(|r| r.slack).fold(0.0, f64::max)),
    ));

    let c = build_cylinder(0.0, 1.0, 0.0, 0.5, 64, 64).map_err(solver_err)?;
    let bd = BoundaryData::from_fn(&c, m, attainment_data).map_err(solver_err)?;
    let ladder_eps: Vec<f64> = (1..=10).map(|j| 0.5f64.powi(j)).collect();
    let ladder = perron_ladder(&c, &bd, &ladder_eps, &cfg.solver).map_err(solver_err)?;
    let mut buf = Vec::new();
    ladder.write_csv(&mut buf).expect("write to memory");
    ctx.out.write("ladder.csv", &buf)?;
    let tol = 10.0 * cfg.solver.newton_tol;
    let last = ladder.rungs.last().expect("ten rungs").sup_gap;
    checks.push(Check::new("ladder_sandwich", ladder.sandwiched(tol), format!("tolerance {tol:e}")));
    checks.push(Check::new("ladder_monotone", ladder.monotone(tol), format!("tolerance {tol:e}")));
    checks.push(Check::new(
        "ladder_gap_decreases_below_1e-3",
        ladder.rungs.windows(2).all(|w| w[1].sup_gap < w[0].sup_gap) && last <= 1e-3,
        format!("final gap {last:.4e}"),
    ));
    let mut att = Vec::new();
    for xi in attainment_points(c.nx() - 1, c.nt() - 1) {
        att.push((xi, attainment_profile(&ladder.direct, &bd, xi).map_err(solver_err)?));
    }
    let text = att.iter().map(|((i, k), d)| format!("{i},{k},{},{},{}", d[0], d[1], d[2]));
    ctx.out.write("attainment.csv", &csv("i,k,dev_4h,dev_2h,dev_h", text))?;
    let decreasing = att.iter().filter(|(_, d)| d[0] > d[1] && d[1] > d[2]).count();
    checks.push(Check::new(
        "attainment_decreases_with_radius",
        decreasing == att.len(),
        format!("{decreasing}/{} points", att.len()),
    ));
    Ok(checks)
}

/// Three overlapping members covering the ambient lattice with `n` cells.
pub fn schwarz_tiling(c: Cylinder) -> CylinderUnion {
    let n = c.nx() - 1;
    let s = c.nt() - 1;
    CylinderUnion::new(
        c,
        vec![
            LatticeBox::new(0, 15 * n / 32, 0, s),
            LatticeBox::new(10 * n / 32, 22 * n / 32, 0, s),
            LatticeBox::new(17 * n / 32, n, 0, s),
        ],
    )
    .expect("members inside the ambient lattice")
}

pub fn schwarz_data(x: f64, t: f64) -> f64 {
    0.3 + 0.6 * (-(x - 0.35).powi(2) / 0.04).exp() * (1.0 + t) + 0.2 * x
}

fn schwarz_union(ctx: &mut Ctx) -> Result<Vec<Check>, RunError> {
    let cfg = ctx.cfg;
    let m = cfg.exponent();
    let c = cfg.grid_or(GridConfig { x_min: 0.0, x_max: 1.0, t_start: 0.0, t_end: 0.5, cells: 64, steps: 64 }).cylinder(0)?;
    if c.nx() < 33 {
        return Err(ConfigError::Invalid { key: "grid.cells".into(), reason: "schwarz_union needs at least 32 cells".into() }.into());
    }
    let k = schwarz_tiling(c);
    let data = GridFunction::from_fn(c, schwarz_data);
    let out = schwarz_solve(&k, &data, m, &cfg.solver, cfg.sweep_tol, cfg.max_sweeps).map_err(solver_err)?;
    let bd = BoundaryData::from_fn(&c, m, schwarz_data).map_err(solver_err)?;
    let (direct, _) = solve_bvp(&c, &bd, &cfg.solver).map_err(solver_err)?;
    let dist = out.solution.sup_distance(&direct).map_err(solver_err)?;
    ctx.out.write("schwarz_history.json", format!("{}\n", out.history_json()).as_bytes())?;
    ctx.out.write_grid("schwarz_solution.csv", &out.solution)?;
    let violations: usize = out.history.iter().map(|r| r.violations).sum();
    Ok(vec![
        Check::new("converged", out.converged, format!("{} sweeps", out.history.len())),
        Check::new("monotone_iterates", violations == 0, format!("{violations} violations")),
        Check::new(
            "sup_change_decreasing",
            out.history.windows(2).all(|w| w[1].sup_change < w[0].sup_change),
            format!("last {:.3e}", out.history.last().map_or(f64::NAN, |r| r.sup_change)),
        ),
        Check::new("matches_direct_solve", dist <= 10.0 * cfg.sweep_tol, format!("sup distance {dist:.3e}")),
    ])
}

/// Obstacle `j` of the ladder: strictly increasing in `j` everywhere.
pub fn obstacle(j: usize, x: f64, t: f64, t_end: f64) -> f64 {
    let heights = [0.3, 0.6, 1.2];
    0.1 + 0.02 * j as f64 + heights[j] * (std::f64::consts::PI * x).sin() * (t / t_end).max(0.0).powf(0.7)
}

pub fn obstacle_boundary_data(x: f64, t: f64) -> f64 {
    0.2 + 0.1 * x + 0.2 * t * x
}

fn obstacle_demo(ctx: &mut Ctx) -> Result<Vec<Check>, RunError> {
    let cfg = ctx.cfg;
    let m = cfg.exponent();
    let c = cfg.grid_or(GridConfig { x_min: 0.0, x_max: 1.0, t_start: 0.0, t_end: 0.5, cells: 32, steps: 32 }).cylinder(0)?;
    if c.mesh.a() != 0.0 || c.mesh.b() != 1.0 || c.times.t_start() != 0.0 {
        return Err(ConfigError::Invalid { key: "grid".into(), reason: "obstacle_demo runs on [0, 1] x [0, T]".into() }.into());
    }
    let bd = BoundaryData::from_fn(&c, m, obstacle_boundary_data).map_err(solver_err)?;
    let t_end = c.times.t_end();
    let tol = 10.0 * cfg.solver.newton_tol;
    let mut sols: Vec<GridFunction> = Vec::new();
    let (mut feasible, mut signed, mut complementary) = (true, true, true);
    let mut contacts = Vec::new();
    for j in 0..3 {
        let psi = GridFunction::from_fn(c, |x, t| obstacle(j, x, t, t_end));
        let (w, _) = solve_obstacle(&c, &psi, &bd, &cfg.solver).map_err(solver_err)?;
        let res = obstacle_residuals(&w, &psi, m);
        feasible &= res.iter().all(|r| r.2 >= -tol);
        signed &= res.iter().all(|r| r.3 >= -tol);
        complementary &= res.iter().filter(|r| r.2 > tol).all(|r| r.3.abs() <= tol);
        contacts.push(res.iter().filter(|r| r.2 <= tol).count());
        ctx.out.write_grid(&format!("obstacle_{j}.csv"), &w)?;
        sols.push(w);
    }
    let ordered = sols.windows(2).all(|p| p[0].values().iter().zip(p[1].values()).all(|(a, b)| *a <= b + tol));
    ctx.out.write_json("obstacle_report.json", &serde_json::json!({ "contacts": contacts, "tolerance": tol }))?;
    Ok(vec![
        Check::new("solutions_ordered", ordered, format!("tolerance {tol:e}")),
        Check::new("above_obstacle", feasible, String::new()),
        Check::new("residual_nonnegative", signed, String::new()),
        Check::new("residual_zero_off_contact", complementary, format!("contacts per obstacle {contacts:?}")),
        Check::new("contact_set_nonempty", contacts.iter().all(|&n| n > 0), format!("{contacts:?}")),
    ])
}

fn tolerances(cfg: &ExperimentConfig) -> Tolerances {
    Tolerances { residual: cfg.tolerances.residual, superporous: cfg.tolerances.superporous, solver: cfg.solver }
}

fn corpus(cfg: &ExperimentConfig, cells: usize) -> Result<Vec<CorpusEntry>, RunError> {
    build_corpus(&CorpusConfig::new(cfg.seed, cells, cfg.exponent()), &cfg.solver).map_err(solver_err)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceRow {
    pub name: String,
    pub expected_supersolution: bool,
    pub report: ClassificationReport,
    pub refined: Option<ClassificationReport>,
}

impl EquivalenceRow {
    /// Verdicts at the finest resolution examined.
    pub fn final_report(&self) -> &ClassificationReport {
        self.refined.as_ref().unwrap_or(&self.report)
    }
}

/// Classify every corpus entry; entries whose verdicts disagree are
/// classified again on the corpus refined once.
pub fn equivalence_rows(cfg: &ExperimentConfig) -> Result<Vec<EquivalenceRow>, RunError> {
    let m = cfg.exponent();
    let tol = tolerances(cfg);
    let base = corpus(cfg, cfg.corpus.cells)?;
    let mut rows = Vec::with_capacity(base.len());
    for e in &base {
        let report = classify(&e.u, m, &tol).map_err(solver_err)?;
        rows.push(EquivalenceRow { name: e.name.clone(), expected_supersolution: e.kind.expected_supersolution(), report, refined: None });
    }
    if rows.iter().any(|r| !r.report.agrees()) {
        let fine = corpus(cfg, 2 * cfg.corpus.cells)?;
        for (row, e) in rows.iter_mut().zip(&fine) {
            if !row.report.agrees() {
                row.refined = Some(classify(&e.u, m, &tol).map_err(solver_err)?);
            }
        }
    }
    Ok(rows)
}

fn equivalence_suite(ctx: &mut Ctx) -> Result<Vec<Check>, RunError> {
    let rows = equivalence_rows(ctx.cfg)?;
    for r in &rows {
        ctx.out.write(&format!("reports/{}.json", r.name), format!("{}\n", r.report.to_json()).as_bytes())?;
        if let Some(f) = &r.refined {
            ctx.out.write(&format!("reports/{}_refined.json", r.name), format!("{}\n", f.to_json()).as_bytes())?;
        }
    }
    let text = rows.iter().map(|r| {
        let f = r.final_report();
        format!(
            "{},{},{},{},{},{},{}",
            r.name,
            r.expected_supersolution,
            r.report.weak,
            r.report.very_weak,
            r.report.superporous,
            r.report.agrees(),
            r.refined.as_ref().map_or(String::new(), |_| f.agrees().to_string())
        )
    });
    ctx.out.write("equivalence.csv", &csv("name,expected,weak,very_weak,superporous,agree,refined_agree", text))?;
    let agree = rows.iter().filter(|r| r.report.agrees()).count();
    let rate = agree as f64 / rows.len() as f64;
    let unresolved: Vec<&str> = rows.iter().filter(|r| !r.final_report().agrees()).map(|r| r.name.as_str()).collect();
    let negatives: Vec<&EquivalenceRow> = rows.iter().filter(|r| !r.expected_supersolution).collect();
    let neg_fail = negatives.iter().all(|r| {
        let f = r.final_report();
        !f.weak && !f.very_weak && !f.superporous
    });
    let misclassified: Vec<&str> = rows
        .iter()
        .filter(|r| r.expected_supersolution)
        .filter(|r| {
            let f = r.final_report();
            !(f.weak && f.very_weak && f.superporous)
        })
        .map(|r| r.name.as_str())
        .collect();
    Ok(vec![
        Check::new("corpus_size", rows.len() >= 20, format!("{} entries", rows.len())),
        Check::new("agreement_at_least_95_percent", rate >= 0.95, format!("{agree}/{}", rows.len())),
        Check::new("disagreements_resolved_by_refinement", unresolved.is_empty(), format!("{unresolved:?}")),
        Check::new("negative_controls_fail_all", negatives.len() == 2 && neg_fail, format!("{} controls", negatives.len())),
        Check::new("supersolutions_pass_all", misclassified.is_empty(), format!("{misclassified:?}")),
    ])
}

fn caccioppoli_suite(ctx: &mut Ctx) -> Result<Vec<Check>, RunError> {
    let cfg = ctx.cfg;
    let m = cfg.exponent();
    let entries = corpus(cfg, cfg.corpus.cells)?;
    let zeta = SpatialCutoff { x0: 0.5, r: 0.5, amplitude: 1.0 };
    let mut rows = Vec::new();
    for e in entries.iter().filter(|e| e.kind.expected_supersolution()) {
        let o = caccioppoli_check(&e.u, m, &zeta, e.u.max()).map_err(solver_err)?;
        rows.push((e.name.clone(), e.u.max(), o));
    }
    let text = rows.iter().map(|(n, big_m, o)| format!("{n},{big_m},{},{},{}", o.lhs, o.rhs, o.pass));
    ctx.out.write("caccioppoli.csv", &csv("name,M,lhs,rhs,pass", text))?;
    let p = BarenblattParams::new(m, 1, 1.0).map_err(solver_err)?;
    let radii = [1.0, 0.5, 0.25];
    let cells = [16, 32, 64, 128, 256];
    let table = barenblatt_energy_table(&p, &radii, &cells);
    let text = table.iter().map(|r| format!("{},{},{},{}", r.radius, r.n_cells, r.h, r.energy));
    ctx.out.write("energy.csv", &csv("radius,cells,h,energy", text))?;
    let growth = radii.iter().all(|&r| {
        let e: Vec<f64> = table.iter().filter(|row| row.radius == r).map(|row| row.energy).collect();
        e.windows(2).all(|w| w[1] > 1.5 * w[0])
    });
    let failing: Vec<&str> = rows.iter().filter(|r| !r.2.pass).map(|r| r.0.as_str()).collect();
    Ok(vec![
        Check::new("estimate_holds_on_corpus", failing.is_empty(), format!("{} supersolutions, failing {failing:?}", rows.len())),
        Check::new(
            "barenblatt_energy_blows_up",
            growth,
            format!("energy grows more than 1.5x per halving of h on radii {radii:?}"),
        ),
    ])
}
