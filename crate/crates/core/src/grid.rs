//! Tabulated functions on a cylinder lattice.
//!
//! Values are stored row-major by time level: `values[k * nx + i]`.
//!
//! CSV layout: header `x,t,u`, then one row per node, time level by time
//! level, nodes left to right within a level. Floats are written with
//! Rust's shortest round-trip formatting.
//!
//! Binary layout (little endian): magic `PMEGRID1`, then `a, b` (f64),
//! `n_cells` (u64), `t_start, t_end` (f64), `n_steps` (u64), then the
//! values as f64 in storage order.

use std::io::{self, BufRead, Read, Write};

use thiserror::Error;

use crate::domain::{build_cylinder, Cylinder, DomainError};

#[derive(Debug, Error)]
pub enum GridError {
    #[error("expected {expected} values, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("non-finite value at node ({i}, {k})")]
    NonFinite { i: usize, k: usize },
    #[error("lattice mismatch between grid functions")]
    LatticeMismatch,
    #[error("malformed input: {0}")]
    Parse(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    cyl: Cylinder,
    values: Vec<f64>,
}

const MAGIC: &[u8; 8] = b"PMEGRID1";

impl GridFunction {
    pub fn new(cyl: Cylinder, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != cyl.node_count() {
            return Err(GridError::WrongLength { expected: cyl.node_count(), got: values.len() });
        }
        if let Some(p) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite { i: p % cyl.nx(), k: p / cyl.nx() });
        }
        Ok(Self { cyl, values })
    }

    pub fn constant(cyl: Cylinder, c: f64) -> Self {
        Self { values: vec![c; cyl.node_count()], cyl }
    }

    /// Tabulate `f(x, t)`. Panics if `f` produces a non-finite value.
    pub fn from_fn(cyl: Cylinder, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(cyl.node_count());
        for k in 0..cyl.nt() {
            let t = cyl.t(k);
            for i in 0..cyl.nx() {
                let v = f(cyl.x(i), t);
                assert!(v.is_finite(), "non-finite sample at ({i}, {k})");
                values.push(v);
            }
        }
        Self { cyl, values }
    }

    pub fn cylinder(&self) -> &Cylinder {
        &self.cyl
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[self.cyl.index(i, k)]
    }

    pub fn set(&mut self, i: usize, k: usize, v: f64) {
        debug_assert!(v.is_finite());
        let idx = self.cyl.index(i, k);
        self.values[idx] = v;
    }

    pub fn level(&self, k: usize) -> &[f64] {
        let nx = self.cyl.nx();
        &self.values[k * nx..(k + 1) * nx]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [f64] {
        let nx = self.cyl.nx();
        &mut self.values[k * nx..(k + 1) * nx]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::new(self.cyl, self.values.iter().map(|&v| f(v)).collect())
            .expect("map produced a non-finite value")
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self, GridError> {
        self.check_same_lattice(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self::new(self.cyl, values)
    }

    /// Nodewise minimum.
    pub fn min_with(&self, other: &Self) -> Result<Self, GridError> {
        self.zip_with(other, f64::min)
    }

    /// `max |self - other|`.
    pub fn sup_distance(&self, other: &Self) -> Result<f64, GridError> {
        self.check_same_lattice(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn check_same_lattice(&self, other: &Self) -> Result<(), GridError> {
        if self.cyl == other.cyl {
            Ok(())
        } else {
            Err(GridError::LatticeMismatch)
        }
    }

    /// Restrict to a sub-box of the lattice.
    pub fn restrict(&self, bx: &crate::domain::LatticeBox) -> Result<Self, GridError> {
        let sub = self.cyl.sub(bx)?;
        let mut values = Vec::with_capacity(sub.node_count());
        for k in bx.k0..=bx.k1 {
            values.extend_from_slice(&self.level(k)[bx.i0..=bx.i1]);
        }
        Self::new(sub, values)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "x,t,u")?;
        for k in 0..self.cyl.nt() {
            let t = self.cyl.t(k);
            for (i, u) in self.level(k).iter().enumerate() {
                writeln!(w, "{},{},{}", self.cyl.x(i), t, u)?;
            }
        }
        Ok(())
    }

    /// Read a CSV written by [`write_csv`](Self::write_csv); the lattice is
    /// inferred from the distinct coordinates.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, GridError> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| GridError::Parse("empty input".into()))??;
        if header.trim() != "x,t,u" {
            return Err(GridError::Parse(format!("unexpected header {header:?}")));
        }
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| GridError::Parse(format!("row {}: {e}", n + 2)))?;
            if fields.len() != 3 {
                return Err(GridError::Parse(format!("row {}: expected 3 fields", n + 2)));
            }
            rows.push([fields[0], fields[1], fields[2]]);
        }
        let first = rows.first().ok_or_else(|| GridError::Parse("no data rows".into()))?;
        let nx = rows.iter().take_while(|r| r[1] == first[1]).count();
        if nx < 3 || rows.len() % nx != 0 {
            return Err(GridError::Parse("rows do not form a lattice".into()));
        }
        let nt = rows.len() / nx;
        if nt < 2 {
            return Err(GridError::Parse("need at least two time levels".into()));
        }
        let cyl = build_cylinder(
            rows[0][0],
            rows[nx - 1][0],
            rows[0][1],
            rows[rows.len() - 1][1],
            nx - 1,
            nt - 1,
        )?;
        Self::new(cyl, rows.into_iter().map(|r| r[2]).collect())
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        let (m, t) = (&self.cyl.mesh, &self.cyl.times);
        w.write_all(MAGIC)?;
        w.write_all(&m.a().to_le_bytes())?;
        w.write_all(&m.b().to_le_bytes())?;
        w.write_all(&(m.n_cells() as u64).to_le_bytes())?;
        w.write_all(&t.t_start().to_le_bytes())?;
        w.write_all(&t.t_end().to_le_bytes())?;
        w.write_all(&(t.n_steps() as u64).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self, GridError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(GridError::Parse("bad magic".into()));
        }
        let mut word = [0u8; 8];
        let mut next = |r: &mut R| -> io::Result<[u8; 8]> {
            r.read_exact(&mut word)?;
            Ok(word)
        };
        let a = f64::from_le_bytes(next(&mut r)?);
        let b = f64::from_le_bytes(next(&mut r)?);
        let n_cells = u64::from_le_bytes(next(&mut r)?) as usize;
        let t0 = f64::from_le_bytes(next(&mut r)?);
        let t1 = f64::from_le_bytes(next(&mut r)?);
        let n_steps = u64::from_le_bytes(next(&mut r)?) as usize;
        let cyl = build_cylinder(a, b, t0, t1, n_cells, n_steps)?;
        let mut values = Vec::with_capacity(cyl.node_count());
        for _ in 0..cyl.node_count() {
            values.push(f64::from_le_bytes(next(&mut r)?));
        }
        Self::new(cyl, values)
    }
}

/// Trapezoid weights of a uniform 1D lattice with `n` nodes and spacing `h`.
pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    w[0] = 0.5 * h;
    w[n - 1] = 0.5 * h;
    w
}

/// Space-time trapezoid rule of `f(i, k)` over the whole lattice.
pub fn space_time_trapezoid(c: &Cylinder, f: impl Fn(usize, usize) -> f64) -> f64 {
    let wx = trapezoid_weights(c.nx(), c.h());
    let wt = trapezoid_weights(c.nt(), c.tau());
    let mut total = 0.0;
    for (k, &tw) in wt.iter().enumerate() {
        let row: f64 = wx.iter().enumerate().map(|(i, &xw)| xw * f(i, k)).sum();
        total += tw * row;
    }
    total
}
