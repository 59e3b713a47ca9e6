//! Discrete space-time domains: the interval mesh, uniform time grids,
//! cylinders `U x (t1, t2)`, finite unions of cylinders sampled on one
//! ambient lattice, and their parabolic boundaries.
//!
//! Lattice nodes are addressed by `(i, k)`: `i` is the spatial node index,
//! `k` the time level.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("degenerate spatial extent: a = {a} must be < b = {b}")]
    DegenerateSpace { a: f64, b: f64 },
    #[error("degenerate time extent: t_start = {t1} must be < t_end = {t2}")]
    DegenerateTime { t1: f64, t2: f64 },
    #[error("need at least 2 spatial cells, got {0}")]
    TooFewCells(usize),
    #[error("need at least 1 time step, got {0}")]
    TooFewSteps(usize),
    #[error("non-finite grid parameter")]
    NonFinite,
    #[error("union has no members")]
    EmptyUnion,
    #[error("member {member} is not a valid sub-range of the ambient lattice: {reason}")]
    BadMember { member: usize, reason: String },
    #[error("union is disconnected: interior-node graph has {components} components")]
    Disconnected { components: usize },
}

/// Uniform mesh of the interval `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeshRepr", into = "MeshRepr")]
pub struct SpatialMesh {
    a: f64,
    b: f64,
    n_cells: usize,
}

#[derive(Serialize, Deserialize)]
struct MeshRepr {
    a: f64,
    b: f64,
    n_cells: usize,
}

impl TryFrom<MeshRepr> for SpatialMesh {
    type Error = DomainError;
    fn try_from(s: MeshRepr) -> Result<Self, DomainError> {
        SpatialMesh::new(s.a, s.b, s.n_cells)
    }
}

impl From<SpatialMesh> for MeshRepr {
    fn from(m: SpatialMesh) -> Self {
        MeshRepr { a: m.a, b: m.b, n_cells: m.n_cells }
    }
}

impl SpatialMesh {
    pub fn new(a: f64, b: f64, n_cells: usize) -> Result<Self, DomainError> {
        if !a.is_finite() || !b.is_finite() {
            return Err(DomainError::NonFinite);
        }
        if a >= b {
            return Err(DomainError::DegenerateSpace { a, b });
        }
        if n_cells < 2 {
            return Err(DomainError::TooFewCells(n_cells));
        }
        Ok(Self { a, b, n_cells })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Number of nodes, `n_cells + 1`.
    pub fn len(&self) -> usize {
        self.n_cells + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / self.n_cells as f64
    }

    /// Coordinate of node `i`. The last node is pinned to `b` exactly.
    pub fn node(&self, i: usize) -> f64 {
        if i == self.n_cells {
            self.b
        } else {
            self.a + i as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }
}

/// Uniform time levels `t_start = t_0 < ... < t_{n_steps} = t_end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TimeRepr", into = "TimeRepr")]
pub struct TimeGrid {
    t_start: f64,
    t_end: f64,
    n_steps: usize,
}

#[derive(Serialize, Deserialize)]
struct TimeRepr {
    t_start: f64,
    t_end: f64,
    n_steps: usize,
}

impl TryFrom<TimeRepr> for TimeGrid {
    type Error = DomainError;
    fn try_from(s: TimeRepr) -> Result<Self, DomainError> {
        TimeGrid::new(s.t_start, s.t_end, s.n_steps)
    }
}

impl From<TimeGrid> for TimeRepr {
    fn from(t: TimeGrid) -> Self {
        TimeRepr { t_start: t.t_start, t_end: t.t_end, n_steps: t.n_steps }
    }
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_steps: usize) -> Result<Self, DomainError> {
        if !t_start.is_finite() || !t_end.is_finite() {
            return Err(DomainError::NonFinite);
        }
        if t_start >= t_end {
            return Err(DomainError::DegenerateTime { t1: t_start, t2: t_end });
        }
        if n_steps < 1 {
            return Err(DomainError::TooFewSteps(n_steps));
        }
        Ok(Self { t_start, t_end, n_steps })
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of time levels, `n_steps + 1`.
    pub fn levels(&self) -> usize {
        self.n_steps + 1
    }

    pub fn tau(&self) -> f64 {
        (self.t_end - self.t_start) / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_end
        } else {
            self.t_start + k as f64 * self.tau()
        }
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

/// Inclusive index ranges `i0..=i1` (space) and `k0..=k1` (time) of a
/// sub-cylinder inside an ambient lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeBox {
    pub i0: usize,
    pub i1: usize,
    pub k0: usize,
    pub k1: usize,
}

impl LatticeBox {
    pub fn new(i0: usize, i1: usize, k0: usize, k1: usize) -> Self {
        Self { i0, i1, k0, k1 }
    }

    pub fn contains(&self, i: usize, k: usize) -> bool {
        (self.i0..=self.i1).contains(&i) && (self.k0..=self.k1).contains(&k)
    }

    /// Node class relative to this box alone, `None` if outside.
    pub fn classify(&self, i: usize, k: usize) -> Option<NodeClass> {
        if !self.contains(i, k) {
            return None;
        }
        if k == self.k0 || i == self.i0 || i == self.i1 {
            Some(NodeClass::Boundary)
        } else if k == self.k1 {
            Some(NodeClass::FinalInterior)
        } else {
            Some(NodeClass::Interior)
        }
    }

    fn is_unknown(&self, i: usize, k: usize) -> bool {
        matches!(
            self.classify(i, k),
            Some(NodeClass::Interior) | Some(NodeClass::FinalInterior)
        )
    }
}

/// Classification of a lattice node of a cylinder or union.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeClass {
    /// On the parabolic boundary.
    Boundary,
    /// Strictly inside, below the final time level.
    Interior,
    /// Spatially interior node on the final time level.
    FinalInterior,
}

/// Space-time cylinder `(a, b) x (t_start, t_end)` with its tensor lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub mesh: SpatialMesh,
    pub times: TimeGrid,
}

/// Build a uniform cylinder lattice.
pub fn build_cylinder(
    a: f64,
    b: f64,
    t1: f64,
    t2: f64,
    n_cells: usize,
    n_steps: usize,
) -> Result<Cylinder, DomainError> {
    Ok(Cylinder {
        mesh: SpatialMesh::new(a, b, n_cells)?,
        times: TimeGrid::new(t1, t2, n_steps)?,
    })
}

impl Cylinder {
    pub fn new(mesh: SpatialMesh, times: TimeGrid) -> Self {
        Self { mesh, times }
    }

    pub fn nx(&self) -> usize {
        self.mesh.len()
    }

    pub fn nt(&self) -> usize {
        self.times.levels()
    }

    pub fn node_count(&self) -> usize {
        self.nx() * self.nt()
    }

    pub fn h(&self) -> f64 {
        self.mesh.h()
    }

    pub fn tau(&self) -> f64 {
        self.times.tau()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.mesh.node(i)
    }

    pub fn t(&self, k: usize) -> f64 {
        self.times.time(k)
    }

    /// Row-major (by time level) flat index.
    pub fn index(&self, i: usize, k: usize) -> usize {
        k * self.nx() + i
    }

    /// `|Omega_T|`.
    pub fn volume(&self) -> f64 {
        self.mesh.length() * self.times.duration()
    }

    /// The box covering the whole lattice.
    pub fn full_box(&self) -> LatticeBox {
        LatticeBox::new(0, self.mesh.n_cells(), 0, self.times.n_steps())
    }

    pub fn classify(&self, i: usize, k: usize) -> NodeClass {
        self.full_box()
            .classify(i, k)
            .expect("node index outside the cylinder lattice")
    }

    /// Sub-cylinder spanned by `bx`; the box must lie in this lattice and
    /// have at least 2 cells and 1 step.
    pub fn sub(&self, bx: &LatticeBox) -> Result<Cylinder, DomainError> {
        check_box(self, bx, 0)?;
        build_cylinder(
            self.x(bx.i0),
            self.x(bx.i1),
            self.t(bx.k0),
            self.t(bx.k1),
            bx.i1 - bx.i0,
            bx.k1 - bx.k0,
        )
    }

    pub fn parabolic_boundary(&self) -> ParabolicBoundarySet {
        parabolic_boundary(self)
    }
}

fn check_box(c: &Cylinder, bx: &LatticeBox, member: usize) -> Result<(), DomainError> {
    let bad = |reason: String| DomainError::BadMember { member, reason };
    if bx.i1 > c.mesh.n_cells() || bx.k1 > c.times.n_steps() {
        return Err(bad(format!("{bx:?} exceeds the ambient lattice")));
    }
    if bx.i1 < bx.i0 + 2 {
        return Err(bad("fewer than 2 spatial cells".into()));
    }
    if bx.k1 < bx.k0 + 1 {
        return Err(bad("no time step".into()));
    }
    Ok(())
}

/// Initial and lateral node sets of a parabolic boundary.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParabolicBoundarySet {
    pub initial_nodes: BTreeSet<(usize, usize)>,
    pub lateral_nodes: BTreeSet<(usize, usize)>,
}

impl ParabolicBoundarySet {
    pub fn len(&self) -> usize {
        self.initial_nodes.len() + self.lateral_nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, i: usize, k: usize) -> bool {
        self.initial_nodes.contains(&(i, k)) || self.lateral_nodes.contains(&(i, k))
    }

    pub fn iter(&self) -> impl Iterator<Item = &(usize, usize)> {
        self.initial_nodes.iter().chain(self.lateral_nodes.iter())
    }
}

fn box_boundary(bx: &LatticeBox) -> ParabolicBoundarySet {
    let mut set = ParabolicBoundarySet::default();
    for i in bx.i0..=bx.i1 {
        set.initial_nodes.insert((i, bx.k0));
    }
    for k in bx.k0 + 1..=bx.k1 {
        set.lateral_nodes.insert((bx.i0, k));
        set.lateral_nodes.insert((bx.i1, k));
    }
    set
}

/// Initial slice plus the two lateral columns; the final slice interior is
/// excluded.
pub fn parabolic_boundary(c: &Cylinder) -> ParabolicBoundarySet {
    box_boundary(&c.full_box())
}

/// Finite union of cylinders, each an index range of one ambient lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "UnionRepr", into = "UnionRepr")]
pub struct CylinderUnion {
    ambient: Cylinder,
    members: Vec<LatticeBox>,
}

#[derive(Serialize, Deserialize)]
struct UnionRepr {
    ambient: Cylinder,
    members: Vec<LatticeBox>,
}

impl TryFrom<UnionRepr> for CylinderUnion {
    type Error = DomainError;
    fn try_from(s: UnionRepr) -> Result<Self, DomainError> {
        CylinderUnion::new(s.ambient, s.members)
    }
}

impl From<CylinderUnion> for UnionRepr {
    fn from(u: CylinderUnion) -> Self {
        UnionRepr { ambient: u.ambient, members: u.members }
    }
}

impl CylinderUnion {
    /// Validates every member against the ambient lattice and rejects
    /// unions whose interior-node graph is disconnected.
    pub fn new(ambient: Cylinder, members: Vec<LatticeBox>) -> Result<Self, DomainError> {
        if members.is_empty() {
            return Err(DomainError::EmptyUnion);
        }
        for (j, bx) in members.iter().enumerate() {
            check_box(&ambient, bx, j)?;
        }
        let union = Self { ambient, members };
        let components = union.interior_components();
        if components != 1 {
            return Err(DomainError::Disconnected { components });
        }
        Ok(union)
    }

    /// A union consisting of one cylinder covering the whole ambient lattice.
    pub fn single(ambient: Cylinder) -> Self {
        Self { members: vec![ambient.full_box()], ambient }
    }

    pub fn ambient(&self) -> &Cylinder {
        &self.ambient
    }

    pub fn members(&self) -> &[LatticeBox] {
        &self.members
    }

    pub fn member_cylinder(&self, j: usize) -> Cylinder {
        self.ambient
            .sub(&self.members[j])
            .expect("members are validated at construction")
    }

    pub fn contains(&self, i: usize, k: usize) -> bool {
        self.members.iter().any(|b| b.contains(i, k))
    }

    /// Class of `(i, k)` in the union, `None` if the node is outside it.
    ///
    /// A node is interior if it is interior to some member; it is a boundary
    /// node if it lies on some member's parabolic boundary and is interior
    /// (or final-slice interior) to none.
    pub fn classify(&self, i: usize, k: usize) -> Option<NodeClass> {
        let mut in_any = false;
        let mut final_interior = false;
        for bx in &self.members {
            match bx.classify(i, k) {
                Some(NodeClass::Interior) => return Some(NodeClass::Interior),
                Some(NodeClass::FinalInterior) => final_interior = true,
                Some(NodeClass::Boundary) => in_any = true,
                None => {}
            }
        }
        if final_interior {
            Some(NodeClass::FinalInterior)
        } else if in_any {
            Some(NodeClass::Boundary)
        } else {
            None
        }
    }

    /// All lattice nodes of the union.
    pub fn nodes(&self) -> BTreeSet<(usize, usize)> {
        let mut out = BTreeSet::new();
        for bx in &self.members {
            for k in bx.k0..=bx.k1 {
                for i in bx.i0..=bx.i1 {
                    out.insert((i, k));
                }
            }
        }
        out
    }

    pub fn parabolic_boundary(&self) -> ParabolicBoundarySet {
        union_parabolic_boundary(self)
    }

    fn interior_components(&self) -> usize {
        let unknowns: BTreeSet<(usize, usize)> = self
            .nodes()
            .into_iter()
            .filter(|&(i, k)| self.members.iter().any(|b| b.is_unknown(i, k)))
            .collect();
        let mut seen = BTreeSet::new();
        let mut components = 0;
        for &start in &unknowns {
            if seen.contains(&start) {
                continue;
            }
            components += 1;
            let mut queue = VecDeque::from([start]);
            seen.insert(start);
            while let Some((i, k)) = queue.pop_front() {
                let mut nbrs = vec![(i + 1, k), (i, k + 1)];
                if i > 0 {
                    nbrs.push((i - 1, k));
                }
                if k > 0 {
                    nbrs.push((i, k - 1));
                }
                for n in nbrs {
                    if unknowns.contains(&n) && seen.insert(n) {
                        queue.push_back(n);
                    }
                }
            }
        }
        components
    }
}

/// Parabolic boundary of a union: member boundary nodes that are not
/// interior (or final-slice interior) to any member.
pub fn union_parabolic_boundary(k: &CylinderUnion) -> ParabolicBoundarySet {
    let mut set = ParabolicBoundarySet::default();
    for bx in k.members() {
        let own = box_boundary(bx);
        let keep = |&&(i, t): &&(usize, usize)| k.classify(i, t) == Some(NodeClass::Boundary);
        set.initial_nodes.extend(own.initial_nodes.iter().filter(keep));
        set.lateral_nodes.extend(own.lateral_nodes.iter().filter(keep));
    }
    // A node can be initial for one member and lateral for another.
    let both: Vec<_> = set
        .initial_nodes
        .intersection(&set.lateral_nodes)
        .copied()
        .collect();
    for n in both {
        set.lateral_nodes.remove(&n);
    }
    set
}
