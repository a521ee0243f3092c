//! Planar Delaunay triangulation by rounds of rank-ordered replacements.
//!
//! Each live triangle keeps the set `E(t)` of not-yet-inserted points inside
//! its circumcircle. In a round, every triangle whose smallest pending point
//! is no larger than its neighbours' is replaced by a fan from that point
//! over the boundary edges of the point's cavity. Replacements are recorded
//! in a tracing DAG, so later batches of points find the triangles they
//! encroach on without rewriting anything along the way.
//!
//! Inputs are snapped to a 2⁻³⁰ grid and all predicates are exact. The
//! points sit inside a large equilateral scaffold triangle whose corners are
//! vertices 0, 1 and 2; real points are numbered from 3 in insertion order.

mod build;
pub mod predicates;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

pub use build::{incremental_dt, prefix_doubling_dt, DtBuilder, RoundLog, TriNode};
use predicates::{in_circle as in_circle_exact, orient, snap, unsnap, GridPt, MAX_COORD};

/// Number of scaffold corners; real vertices start at this index.
pub const SCAFFOLD: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DtError {
    #[error("points are not in general position: {0}")]
    GeneralPosition(&'static str),
    #[error("coordinate {0} is outside the supported range")]
    OutOfRange(i64),
    #[error("point {0} encroaches on no live triangle")]
    EmptyLocation(u32),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triangle {
    /// Vertex indices in counterclockwise order.
    pub verts: [u32; 3],
    /// `nbrs[i]` lies across the edge opposite `verts[i]`.
    pub nbrs: [Option<u32>; 3],
    pub alive: bool,
    /// Pending points inside the circumcircle, sorted by index.
    pub encroach: Vec<u32>,
    /// Current tracing-DAG node; a leaf while the triangle lives.
    pub node: u32,
    /// Round in which `node` was created.
    pub level: u32,
}

impl Triangle {
    pub fn touches_scaffold(&self) -> bool {
        self.verts.iter().any(|&v| v < SCAFFOLD)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mesh {
    /// Grid coordinates; the first three are the scaffold corners.
    pub points: Vec<GridPt>,
    /// Every triangle ever created; replaced ones stay with `alive == false`.
    pub triangles: Vec<Triangle>,
    pub live_count: usize,
}

impl Mesh {
    /// Real (non-scaffold) vertices.
    pub fn n_points(&self) -> usize {
        self.points.len() - SCAFFOLD as usize
    }

    pub fn point(&self, v: u32) -> [f64; 2] {
        let p = self.points[v as usize];
        [unsnap(p[0]), unsnap(p[1])]
    }

    pub fn live(&self) -> impl Iterator<Item = (u32, &Triangle)> {
        self.triangles
            .iter()
            .enumerate()
            .filter(|(_, t)| t.alive)
            .map(|(i, t)| (i as u32, t))
    }

    /// Live triangles with no scaffold corner.
    pub fn interior(&self) -> impl Iterator<Item = (u32, &Triangle)> {
        self.live().filter(|(_, t)| !t.touches_scaffold())
    }

    pub(crate) fn geometry(&self, t: u32) -> [GridPt; 3] {
        self.triangles[t as usize].verts.map(|v| self.points[v as usize])
    }

    /// Sign of the in-circle test of vertex `v` against triangle `t`.
    pub(crate) fn encroaches(&self, t: u32, p: GridPt) -> Result<bool, DtError> {
        let [a, b, c] = self.geometry(t);
        match in_circle_exact(a, b, c, p) {
            0 => Err(DtError::GeneralPosition("four points are cocircular")),
            s => Ok(s > 0),
        }
    }

    /// Live triangles whose circumcircle strictly contains `p`, by scanning.
    pub fn scan_encroached(&self, p: [f64; 2]) -> Result<Vec<u32>, DtError> {
        let g = snap_point(p)?;
        let mut out = Vec::new();
        for (id, _) in self.live() {
            if self.encroaches(id, g)? {
                out.push(id);
            }
        }
        Ok(out)
    }

    /// Orientation, neighbour symmetry and the triangle count of a
    /// triangulated triangle with `n` interior points (`2n + 1`).
    pub fn check_topology(&self) -> bool {
        if self.live_count != 2 * self.n_points() + 1 || self.live().count() != self.live_count {
            return false;
        }
        for (id, t) in self.live() {
            let [a, b, c] = self.geometry(id);
            if orient(a, b, c) <= 0 {
                return false;
            }
            for i in 0..3 {
                let (u, w) = (t.verts[(i + 1) % 3], t.verts[(i + 2) % 3]);
                match t.nbrs[i] {
                    None => {
                        if u >= SCAFFOLD || w >= SCAFFOLD {
                            return false;
                        }
                    }
                    Some(o) => {
                        let other = &self.triangles[o as usize];
                        if !other.alive {
                            return false;
                        }
                        let back = (0..3).any(|j| {
                            other.nbrs[j] == Some(id)
                                && other.verts[(j + 1) % 3] == w
                                && other.verts[(j + 2) % 3] == u
                        });
                        if !back {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    /// Mesh as OFF text: vertex count line, vertices, then live triangles.
    pub fn to_off(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "OFF");
        let _ = writeln!(s, "{} {} 0", self.points.len(), self.live_count);
        for v in 0..self.points.len() as u32 {
            let [x, y] = self.point(v);
            let _ = writeln!(s, "{x} {y} 0");
        }
        for (_, t) in self.live() {
            let _ = writeln!(s, "3 {} {} {}", t.verts[0], t.verts[1], t.verts[2]);
        }
        s
    }
}

pub(crate) fn snap_point(p: [f64; 2]) -> Result<GridPt, DtError> {
    let g = [snap(p[0]), snap(p[1])];
    for (&x, &gx) in p.iter().zip(&g) {
        if !(x.abs() <= MAX_COORD) {
            return Err(DtError::OutOfRange(gx));
        }
    }
    Ok(g)
}

/// Exact test of `v` against the counterclockwise triangle `t`.
pub fn in_circle(t: [[f64; 2]; 3], v: [f64; 2]) -> Result<bool, DtError> {
    let [a, b, c] = [snap_point(t[0])?, snap_point(t[1])?, snap_point(t[2])?];
    let d = snap_point(v)?;
    match in_circle_exact(a, b, c, d) {
        0 => Err(DtError::GeneralPosition("four points are cocircular")),
        s => Ok(s > 0),
    }
}

/// True iff the mesh is a valid triangulation whose interior triangles have
/// circumcircles free of every point in `points`.
pub fn validate_delaunay(mesh: &Mesh, points: &[[f64; 2]]) -> bool {
    if !mesh.check_topology() {
        return false;
    }
    let Ok(grid) = points.iter().map(|&p| snap_point(p)).collect::<Result<Vec<_>, _>>() else {
        return false;
    };
    for (id, t) in mesh.interior() {
        let [a, b, c] = mesh.geometry(id);
        for &p in &grid {
            if t.verts.iter().any(|&v| mesh.points[v as usize] == p) {
                continue;
            }
            if in_circle_exact(a, b, c, p) > 0 {
                return false;
            }
        }
    }
    true
}

/// Interior triangles and points that lie exactly on their circumcircle.
pub fn cocircular_witnesses(mesh: &Mesh) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for (id, t) in mesh.interior() {
        let [a, b, c] = mesh.geometry(id);
        for v in SCAFFOLD..mesh.points.len() as u32 {
            if !t.verts.contains(&v) && in_circle_exact(a, b, c, mesh.points[v as usize]) == 0 {
                out.push((id, v));
            }
        }
    }
    out
}
