use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;
use core::cell::Cell;

use super::predicates::{in_circle, orient, snap, GridPt};
use super::{snap_point, DtError, Mesh, Triangle, SCAFFOLD};
use crate::cost_model::{CostMeter, CostSnapshot};
use crate::trace_dag::{self, TraceDag, TraceStats};

/// Words written for a new triangle: vertices, neighbours, flag, node.
const TRIANGLE_WORDS: u64 = 8;

/// Angle of the first scaffold corner, in radians.
const SCAFFOLD_TILT: f64 = 1.0;

/// Payload of a tracing-DAG vertex: the triangle and the round it was
/// created or copied in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TriNode {
    pub tri: u32,
    pub level: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundLog {
    pub round: u32,
    pub replaced: usize,
    pub created: usize,
    pub cost: CostSnapshot,
}

/// Incremental triangulation that accepts points in batches.
#[derive(Debug, Clone)]
pub struct DtBuilder {
    mesh: Mesh,
    dag: TraceDag<TriNode>,
    /// Spoke half-edges `(from, to)` waiting for their twin.
    pending: BTreeMap<(u32, u32), (u32, usize)>,
    /// Live triangles that may have pending points.
    active: Vec<u32>,
    seen: BTreeSet<GridPt>,
    round: u32,
    rounds: Vec<RoundLog>,
    locates: Vec<TraceStats>,
}

impl DtBuilder {
    /// A mesh holding only the scaffold triangle around the box
    /// `[lo, hi]`: equilateral, centred on the box, with circumradius ten
    /// times its diagonal. It is rotated off the axes so that symmetric
    /// inputs do not become cocircular with two of its corners.
    pub fn new(lo: [f64; 2], hi: [f64; 2], meter: &mut CostMeter) -> Result<Self, DtError> {
        let (cx, cy) = ((lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0);
        let diag = libm::hypot(hi[0] - lo[0], hi[1] - lo[1]).max(1.0);
        let r = 10.0 * diag;
        let points: Vec<GridPt> = (0..3)
            .map(|i| {
                let a = SCAFFOLD_TILT + i as f64 * 2.0 * core::f64::consts::PI / 3.0;
                [snap(cx + r * libm::cos(a)), snap(cy + r * libm::sin(a))]
            })
            .collect();
        let root = Triangle {
            verts: [0, 1, 2],
            nbrs: [None; 3],
            alive: true,
            encroach: Vec::new(),
            node: 0,
            level: 0,
        };
        meter.write(6 + TRIANGLE_WORDS + 1);
        Ok(DtBuilder {
            mesh: Mesh {
                points,
                triangles: vec![root],
                live_count: 1,
            },
            dag: TraceDag::new(TriNode { tri: 0, level: 0 }),
            pending: BTreeMap::new(),
            active: Vec::new(),
            seen: BTreeSet::new(),
            round: 0,
            rounds: Vec::new(),
            locates: Vec::new(),
        })
    }

    /// All points in one batch: the plain round-based algorithm.
    pub fn run_incremental(points: &[[f64; 2]], meter: &mut CostMeter) -> Result<Self, DtError> {
        let (lo, hi) = bbox(points);
        let mut b = DtBuilder::new(lo, hi, meter)?;
        b.insert_batch(points, meter)?;
        Ok(b)
    }

    /// A first batch of `n / ⌈log₂ n⌉` points, then batches that double the
    /// number inserted.
    pub fn run_prefix_doubling(points: &[[f64; 2]], meter: &mut CostMeter) -> Result<Self, DtError> {
        let n = points.len();
        let (lo, hi) = bbox(points);
        let mut b = DtBuilder::new(lo, hi, meter)?;
        let mut start = 0;
        let mut end = n.div_ceil((crate::ceil_log2(n) as usize).max(1));
        while start < n {
            b.insert_batch(&points[start..end], meter)?;
            start = end;
            end = (2 * end).min(n);
        }
        Ok(b)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn dag(&self) -> &TraceDag<TriNode> {
        &self.dag
    }

    pub fn rounds(&self) -> &[RoundLog] {
        &self.rounds
    }

    /// Trace statistics for every point located so far, in order.
    pub fn locates(&self) -> &[TraceStats] {
        &self.locates
    }

    pub fn into_parts(self) -> (Mesh, TraceDag<TriNode>) {
        (self.mesh, self.dag)
    }

    /// Locates every point against the current mesh, records it in the
    /// encroached sets it belongs to, then runs rounds until none is pending.
    /// After an error the builder should be discarded.
    pub fn insert_batch(&mut self, pts: &[[f64; 2]], meter: &mut CostMeter) -> Result<(), DtError> {
        let first = self.mesh.points.len() as u32;
        let corners = [0, 1, 2].map(|i| self.mesh.points[i]);
        for &p in pts {
            let g = snap_point(p)?;
            for i in 0..3 {
                if orient(corners[i], corners[(i + 1) % 3], g) <= 0 {
                    return Err(DtError::OutOfRange(g[0]));
                }
            }
            if !self.seen.insert(g) {
                return Err(DtError::GeneralPosition("duplicate point"));
            }
            self.mesh.points.push(g);
        }
        meter.write(2 * pts.len() as u64);
        for v in first..self.mesh.points.len() as u32 {
            let (hits, stats) = self.locate_grid(self.mesh.points[v as usize], meter)?;
            self.locates.push(stats);
            if hits.is_empty() {
                return Err(DtError::EmptyLocation(v));
            }
            for t in hits {
                let e = &mut self.mesh.triangles[t as usize].encroach;
                e.push(v);
                if e.len() == 1 {
                    self.active.push(t);
                }
            }
        }
        self.run_rounds(meter)
    }

    /// Live triangles whose circumcircle strictly contains `p`, found by
    /// tracing the DAG.
    pub fn locate_encroached(
        &self,
        p: [f64; 2],
        meter: &mut CostMeter,
    ) -> Result<(Vec<u32>, TraceStats), DtError> {
        self.locate_grid(snap_point(p)?, meter)
    }

    fn locate_grid(&self, g: GridPt, meter: &mut CostMeter) -> Result<(Vec<u32>, TraceStats), DtError> {
        let err = Cell::new(None);
        let (leaves, stats) = trace_dag::trace(&self.dag, self.visibility(g, &err), None, meter)
            .expect("no depth limit was set");
        if let Some(e) = err.take() {
            return Err(e);
        }
        Ok((leaves.iter().map(|&v| self.dag.payload(v).tri).collect(), stats))
    }

    /// The tracing predicate for point `g`: the node's triangle has `g` in
    /// its circumcircle, and the node is not the leaf of a triangle that was
    /// replaced without children. Errors are parked in `err`.
    pub fn visibility<'a>(
        &'a self,
        g: GridPt,
        err: &'a Cell<Option<DtError>>,
    ) -> impl FnMut(u32) -> bool + 'a {
        move |v| {
            let tri = self.dag.payload(v).tri;
            if !self.mesh.triangles[tri as usize].alive && self.dag.node(v).succs().is_empty() {
                return false;
            }
            match self.mesh.encroaches(tri, g) {
                Ok(b) => b,
                Err(e) => {
                    err.set(Some(e));
                    false
                }
            }
        }
    }

    fn run_rounds(&mut self, meter: &mut CostMeter) -> Result<(), DtError> {
        loop {
            let mut active = core::mem::take(&mut self.active);
            active.sort_unstable();
            active.dedup();
            let tris = &self.mesh.triangles;
            active.retain(|&t| tris[t as usize].alive && !tris[t as usize].encroach.is_empty());
            if active.is_empty() {
                return Ok(());
            }
            // Decided from the state at round start. A spoke whose twin does
            // not exist yet borders part of an unfinished cavity, whose
            // pending point is smaller, so it blocks like such a neighbour.
            let chosen: Vec<(u32, u32)> = active
                .iter()
                .filter_map(|&t| {
                    let tri = &tris[t as usize];
                    let v = tri.encroach[0];
                    meter.read(4);
                    let blocked = (0..3).any(|i| match tri.nbrs[i] {
                        Some(o) => tris[o as usize].encroach.first().is_some_and(|&m| m < v),
                        None => !is_hull_edge(tri, i),
                    });
                    (!blocked).then_some((t, v))
                })
                .collect();
            debug_assert!(!chosen.is_empty());
            self.round += 1;
            let before = meter.snapshot("");
            let created_before = self.mesh.triangles.len();
            let mut used = BTreeSet::new();
            for &(t, v) in &chosen {
                self.replace(t, v, &mut used, meter)?;
            }
            self.copy_level(used, meter);
            self.active.extend(active);
            let after = meter.snapshot(alloc::format!("round-{}", self.round));
            self.rounds.push(RoundLog {
                round: self.round,
                replaced: chosen.len(),
                created: self.mesh.triangles.len() - created_before,
                cost: before.diff(&after).expect("same meter"),
            });
        }
    }

    /// Gives each triangle that gained children as a neighbour this round a
    /// copy node at the new level, so live triangles always sit at leaves and
    /// no node has more than three children plus one copy.
    fn copy_level(&mut self, used: BTreeSet<u32>, meter: &mut CostMeter) {
        for t in used {
            let tri = &self.mesh.triangles[t as usize];
            let payload = TriNode {
                tri: t,
                level: self.round,
            };
            let node = self
                .dag
                .add_node(payload, &[tri.node], meter)
                .expect("copies keep degrees bounded");
            let tri = &mut self.mesh.triangles[t as usize];
            tri.node = node;
            tri.level = self.round;
            meter.write(2);
        }
    }

    /// Replaces `t` by triangles joining `v` to each edge of `t` that bounds
    /// `v`'s cavity.
    fn replace(
        &mut self,
        t: u32,
        v: u32,
        used: &mut BTreeSet<u32>,
        meter: &mut CostMeter,
    ) -> Result<(), DtError> {
        let tri = self.mesh.triangles[t as usize].clone();
        meter.read(TRIANGLE_WORDS);
        let pv = self.mesh.points[v as usize];
        for i in 0..3 {
            let (u, w) = (tri.verts[(i + 1) % 3], tri.verts[(i + 2) % 3]);
            let nb = tri.nbrs[i];
            debug_assert!(nb.is_some() || is_hull_edge(&tri, i));
            if let Some(o) = nb {
                meter.read(1);
                if self.mesh.triangles[o as usize].encroach.binary_search(&v).is_ok() {
                    continue;
                }
            }
            let (pu, pw) = (self.mesh.points[u as usize], self.mesh.points[w as usize]);
            if orient(pu, pw, pv) <= 0 {
                return Err(DtError::GeneralPosition("three points are collinear"));
            }
            let id = self.mesh.triangles.len() as u32;
            let other: &[u32] = nb.map_or(&[], |o| &self.mesh.triangles[o as usize].encroach);
            let mut enc = Vec::new();
            for x in merge_without(&tri.encroach, other, v) {
                meter.read(3);
                match in_circle(pu, pw, pv, self.mesh.points[x as usize]) {
                    0 => return Err(DtError::GeneralPosition("four points are cocircular")),
                    s if s > 0 => enc.push(x),
                    _ => {}
                }
            }
            meter.write(enc.len() as u64);
            let mut preds = vec![tri.node];
            if let Some(o) = nb {
                preds.push(self.mesh.triangles[o as usize].node);
                used.insert(o);
            }
            let payload = TriNode {
                tri: id,
                level: self.round,
            };
            let node = self
                .dag
                .add_node(payload, &preds, meter)
                .expect("copies keep degrees bounded");
            if !enc.is_empty() {
                self.active.push(id);
            }
            self.mesh.triangles.push(Triangle {
                verts: [u, w, v],
                nbrs: [None, None, nb],
                alive: true,
                encroach: enc,
                node,
                level: self.round,
            });
            self.mesh.live_count += 1;
            meter.write(TRIANGLE_WORDS);
            if let Some(o) = nb {
                let ot = &mut self.mesh.triangles[o as usize];
                let j = (0..3)
                    .find(|&j| ot.verts[j] != u && ot.verts[j] != w)
                    .expect("neighbour shares the edge");
                ot.nbrs[j] = Some(id);
                meter.write(1);
            }
            self.link_spoke(id, 0, w, v, meter);
            self.link_spoke(id, 1, v, u, meter);
        }
        let dead = &mut self.mesh.triangles[t as usize];
        dead.alive = false;
        self.mesh.live_count -= 1;
        meter.write(1);
        Ok(())
    }

    /// Pairs the half-edge `a → b` of triangle `t` with its twin if that
    /// already exists.
    fn link_spoke(&mut self, t: u32, slot: usize, a: u32, b: u32, meter: &mut CostMeter) {
        if let Some((t2, s2)) = self.pending.remove(&(b, a)) {
            self.mesh.triangles[t as usize].nbrs[slot] = Some(t2);
            self.mesh.triangles[t2 as usize].nbrs[s2] = Some(t);
            meter.write(1);
        } else {
            self.pending.insert((a, b), (t, slot));
        }
    }
}

/// True for the edge opposite `verts[i]` when both ends are scaffold
/// corners, i.e. an outer edge with no neighbour.
fn is_hull_edge(tri: &Triangle, i: usize) -> bool {
    tri.verts[(i + 1) % 3] < SCAFFOLD && tri.verts[(i + 2) % 3] < SCAFFOLD
}

/// Sorted union of two sorted lists, without `skip`.
fn merge_without(a: &[u32], b: &[u32], skip: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x == y => {
                i += 1;
                j += 1;
                x
            }
            (Some(&x), Some(&y)) if x < y => {
                i += 1;
                x
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (_, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        if x != skip {
            out.push(x);
        }
    }
    out
}

fn bbox(points: &[[f64; 2]]) -> ([f64; 2], [f64; 2]) {
    if points.is_empty() {
        return ([0.0; 2], [1.0; 2]);
    }
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in points {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    (lo, hi)
}

/// Triangulates `points` in the given order with a single batch.
pub fn incremental_dt(
    points: &[[f64; 2]],
    meter: &mut CostMeter,
) -> Result<(Mesh, TraceDag<TriNode>), DtError> {
    DtBuilder::run_incremental(points, meter).map(DtBuilder::into_parts)
}

/// Triangulates `points` with prefix-doubling batches.
pub fn prefix_doubling_dt(points: &[[f64; 2]], meter: &mut CostMeter) -> Result<Mesh, DtError> {
    DtBuilder::run_prefix_doubling(points, meter).map(|b| b.into_parts().0)
}

#[cfg(test)]
mod tests {
    use super::super::{cocircular_witnesses, in_circle as in_circle_f64, validate_delaunay};
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_points(n: usize, seed: u64) -> Vec<[f64; 2]> {
        let mut rng = crate::rng::seeded(seed);
        (0..n).map(|_| [rng.gen(), rng.gen()]).collect()
    }

    #[test]
    fn in_circle_examples() {
        let t = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert_eq!(in_circle_f64(t, [0.25, 0.25]), Ok(true));
        assert_eq!(in_circle_f64(t, [10.0, 10.0]), Ok(false));
        assert!(matches!(in_circle_f64(t, [1.0, 1.0]), Err(DtError::GeneralPosition(_))));
    }

    #[test]
    fn three_points_make_one_interior_triangle() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.3, 0.8]];
        let (mesh, _) = incremental_dt(&pts, &mut CostMeter::unbounded()).unwrap();
        assert_eq!(mesh.interior().count(), 1);
        assert!(validate_delaunay(&mesh, &pts));
    }

    #[test]
    fn point_inside_triangle_makes_a_fan() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.4, 1.0], [0.45, 0.3]];
        let (mesh, _) = incremental_dt(&pts, &mut CostMeter::unbounded()).unwrap();
        assert_eq!(mesh.interior().count(), 3);
        assert!(mesh.interior().all(|(_, t)| t.verts.contains(&6)));
    }

    #[test]
    fn empty_input_is_valid() {
        let b = DtBuilder::new([0.0; 2], [1.0; 2], &mut CostMeter::unbounded()).unwrap();
        assert!(validate_delaunay(b.mesh(), &[]));
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let mut m = CostMeter::unbounded();
        let dup = [[0.1, 0.1], [0.5, 0.2], [0.1, 0.1]];
        assert!(matches!(incremental_dt(&dup, &mut m), Err(DtError::GeneralPosition(_))));
        let square = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        assert!(matches!(incremental_dt(&square, &mut m), Err(DtError::GeneralPosition(_))));
        assert!(matches!(incremental_dt(&[[1e9, 0.0]], &mut m), Err(DtError::OutOfRange(_))));
        let b = DtBuilder::run_incremental(&random_points(20, 1), &mut m).unwrap();
        let p = b.mesh().point(5);
        assert!(b.locate_encroached(p, &mut m).is_err());
    }

    #[test]
    fn random_meshes_are_delaunay() {
        let pts = random_points(500, 7);
        let b = DtBuilder::run_incremental(&pts, &mut CostMeter::unbounded()).unwrap();
        assert!(validate_delaunay(b.mesh(), &pts));
        assert!(cocircular_witnesses(b.mesh()).is_empty());
        let pts = random_points(2000, 8);
        let b = DtBuilder::run_prefix_doubling(&pts, &mut CostMeter::unbounded()).unwrap();
        assert!(validate_delaunay(b.mesh(), &pts));
        assert!(b.dag().max_out_degree() <= crate::trace_dag::DEFAULT_MAX_OUT_DEGREE);
    }

    /// Flips the diagonal of a convex interior quadrilateral.
    fn flip_some_edge(mesh: &mut Mesh) -> bool {
        let ids: Vec<u32> = mesh.interior().map(|(i, _)| i).collect();
        for t1 in ids {
            let a1 = mesh.triangles[t1 as usize].clone();
            for i in 0..3 {
                let Some(t2) = a1.nbrs[i] else { continue };
                let a2 = mesh.triangles[t2 as usize].clone();
                if a2.touches_scaffold() {
                    continue;
                }
                let (a, b, c) = (a1.verts[i], a1.verts[(i + 1) % 3], a1.verts[(i + 2) % 3]);
                let j = (0..3).find(|&j| a2.verts[j] != b && a2.verts[j] != c).unwrap();
                let d = a2.verts[j];
                let p = |v: u32| mesh.points[v as usize];
                if orient(p(a), p(b), p(d)) <= 0 || orient(p(a), p(d), p(c)) <= 0 {
                    continue;
                }
                let nb_of = |t: &Triangle, opp: u32| t.nbrs[(0..3).find(|&k| t.verts[k] == opp).unwrap()];
                let (n_ab, n_ca) = (nb_of(&a1, c), nb_of(&a1, b));
                let (n_bd, n_dc) = (nb_of(&a2, c), nb_of(&a2, b));
                mesh.triangles[t1 as usize].verts = [a, b, d];
                mesh.triangles[t1 as usize].nbrs = [n_bd, Some(t2), n_ab];
                mesh.triangles[t2 as usize].verts = [a, d, c];
                mesh.triangles[t2 as usize].nbrs = [n_dc, n_ca, Some(t1)];
                for (n, from, to) in [(n_bd, t2, t1), (n_ca, t1, t2)] {
                    if let Some(n) = n {
                        for s in mesh.triangles[n as usize].nbrs.iter_mut() {
                            if *s == Some(from) {
                                *s = Some(to);
                            }
                        }
                    }
                }
                return true;
            }
        }
        false
    }

    #[test]
    fn flipped_edge_is_detected() {
        let pts = random_points(200, 3);
        let (mut mesh, _) = incremental_dt(&pts, &mut CostMeter::unbounded()).unwrap();
        assert!(flip_some_edge(&mut mesh));
        assert!(mesh.check_topology());
        assert!(!validate_delaunay(&mesh, &pts));
    }

    #[test]
    fn reruns_are_identical() {
        let pts = random_points(800, 4);
        let a = prefix_doubling_dt(&pts, &mut CostMeter::unbounded()).unwrap();
        let b = prefix_doubling_dt(&pts, &mut CostMeter::unbounded()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn both_schedules_give_the_same_triangles() {
        let pts = random_points(600, 6);
        let key = |m: &Mesh| {
            let mut v: Vec<[u32; 3]> = m
                .live()
                .map(|(_, t)| {
                    let r = (0..3).min_by_key(|&i| t.verts[i]).unwrap();
                    [t.verts[r], t.verts[(r + 1) % 3], t.verts[(r + 2) % 3]]
                })
                .collect();
            v.sort_unstable();
            v
        };
        let (a, _) = incremental_dt(&pts, &mut CostMeter::unbounded()).unwrap();
        let b = prefix_doubling_dt(&pts, &mut CostMeter::unbounded()).unwrap();
        assert_eq!(key(&a), key(&b));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn tracing_matches_scan(n in 1usize..300, seed in any::<u64>(), batch in 1usize..40) {
            let pts = random_points(n, seed);
            let mut m = CostMeter::unbounded();
            let mut b = DtBuilder::new([0.0; 2], [1.0; 2], &mut m).unwrap();
            for chunk in pts.chunks(batch) {
                for &p in chunk {
                    let mut pm = CostMeter::unbounded();
                    let (mut got, stats) = b.locate_encroached(p, &mut pm).unwrap();
                    got.sort_unstable();
                    prop_assert_eq!(&got, &b.mesh().scan_encroached(p).unwrap());
                    prop_assert!(!got.is_empty());
                    prop_assert_eq!(pm.writes(), got.len() as u64);
                    prop_assert_eq!(stats.reported, got.len() as u64);
                    let err = Cell::new(None);
                    let g = snap_point(p).unwrap();
                    prop_assert!(trace_dag::check_traceable(b.dag(), b.visibility(g, &err)));
                }
                b.insert_batch(chunk, &mut m).unwrap();
            }
            prop_assert!(validate_delaunay(b.mesh(), &pts));
            prop_assert!(b.pending.is_empty());
        }
    }
}
