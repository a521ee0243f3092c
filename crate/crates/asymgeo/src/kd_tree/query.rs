use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use super::{split_cell, KdError, KdTree, PointK, NIL};
use crate::cost_model::CostMeter;

#[derive(Debug, Clone, PartialEq)]
pub struct RangeResult {
    pub points: Vec<PointK>,
    /// Nodes examined; subtrees found to lie inside the box count once.
    pub visited: usize,
}

fn cell_inside(cell: &[(f64, f64)], lo: &[f64], hi: &[f64]) -> bool {
    cell.iter()
        .zip(lo.iter().zip(hi))
        .all(|(&(a, b), (&l, &h))| l <= a && b <= h)
}

fn cell_meets(cell: &[(f64, f64)], lo: &[f64], hi: &[f64]) -> bool {
    cell.iter()
        .zip(lo.iter().zip(hi))
        .all(|(&(a, b), (&l, &h))| l <= b && a <= h)
}

fn point_inside(pt: &PointK, lo: &[f64], hi: &[f64]) -> bool {
    pt.coords
        .iter()
        .zip(lo.iter().zip(hi))
        .all(|(&c, (&l, &h))| l <= c && c <= h)
}

/// Squared distance from `q` to the nearest point of `cell`.
fn cell_dist2(cell: &[(f64, f64)], q: &[f64]) -> f64 {
    cell.iter()
        .zip(q)
        .map(|(&(a, b), &c)| {
            let d = if c < a {
                a - c
            } else if c > b {
                c - b
            } else {
                0.0
            };
            d * d
        })
        .sum()
}

impl KdTree {
    /// Live points inside the closed box `[lo, hi]`.
    pub fn range_query(
        &self,
        lo: &[f64],
        hi: &[f64],
        meter: &mut CostMeter,
    ) -> Result<RangeResult, KdError> {
        let k = self.cfg.k;
        if lo.len() != k || hi.len() != k || lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
            return Err(KdError::InvalidBox);
        }
        let mut out = RangeResult {
            points: Vec::new(),
            visited: 0,
        };
        if self.root == NIL || !cell_meets(&self.bbox, lo, hi) {
            return Ok(out);
        }
        let mut stack = vec![(self.root, self.bbox.clone())];
        while let Some((v, cell)) = stack.pop() {
            out.visited += 1;
            meter.read(1);
            let node = &self.nodes[v as usize];
            if cell_inside(&cell, lo, hi) {
                let before = out.points.len();
                let mut sub = Vec::new();
                self.collect(v, &mut sub);
                out.points
                    .extend(sub.into_iter().filter(|p| !self.deleted.contains(&p.id)));
                let got = (out.points.len() - before) as u64;
                meter.read(got * (k as u64 + 1));
                meter.write(got);
                continue;
            }
            if node.is_leaf() {
                for pt in &node.buffer {
                    meter.read(pt.words());
                    if point_inside(pt, lo, hi) && !self.deleted.contains(&pt.id) {
                        out.points.push(pt.clone());
                        meter.write(1);
                    }
                }
                continue;
            }
            let (lc, rc) = split_cell(&cell, node.split_dim, node.split_val);
            if cell_meets(&rc, lo, hi) {
                stack.push((node.right, rc));
            }
            if cell_meets(&lc, lo, hi) {
                stack.push((node.left, lc));
            }
        }
        Ok(out)
    }

    /// A live point within `(1 + epsilon)` of the nearest one to `q`, and its
    /// distance.
    pub fn ann_query(
        &self,
        q: &[f64],
        epsilon: f64,
        meter: &mut CostMeter,
    ) -> Result<(PointK, f64), KdError> {
        if q.len() != self.cfg.k {
            return Err(KdError::Dimension {
                expected: self.cfg.k,
                got: q.len(),
            });
        }
        if self.root == NIL {
            return Err(KdError::Empty);
        }
        let slack = (1.0 + epsilon.max(0.0)) * (1.0 + epsilon.max(0.0));
        let mut best: Option<(f64, &PointK)> = None;
        // Non-negative floats order like their bit patterns.
        // Heap entries index into `frames`, which holds each node's cell.
        let mut heap = BinaryHeap::new();
        let mut frames = vec![(self.root, self.bbox.clone())];
        heap.push(Reverse((cell_dist2(&self.bbox, q).to_bits(), 0usize)));
        while let Some(Reverse((d, f))) = heap.pop() {
            let d = f64::from_bits(d);
            let (v, ref cell) = frames[f];
            if best.is_some_and(|(b, _)| d * slack >= b) {
                break;
            }
            meter.read(1);
            let node = &self.nodes[v as usize];
            if node.is_leaf() {
                for pt in &node.buffer {
                    meter.read(pt.words());
                    if self.deleted.contains(&pt.id) {
                        continue;
                    }
                    let d2 = pt.dist2(q);
                    if best.is_none_or(|(b, _)| d2 < b) {
                        best = Some((d2, pt));
                    }
                }
                continue;
            }
            let (lc, rc) = split_cell(cell, node.split_dim, node.split_val);
            heap.push(Reverse((cell_dist2(&lc, q).to_bits(), frames.len())));
            frames.push((node.left, lc));
            heap.push(Reverse((cell_dist2(&rc, q).to_bits(), frames.len())));
            frames.push((node.right, rc));
        }
        best.map(|(d2, p)| (p.clone(), libm::sqrt(d2)))
            .ok_or(KdError::Empty)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kd_tree::{build_batched, build_classic, KdConfig};
    use proptest::prelude::*;
    use rand::Rng;

    fn random_points(n: usize, k: usize, seed: u64) -> Vec<PointK> {
        let mut rng = crate::rng::seeded(seed);
        (0..n as u32)
            .map(|id| PointK::new((0..k).map(|_| rng.gen::<f64>()).collect(), id))
            .collect()
    }

    fn scan_box(pts: &[PointK], lo: &[f64], hi: &[f64]) -> Vec<u32> {
        let mut ids: Vec<u32> = pts
            .iter()
            .filter(|p| (0..lo.len()).all(|d| lo[d] <= p.coords[d] && p.coords[d] <= hi[d]))
            .map(|p| p.id)
            .collect();
        ids.sort_unstable();
        ids
    }

    fn ids(r: &RangeResult) -> Vec<u32> {
        let mut v: Vec<u32> = r.points.iter().map(|p| p.id).collect();
        v.sort_unstable();
        v
    }

    #[test]
    fn whole_box_returns_everything() {
        let pts = random_points(200, 2, 1);
        let t = build_classic(&pts, &KdConfig::new(2), &mut CostMeter::unbounded()).unwrap();
        let r = t.range_query(&[0.0, 0.0], &[1.0, 1.0], &mut CostMeter::unbounded()).unwrap();
        assert_eq!(r.points.len(), 200);
        assert_eq!(r.visited, 1);
    }

    #[test]
    fn box_outside_is_empty() {
        let pts = random_points(200, 2, 1);
        let t = build_classic(&pts, &KdConfig::new(2), &mut CostMeter::unbounded()).unwrap();
        let r = t.range_query(&[2.0, 2.0], &[3.0, 3.0], &mut CostMeter::unbounded()).unwrap();
        assert!(r.points.is_empty());
    }

    #[test]
    fn inverted_box_is_rejected() {
        let pts = random_points(10, 2, 1);
        let t = build_classic(&pts, &KdConfig::new(2), &mut CostMeter::unbounded()).unwrap();
        assert_eq!(
            t.range_query(&[0.5, 0.0], &[0.4, 1.0], &mut CostMeter::unbounded()),
            Err(KdError::InvalidBox)
        );
    }

    #[test]
    fn stored_point_is_its_own_neighbour() {
        let pts = random_points(500, 3, 2);
        let t = build_batched(&pts, &KdConfig::new(3), &mut CostMeter::unbounded()).unwrap();
        let (p, d) = t.ann_query(&pts[77].coords, 0.0, &mut CostMeter::unbounded()).unwrap();
        assert_eq!((p.id, d), (77, 0.0));
    }

    #[test]
    fn single_point_tree() {
        let pts = random_points(1, 2, 2);
        let t = build_batched(&pts, &KdConfig::new(2), &mut CostMeter::unbounded()).unwrap();
        let (p, _) = t.ann_query(&[5.0, 5.0], 0.5, &mut CostMeter::unbounded()).unwrap();
        assert_eq!(p.id, 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn range_matches_scan(n in 1usize..400, k in 1usize..4, seed in any::<u64>(), p in 1usize..50,
                              boxes in proptest::collection::vec(proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 3), 10)) {
            let pts = random_points(n, k, seed);
            let t = build_batched(&pts, &KdConfig::new(k).with_p(p), &mut CostMeter::unbounded()).unwrap();
            for b in boxes {
                let lo: Vec<f64> = b[..k].iter().map(|&(a, c)| a.min(c)).collect();
                let hi: Vec<f64> = b[..k].iter().map(|&(a, c)| a.max(c)).collect();
                let r = t.range_query(&lo, &hi, &mut CostMeter::unbounded()).unwrap();
                prop_assert_eq!(ids(&r), scan_box(&pts, &lo, &hi));
            }
        }

        #[test]
        fn ann_within_factor(n in 1usize..400, k in 1usize..4, seed in any::<u64>(), eps in prop_oneof![Just(0.0), Just(0.5), 0.0f64..2.0],
                             queries in proptest::collection::vec(proptest::collection::vec(-0.5f64..1.5, 3), 10)) {
            let pts = random_points(n, k, seed);
            let t = build_classic(&pts, &KdConfig::new(k), &mut CostMeter::unbounded()).unwrap();
            for q in queries {
                let q = &q[..k];
                let exact = pts.iter().map(|p| p.dist2(q)).fold(f64::INFINITY, f64::min).sqrt();
                let (p, d) = t.ann_query(q, eps, &mut CostMeter::unbounded()).unwrap();
                prop_assert!((p.dist2(q).sqrt() - d).abs() < 1e-12);
                prop_assert!(d <= (1.0 + eps) * exact + 1e-12);
            }
        }
    }
}
