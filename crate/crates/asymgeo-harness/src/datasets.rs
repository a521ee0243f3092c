//! Seeded uniform datasets. Identical arguments give identical output.

use asymgeo::aug_trees::{Interval, Point2};
use asymgeo::kd_tree::PointK;
use asymgeo::rng::{seeded, shuffle};
use rand::Rng;

use crate::formats::{Key, QueryBox};

/// `n` points uniform in `[0, 1)^k`, ids `0..n`.
pub fn points(n: usize, k: usize, seed: u64) -> Vec<PointK> {
    let mut r = seeded(seed);
    (0..n as u32)
        .map(|id| PointK::new((0..k).map(|_| r.gen::<f64>()).collect(), id))
        .collect()
}

pub fn points2(n: usize, seed: u64) -> Vec<Point2> {
    points(n, 2, seed)
        .into_iter()
        .map(|p| Point2::new(p.coords[0], p.coords[1], p.id))
        .collect()
}

/// `n` intervals with `lo` uniform in `[0, 1)` and length uniform in
/// `[0, max_len)`, ids `0..n`.
pub fn intervals(n: usize, max_len: f64, seed: u64) -> Vec<Interval> {
    let mut r = seeded(seed);
    (0..n as u32)
        .map(|id| {
            let lo: f64 = r.gen();
            Interval::new(lo, lo + r.gen::<f64>() * max_len, id)
        })
        .collect()
}

/// Bounding box of a point set, or the unit cube when it is empty.
pub fn bounds(pts: &[PointK], k: usize) -> (Vec<f64>, Vec<f64>) {
    if pts.is_empty() {
        return (vec![0.0; k], vec![1.0; k]);
    }
    let mut lo = vec![f64::INFINITY; k];
    let mut hi = vec![f64::NEG_INFINITY; k];
    for p in pts {
        for d in 0..k {
            lo[d] = lo[d].min(p.coords[d]);
            hi[d] = hi[d].max(p.coords[d]);
        }
    }
    (lo, hi)
}

/// `n` boxes whose corners are uniform inside `[lo, hi]`.
pub fn boxes(n: usize, lo: &[f64], hi: &[f64], seed: u64) -> Vec<QueryBox> {
    let mut r = seeded(seed);
    (0..n)
        .map(|_| {
            let (mut a, mut b) = (Vec::new(), Vec::new());
            for d in 0..lo.len() {
                let u = lo[d] + r.gen::<f64>() * (hi[d] - lo[d]);
                let v = lo[d] + r.gen::<f64>() * (hi[d] - lo[d]);
                a.push(u.min(v));
                b.push(u.max(v));
            }
            QueryBox { lo: a, hi: b }
        })
        .collect()
}

/// Thin planar slabs, alternately vertical and horizontal, each expected to
/// hold about one of `n` uniform points.
pub fn slabs(count: usize, n: usize, seed: u64) -> Vec<QueryBox> {
    let mut r = seeded(seed);
    let w = 1.0 / n.max(1) as f64;
    (0..count)
        .map(|i| {
            let a = r.gen::<f64>() * (1.0 - w);
            let (x, y) = if i % 2 == 0 { ((a, a + w), (0.0, 1.0)) } else { ((0.0, 1.0), (a, a + w)) };
            QueryBox {
                lo: vec![x.0, y.0],
                hi: vec![x.1, y.1],
            }
        })
        .collect()
}

/// A random permutation of `0..n` as keys.
pub fn keys(n: usize, seed: u64) -> Vec<Key> {
    let mut v: Vec<Key> = (0..n).map(|i| Key::from(i as f64)).collect();
    shuffle(&mut v, seed);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(points(4, 2, 7), points(4, 2, 7));
        assert_ne!(points(4, 2, 7), points(4, 2, 8));
        assert_eq!(keys(50, 1), keys(50, 1));
    }

    #[test]
    fn one_interval_is_ordered() {
        let v = intervals(1, 0.1, 3);
        assert_eq!(v.len(), 1);
        assert!(v[0].lo <= v[0].hi);
    }

    #[test]
    fn boxes_stay_inside_the_data() {
        let pts = points(200, 2, 1);
        let (lo, hi) = bounds(&pts, 2);
        for b in boxes(10, &lo, &hi, 2) {
            for d in 0..2 {
                assert!(lo[d] <= b.lo[d] && b.lo[d] <= b.hi[d] && b.hi[d] <= hi[d]);
            }
        }
    }
}
