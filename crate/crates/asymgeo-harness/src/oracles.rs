//! Brute-force answers used to check the indexed queries. All return sorted
//! ids.

use asymgeo::aug_trees::{Interval, Point2};
use asymgeo::kd_tree::PointK;

pub fn stab(all: &[Interval], q: f64) -> Vec<u32> {
    sorted(all.iter().filter(|iv| iv.contains(q)).map(|iv| iv.id))
}

pub fn range2(all: &[Point2], x1: f64, x2: f64, y1: f64, y2: f64) -> Vec<u32> {
    sorted(
        all.iter()
            .filter(|p| x1 <= p.x && p.x <= x2 && y1 <= p.y && p.y <= y2)
            .map(|p| p.id),
    )
}

pub fn three_sided(all: &[Point2], x1: f64, x2: f64, y0: f64) -> Vec<u32> {
    sorted(all.iter().filter(|p| x1 <= p.x && p.x <= x2 && p.y >= y0).map(|p| p.id))
}

pub fn boxed(all: &[PointK], lo: &[f64], hi: &[f64]) -> Vec<u32> {
    sorted(
        all.iter()
            .filter(|p| p.coords.iter().zip(lo.iter().zip(hi)).all(|(c, (l, h))| l <= c && c <= h))
            .map(|p| p.id),
    )
}

/// Distance from `q` to its nearest point.
pub fn nearest(all: &[PointK], q: &[f64]) -> f64 {
    all.iter().map(|p| p.dist2(q)).fold(f64::INFINITY, f64::min).sqrt()
}

pub fn sorted(ids: impl IntoIterator<Item = u32>) -> Vec<u32> {
    let mut v: Vec<u32> = ids.into_iter().collect();
    v.sort_unstable();
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_boundaries() {
        let ivs = [Interval::new(0.0, 1.0, 0), Interval::new(1.0, 2.0, 1)];
        assert_eq!(stab(&ivs, 1.0), vec![0, 1]);
        let pts = [Point2::new(1.0, 1.0, 4)];
        assert_eq!(range2(&pts, 1.0, 1.0, 1.0, 1.0), vec![4]);
        assert_eq!(three_sided(&pts, 0.0, 1.0, 1.0), vec![4]);
        assert!(three_sided(&pts, 0.0, 1.0, 1.5).is_empty());
    }

    #[test]
    fn nearest_distance() {
        let pts = [PointK::new(vec![3.0, 4.0], 0), PointK::new(vec![10.0, 0.0], 1)];
        assert_eq!(nearest(&pts, &[0.0, 0.0]), 5.0);
        assert_eq!(boxed(&pts, &[0.0, 0.0], &[5.0, 5.0]), vec![0]);
    }
}
