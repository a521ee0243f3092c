//! Replays an update/query script against one augmented tree and checks
//! every query against a scan of the live items.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Result};
use asymgeo::aug_trees::{AlphaConfig, AugError, AugTree, Interval, IntervalTree, Point2, PriorityTree, RangeTree};
use asymgeo::CostMeter;
use serde::Serialize;

use crate::experiments::TreeKind;
use crate::formats::{self, Op};
use crate::oracles;

enum AnyTree {
    Interval(IntervalTree),
    Priority(PriorityTree),
    Range(RangeTree),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Answer {
    pub query: Vec<f64>,
    pub ids: Vec<u32>,
    pub matches_oracle: bool,
}

pub struct Replay {
    tree: AnyTree,
    intervals: BTreeMap<u32, Interval>,
    points: BTreeMap<u32, Point2>,
    next_id: u32,
    pub meter: CostMeter,
}

fn aug(e: AugError) -> anyhow::Error {
    anyhow!("{e}")
}

fn by_lo(a: &Interval, b: &Interval) -> std::cmp::Ordering {
    a.lo.total_cmp(&b.lo).then(a.id.cmp(&b.id))
}

fn by_x(a: &Point2, b: &Point2) -> std::cmp::Ordering {
    a.key().cmp(&b.key())
}

impl Replay {
    /// A tree of `kind`, built from `initial` (an interval file for the
    /// interval tree, a `k = 2` point file otherwise) or empty.
    pub fn new(kind: TreeKind, cfg: AlphaConfig, initial: Option<&Path>, omega: u64) -> Result<Self> {
        let mut meter = CostMeter::new(omega, u64::MAX);
        let mut r = Replay {
            tree: match kind {
                TreeKind::Interval => AnyTree::Interval(IntervalTree::new(cfg)),
                TreeKind::Priority => AnyTree::Priority(PriorityTree::new(cfg)),
                TreeKind::Range => AnyTree::Range(RangeTree::new(cfg)),
            },
            intervals: BTreeMap::new(),
            points: BTreeMap::new(),
            next_id: 0,
            meter: CostMeter::new(omega, u64::MAX),
        };
        if let Some(path) = initial {
            r.bulk(path, &mut meter)?;
        }
        r.meter = meter;
        Ok(r)
    }

    pub fn kind(&self) -> TreeKind {
        match self.tree {
            AnyTree::Interval(_) => TreeKind::Interval,
            AnyTree::Priority(_) => TreeKind::Priority,
            AnyTree::Range(_) => TreeKind::Range,
        }
    }

    pub fn len(&self) -> usize {
        self.intervals.len() + self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn bump(&mut self, id: u32) {
        self.next_id = self.next_id.max(id + 1);
    }

    fn bulk(&mut self, path: &Path, m: &mut CostMeter) -> Result<()> {
        let text = formats::read(path)?;
        match &mut self.tree {
            AnyTree::Interval(t) => {
                let mut v = formats::parse_intervals(&text)?;
                v.sort_by(by_lo);
                t.bulk_insert(&v, m).map_err(aug)?;
                for iv in v {
                    self.intervals.insert(iv.id, iv);
                    self.next_id = self.next_id.max(iv.id + 1);
                }
            }
            AnyTree::Priority(_) | AnyTree::Range(_) => {
                let mut v = formats::planar(&formats::parse_points(&text)?)?;
                v.sort_by(by_x);
                match &mut self.tree {
                    AnyTree::Priority(t) => t.bulk_insert(&v, m),
                    AnyTree::Range(t) => t.bulk_insert(&v, m),
                    AnyTree::Interval(_) => unreachable!(),
                }
                .map_err(aug)?;
                for p in v {
                    self.points.insert(p.id, p);
                    self.next_id = self.next_id.max(p.id + 1);
                }
            }
        }
        Ok(())
    }

    /// Applies one op; queries return their answer.
    pub fn apply(&mut self, op: &Op) -> Result<Option<Answer>> {
        let m = &mut self.meter;
        match op {
            Op::Insert(c) => {
                let id = self.next_id;
                match (&mut self.tree, &c[..]) {
                    (AnyTree::Interval(t), &[lo, hi]) => {
                        let iv = Interval::new(lo, hi, id);
                        t.insert(iv, m).map_err(aug)?;
                        self.intervals.insert(id, iv);
                    }
                    (AnyTree::Priority(t), &[x, y]) => {
                        t.insert(Point2::new(x, y, id), m).map_err(aug)?;
                        self.points.insert(id, Point2::new(x, y, id));
                    }
                    (AnyTree::Range(t), &[x, y]) => {
                        t.insert(Point2::new(x, y, id), m).map_err(aug)?;
                        self.points.insert(id, Point2::new(x, y, id));
                    }
                    _ => bail!("insert {c:?} does not fit a {} tree", self.kind().name()),
                }
                self.bump(id);
                Ok(None)
            }
            Op::Delete(id) => {
                match &mut self.tree {
                    AnyTree::Interval(t) => t.delete(*id, m),
                    AnyTree::Priority(t) => t.delete(*id, m),
                    AnyTree::Range(t) => t.delete(*id, m),
                }
                .map_err(aug)?;
                self.intervals.remove(id);
                self.points.remove(id);
                Ok(None)
            }
            Op::Query(c) => {
                let live_pts: Vec<Point2> = self.points.values().copied().collect();
                let (got, want): (Vec<u32>, Vec<u32>) = match (&self.tree, &c[..]) {
                    (AnyTree::Interval(t), &[q]) => {
                        let live: Vec<Interval> = self.intervals.values().copied().collect();
                        (t.stab(q, m).iter().map(|iv| iv.id).collect(), oracles::stab(&live, q))
                    }
                    (AnyTree::Priority(t), &[x1, x2, y0]) => (
                        t.three_sided_query(x1, x2, y0, m).iter().map(|p| p.id).collect(),
                        oracles::three_sided(&live_pts, x1, x2, y0),
                    ),
                    (AnyTree::Range(t), &[x1, x2, y1, y2]) => (
                        t.range2d_query(x1, x2, y1, y2, m).iter().map(|p| p.id).collect(),
                        oracles::range2(&live_pts, x1, x2, y1, y2),
                    ),
                    _ => bail!("query {c:?} does not fit a {} tree", self.kind().name()),
                };
                let ids = oracles::sorted(got);
                Ok(Some(Answer {
                    query: c.clone(),
                    matches_oracle: ids == want,
                    ids,
                }))
            }
            Op::Bulk(path) => {
                let mut m = std::mem::replace(&mut self.meter, CostMeter::unbounded());
                let r = self.bulk(path, &mut m);
                self.meter = m;
                r.map(|_| None)
            }
        }
    }

    pub fn run(&mut self, ops: &[Op]) -> Result<Vec<Answer>> {
        let mut out = Vec::new();
        for op in ops {
            if let Some(a) = self.apply(op)? {
                out.push(a);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_script() {
        let dir = tempfile::tempdir().unwrap();
        let bulk = dir.path().join("more.txt");
        std::fs::write(&bulk, "5 6 10\n0 9 11\n").unwrap();
        let script = "I 1 2\nI 2 3\nQ 2\nD 0\nQ 2\nB more.txt\nQ 5.5\nI 7 8\nQ 7.5\n";
        let ops = formats::parse_ops(script, dir.path()).unwrap();
        let cfg = AlphaConfig::new(2).unwrap();
        let mut r = Replay::new(TreeKind::Interval, cfg, None, 10).unwrap();
        let ans = r.run(&ops).unwrap();
        let ids: Vec<Vec<u32>> = ans.iter().map(|a| a.ids.clone()).collect();
        assert_eq!(ids, vec![vec![0, 1], vec![1], vec![10, 11], vec![11, 12]]);
        assert!(ans.iter().all(|a| a.matches_oracle));
    }

    #[test]
    fn point_scripts() {
        let cfg = AlphaConfig::new(4).unwrap();
        let ops = formats::parse_ops("I 1 5\nI 2 1\nI 3 4\nQ 1 2.5 0\nQ 1.5 3 3.5\n", Path::new(".")).unwrap();
        let mut p = Replay::new(TreeKind::Priority, cfg, None, 10).unwrap();
        let ids: Vec<Vec<u32>> = p.run(&ops).unwrap().into_iter().map(|a| a.ids).collect();
        assert_eq!(ids, vec![vec![0, 1], vec![2]]);

        let ops = formats::parse_ops("I 1 5\nI 2 1\nI 3 4\nQ 0 2 0 2\n", Path::new(".")).unwrap();
        let mut r = Replay::new(TreeKind::Range, cfg, None, 10).unwrap();
        let ans = r.run(&ops).unwrap();
        assert_eq!(ans[0].ids, vec![1]);
    }

    #[test]
    fn mismatched_arity_is_an_error() {
        let cfg = AlphaConfig::new(4).unwrap();
        let mut r = Replay::new(TreeKind::Range, cfg, None, 10).unwrap();
        assert!(r.apply(&Op::Query(vec![1.0])).is_err());
        assert!(r.apply(&Op::Insert(vec![1.0])).is_err());
    }
}
