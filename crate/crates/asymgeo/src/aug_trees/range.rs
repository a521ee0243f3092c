//! 2D range tree with inner trees only at tracked nodes.
//!
//! The skeleton is ordered by x. Every tracked node (critical, or the root)
//! holds a treap of the live points of its subtree ordered by y; other nodes
//! hold nothing. With O(log_α n) tracked nodes per path the inner trees take
//! O(n log_α n) words, and an update touches O(log_α n) of them.
//!
//! A query walks the x range like a 1D search. A subtree that lies fully
//! inside is answered from its inner tree if its root is tracked, and
//! otherwise split further until it reaches tracked nodes.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::labeling::{inspect_labels, LabelReport};
use super::skeleton::{Attach, Label, Plan, Skeleton};
use super::treap::{InnerItem, TreapArena};
use super::{check_point, check_unique, sort_charged, AlphaConfig, AugError, AugTree, PKey, Point2, ITEM_WORDS, NIL};
use crate::cost_model::CostMeter;

#[derive(Debug, Clone, Copy)]
struct ByY(Point2);

impl Ord for ByY {
    fn cmp(&self, o: &Self) -> Ordering {
        self.0.y.total_cmp(&o.0.y).then(self.0.id.cmp(&o.0.id))
    }
}

impl PartialOrd for ByY {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl PartialEq for ByY {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for ByY {}

impl InnerItem for ByY {
    const WORDS: u64 = ITEM_WORDS;
    fn id(&self) -> u32 {
        self.0.id
    }
}

#[derive(Debug, Clone, Copy)]
struct Inner(u32);

impl Default for Inner {
    fn default() -> Self {
        Inner(NIL)
    }
}

#[derive(Debug, Clone)]
pub struct RangeTree {
    cfg: AlphaConfig,
    sk: Skeleton<PKey, Inner>,
    inner: TreapArena<ByY>,
    items: BTreeMap<u32, Point2>,
}

/// Sorted build: x and y sorts, then the linear pass per tracked level.
pub fn build_range_tree(points: &[Point2], cfg: AlphaConfig, meter: &mut CostMeter) -> Result<RangeTree, AugError> {
    RangeTree::build(points, cfg, meter)
}

fn by_x(a: &Point2, b: &Point2) -> Ordering {
    a.key().cmp(&b.key())
}

/// Open key interval `(lo, hi)` of a subtree; `None` is unbounded.
type Bounds = (Option<PKey>, Option<PKey>);

fn inside(k: &PKey, b: &Bounds) -> bool {
    b.0.is_none_or(|l| l < *k) && b.1.is_none_or(|h| *k < h)
}

impl RangeTree {
    pub fn new(cfg: AlphaConfig) -> Self {
        RangeTree {
            cfg,
            sk: Skeleton::new(cfg.alpha),
            inner: TreapArena::new(),
            items: BTreeMap::new(),
        }
    }

    pub fn build(points: &[Point2], cfg: AlphaConfig, meter: &mut CostMeter) -> Result<Self, AugError> {
        let mut xs = points.to_vec();
        sort_charged(&mut xs, ITEM_WORDS, by_x, meter);
        let mut ys = points.to_vec();
        sort_charged(&mut ys, ITEM_WORDS, |a, b| ByY(*a).cmp(&ByY(*b)), meter);
        Self::build_presorted(&xs, &ys, cfg, meter)
    }

    /// Build from the same points sorted by x and by y.
    pub fn build_presorted(
        by_x_order: &[Point2],
        by_y_order: &[Point2],
        cfg: AlphaConfig,
        meter: &mut CostMeter,
    ) -> Result<Self, AugError> {
        for p in by_x_order {
            check_point(p)?;
        }
        check_unique(by_x_order, |p| p.id)?;
        if by_x_order.len() != by_y_order.len()
            || by_x_order.windows(2).any(|w| by_x(&w[0], &w[1]) != Ordering::Less)
            || by_y_order.windows(2).any(|w| ByY(w[0]) >= ByY(w[1]))
        {
            return Err(AugError::Unsorted);
        }
        let mut t = Self::new(cfg);
        for p in by_x_order {
            t.items.insert(p.id, *p);
        }
        meter.write(ITEM_WORDS * by_x_order.len() as u64);
        let keys: Vec<(PKey, bool)> = by_x_order.iter().map(|p| (p.key(), true)).collect();
        t.sk.stored = keys.len() as u64;
        t.assemble(Attach::Root, (None, None), &keys, Label::Whole, by_y_order, meter);
        Ok(t)
    }

    pub fn cfg(&self) -> AlphaConfig {
        self.cfg
    }

    pub fn points(&self) -> Vec<Point2> {
        self.items.values().copied().collect()
    }

    /// Words' worth of items held by all inner trees.
    pub fn inner_total(&self) -> usize {
        self.inner.live()
    }

    /// Builds the skeleton over `keys` at `attach`, whose key range is
    /// `bounds`, and the inner trees from `ys`: the subtree's live points
    /// sorted by y.
    fn assemble(
        &mut self,
        attach: Attach,
        bounds: Bounds,
        keys: &[(PKey, bool)],
        label: Label,
        ys: &[Point2],
        meter: &mut CostMeter,
    ) {
        let built = self.sk.build(keys, label, meter);
        self.sk.attach(attach, built.root, meter);
        self.fill(built.root, bounds, ys, meter);
    }

    /// Gives each tracked node below `u` the points of `src` in its range.
    /// A tracked node filters the list of its nearest tracked ancestor, so
    /// only inner trees are written.
    fn fill(&mut self, u: u32, b: Bounds, src: &[Point2], meter: &mut CostMeter) {
        if u == NIL {
            return;
        }
        meter.read(1);
        let (key, left, right) = {
            let n = self.sk.n(u);
            (n.key, n.left, n.right)
        };
        let mine: Vec<Point2>;
        let list = if self.sk.tracked(u) {
            meter.read(ITEM_WORDS * src.len() as u64);
            mine = src.iter().filter(|p| inside(&p.key(), &b)).copied().collect();
            let run: Vec<ByY> = mine.iter().map(|&p| ByY(p)).collect();
            let root = self.inner.build_sorted(&run, meter);
            self.sk.n_mut(u).payload = Inner(root);
            meter.write(1);
            &mine[..]
        } else {
            src
        };
        self.fill(left, (b.0, Some(key)), list, meter);
        self.fill(right, (Some(key), b.1), list, meter);
    }

    /// Key bounds of the subtree hanging at `at`.
    fn bounds_of(&self, at: Attach, meter: &mut CostMeter) -> Bounds {
        let target = match at {
            Attach::Root => return (None, None),
            Attach::Left(p) | Attach::Right(p) => p,
        };
        let pk = self.sk.n(target).key;
        let mut b: Bounds = (None, None);
        let mut u = self.sk.root;
        while u != target {
            meter.read(1);
            let n = self.sk.n(u);
            if pk < n.key {
                b.1 = Some(n.key);
                u = n.left;
            } else {
                b.0 = Some(n.key);
                u = n.right;
            }
        }
        match at {
            Attach::Left(_) => (b.0, Some(pk)),
            _ => (Some(pk), b.1),
        }
    }

    /// Rebuilds one planned subtree; returns its new root.
    fn apply(&mut self, plan: Plan<PKey>, meter: &mut CostMeter) -> u32 {
        let label = if plan.old_root == NIL {
            Label::Whole
        } else {
            self.sk.label_for(&plan)
        };
        let bounds = self.bounds_of(plan.attach, meter);
        let (keys, ids) = self.sk.plan_keys(&plan, meter);
        let old: Vec<Point2> = if plan.old_root == NIL {
            Vec::new()
        } else {
            let t = self.sk.n(plan.old_root).payload.0;
            self.inner.to_vec(t, meter).into_iter().map(|x| x.0).collect()
        };
        if plan.whole() {
            self.inner.clear();
        } else {
            for &v in &ids {
                self.inner.free_tree(self.sk.n(v).payload.0);
            }
        }
        self.sk.free_nodes(&ids);
        let mut new: Vec<Point2> = plan.new_keys.iter().map(|k| self.items[&k.id]).collect();
        meter.read(ITEM_WORDS * new.len() as u64);
        if new.len() > 1 {
            sort_charged(&mut new, ITEM_WORDS, |a, b| ByY(*a).cmp(&ByY(*b)), meter);
        }
        let ys = merge_by_y(&old, &new, meter);
        if plan.whole() {
            self.sk.stored = keys.len() as u64;
            self.sk.dead = 0;
        } else {
            self.sk.stored += plan.new_keys.len() as u64;
        }
        self.assemble(plan.attach, bounds, &keys, label, &ys, meter);
        match plan.attach {
            Attach::Root => self.sk.root,
            Attach::Left(p) => self.sk.n(p).left,
            Attach::Right(p) => self.sk.n(p).right,
        }
    }

    fn rebuild_all(&mut self, new_keys: Vec<PKey>, meter: &mut CostMeter) {
        let plan = Plan {
            attach: Attach::Root,
            old_root: self.sk.root,
            new_keys,
        };
        self.apply(plan, meter);
    }

    /// Every live point with `x1 ≤ x ≤ x2` and `y1 ≤ y ≤ y2`.
    pub fn range2d_query(&self, x1: f64, x2: f64, y1: f64, y2: f64, meter: &mut CostMeter) -> Vec<Point2> {
        let mut out = Vec::new();
        if x1.is_nan() || x2.is_nan() || y1.is_nan() || y2.is_nan() || x1 > x2 || y1 > y2 {
            return out;
        }
        let lo = PKey { x: x1, id: 0 };
        let hi = PKey { x: x2, id: u32::MAX };
        let mut buf = Vec::new();
        let mut stack = alloc::vec![(self.sk.root, (None, None))];
        while let Some((u, b)) = stack.pop() {
            if u == NIL {
                continue;
            }
            let b: Bounds = b;
            if b.1.is_some_and(|h| h <= lo) || b.0.is_some_and(|l| l >= hi) {
                continue;
            }
            meter.read(1);
            let n = self.sk.n(u);
            let covered = b.0.map_or(x1 == f64::NEG_INFINITY, |l| l >= lo)
                && b.1.map_or(x2 == f64::INFINITY, |h| h <= hi);
            if covered && self.sk.tracked(u) {
                self.inner
                    .range(n.payload.0, &|q: &ByY| q.0.y >= y1, &|q: &ByY| q.0.y <= y2, &mut buf, meter);
                continue;
            }
            if n.alive && lo <= n.key && n.key <= hi {
                meter.read(ITEM_WORDS);
                let p = self.items[&n.key.id];
                if y1 <= p.y && p.y <= y2 {
                    out.push(p);
                }
            }
            stack.push((n.left, (b.0, Some(n.key))));
            stack.push((n.right, (Some(n.key), b.1)));
        }
        out.extend(buf.into_iter().map(|q| q.0));
        meter.write(ITEM_WORDS * out.len() as u64);
        out
    }

    /// x keys in order, one read per node.
    pub fn recover_inorder(&self, meter: &mut CostMeter) -> Vec<PKey> {
        self.sk.collect(self.sk.root, meter).0.into_iter().map(|(k, _)| k).collect()
    }

    /// Structural self-check: each tracked node's inner tree holds exactly
    /// the live points of its subtree, and untracked nodes hold none.
    pub fn check(&self) -> Result<(), &'static str> {
        if !self.sk.is_search_tree() {
            return Err("skeleton is not a search tree");
        }
        let mut m = CostMeter::unbounded();
        let (_, ids) = self.sk.collect(self.sk.root, &mut m);
        let mut total = 0;
        for v in ids {
            let t = self.sk.n(v).payload.0;
            if !self.sk.tracked(v) {
                if t != NIL {
                    return Err("untracked node holds an inner tree");
                }
                continue;
            }
            if !self.inner.is_valid(t) {
                return Err("inner tree out of order");
            }
            let mut got: Vec<u32> = self.inner.to_vec(t, &mut m).into_iter().map(|q| q.0.id).collect();
            let (keys, _) = self.sk.collect(v, &mut m);
            let mut want: Vec<u32> = keys.into_iter().filter(|k| k.1).map(|k| k.0.id).collect();
            got.sort_unstable();
            want.sort_unstable();
            if got != want {
                return Err("inner tree differs from its subtree");
            }
            total += got.len();
        }
        if total != self.inner.live() {
            return Err("inner arena holds unreachable items");
        }
        if self.sk.stored - self.sk.dead != self.items.len() as u64 {
            return Err("tombstone count is stale");
        }
        Ok(())
    }
}

fn merge_by_y(a: &[Point2], b: &[Point2], meter: &mut CostMeter) -> Vec<Point2> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && ByY(a[i]) < ByY(b[j])) {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    meter.read(ITEM_WORDS * out.len() as u64);
    out
}

impl AugTree for RangeTree {
    type Item = Point2;

    /// A single insert is a bulk insert of one.
    fn insert(&mut self, item: Point2, meter: &mut CostMeter) -> Result<(), AugError> {
        self.bulk_insert(&[item], meter)
    }

    fn delete(&mut self, id: u32, meter: &mut CostMeter) -> Result<(), AugError> {
        self.bulk_delete(&[id], meter)
    }

    fn bulk_insert(&mut self, items: &[Point2], meter: &mut CostMeter) -> Result<(), AugError> {
        for p in items {
            check_point(p)?;
            if self.items.contains_key(&p.id) {
                return Err(AugError::DuplicateId(p.id));
            }
        }
        check_unique(items, |p| p.id)?;
        if items.windows(2).any(|w| by_x(&w[0], &w[1]) != Ordering::Less) {
            return Err(AugError::Unsorted);
        }
        if items.is_empty() {
            return Ok(());
        }
        let n = self.items.len();
        for p in items {
            self.items.insert(p.id, *p);
        }
        meter.write(ITEM_WORDS * items.len() as u64);
        let keys: Vec<PKey> = items.iter().map(|p| p.key()).collect();
        if items.len() >= n {
            self.rebuild_all(keys, meter);
            return Ok(());
        }
        let mut rebuilt = BTreeSet::new();
        for plan in self.sk.merge(&keys, meter) {
            let whole = plan.whole();
            rebuilt.insert(self.apply(plan, meter));
            if whole {
                return Ok(());
            }
        }
        // Tracked nodes above the rebuilt subtrees still miss the new points.
        let mut groups: BTreeMap<u32, Vec<ByY>> = BTreeMap::new();
        for p in items {
            for u in self.sk.path(&p.key(), meter) {
                if rebuilt.contains(&u) {
                    break;
                }
                if self.sk.tracked(u) {
                    groups.entry(u).or_default().push(ByY(*p));
                }
            }
        }
        for (u, mut g) in groups {
            if g.len() > 1 {
                sort_charged(&mut g, ITEM_WORDS, |a, b| a.cmp(b), meter);
            }
            let t = self.sk.n(u).payload.0;
            let nt = self.inner.insert_batch(t, &g, meter);
            if nt != t {
                meter.write(1);
            }
            self.sk.n_mut(u).payload = Inner(nt);
        }
        Ok(())
    }

    fn bulk_delete(&mut self, ids: &[u32], meter: &mut CostMeter) -> Result<(), AugError> {
        for id in ids {
            if !self.items.contains_key(id) {
                return Err(AugError::UnknownId(*id));
            }
        }
        check_unique(ids, |&id| id)?;
        for id in ids {
            let p = self.items.remove(id).expect("checked above");
            meter.read(ITEM_WORDS);
            let path = self.sk.path(&p.key(), meter);
            for &u in &path {
                if !self.sk.tracked(u) {
                    continue;
                }
                let t = self.sk.n(u).payload.0;
                let (nt, found) = self.inner.remove(t, &ByY(p), meter);
                debug_assert!(found);
                if nt != t {
                    meter.write(1);
                }
                self.sk.n_mut(u).payload = Inner(nt);
            }
            let v = *path.last().expect("key is in the skeleton");
            self.sk.n_mut(v).alive = false;
            meter.write(1);
            self.sk.dead += 1;
        }
        if self.cfg.too_many_dead(self.sk.dead, self.sk.stored) {
            self.rebuild_all(Vec::new(), meter);
        }
        Ok(())
    }

    fn len(&self) -> usize {
        self.items.len()
    }

    fn label_report(&self) -> LabelReport {
        inspect_labels(&self.sk)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    fn m() -> CostMeter {
        CostMeter::unbounded()
    }

    fn random(n: usize, seed: u64) -> Vec<Point2> {
        let mut r = seeded(seed);
        (0..n)
            .map(|i| Point2::new(r.gen_range(0.0..100.0), r.gen_range(0.0..100.0), i as u32))
            .collect()
    }

    fn ids(v: Vec<Point2>) -> Vec<u32> {
        let mut out: Vec<u32> = v.into_iter().map(|p| p.id).collect();
        out.sort_unstable();
        out
    }

    fn scan(all: &[Point2], x1: f64, x2: f64, y1: f64, y2: f64) -> Vec<u32> {
        ids(all
            .iter()
            .filter(|p| x1 <= p.x && p.x <= x2 && y1 <= p.y && p.y <= y2)
            .copied()
            .collect())
    }

    #[test]
    fn closed_rectangle_on_a_grid() {
        let pts: Vec<Point2> = (0..25).map(|i| Point2::new((i % 5) as f64, (i / 5) as f64, i)).collect();
        let t = RangeTree::build(&pts, AlphaConfig::default(), &mut m()).unwrap();
        t.check().unwrap();
        assert_eq!(ids(t.range2d_query(1.0, 2.0, 1.0, 2.0, &mut m())), vec![6, 7, 11, 12]);
        assert_eq!(t.range2d_query(f64::NEG_INFINITY, f64::INFINITY, 0.0, 4.0, &mut m()).len(), 25);
        assert!(t.range2d_query(2.5, 2.7, 0.0, 4.0, &mut m()).is_empty());
    }

    #[test]
    fn inner_trees_stay_near_n_log_alpha_n() {
        let n = 4096;
        for alpha in [2u64, 4, 16] {
            let t = RangeTree::build(&random(n, alpha), AlphaConfig::new(alpha).unwrap(), &mut m()).unwrap();
            let levels = ((n as f64).ln() / (alpha as f64).ln()).max(1.0);
            let ratio = t.inner_total() as f64 / (n as f64 * levels);
            assert!(ratio < 4.0, "alpha {alpha}: {ratio}");
        }
    }

    #[test]
    fn bulk_of_one_equals_insert() {
        let pts = random(300, 2);
        let mut a = RangeTree::build(&pts, AlphaConfig::new(2).unwrap(), &mut m()).unwrap();
        let mut b = a.clone();
        let p = Point2::new(50.5, 1.0, 1000);
        a.insert(p, &mut m()).unwrap();
        b.bulk_insert(&[p], &mut m()).unwrap();
        assert_eq!(a.recover_inorder(&mut m()), b.recover_inorder(&mut m()));
        assert_eq!(a.inner_total(), b.inner_total());
        assert_eq!(a.label_report(), b.label_report());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn random_updates_match_a_scan(
            alpha in prop::sample::select(vec![2u64, 4, 8]),
            n0 in 0usize..200,
            seed in 0u64..1000,
            ops in proptest::collection::vec((0u8..4, 0.0f64..100.0, 0.0f64..100.0, 1usize..16), 1..100),
        ) {
            let cfg = AlphaConfig::new(alpha).unwrap();
            let mut all = random(n0, seed);
            let mut t = RangeTree::build(&all, cfg, &mut m()).unwrap();
            let mut next = 10_000u32;
            for (kind, x, y, k) in ops {
                match kind {
                    0 | 1 => {
                        let p = Point2::new(x, y, next);
                        next += 1;
                        t.insert(p, &mut m()).unwrap();
                        all.push(p);
                    }
                    2 if !all.is_empty() => {
                        let gone = all.swap_remove(k * 7919 % all.len());
                        t.delete(gone.id, &mut m()).unwrap();
                    }
                    _ => {
                        let mut batch: Vec<Point2> = (0..k).map(|i| Point2::new(x + i as f64 * 0.1, y, next + i as u32)).collect();
                        next += k as u32;
                        batch.sort_by(by_x);
                        t.bulk_insert(&batch, &mut m()).unwrap();
                        all.extend(batch);
                    }
                }
                let (x1, y1) = (x.min(y), (x * 0.5).min(y));
                let (x2, y2) = (x1 + 30.0, y1 + 40.0);
                prop_assert_eq!(ids(t.range2d_query(x1, x2, y1, y2, &mut m())), scan(&all, x1, x2, y1, y2));
            }
            prop_assert_eq!(t.check(), Ok(()));
            let r = t.label_report();
            prop_assert!(r.holds(), "{:?}", r);
        }
    }
}
