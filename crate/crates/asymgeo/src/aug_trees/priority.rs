//! Priority search tree for three-sided queries `x1 ≤ x ≤ x2, y ≥ y0`.
//!
//! Nodes split the x range by a key. Only critical nodes (and leaves added
//! by insertions) hold a point; secondary nodes just split. Held points are
//! in heap order on y, so a query prunes any holder below `y0`.
//!
//! The static build takes points sorted by x and keeps them in a tournament
//! tree keyed on y. A critical node takes the top point of its range; the
//! rest is split evenly by rank. Deletions from the tournament only refresh
//! ancestors inside the current range, which keeps the build at O(n) writes.
//!
//! A deletion promotes the best point from the next holders down, through
//! secondary nodes. When nothing is left below, the holder stays as an empty
//! dummy; its subtree is then empty too. Too many dummies trigger a rebuild.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::labeling::{inspect_labels, marks, rebuild_cap, LabelReport, Labeled};
use super::tournament::TournamentTree;
use super::{check_point, check_unique, sort_charged, AlphaConfig, AugError, AugTree, PKey, Point2, ITEM_WORDS, NIL};
use crate::cost_model::CostMeter;

/// Split key, two links, role, weight pair and the held point.
const PNODE_WORDS: u64 = 10;

/// Heap order: higher y first, then smaller id.
#[derive(Debug, Clone, Copy)]
struct Prio(Point2);

impl Ord for Prio {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.y.total_cmp(&self.0.y).then(self.0.id.cmp(&o.0.id))
    }
}

impl PartialOrd for Prio {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl PartialEq for Prio {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for Prio {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Critical,
    Secondary,
    /// A leaf added by an insertion: holds a point, carries no label.
    Fresh,
}

#[derive(Debug, Clone)]
struct PNode {
    split: PKey,
    left: u32,
    right: u32,
    point: Option<Point2>,
    role: Role,
    weight: u64,
    initial: u64,
}

impl PNode {
    fn holder(&self) -> bool {
        self.role != Role::Secondary
    }
}

#[derive(Debug, Clone)]
pub struct PriorityTree {
    cfg: AlphaConfig,
    nodes: Vec<PNode>,
    free: Vec<u32>,
    root: u32,
    items: BTreeMap<u32, Point2>,
    /// Holders, and holders without a point.
    slots: u64,
    dummies: u64,
}

/// Sorted build: x sort, then [`PriorityTree::build_presorted`].
pub fn build_priority_tree(points: &[Point2], cfg: AlphaConfig, meter: &mut CostMeter) -> Result<PriorityTree, AugError> {
    PriorityTree::build(points, cfg, meter)
}

fn by_x(a: &Point2, b: &Point2) -> Ordering {
    a.key().cmp(&b.key())
}

/// Tournament tree whose own writes are charged only when it lives in large
/// memory; its reads are always charged.
struct Tour {
    t: TournamentTree<Prio>,
    scratch: bool,
}

impl Tour {
    fn new(pts: &[Point2], scratch: bool, meter: &mut CostMeter) -> Self {
        let mut own = CostMeter::unbounded();
        let t = TournamentTree::new(pts.iter().map(|&p| Prio(p)).collect(), &mut own);
        let mut tour = Tour { t, scratch };
        tour.settle(&own, meter);
        tour
    }

    fn settle(&mut self, own: &CostMeter, meter: &mut CostMeter) {
        meter.read(own.reads());
        if !self.scratch {
            meter.write(own.writes());
        }
    }

    fn take_top(&mut self, lo: usize, hi: usize, meter: &mut CostMeter) -> usize {
        let mut own = CostMeter::unbounded();
        let a = self.t.range_min(lo, hi, &mut own).ok().flatten().expect("range holds a valid slot");
        self.t.delete_scoped(a, lo, hi, &mut own).expect("slot is valid and in scope");
        self.settle(&own, meter);
        a
    }

    fn kth(&mut self, lo: usize, hi: usize, k: usize, meter: &mut CostMeter) -> usize {
        let mut own = CostMeter::unbounded();
        let s = self.t.kth_valid(lo, hi, k, &mut own).expect("rank within the valid count");
        self.settle(&own, meter);
        s
    }
}

/// Critical nodes in a perfectly balanced subtree of `k` nodes labeled
/// with the marking rule; `sib` is its sibling's weight.
fn capacity(k: usize, sib: Option<u64>, alpha: u64, cap: u64, memo: &mut BTreeMap<(usize, Option<u64>), usize>) -> usize {
    if k == 0 {
        return 0;
    }
    if let Some(&c) = memo.get(&(k, sib)) {
        return c;
    }
    let (kl, kr) = halves(k);
    let c = marks(k as u64 + 1, sib, alpha, cap) as usize
        + capacity(kl, Some(kr as u64 + 1), alpha, cap, memo)
        + capacity(kr, Some(kl as u64 + 1), alpha, cap, memo);
    memo.insert((k, sib), c);
    c
}

/// Node counts of the two subtrees below a balanced root over `k` nodes.
fn halves(k: usize) -> (usize, usize) {
    (k / 2, k - 1 - k / 2)
}

/// Fewest nodes whose balanced labeled shape has room for `nv` points.
/// Capacity grows monotonically with the node count.
fn shape_size(nv: usize, alpha: u64, cap: u64) -> usize {
    let fits = |k: usize| capacity(k, None, alpha, cap, &mut BTreeMap::new()) >= nv;
    let mut hi = nv.max(1);
    while !fits(hi) {
        hi *= 2;
    }
    let mut lo = nv;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if fits(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// One pending subtree of a build: its slice of the x-sorted array, the
/// points still valid in it, its node count, its sibling's weight and the
/// key every point in it exceeds.
#[derive(Clone, Copy)]
struct Frame {
    lo: usize,
    hi: usize,
    nv: usize,
    k: usize,
    sib: Option<u64>,
    floor: PKey,
}

const BOTTOM: PKey = PKey {
    x: f64::NEG_INFINITY,
    id: 0,
};

impl PriorityTree {
    pub fn new(cfg: AlphaConfig) -> Self {
        PriorityTree {
            cfg,
            nodes: Vec::new(),
            free: Vec::new(),
            root: NIL,
            items: BTreeMap::new(),
            slots: 0,
            dummies: 0,
        }
    }

    pub fn build(points: &[Point2], cfg: AlphaConfig, meter: &mut CostMeter) -> Result<Self, AugError> {
        let mut xs = points.to_vec();
        sort_charged(&mut xs, ITEM_WORDS, by_x, meter);
        Self::build_presorted(&xs, cfg, meter)
    }

    /// Linear-write build from points sorted by x.
    pub fn build_presorted(points: &[Point2], cfg: AlphaConfig, meter: &mut CostMeter) -> Result<Self, AugError> {
        for p in points {
            check_point(p)?;
        }
        check_unique(points, |p| p.id)?;
        if points.windows(2).any(|w| by_x(&w[0], &w[1]) != Ordering::Less) {
            return Err(AugError::Unsorted);
        }
        let mut t = Self::new(cfg);
        for p in points {
            t.items.insert(p.id, *p);
        }
        meter.write(ITEM_WORDS * points.len() as u64);
        t.rebuild_whole(points, meter);
        Ok(t)
    }

    pub fn cfg(&self) -> AlphaConfig {
        self.cfg
    }

    pub fn points(&self) -> Vec<Point2> {
        self.items.values().copied().collect()
    }

    /// Holder nodes without a point.
    pub fn dummies(&self) -> u64 {
        self.dummies
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len() - self.free.len()
    }

    fn n(&self, v: u32) -> &PNode {
        &self.nodes[v as usize]
    }

    fn n_mut(&mut self, v: u32) -> &mut PNode {
        &mut self.nodes[v as usize]
    }

    fn tracked(&self, v: u32) -> bool {
        v == self.root || self.n(v).role == Role::Critical
    }

    fn alloc(&mut self, node: PNode, meter: &mut CostMeter) -> u32 {
        meter.write(PNODE_WORDS);
        match self.free.pop() {
            Some(i) => {
                self.nodes[i as usize] = node;
                i
            }
            None => {
                self.nodes.push(node);
                (self.nodes.len() - 1) as u32
            }
        }
    }

    fn rebuild_whole(&mut self, sorted: &[Point2], meter: &mut CostMeter) {
        self.nodes.clear();
        self.free.clear();
        self.slots = 0;
        self.dummies = 0;
        let (root, w) = self.build_range(sorted, u64::MAX, meter);
        self.root = root;
        if root != NIL {
            let r = self.n_mut(root);
            r.weight = w;
            r.initial = w;
        }
    }

    /// Builds a subtree over `sorted` (by x) with nothing marked at or above
    /// `cap`; returns its root and weight.
    ///
    /// The shape is the balanced labeled tree with the fewest nodes whose
    /// critical nodes can hold every point. Points are spread over the two
    /// sides in proportion to their capacity; the few critical nodes left
    /// over become dummies, always in subtrees without points.
    fn build_range(&mut self, sorted: &[Point2], cap: u64, meter: &mut CostMeter) -> (u32, u64) {
        let k = shape_size(sorted.len(), self.cfg.alpha, cap);
        self.build_shape(sorted, k, cap, meter)
    }

    /// Same, on a balanced shape of `k ≥ shape_size` nodes.
    fn build_shape(&mut self, sorted: &[Point2], k: usize, cap: u64, meter: &mut CostMeter) -> (u32, u64) {
        if sorted.is_empty() {
            return (NIL, 1);
        }
        let mut tour = Tour::new(sorted, false, meter);
        // Two capacity entries per level.
        let mut memo = BTreeMap::new();
        let top = Frame {
            lo: 0,
            hi: sorted.len(),
            nv: sorted.len(),
            k,
            sib: None,
            floor: BOTTOM,
        };
        let root = self.build_rec(&mut tour, sorted, top, cap, &mut memo, meter);
        (root, k as u64 + 1)
    }

    fn build_rec(
        &mut self,
        tour: &mut Tour,
        pts: &[Point2],
        f: Frame,
        cap: u64,
        memo: &mut BTreeMap<(usize, Option<u64>), usize>,
        meter: &mut CostMeter,
    ) -> u32 {
        if f.k == 0 {
            debug_assert_eq!(f.nv, 0);
            return NIL;
        }
        if f.nv > 0 && f.hi - f.lo - f.nv > f.nv {
            // Mostly holes: continue on a compacted copy in small memory.
            meter.read((f.hi - f.lo) as u64);
            let sub: Vec<Point2> = (f.lo..f.hi).filter(|&i| tour.t.is_valid(i)).map(|i| pts[i]).collect();
            let scope = meter.scratch_scope(ITEM_WORDS * f.nv as u64 + 4 * f.nv.next_power_of_two() as u64);
            let mut inner = Tour::new(&sub, true, meter);
            let g = Frame {
                lo: 0,
                hi: f.nv,
                ..f
            };
            let out = self.build_rec(&mut inner, &sub, g, cap, memo, meter);
            meter.release(scope);
            return out;
        }
        let alpha = self.cfg.alpha;
        let w = f.k as u64 + 1;
        let crit = marks(w, f.sib, alpha, cap);
        let (kl, kr) = halves(f.k);
        let (wl, wr) = (kl as u64 + 1, kr as u64 + 1);
        let cl = capacity(kl, Some(wr), alpha, cap, memo);
        let cr = capacity(kr, Some(wl), alpha, cap, memo);
        let point = (crit && f.nv > 0).then(|| pts[tour.take_top(f.lo, f.hi, meter)]);
        let rest = f.nv - point.is_some() as usize;
        debug_assert!(rest <= cl + cr);
        let pl = if rest == 0 {
            0
        } else {
            (rest * cl).div_ceil(cl + cr).clamp(rest.saturating_sub(cr), cl)
        };
        // Left takes the first `pl` valid slots.
        let (split, mid) = if rest == 0 {
            (point.map_or(f.floor, |p| p.key()), f.hi)
        } else if pl == 0 {
            (f.floor, f.lo)
        } else {
            let s = tour.kth(f.lo, f.hi, pl, meter);
            (pts[s].key(), s + 1)
        };
        let left = Frame {
            hi: mid,
            nv: pl,
            k: kl,
            sib: Some(wr),
            ..f
        };
        let right = Frame {
            lo: mid,
            nv: rest - pl,
            k: kr,
            sib: Some(wl),
            floor: split,
            ..f
        };
        let l = self.build_rec(tour, pts, left, cap, memo, meter);
        let r = self.build_rec(tour, pts, right, cap, memo, meter);
        if crit {
            self.slots += 1;
            if point.is_none() {
                self.dummies += 1;
            }
        }
        let node = PNode {
            split,
            left: l,
            right: r,
            point,
            role: if crit { Role::Critical } else { Role::Secondary },
            weight: w,
            initial: w,
        };
        self.alloc(node, meter)
    }

    /// Points of the subtree at `v` sorted by key. Each point is routed from
    /// its holder down to the empty slot its key falls in; the slots are in
    /// key order, so one bucket pass sorts them.
    pub fn recover_inorder(&self, v: u32, meter: &mut CostMeter) -> Vec<Point2> {
        // Number the empty child slots left to right.
        let mut slot_of: BTreeMap<(u32, bool), usize> = BTreeMap::new();
        let mut holders = Vec::new();
        let mut stack = Vec::new();
        let mut cur = v;
        let mut next = 0;
        loop {
            while cur != NIL {
                meter.read(1);
                stack.push(cur);
                let n = self.n(cur);
                if n.left == NIL {
                    slot_of.insert((cur, false), next);
                    next += 1;
                }
                cur = n.left;
            }
            match stack.pop() {
                Some(u) => {
                    let n = self.n(u);
                    if let Some(p) = n.point {
                        holders.push((u, p));
                    }
                    if n.right == NIL {
                        slot_of.insert((u, true), next);
                        next += 1;
                    }
                    cur = n.right;
                }
                None => break,
            }
        }
        let mut buckets: Vec<Vec<Point2>> = vec![Vec::new(); next];
        for (u, p) in holders {
            let k = p.key();
            let mut at = u;
            loop {
                meter.read(1);
                let n = self.n(at);
                let right = k > n.split;
                let c = if right { n.right } else { n.left };
                if c == NIL {
                    buckets[slot_of[&(at, right)]].push(p);
                    break;
                }
                at = c;
            }
        }
        let mut out = Vec::new();
        for mut b in buckets {
            if b.len() > 1 {
                sort_charged(&mut b, ITEM_WORDS, by_x, meter);
            }
            out.extend(b);
        }
        meter.write(ITEM_WORDS * out.len() as u64);
        out
    }

    /// Frees the subtree at `v`; returns its weight, holders and dummies.
    fn free_subtree(&mut self, v: u32) -> (u64, u64, u64) {
        let (mut nodes, mut holders, mut dummies) = (0, 0, 0);
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            if u == NIL {
                continue;
            }
            let n = self.n(u);
            nodes += 1;
            if n.holder() {
                holders += 1;
                if n.point.is_none() {
                    dummies += 1;
                }
            }
            stack.push(n.left);
            stack.push(n.right);
            self.free.push(u);
        }
        (nodes + 1, holders, dummies)
    }

    /// Rebuilds the subtree at `path[at]`, hung below `path[at - 1]`.
    /// Rebuilds the subtree at `path[at]`, hung below `path[at - 1]`.
    ///
    /// A partial rebuild never makes the subtree lighter, as with a search
    /// tree rebuilt over the same keys; otherwise a shrunken root could fall
    /// under the marking cap right below its critical parent. If the new
    /// shape needs more nodes than before, ancestors grow and the topmost
    /// one that doubles is rebuilt in turn.
    fn rebuild_at(&mut self, path: &[u32], at: usize, meter: &mut CostMeter) {
        let mut at = at;
        loop {
            let v = path[at];
            if at == 0 {
                let pts = self.recover_inorder(v, meter);
                self.rebuild_whole(&pts, meter);
                return;
            }
            let cap = rebuild_cap(self.n(v).initial, self.cfg.alpha);
            let pts = self.recover_inorder(v, meter);
            let (old_w, holders, dummies) = self.free_subtree(v);
            self.slots -= holders;
            self.dummies -= dummies;
            let k = shape_size(pts.len(), self.cfg.alpha, cap).max(old_w as usize - 1);
            let (nv, new_w) = self.build_shape(&pts, k, cap, meter);
            let parent = path[at - 1];
            let p = self.n_mut(parent);
            if p.left == v {
                p.left = nv;
            } else {
                p.right = nv;
            }
            meter.write(1);
            let mut again = None;
            for (i, &u) in path[..at].iter().enumerate() {
                if self.tracked(u) && new_w != old_w {
                    let n = self.n_mut(u);
                    n.weight = n.weight + new_w - old_w;
                    meter.write(1);
                    if again.is_none() && n.weight >= 2 * n.initial {
                        again = Some(i);
                    }
                }
            }
            // A rebuilt critical root may grow to twice its new weight before
            // its next rebuild; the critical parent only keeps 1.5x ahead if
            // it starts at 2w-1 or more. Otherwise rebuild the parent too.
            let lift = || {
                (self.n(nv).role == Role::Critical).then_some(())?;
                (1..at)
                    .rev()
                    .find(|&i| self.n(path[i]).role == Role::Critical)
                    .filter(|&i| self.n(path[i]).weight + 1 < 2 * new_w)
            };
            match again.or_else(lift) {
                Some(i) => at = i,
                None => return,
            }
        }
    }

    fn insert_one(&mut self, p: Point2, meter: &mut CostMeter) {
        if self.root == NIL {
            self.rebuild_whole(&[p], meter);
            return;
        }
        let mut carried = p;
        let mut path = Vec::new();
        let mut u = self.root;
        loop {
            meter.read(1);
            path.push(u);
            if self.n(u).holder() {
                match self.n(u).point {
                    None => {
                        self.n_mut(u).point = Some(carried);
                        meter.write(ITEM_WORDS);
                        self.dummies -= 1;
                        return;
                    }
                    Some(q) if Prio(carried) < Prio(q) => {
                        self.n_mut(u).point = Some(carried);
                        meter.write(ITEM_WORDS);
                        carried = q;
                    }
                    Some(_) => {}
                }
            }
            let n = self.n(u);
            let right = carried.key() > n.split;
            let c = if right { n.right } else { n.left };
            if c == NIL {
                let leaf = PNode {
                    split: carried.key(),
                    left: NIL,
                    right: NIL,
                    point: Some(carried),
                    role: Role::Fresh,
                    weight: 2,
                    initial: 2,
                };
                let id = self.alloc(leaf, meter);
                let n = self.n_mut(u);
                if right {
                    n.right = id;
                } else {
                    n.left = id;
                }
                meter.write(1);
                self.slots += 1;
                break;
            }
            u = c;
        }
        // One more node below every node on the path; rebuild at the
        // topmost tracked node that doubles.
        for i in 0..path.len() {
            let v = path[i];
            if !self.tracked(v) {
                continue;
            }
            meter.read(1);
            let n = self.n(v);
            if n.weight + 1 >= 2 * n.initial {
                self.n_mut(v).weight += 1;
                self.rebuild_at(&path, i, meter);
                return;
            }
            self.n_mut(v).weight += 1;
            meter.write(1);
        }
    }

    fn delete_one(&mut self, p: Point2, meter: &mut CostMeter) {
        let k = p.key();
        let mut u = self.root;
        loop {
            meter.read(1);
            let n = self.n(u);
            if n.point.is_some_and(|q| q.id == p.id) {
                break;
            }
            u = if k > n.split { n.right } else { n.left };
            debug_assert!(u != NIL, "point lies on its key's route");
        }
        loop {
            // Best point among the next holders below u.
            let mut best: Option<(u32, Point2)> = None;
            let mut stack = vec![self.n(u).left, self.n(u).right];
            while let Some(c) = stack.pop() {
                if c == NIL {
                    continue;
                }
                meter.read(1);
                let n = self.n(c);
                if n.holder() {
                    if let Some(q) = n.point {
                        if best.is_none_or(|(_, b)| Prio(q) < Prio(b)) {
                            best = Some((c, q));
                        }
                    }
                } else {
                    stack.push(n.left);
                    stack.push(n.right);
                }
            }
            match best {
                Some((c, q)) => {
                    self.n_mut(u).point = Some(q);
                    meter.write(ITEM_WORDS);
                    u = c;
                }
                None => {
                    self.n_mut(u).point = None;
                    meter.write(1);
                    self.dummies += 1;
                    return;
                }
            }
        }
    }

    /// Points with `x1 ≤ x ≤ x2` and `y ≥ y0`.
    pub fn three_sided_query(&self, x1: f64, x2: f64, y0: f64, meter: &mut CostMeter) -> Vec<Point2> {
        let mut out = Vec::new();
        if x1.is_nan() || x2.is_nan() || y0.is_nan() || x1 > x2 {
            return out;
        }
        let lo = PKey { x: x1, id: 0 };
        let hi = PKey { x: x2, id: u32::MAX };
        let mut stack = vec![self.root];
        while let Some(u) = stack.pop() {
            if u == NIL {
                continue;
            }
            meter.read(1);
            let n = self.n(u);
            if n.holder() {
                match n.point {
                    // An empty holder has an empty subtree.
                    None => continue,
                    Some(q) if q.y < y0 => continue,
                    Some(q) => {
                        if x1 <= q.x && q.x <= x2 {
                            out.push(q);
                        }
                    }
                }
            }
            if lo <= n.split {
                stack.push(n.left);
            }
            if n.split < hi {
                stack.push(n.right);
            }
        }
        meter.write(ITEM_WORDS * out.len() as u64);
        out
    }

    /// Structural self-check: heap order, routing, empty dummies and the
    /// holder counters.
    pub fn check(&self) -> Result<(), &'static str> {
        if self.root == NIL {
            return if self.items.is_empty() { Ok(()) } else { Err("points but no root") };
        }
        let mut seen = 0usize;
        let (mut slots, mut dummies) = (0u64, 0u64);
        // (node, key bounds, best point allowed above)
        let mut stack: Vec<(u32, Option<PKey>, Option<PKey>, Option<Prio>)> = vec![(self.root, None, None, None)];
        while let Some((u, lo, hi, above)) = stack.pop() {
            if u == NIL {
                continue;
            }
            let n = self.n(u);
            let mut above = above;
            if n.holder() {
                slots += 1;
                match n.point {
                    None => {
                        dummies += 1;
                        if self.count_points(u) != 0 {
                            return Err("dummy with points below");
                        }
                    }
                    Some(q) => {
                        let k = q.key();
                        if lo.is_some_and(|l| k <= l) || hi.is_some_and(|h| k > h) {
                            return Err("point outside its node's key range");
                        }
                        if above.is_some_and(|a| Prio(q) < a) {
                            return Err("heap order broken");
                        }
                        if self.items.get(&q.id) != Some(&q) {
                            return Err("held point missing from the id index");
                        }
                        above = Some(Prio(q));
                        seen += 1;
                    }
                }
            }
            stack.push((n.left, lo, Some(n.split), above));
            stack.push((n.right, Some(n.split), hi, above));
        }
        if seen != self.items.len() {
            return Err("held points differ from the id index");
        }
        if (slots, dummies) != (self.slots, self.dummies) {
            return Err("holder counters are stale");
        }
        Ok(())
    }

    fn count_points(&self, v: u32) -> usize {
        let mut c = 0;
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            if u != NIL {
                c += self.n(u).point.is_some() as usize;
                stack.push(self.n(u).left);
                stack.push(self.n(u).right);
            }
        }
        c
    }

    pub fn root_id(&self) -> u32 {
        self.root
    }
}

impl Labeled for PriorityTree {
    fn root(&self) -> u32 {
        self.root
    }

    fn id_bound(&self) -> usize {
        self.nodes.len()
    }

    fn children(&self, v: u32) -> [u32; 2] {
        [self.n(v).left, self.n(v).right]
    }

    fn is_critical(&self, v: u32) -> bool {
        self.n(v).role == Role::Critical
    }

    fn tracked_weight(&self, v: u32) -> u64 {
        self.n(v).weight
    }

    fn alpha(&self) -> u64 {
        self.cfg.alpha
    }
}

impl AugTree for PriorityTree {
    type Item = Point2;

    /// A single insert is a bulk insert of one.
    fn insert(&mut self, item: Point2, meter: &mut CostMeter) -> Result<(), AugError> {
        self.bulk_insert(&[item], meter)
    }

    fn delete(&mut self, id: u32, meter: &mut CostMeter) -> Result<(), AugError> {
        self.bulk_delete(&[id], meter)
    }

    /// Sequential inserts, or one rebuild when the batch is at least as
    /// large as the tree.
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
        if items.len() >= n {
            let old = if self.root == NIL {
                Vec::new()
            } else {
                self.recover_inorder(self.root, meter)
            };
            let mut all = Vec::with_capacity(old.len() + items.len());
            let (mut i, mut j) = (0, 0);
            while i < old.len() || j < items.len() {
                if j == items.len() || (i < old.len() && by_x(&old[i], &items[j]) == Ordering::Less) {
                    all.push(old[i]);
                    i += 1;
                } else {
                    all.push(items[j]);
                    j += 1;
                }
            }
            meter.read(ITEM_WORDS * all.len() as u64);
            self.rebuild_whole(&all, meter);
            return Ok(());
        }
        for p in items {
            self.insert_one(*p, meter);
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
            self.delete_one(p, meter);
        }
        if self.cfg.too_many_dead(self.dummies, self.slots) {
            let pts = if self.root == NIL {
                Vec::new()
            } else {
                self.recover_inorder(self.root, meter)
            };
            self.rebuild_whole(&pts, meter);
        }
        Ok(())
    }

    fn len(&self) -> usize {
        self.items.len()
    }

    fn label_report(&self) -> LabelReport {
        inspect_labels(self)
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

    fn scan(all: &[Point2], x1: f64, x2: f64, y0: f64) -> Vec<u32> {
        ids(all.iter().filter(|p| x1 <= p.x && p.x <= x2 && p.y >= y0).copied().collect())
    }

    #[test]
    fn one_point_tree() {
        let t = PriorityTree::build(&[Point2::new(3.0, 4.0, 7)], AlphaConfig::default(), &mut m()).unwrap();
        t.check().unwrap();
        assert_eq!(ids(t.three_sided_query(0.0, 10.0, 0.0, &mut m())), vec![7]);
        assert!(t.three_sided_query(0.0, 10.0, 4.5, &mut m()).is_empty());
        assert_eq!(ids(t.three_sided_query(3.0, 3.0, 4.0, &mut m())), vec![7]);
    }

    #[test]
    fn static_build_labels_hold() {
        for alpha in [2u64, 3, 4, 8, 16] {
            for n in [1usize, 2, 7, 100, 1000, 5000] {
                let t = PriorityTree::build(&random(n, n as u64), AlphaConfig::new(alpha).unwrap(), &mut m()).unwrap();
                t.check().unwrap();
                let r = t.label_report();
                assert!(r.holds(), "alpha {alpha} n {n}: {r:?}");
            }
        }
    }

    #[test]
    fn recovered_points_are_sorted() {
        let mut t = PriorityTree::build(&random(500, 1), AlphaConfig::new(2).unwrap(), &mut m()).unwrap();
        for (i, p) in random(200, 2).into_iter().enumerate() {
            t.insert(Point2::new(p.x, p.y, 1000 + i as u32), &mut m()).unwrap();
        }
        let pts = t.recover_inorder(t.root_id(), &mut m());
        assert_eq!(pts.len(), 700);
        assert!(pts.windows(2).all(|w| by_x(&w[0], &w[1]) == Ordering::Less));
    }

    #[test]
    fn build_writes_are_linear() {
        for n in [1usize << 12, 1 << 15] {
            let mut pts = random(n, 5);
            pts.sort_by(by_x);
            let mut meter = m();
            let _ = PriorityTree::build_presorted(&pts, AlphaConfig::default(), &mut meter).unwrap();
            let per = meter.writes() as f64 / n as f64;
            assert!(per < 40.0, "{n}: {per}");
        }
    }

    #[test]
    fn bulk_of_one_equals_insert() {
        let pts = random(300, 3);
        let mut a = PriorityTree::build(&pts, AlphaConfig::new(2).unwrap(), &mut m()).unwrap();
        let mut b = a.clone();
        let p = Point2::new(40.0, 99.5, 5000);
        a.insert(p, &mut m()).unwrap();
        b.bulk_insert(&[p], &mut m()).unwrap();
        assert_eq!(a.recover_inorder(a.root_id(), &mut m()), b.recover_inorder(b.root_id(), &mut m()));
        assert_eq!(a.label_report(), b.label_report());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn random_updates_match_a_scan(
            alpha in prop::sample::select(vec![2u64, 4, 8]),
            n0 in 0usize..200,
            seed in 0u64..1000,
            ops in proptest::collection::vec((0u8..4, 0.0f64..100.0, 0.0f64..100.0, 1usize..16), 1..150),
        ) {
            let cfg = AlphaConfig::new(alpha).unwrap();
            let mut all = random(n0, seed);
            let mut t = PriorityTree::build(&all, cfg, &mut m()).unwrap();
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
                let (x1, x2) = (x.min(y), x.max(y));
                let y0 = (x * 7.0) % 100.0;
                prop_assert_eq!(ids(t.three_sided_query(x1, x2, y0, &mut m())), scan(&all, x1, x2, y0));
            }
            prop_assert_eq!(t.check(), Ok(()));
            let r = t.label_report();
            prop_assert!(r.holds(), "{:?}", r);
        }

        #[test]
        fn clustered_inserts_keep_the_labeling_bounds(
            alpha in prop::sample::select(vec![2u64, 3, 4, 8]),
            n0 in 0usize..200,
            ops in proptest::collection::vec((0u8..3, 0.0f64..1.0, 0.0f64..100.0), 1..800),
        ) {
            let cfg = AlphaConfig::new(alpha).unwrap();
            let mut all = random(n0, 7);
            let mut t = PriorityTree::build(&all, cfg, &mut m()).unwrap();
            let mut next = 10_000u32;
            for (kind, u, y) in ops {
                if kind < 2 || all.is_empty() {
                    let p = Point2::new(u.powi(6) * 100.0, y, next);
                    next += 1;
                    t.insert(p, &mut m()).unwrap();
                    all.push(p);
                } else {
                    let gone = all.swap_remove((u * all.len() as f64) as usize % all.len());
                    t.delete(gone.id, &mut m()).unwrap();
                }
                let r = t.label_report();
                prop_assert!(r.holds(), "{:?}", r);
            }
            prop_assert_eq!(t.check(), Ok(()));
        }
    }
}
