//! Interval tree for closed stabbing queries.
//!
//! The skeleton is a search tree over all endpoint keys. An interval is kept
//! at the highest node whose key it spans, which is the LCA of its two
//! endpoint nodes, in two treaps: by left endpoint ascending and by right
//! endpoint descending.
//!
//! The static build finds every LCA with a range-minimum over in-order
//! depths, then groups intervals per node with a stable counting sort on
//! node level over the endpoint order. Within one level the groups are
//! consecutive, so each node's lists come out already sorted.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::labeling::{inspect_labels, LabelReport};
use super::rmq::BlockRmq;
use super::skeleton::{Attach, Label, Plan, Skeleton};
use super::treap::{InnerItem, TreapArena};
use super::{check_unique, sort_charged, AlphaConfig, AugError, AugTree, Interval, ITEM_WORDS, NIL};
use crate::cost_model::CostMeter;

/// Endpoint key: value, then the interval id, then left before right.
#[derive(Debug, Clone, Copy)]
pub struct EKey {
    pub v: f64,
    pub id: u32,
    pub hi: bool,
}

impl EKey {
    pub fn lo_of(iv: &Interval) -> Self {
        EKey {
            v: iv.lo,
            id: iv.id,
            hi: false,
        }
    }

    pub fn hi_of(iv: &Interval) -> Self {
        EKey {
            v: iv.hi,
            id: iv.id,
            hi: true,
        }
    }
}

impl Ord for EKey {
    fn cmp(&self, o: &Self) -> Ordering {
        self.v
            .total_cmp(&o.v)
            .then(self.id.cmp(&o.id))
            .then(self.hi.cmp(&o.hi))
    }
}

impl PartialOrd for EKey {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl PartialEq for EKey {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for EKey {}

#[derive(Debug, Clone, Copy)]
struct ByLo(Interval);

impl Ord for ByLo {
    fn cmp(&self, o: &Self) -> Ordering {
        self.0.lo.total_cmp(&o.0.lo).then(self.0.id.cmp(&o.0.id))
    }
}

impl PartialOrd for ByLo {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl PartialEq for ByLo {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for ByLo {}

impl InnerItem for ByLo {
    const WORDS: u64 = ITEM_WORDS;
    fn id(&self) -> u32 {
        self.0.id
    }
}

/// Right endpoint descending, so "hi ≥ q" is a prefix.
#[derive(Debug, Clone, Copy)]
struct ByHi(Interval);

impl Ord for ByHi {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.hi.total_cmp(&self.0.hi).then(o.0.id.cmp(&self.0.id))
    }
}

impl PartialOrd for ByHi {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl PartialEq for ByHi {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for ByHi {}

impl InnerItem for ByHi {
    const WORDS: u64 = ITEM_WORDS;
    fn id(&self) -> u32 {
        self.0.id
    }
}

#[derive(Debug, Clone, Copy)]
struct Lists {
    by_lo: u32,
    by_hi: u32,
}

impl Default for Lists {
    fn default() -> Self {
        Lists {
            by_lo: NIL,
            by_hi: NIL,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IntervalTree {
    cfg: AlphaConfig,
    sk: Skeleton<EKey, Lists>,
    lo: TreapArena<ByLo>,
    hi: TreapArena<ByHi>,
    items: BTreeMap<u32, Interval>,
}

fn check_interval(iv: &Interval) -> Result<(), AugError> {
    if iv.lo.is_finite() && iv.hi.is_finite() && iv.lo <= iv.hi {
        Ok(())
    } else {
        Err(AugError::BadItem(iv.id))
    }
}

/// Sorted build: endpoint sort, then [`IntervalTree::build_presorted`].
pub fn build_interval_tree(
    intervals: &[Interval],
    cfg: AlphaConfig,
    meter: &mut CostMeter,
) -> Result<IntervalTree, AugError> {
    IntervalTree::build(intervals, cfg, meter)
}

impl IntervalTree {
    pub fn new(cfg: AlphaConfig) -> Self {
        IntervalTree {
            cfg,
            sk: Skeleton::new(cfg.alpha),
            lo: TreapArena::new(),
            hi: TreapArena::new(),
            items: BTreeMap::new(),
        }
    }

    pub fn build(intervals: &[Interval], cfg: AlphaConfig, meter: &mut CostMeter) -> Result<Self, AugError> {
        let keys = Self::sort_endpoints(intervals, meter);
        Self::build_presorted(intervals, &keys, cfg, meter)
    }

    /// All 2n endpoint keys in order, charged as a sort.
    pub fn sort_endpoints(intervals: &[Interval], meter: &mut CostMeter) -> Vec<EKey> {
        let mut keys: Vec<EKey> = intervals
            .iter()
            .flat_map(|iv| [EKey::lo_of(iv), EKey::hi_of(iv)])
            .collect();
        sort_charged(&mut keys, 2, |a, b| a.cmp(b), meter);
        keys
    }

    /// Linear-write build from the sorted endpoint keys of `intervals`.
    pub fn build_presorted(
        intervals: &[Interval],
        endpoints: &[EKey],
        cfg: AlphaConfig,
        meter: &mut CostMeter,
    ) -> Result<Self, AugError> {
        for iv in intervals {
            check_interval(iv)?;
        }
        check_unique(intervals, |iv| iv.id)?;
        if endpoints.len() != 2 * intervals.len() || endpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(AugError::Unsorted);
        }
        let mut t = Self::new(cfg);
        for iv in intervals {
            t.items.insert(iv.id, *iv);
        }
        meter.write(ITEM_WORDS * intervals.len() as u64);
        let keys: Vec<(EKey, bool)> = endpoints.iter().map(|&k| (k, true)).collect();
        t.sk.stored = keys.len() as u64;
        t.assemble(Attach::Root, &keys, Label::Whole, intervals, meter);
        Ok(t)
    }

    pub fn cfg(&self) -> AlphaConfig {
        self.cfg
    }

    /// Endpoint keys held by the skeleton, tombstones included.
    pub fn stored_keys(&self) -> u64 {
        self.sk.stored
    }

    pub fn intervals(&self) -> Vec<Interval> {
        self.items.values().copied().collect()
    }

    /// Builds the skeleton over `keys`, hangs it at `attach` and stores
    /// `ivs` (whose endpoints must all be among `keys`).
    fn assemble(&mut self, attach: Attach, keys: &[(EKey, bool)], label: Label, ivs: &[Interval], meter: &mut CostMeter) {
        let built = self.sk.build(keys, label, meter);
        self.sk.attach(attach, built.root, meter);
        if ivs.is_empty() {
            return;
        }
        // Endpoint positions of the intervals to store.
        let mut pos: BTreeMap<u32, [u32; 2]> = ivs.iter().map(|iv| (iv.id, [NIL; 2])).collect();
        meter.read(keys.len() as u64);
        for (j, (k, _)) in keys.iter().enumerate() {
            if let Some(p) = pos.get_mut(&k.id) {
                p[k.hi as usize] = j as u32;
            }
        }
        meter.write(2 * ivs.len() as u64);
        let rmq = BlockRmq::new(built.depth.clone(), meter);
        // Per interval: (level, node), found by one LCA query.
        let mut home: BTreeMap<u32, (u32, u32)> = BTreeMap::new();
        for (&id, &[a, b]) in &pos {
            let at = rmq.query(a as usize, b as usize, meter);
            home.insert(id, (built.depth[at], built.order[at]));
        }
        meter.write(2 * ivs.len() as u64);
        let levels = built.depth.iter().max().map_or(1, |d| *d as usize + 1);

        for hi_side in [false, true] {
            // Intervals in endpoint order, then stably by level.
            let seq: Vec<(u32, u32)> = keys
                .iter()
                .filter(|(k, _)| k.hi == hi_side)
                .filter_map(|(k, _)| home.get(&k.id).map(|&(lvl, _)| (lvl, k.id)))
                .collect();
            meter.read(keys.len() as u64);
            let sorted = counting_sort_by_level(&seq, levels, meter);
            let mut i = 0;
            while i < sorted.len() {
                let node = home[&sorted[i]].1;
                let mut j = i;
                while j < sorted.len() && home[&sorted[j]].1 == node {
                    j += 1;
                }
                let run: Vec<Interval> = sorted[i..j].iter().map(|id| self.items[id]).collect();
                meter.read((j - i) as u64 * ITEM_WORDS);
                if hi_side {
                    let run: Vec<ByHi> = run.into_iter().rev().map(ByHi).collect();
                    self.sk.n_mut(node).payload.by_hi = self.hi.build_sorted(&run, meter);
                } else {
                    let run: Vec<ByLo> = run.into_iter().map(ByLo).collect();
                    self.sk.n_mut(node).payload.by_lo = self.lo.build_sorted(&run, meter);
                }
                meter.write(1);
                i = j;
            }
        }
    }

    /// Node storing an interval with these endpoint keys: the first node on
    /// the root path whose key lies between them.
    fn home_of(&self, iv: &Interval, meter: &mut CostMeter) -> u32 {
        let (a, b) = (EKey::lo_of(iv), EKey::hi_of(iv));
        let mut u = self.sk.root;
        while u != NIL {
            meter.read(1);
            let k = self.sk.n(u).key;
            if b < k {
                u = self.sk.n(u).left;
            } else if a > k {
                u = self.sk.n(u).right;
            } else {
                return u;
            }
        }
        NIL
    }

    fn apply(&mut self, plan: Plan<EKey>, extra: &[Interval], meter: &mut CostMeter) {
        let label = if plan.old_root == NIL {
            Label::Whole
        } else {
            self.sk.label_for(&plan)
        };
        let (keys, ids) = self.sk.plan_keys(&plan, meter);
        let mut ivs: Vec<Interval> = extra.to_vec();
        for &v in &ids {
            let l = self.sk.n(v).payload;
            ivs.extend(self.lo.to_vec(l.by_lo, meter).into_iter().map(|x| x.0));
            self.lo.free_tree(l.by_lo);
            self.hi.free_tree(l.by_hi);
        }
        self.sk.free_nodes(&ids);
        if plan.whole() {
            self.sk.stored = keys.len() as u64;
            self.sk.dead = 0;
        } else {
            self.sk.stored += plan.new_keys.len() as u64;
        }
        self.assemble(plan.attach, &keys, label, &ivs, meter);
    }

    fn rebuild_all(&mut self, extra_keys: Vec<EKey>, extra: &[Interval], meter: &mut CostMeter) {
        let plan = Plan {
            attach: Attach::Root,
            old_root: self.sk.root,
            new_keys: extra_keys,
        };
        self.apply(plan, extra, meter);
    }

    fn store(&mut self, ivs: &[Interval], meter: &mut CostMeter) {
        let mut groups: BTreeMap<u32, Vec<Interval>> = BTreeMap::new();
        for iv in ivs {
            let u = self.home_of(iv, meter);
            debug_assert!(u != NIL);
            groups.entry(u).or_default().push(*iv);
        }
        for (u, mut g) in groups {
            let l = self.sk.n(u).payload;
            g.sort_by(|a, b| ByLo(*a).cmp(&ByLo(*b)));
            let by_lo: Vec<ByLo> = g.iter().map(|&x| ByLo(x)).collect();
            let mut by_hi: Vec<ByHi> = g.iter().map(|&x| ByHi(x)).collect();
            if by_hi.len() > 1 {
                sort_charged(&mut by_hi, ITEM_WORDS, |a, b| a.cmp(b), meter);
            }
            let nl = self.lo.insert_batch(l.by_lo, &by_lo, meter);
            let nh = self.hi.insert_batch(l.by_hi, &by_hi, meter);
            let p = &mut self.sk.n_mut(u).payload;
            if (p.by_lo, p.by_hi) != (nl, nh) {
                meter.write(1);
            }
            p.by_lo = nl;
            p.by_hi = nh;
        }
    }

    /// Closed stabbing query: every interval with `lo ≤ q ≤ hi`.
    pub fn stab(&self, q: f64, meter: &mut CostMeter) -> Vec<Interval> {
        let mut out = Vec::new();
        if q.is_nan() {
            return out;
        }
        let mut stack = vec![self.sk.root];
        let mut lo_buf = Vec::new();
        let mut hi_buf = Vec::new();
        while let Some(u) = stack.pop() {
            if u == NIL {
                continue;
            }
            meter.read(1);
            let n = self.sk.n(u);
            let v = n.key.v;
            if q < v {
                self.lo.prefix(n.payload.by_lo, &|x: &ByLo| x.0.lo <= q, &mut lo_buf, meter);
                stack.push(n.left);
            } else if q > v {
                self.hi.prefix(n.payload.by_hi, &|x: &ByHi| x.0.hi >= q, &mut hi_buf, meter);
                stack.push(n.right);
            } else {
                // Everything here contains q; equal endpoints may sit on both sides.
                self.lo.prefix(n.payload.by_lo, &|_| true, &mut lo_buf, meter);
                stack.push(n.left);
                stack.push(n.right);
            }
        }
        out.extend(lo_buf.into_iter().map(|x| x.0));
        out.extend(hi_buf.into_iter().map(|x| x.0));
        meter.write(ITEM_WORDS * out.len() as u64);
        out
    }

    /// Endpoint keys in order, one read per node.
    pub fn recover_inorder(&self, meter: &mut CostMeter) -> Vec<EKey> {
        self.sk.collect(self.sk.root, meter).0.into_iter().map(|(k, _)| k).collect()
    }

    /// Per skeleton node in key order: key, depth and the ids stored there.
    pub fn layout(&self) -> Vec<(EKey, u32, Vec<u32>)> {
        let mut out = Vec::new();
        let mut stack = vec![(self.sk.root, 0u32, false)];
        while let Some((u, d, expanded)) = stack.pop() {
            if u == NIL {
                continue;
            }
            let n = self.sk.n(u);
            if expanded {
                let ids = self
                    .lo
                    .to_vec(n.payload.by_lo, &mut CostMeter::unbounded())
                    .into_iter()
                    .map(|x| x.0.id)
                    .collect();
                out.push((n.key, d, ids));
            } else {
                stack.push((n.right, d + 1, false));
                stack.push((u, d, true));
                stack.push((n.left, d + 1, false));
            }
        }
        out
    }

    /// Structural self-check used by tests and the verify suite.
    pub fn check(&self) -> Result<(), &'static str> {
        if !self.sk.is_search_tree() {
            return Err("skeleton is not a search tree");
        }
        let mut m = CostMeter::unbounded();
        let mut seen = 0usize;
        let (_, ids) = self.sk.collect(self.sk.root, &mut m);
        for v in ids {
            let n = self.sk.n(v);
            if !self.lo.is_valid(n.payload.by_lo) || !self.hi.is_valid(n.payload.by_hi) {
                return Err("inner list out of order");
            }
            let a = self.lo.to_vec(n.payload.by_lo, &mut m);
            let b = self.hi.to_vec(n.payload.by_hi, &mut m);
            if a.len() != b.len() {
                return Err("inner lists differ in size");
            }
            for x in &a {
                if self.home_of(&x.0, &mut m) != v || self.items.get(&x.0.id) != Some(&x.0) {
                    return Err("interval stored at the wrong node");
                }
            }
            seen += a.len();
        }
        if seen != self.items.len() {
            return Err("stored interval count differs from the id index");
        }
        let dead = self.sk.stored as usize - 2 * self.items.len();
        if dead as u64 != self.sk.dead {
            return Err("tombstone count is stale");
        }
        Ok(())
    }
}

/// Stable counting sort of `(level, id)` pairs by level; returns the ids.
fn counting_sort_by_level(seq: &[(u32, u32)], levels: usize, meter: &mut CostMeter) -> Vec<u32> {
    let mut start = vec![0usize; levels + 1];
    for &(l, _) in seq {
        start[l as usize + 1] += 1;
    }
    for i in 0..levels {
        start[i + 1] += start[i];
    }
    let mut out = vec![0u32; seq.len()];
    for &(l, id) in seq {
        out[start[l as usize]] = id;
        start[l as usize] += 1;
    }
    meter.read(2 * seq.len() as u64);
    meter.write(seq.len() as u64);
    out
}

impl AugTree for IntervalTree {
    type Item = Interval;

    /// A single insert is a bulk insert of one.
    fn insert(&mut self, item: Interval, meter: &mut CostMeter) -> Result<(), AugError> {
        self.bulk_insert(&[item], meter)
    }

    fn delete(&mut self, id: u32, meter: &mut CostMeter) -> Result<(), AugError> {
        self.bulk_delete(&[id], meter)
    }

    fn bulk_insert(&mut self, items: &[Interval], meter: &mut CostMeter) -> Result<(), AugError> {
        for iv in items {
            check_interval(iv)?;
            if self.items.contains_key(&iv.id) {
                return Err(AugError::DuplicateId(iv.id));
            }
        }
        check_unique(items, |iv| iv.id)?;
        if items.windows(2).any(|w| ByLo(w[0]) >= ByLo(w[1])) {
            return Err(AugError::Unsorted);
        }
        if items.is_empty() {
            return Ok(());
        }
        let n = self.items.len();
        for iv in items {
            self.items.insert(iv.id, *iv);
        }
        meter.write(ITEM_WORDS * items.len() as u64);

        let los: Vec<EKey> = items.iter().map(EKey::lo_of).collect();
        let mut his: Vec<EKey> = items.iter().map(EKey::hi_of).collect();
        if his.len() > 1 {
            sort_charged(&mut his, 2, |a, b| a.cmp(b), meter);
        }
        let mut keys = Vec::with_capacity(2 * items.len());
        let (mut i, mut j) = (0, 0);
        while i < los.len() || j < his.len() {
            if j == his.len() || (i < los.len() && los[i] < his[j]) {
                keys.push(los[i]);
                i += 1;
            } else {
                keys.push(his[j]);
                j += 1;
            }
        }

        if items.len() >= n {
            self.rebuild_all(keys, items, meter);
            return Ok(());
        }
        for plan in self.sk.merge(&keys, meter) {
            self.apply(plan, &[], meter);
        }
        self.store(items, meter);
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
            let iv = self.items.remove(id).expect("checked above");
            meter.read(ITEM_WORDS);
            let u = self.home_of(&iv, meter);
            let l = self.sk.n(u).payload;
            let (nl, found_lo) = self.lo.remove(l.by_lo, &ByLo(iv), meter);
            let (nh, found_hi) = self.hi.remove(l.by_hi, &ByHi(iv), meter);
            debug_assert!(found_lo && found_hi);
            if (nl, nh) != (l.by_lo, l.by_hi) {
                meter.write(1);
            }
            let p = &mut self.sk.n_mut(u).payload;
            p.by_lo = nl;
            p.by_hi = nh;
            for k in [EKey::lo_of(&iv), EKey::hi_of(&iv)] {
                let v = self.sk.find(&k, meter).expect("endpoint keys stay in the skeleton");
                self.sk.n_mut(v).alive = false;
                meter.write(1);
                self.sk.dead += 1;
            }
        }
        if self.cfg.too_many_dead(self.sk.dead, self.sk.stored) {
            self.rebuild_all(Vec::new(), &[], meter);
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
