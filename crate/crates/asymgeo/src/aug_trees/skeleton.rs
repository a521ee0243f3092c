//! Search-tree skeleton with α-labeling, shared by the interval and range
//! trees.
//!
//! Keys are never removed in place: a deletion leaves a tombstone and keeps
//! every subtree weight unchanged, so rebalancing only ever sees growth.
//! Tombstones are purged when the whole tree is rebuilt.
//!
//! New keys are merged top-down. A tracked node (critical, or the root)
//! whose weight would reach twice its initial weight is not descended into;
//! it becomes a [`Plan`] and the owning tree rebuilds that subtree with its
//! own augmentation. A plan may be lifted to the critical parent (see
//! `rebuild_roots`). Rebuilt subtrees are disjoint.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use super::labeling::{fact_index, marks, rebuild_cap, Labeled};
use super::NIL;
use crate::cost_model::CostMeter;

/// Key, two children, flags and weight.
pub(crate) const SK_WORDS: u64 = 5;

#[derive(Debug, Clone)]
pub(crate) struct SkNode<K, P> {
    pub key: K,
    pub left: u32,
    pub right: u32,
    pub alive: bool,
    pub critical: bool,
    /// Subtree weight; kept current only at critical nodes and the root.
    pub weight: u64,
    pub initial: u64,
    pub payload: P,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Attach {
    Root,
    Left(u32),
    Right(u32),
}

/// A subtree to rebuild with `new_keys` merged in.
#[derive(Debug, Clone)]
pub(crate) struct Plan<K> {
    pub attach: Attach,
    /// `NIL` when the tree was empty.
    pub old_root: u32,
    pub new_keys: Vec<K>,
}

impl<K> Plan<K> {
    pub fn whole(&self) -> bool {
        self.attach == Attach::Root
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Label {
    /// Fresh keys hung below a null slot: nothing is marked.
    Unmarked,
    /// A rebuilt subtree: the marking rule, nothing at or above the cap.
    Capped(u64),
    /// The whole tree: the root records its initial weight.
    Whole,
}

/// Result of [`Skeleton::build`]: node ids and depths in key order.
#[derive(Debug, Clone)]
pub(crate) struct Built {
    pub root: u32,
    pub order: Vec<u32>,
    pub depth: Vec<u32>,
}

#[derive(Debug, Clone)]
pub(crate) struct Skeleton<K, P> {
    pub nodes: Vec<SkNode<K, P>>,
    free: Vec<u32>,
    pub root: u32,
    pub alpha: u64,
    /// Nodes in the tree, tombstones included.
    pub stored: u64,
    pub dead: u64,
}

impl<K: Copy + Ord, P: Copy + Default> Skeleton<K, P> {
    pub fn new(alpha: u64) -> Self {
        Skeleton {
            nodes: Vec::new(),
            free: Vec::new(),
            root: NIL,
            alpha,
            stored: 0,
            dead: 0,
        }
    }

    pub fn n(&self, v: u32) -> &SkNode<K, P> {
        &self.nodes[v as usize]
    }

    pub fn n_mut(&mut self, v: u32) -> &mut SkNode<K, P> {
        &mut self.nodes[v as usize]
    }

    pub fn tracked(&self, v: u32) -> bool {
        v == self.root || self.n(v).critical
    }

    /// Merges strictly increasing, absent `keys`; returns the subtrees the
    /// caller must rebuild.
    pub fn merge(&mut self, keys: &[K], meter: &mut CostMeter) -> Vec<Plan<K>> {
        let mut plans = Vec::new();
        if keys.is_empty() {
            return plans;
        }
        if self.root == NIL {
            plans.push(Plan {
                attach: Attach::Root,
                old_root: NIL,
                new_keys: keys.to_vec(),
            });
            return plans;
        }
        let roots = self.rebuild_roots(keys, meter);
        let mut work = alloc::vec![(Attach::Root, self.root, keys)];
        while let Some((attach, u, keys)) = work.pop() {
            if keys.is_empty() {
                continue;
            }
            if u == NIL {
                let fresh: Vec<(K, bool)> = keys.iter().map(|&k| (k, true)).collect();
                let built = self.build(&fresh, Label::Unmarked, meter);
                self.attach(attach, built.root, meter);
                self.stored += keys.len() as u64;
                continue;
            }
            meter.read(1);
            if roots.contains(&u) {
                plans.push(Plan {
                    attach,
                    old_root: u,
                    new_keys: keys.to_vec(),
                });
                continue;
            }
            if self.tracked(u) {
                self.n_mut(u).weight += keys.len() as u64;
                meter.write(1);
            }
            let key = self.n(u).key;
            meter.read(crate::ceil_log2(keys.len() + 1) as u64);
            let split = keys.partition_point(|k| *k < key);
            work.push((Attach::Right(u), self.n(u).right, &keys[split..]));
            work.push((Attach::Left(u), self.n(u).left, &keys[..split]));
        }
        plans
    }

    /// Dry run of the merge: the subtrees it has to rebuild. A tracked node
    /// that would double is one. A rebuilt root of weight w that may be
    /// marked can grow to 2w before its next rebuild, and its critical parent
    /// keeps a 1.5x lead only if it starts at 2w-1 or more; when it would
    /// not, the parent is rebuilt instead. Rebuilds nested in another one
    /// are dropped.
    fn rebuild_roots(&self, keys: &[K], meter: &mut CostMeter) -> BTreeSet<u32> {
        // (node, weight after the merge, nearest tracked ancestor record)
        let mut recs: Vec<(u32, u64, usize)> = Vec::new();
        let may_mark = |u: u32, w: u64| {
            w < rebuild_cap(self.n(u).initial, self.alpha) && fact_index(w, self.alpha).is_some()
        };
        let mut hits = Vec::new();
        let mut work = alloc::vec![(self.root, keys, usize::MAX)];
        while let Some((u, keys, mut up)) = work.pop() {
            if keys.is_empty() || u == NIL {
                continue;
            }
            meter.read(1);
            if self.tracked(u) {
                let w = self.n(u).weight + keys.len() as u64;
                recs.push((u, w, up));
                if w >= 2 * self.n(u).initial {
                    hits.push(recs.len() - 1);
                    continue;
                }
                up = recs.len() - 1;
            }
            let key = self.n(u).key;
            meter.read(crate::ceil_log2(keys.len() + 1) as u64);
            let split = keys.partition_point(|k| *k < key);
            work.push((self.n(u).right, &keys[split..], up));
            work.push((self.n(u).left, &keys[..split], up));
        }
        let mut chosen = alloc::vec![false; recs.len()];
        for mut r in hits {
            loop {
                let p = recs[r].2;
                if p == usize::MAX
                    || recs[p].0 == self.root
                    || !may_mark(recs[r].0, recs[r].1)
                    || recs[p].1 + 1 >= 2 * recs[r].1
                {
                    break;
                }
                r = p;
            }
            chosen[r] = true;
        }
        let mut roots = BTreeSet::new();
        for r in (0..recs.len()).filter(|&r| chosen[r]) {
            let mut p = recs[r].2;
            while p != usize::MAX && !chosen[p] {
                p = recs[p].2;
            }
            if p == usize::MAX {
                roots.insert(recs[r].0);
            }
        }
        roots
    }

    /// Marking cap for rebuilding the subtree at `old_root`.
    pub fn label_for(&self, plan: &Plan<K>) -> Label {
        if plan.whole() {
            Label::Whole
        } else {
            Label::Capped(rebuild_cap(self.n(plan.old_root).initial, self.alpha))
        }
    }

    /// In-order `(key, alive)` of a subtree and its node ids, one read each.
    pub fn collect(&self, v: u32, meter: &mut CostMeter) -> (Vec<(K, bool)>, Vec<u32>) {
        let mut keys = Vec::new();
        let mut ids = Vec::new();
        let mut stack = Vec::new();
        let mut cur = v;
        loop {
            while cur != NIL {
                meter.read(1);
                stack.push(cur);
                cur = self.n(cur).left;
            }
            match stack.pop() {
                Some(x) => {
                    keys.push((self.n(x).key, self.n(x).alive));
                    ids.push(x);
                    cur = self.n(x).right;
                }
                None => break,
            }
        }
        (keys, ids)
    }

    /// Keys for a rebuild: the old subtree (tombstones dropped only for a
    /// whole-tree rebuild) merged with the plan's new keys.
    pub fn plan_keys(&self, plan: &Plan<K>, meter: &mut CostMeter) -> (Vec<(K, bool)>, Vec<u32>) {
        let (old, ids) = if plan.old_root == NIL {
            (Vec::new(), Vec::new())
        } else {
            self.collect(plan.old_root, meter)
        };
        let mut out = Vec::with_capacity(old.len() + plan.new_keys.len());
        let mut new = plan.new_keys.iter().peekable();
        for (k, alive) in old {
            while let Some(&&nk) = new.peek() {
                if nk < k {
                    out.push((nk, true));
                    new.next();
                } else {
                    break;
                }
            }
            if alive || !plan.whole() {
                out.push((k, alive));
            }
        }
        out.extend(new.map(|&k| (k, true)));
        (out, ids)
    }

    pub fn free_nodes(&mut self, ids: &[u32]) {
        self.free.extend_from_slice(ids);
    }

    /// Builds a perfectly balanced subtree over sorted keys, labels it and
    /// writes one node record per key.
    pub fn build(&mut self, keys: &[(K, bool)], label: Label, meter: &mut CostMeter) -> Built {
        let mut built = Built {
            root: NIL,
            order: alloc::vec![NIL; keys.len()],
            depth: alloc::vec![0; keys.len()],
        };
        meter.write(SK_WORDS * keys.len() as u64);
        built.root = self.build_rec(keys, 0, keys.len(), None, 0, label, &mut built);
        if let Label::Whole = label {
            if built.root != NIL {
                let w = keys.len() as u64 + 1;
                let r = self.n_mut(built.root);
                r.weight = w;
                r.initial = w;
            }
        }
        built
    }

    #[allow(clippy::too_many_arguments)]
    fn build_rec(
        &mut self,
        keys: &[(K, bool)],
        lo: usize,
        hi: usize,
        sibling: Option<u64>,
        depth: u32,
        label: Label,
        out: &mut Built,
    ) -> u32 {
        if lo == hi {
            return NIL;
        }
        let mid = lo + (hi - lo) / 2;
        let w = (hi - lo) as u64 + 1;
        let critical = match label {
            Label::Unmarked => false,
            Label::Capped(cap) => marks(w, sibling, self.alpha, cap),
            Label::Whole => marks(w, sibling, self.alpha, u64::MAX),
        };
        let (lw, rw) = ((mid - lo) as u64 + 1, (hi - mid) as u64);
        let left = self.build_rec(keys, lo, mid, Some(rw), depth + 1, label, out);
        let right = self.build_rec(keys, mid + 1, hi, Some(lw), depth + 1, label, out);
        let node = SkNode {
            key: keys[mid].0,
            left,
            right,
            alive: keys[mid].1,
            critical,
            weight: w,
            initial: w,
            payload: P::default(),
        };
        let v = match self.free.pop() {
            Some(i) => {
                self.nodes[i as usize] = node;
                i
            }
            None => {
                self.nodes.push(node);
                (self.nodes.len() - 1) as u32
            }
        };
        out.order[mid] = v;
        out.depth[mid] = depth;
        v
    }

    pub fn attach(&mut self, at: Attach, v: u32, meter: &mut CostMeter) {
        meter.write(1);
        match at {
            Attach::Root => self.root = v,
            Attach::Left(p) => self.n_mut(p).left = v,
            Attach::Right(p) => self.n_mut(p).right = v,
        }
    }

    /// Root-to-node path of `key`, one read per node; the last entry holds
    /// `key` if it is present.
    pub fn path(&self, key: &K, meter: &mut CostMeter) -> Vec<u32> {
        let mut out = Vec::new();
        let mut v = self.root;
        while v != NIL {
            meter.read(1);
            out.push(v);
            let n = self.n(v);
            v = match key.cmp(&n.key) {
                core::cmp::Ordering::Less => n.left,
                core::cmp::Ordering::Greater => n.right,
                core::cmp::Ordering::Equal => break,
            };
        }
        out
    }

    pub fn find(&self, key: &K, meter: &mut CostMeter) -> Option<u32> {
        self.path(key, meter)
            .last()
            .copied()
            .filter(|&v| self.n(v).key == *key)
    }

    #[cfg(test)]
    pub fn live_keys(&self) -> Vec<K> {
        self.collect(self.root, &mut CostMeter::unbounded())
            .0
            .into_iter()
            .filter(|&(_, a)| a)
            .map(|(k, _)| k)
            .collect()
    }

    pub fn is_search_tree(&self) -> bool {
        let (keys, ids) = self.collect(self.root, &mut CostMeter::unbounded());
        ids.len() as u64 == self.stored && keys.windows(2).all(|w| w[0].0 < w[1].0)
    }
}

impl<K: Copy + Ord, P: Copy + Default> Labeled for Skeleton<K, P> {
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
        self.n(v).critical
    }

    fn tracked_weight(&self, v: u32) -> u64 {
        self.n(v).weight
    }

    fn alpha(&self) -> u64 {
        self.alpha
    }
}

#[cfg(test)]
mod tests {
    use super::super::labeling::inspect_labels;
    use super::*;
    use proptest::prelude::*;

    /// Bare skeleton: rebuild plans are applied without any augmentation.
    fn insert_all(s: &mut Skeleton<u64, ()>, keys: &[u64], m: &mut CostMeter) {
        for plan in s.merge(keys, m) {
            apply(s, plan, m);
        }
    }

    fn apply(s: &mut Skeleton<u64, ()>, plan: Plan<u64>, m: &mut CostMeter) {
        let label = if plan.old_root == NIL { Label::Whole } else { s.label_for(&plan) };
        let (keys, ids) = s.plan_keys(&plan, m);
        s.free_nodes(&ids);
        if plan.whole() {
            s.stored = keys.len() as u64;
            s.dead = 0;
        } else {
            s.stored += plan.new_keys.len() as u64;
        }
        let built = s.build(&keys, label, m);
        s.attach(plan.attach, built.root, m);
    }

    fn balanced(n: u64, alpha: u64) -> Skeleton<u64, ()> {
        let mut s = Skeleton::new(alpha);
        let keys: Vec<(u64, bool)> = (0..n).map(|k| (2 * k, true)).collect();
        let b = s.build(&keys, Label::Whole, &mut CostMeter::unbounded());
        s.root = b.root;
        s.stored = n;
        s
    }

    #[test]
    fn static_ratios_for_a_balanced_tree() {
        let s = balanced(1 << 10, 4);
        let r = inspect_labels(&s);
        assert!(r.pairs > 0);
        // max{(α/2)|B|, 2|B| − 1} ≤ |A| ≤ (2α+1)|B|
        assert!(r.min_ratio >= 2.0 - 1e-9, "{r:?}");
        assert!(r.max_ratio <= 9.0, "{r:?}");
        assert!(r.holds(), "{r:?}");
    }

    #[test]
    fn every_level_labeling_for_alpha_two() {
        let n = 1u64 << 10;
        let s = balanced(n, 2);
        let r = inspect_labels(&s);
        assert!(r.max_critical_on_path as u64 <= 10 + 2, "{r:?}");
    }

    #[test]
    fn leaves_are_critical() {
        let s = balanced(100, 16);
        for v in 0..s.nodes.len() as u32 {
            let n = s.n(v);
            if n.left == NIL && n.right == NIL {
                assert!(n.critical);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn random_growth_keeps_the_labeling_bounds(
            alpha in prop::sample::select(vec![2u64, 3, 4, 8, 16]),
            n0 in 1u64..3000,
            batches in proptest::collection::vec(proptest::collection::btree_set(0u64..1_000_000, 1..4), 1..600),
        ) {
            let mut m = CostMeter::unbounded();
            let mut s = balanced(n0, alpha);
            let mut all: std::collections::BTreeSet<u64> = (0..n0).map(|k| 2 * k).collect();
            for b in batches {
                let fresh: Vec<u64> = b.into_iter().map(|k| 2 * k + 1).filter(|k| !all.contains(k)).collect();
                all.extend(fresh.iter().copied());
                insert_all(&mut s, &fresh, &mut m);
            }
            prop_assert!(s.is_search_tree());
            prop_assert_eq!(s.live_keys(), all.iter().copied().collect::<Vec<_>>());
            let r = inspect_labels(&s);
            prop_assert!(r.holds(), "{:?}", r);
        }

        #[test]
        fn clustered_single_inserts_keep_the_labeling_bounds(
            alpha in prop::sample::select(vec![2u64, 3, 4, 8]),
            n0 in 1u64..300,
            picks in proptest::collection::vec(0.0f64..1.0, 1..1500),
        ) {
            let mut m = CostMeter::unbounded();
            let mut s = balanced(n0, alpha);
            let mut all: std::collections::BTreeSet<u64> = (0..n0).map(|k| 2 * k).collect();
            for u in picks {
                let k = 2 * ((u.powi(6) * 1e6) as u64) + 1;
                if all.insert(k) {
                    insert_all(&mut s, &[k], &mut m);
                    let r = inspect_labels(&s);
                    prop_assert!(r.holds(), "{:?}", r);
                }
            }
            prop_assert!(s.is_search_tree());
        }
    }
}
