use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use super::build::{build_batched, fill_classic};
use super::query::RangeResult;
use super::{bounding_box, split_cell, KdConfig, KdError, KdMode, KdNode, KdTree, PointK, NIL};
use crate::cost_model::CostMeter;

/// Children share at most this fraction of their parent in ANN mode.
const ANN_BALANCE: f64 = 0.65;

impl KdTree {
    /// Adds a point to its leaf buffer, settles the leaf if it overflows, and
    /// rebuilds the topmost node on the path whose children became too
    /// unbalanced.
    pub fn insert(&mut self, pt: PointK, meter: &mut CostMeter) -> Result<(), KdError> {
        self.check_point(&pt)?;
        if self.ids.contains(&pt.id) {
            return Err(KdError::DuplicateId(pt.id));
        }
        for (b, &c) in self.bbox.iter_mut().zip(&pt.coords) {
            if c < b.0 || c > b.1 {
                b.0 = b.0.min(c);
                b.1 = b.1.max(c);
                meter.write(1);
            }
        }
        self.ids.insert(pt.id);
        let words = pt.words();
        if self.root == NIL {
            self.root = self.nodes.len() as u32;
            self.nodes.push(KdNode::leaf(vec![pt]));
            meter.write(super::NODE_WORDS + words);
            return Ok(());
        }
        meter.read(words);
        let mut path = Vec::new();
        let mut v = self.root;
        let mut cell = self.bbox.clone();
        loop {
            meter.read(1);
            let node = &mut self.nodes[v as usize];
            node.count += 1;
            meter.write(1);
            if node.is_leaf() {
                break;
            }
            let left = node.goes_left(&pt);
            let (next, (lc, rc)) = (
                if left { node.left } else { node.right },
                split_cell(&cell, node.split_dim, node.split_val),
            );
            path.push((v, cell));
            cell = if left { lc } else { rc };
            v = next;
        }
        self.nodes[v as usize].buffer.push(pt);
        meter.write(words);
        let p = self.cfg.buffer_size(self.stored());
        let depth = path.len();
        self.settle(v, depth, &cell, p, meter);
        path.push((v, cell));

        for i in 0..path.len() {
            let node = &self.nodes[path[i].0 as usize];
            if node.is_leaf() {
                break;
            }
            meter.read(2);
            let l = self.nodes[node.left as usize].count;
            let r = self.nodes[node.right as usize].count;
            if self.unbalanced(l, r) {
                let (v, cell) = path[i].clone();
                self.rebuild_subtree(v, i, &cell, meter);
                for &(a, _) in path[..i].iter().rev() {
                    let node = &self.nodes[a as usize];
                    let c = self.nodes[node.left as usize].count
                        + self.nodes[node.right as usize].count;
                    self.nodes[a as usize].count = c;
                    meter.write(1);
                }
                break;
            }
        }
        Ok(())
    }

    fn unbalanced(&self, l: usize, r: usize) -> bool {
        let (lo, hi) = (l.min(r) as f64, l.max(r) as f64);
        match self.cfg.mode {
            KdMode::Range => hi > (1.0 + self.cfg.imbalance(self.stored())) * lo + 1.0,
            KdMode::Ann => hi > ANN_BALANCE * (lo + hi) + 1.0,
        }
    }

    /// Replaces the subtree at `v` by a median-split tree of its live points.
    fn rebuild_subtree(&mut self, v: u32, depth: usize, cell: &[(f64, f64)], meter: &mut CostMeter) {
        let mut pts = Vec::new();
        self.collect(v, &mut pts);
        let words = self.cfg.k as u64 + 1;
        meter.read(pts.len() as u64 * words);
        pts.retain(|p| {
            let dead = self.deleted.remove(&p.id);
            if dead {
                self.ids.remove(&p.id);
            }
            !dead
        });
        if pts.is_empty() {
            self.nodes[v as usize] = KdNode::leaf(Vec::new());
            meter.write(super::NODE_WORDS);
        } else {
            let cfg = self.cfg.clone();
            fill_classic(&mut self.nodes, v, &mut pts, depth, cell, &cfg, true, meter);
        }
        self.rebuilds += 1;
    }

    /// Marks a point deleted; the whole tree is rebuilt from its live points
    /// once at most half of the stored points are live.
    pub fn delete(&mut self, id: u32, meter: &mut CostMeter) -> Result<(), KdError> {
        if !self.ids.contains(&id) || self.deleted.contains(&id) {
            return Err(KdError::UnknownId(id));
        }
        self.deleted.insert(id);
        meter.write(1);
        if 2 * self.live() <= self.stored() {
            self.rebuild_all(meter);
        }
        Ok(())
    }

    fn rebuild_all(&mut self, meter: &mut CostMeter) {
        let mut pts = self.live_points();
        meter.read(self.stored() as u64 * (self.cfg.k as u64 + 1));
        self.nodes.clear();
        self.deleted.clear();
        self.ids = pts.iter().map(|p| p.id).collect();
        self.rebuilds += 1;
        if pts.is_empty() {
            self.root = NIL;
            self.bbox = vec![(f64::INFINITY, f64::NEG_INFINITY); self.cfg.k];
            return;
        }
        self.bbox = bounding_box(&pts, self.cfg.k);
        self.nodes.push(KdNode::leaf(Vec::new()));
        self.root = 0;
        let (cfg, cell) = (self.cfg.clone(), self.bbox.clone());
        fill_classic(&mut self.nodes, 0, &mut pts, 0, &cell, &cfg, true, meter);
    }
}

/// Trees with distinct power-of-two sizes, merged like binary carries.
///
/// Sizes count stored points: a deleted point stays in its tree, masked,
/// until live points drop to half of the stored ones and everything is
/// rebuilt.
#[derive(Debug, Clone)]
pub struct KdForest {
    cfg: KdConfig,
    levels: Vec<Option<KdTree>>,
    owner: BTreeMap<u32, usize>,
    live: usize,
    stored: usize,
    rebuilds: usize,
}

impl KdForest {
    pub fn new(cfg: KdConfig) -> Result<Self, KdError> {
        cfg.validate()?;
        Ok(KdForest {
            cfg,
            levels: Vec::new(),
            owner: BTreeMap::new(),
            live: 0,
            stored: 0,
            rebuilds: 0,
        })
    }

    pub fn live(&self) -> usize {
        self.live
    }

    pub fn stored(&self) -> usize {
        self.stored
    }

    pub fn rebuilds(&self) -> usize {
        self.rebuilds
    }

    /// Tree sizes, largest first.
    pub fn sizes(&self) -> Vec<usize> {
        self.trees().map(|t| t.stored()).collect()
    }

    pub fn trees(&self) -> impl Iterator<Item = &KdTree> {
        self.levels.iter().rev().flatten()
    }

    pub fn contains(&self, id: u32) -> bool {
        self.owner
            .get(&id)
            .is_some_and(|&l| self.levels[l].as_ref().is_some_and(|t| !t.is_deleted(id)))
    }

    /// Adds a point. Ids of deleted points stay reserved until the next full
    /// rebuild.
    pub fn insert(&mut self, pt: PointK, meter: &mut CostMeter) -> Result<(), KdError> {
        if pt.k() != self.cfg.k {
            return Err(KdError::Dimension {
                expected: self.cfg.k,
                got: pt.k(),
            });
        }
        if self.owner.contains_key(&pt.id) {
            return Err(KdError::DuplicateId(pt.id));
        }
        let mut pts = vec![pt];
        let mut dead = BTreeSet::new();
        let mut j = 0;
        while let Some(t) = self.levels.get_mut(j).and_then(Option::take) {
            meter.read(t.stored() as u64 * (self.cfg.k as u64 + 1));
            pts.extend(t.points());
            dead.extend(t.deleted);
            j += 1;
        }
        let mut tree = build_batched(&pts, &self.cfg, meter)?;
        tree.deleted = dead;
        for p in &pts {
            self.owner.insert(p.id, j);
        }
        meter.write(pts.len() as u64);
        if self.levels.len() <= j {
            self.levels.resize(j + 1, None);
        }
        self.levels[j] = Some(tree);
        self.live += 1;
        self.stored += 1;
        Ok(())
    }

    pub fn delete(&mut self, id: u32, meter: &mut CostMeter) -> Result<(), KdError> {
        let level = *self.owner.get(&id).ok_or(KdError::UnknownId(id))?;
        let tree = self.levels[level].as_mut().expect("owner points at a tree");
        if !tree.deleted.insert(id) {
            return Err(KdError::UnknownId(id));
        }
        meter.write(1);
        self.live -= 1;
        if 2 * self.live <= self.stored {
            self.rebuild(meter)?;
        }
        Ok(())
    }

    /// Rebuilds from live points, one tree per set bit of the live count.
    fn rebuild(&mut self, meter: &mut CostMeter) -> Result<(), KdError> {
        let mut pts: Vec<PointK> = self.trees().flat_map(|t| t.live_points()).collect();
        meter.read(self.stored as u64 * (self.cfg.k as u64 + 1));
        self.levels.clear();
        self.owner.clear();
        self.rebuilds += 1;
        self.stored = pts.len();
        self.live = pts.len();
        for j in (0..usize::BITS as usize).rev() {
            if pts.len() & (1 << j) == 0 {
                continue;
            }
            let chunk = pts.split_off(pts.len() - (1 << j));
            let tree = build_batched(&chunk, &self.cfg, meter)?;
            for p in &chunk {
                self.owner.insert(p.id, j);
            }
            meter.write(chunk.len() as u64);
            if self.levels.len() <= j {
                self.levels.resize(j + 1, None);
            }
            self.levels[j] = Some(tree);
        }
        Ok(())
    }

    pub fn range_query(
        &self,
        lo: &[f64],
        hi: &[f64],
        meter: &mut CostMeter,
    ) -> Result<RangeResult, KdError> {
        if lo.len() != self.cfg.k || hi.len() != self.cfg.k || lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
            return Err(KdError::InvalidBox);
        }
        let mut out = RangeResult {
            points: Vec::new(),
            visited: 0,
        };
        for t in self.trees() {
            let r = t.range_query(lo, hi, meter)?;
            out.points.extend(r.points);
            out.visited += r.visited;
        }
        Ok(out)
    }

    pub fn ann_query(
        &self,
        q: &[f64],
        epsilon: f64,
        meter: &mut CostMeter,
    ) -> Result<(PointK, f64), KdError> {
        let mut best: Option<(PointK, f64)> = None;
        for t in self.trees() {
            match t.ann_query(q, epsilon, meter) {
                Ok((p, d)) => {
                    if best.as_ref().is_none_or(|b| d < b.1) {
                        best = Some((p, d));
                    }
                }
                Err(KdError::Empty) => {}
                Err(e) => return Err(e),
            }
        }
        best.ok_or(KdError::Empty)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kd_tree::build_classic;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_points(n: usize, k: usize, seed: u64) -> Vec<PointK> {
        let mut rng = crate::rng::seeded(seed);
        (0..n as u32)
            .map(|id| PointK::new((0..k).map(|_| rng.gen::<f64>()).collect(), id))
            .collect()
    }

    fn sorted_ids(pts: &[PointK]) -> Vec<u32> {
        let mut v: Vec<u32> = pts.iter().map(|p| p.id).collect();
        v.sort_unstable();
        v
    }

    #[test]
    fn forest_sizes_follow_binary_counter() {
        let mut f = KdForest::new(KdConfig::new(2)).unwrap();
        let mut m = CostMeter::unbounded();
        for p in random_points(8, 2, 1) {
            f.insert(p, &mut m).unwrap();
            if f.live() == 5 {
                assert_eq!(f.sizes(), vec![4, 1]);
            }
        }
        assert_eq!(f.sizes(), vec![8]);
    }

    #[test]
    fn forest_rejects_unknown_and_duplicate_ids() {
        let mut f = KdForest::new(KdConfig::new(2)).unwrap();
        let mut m = CostMeter::unbounded();
        let pts = random_points(3, 2, 1);
        f.insert(pts[0].clone(), &mut m).unwrap();
        assert_eq!(f.insert(pts[0].clone(), &mut m), Err(KdError::DuplicateId(0)));
        assert_eq!(f.delete(9, &mut m), Err(KdError::UnknownId(9)));
    }

    #[test]
    fn balanced_insert_needs_no_rebuild() {
        let pts = random_points(64, 2, 3);
        let mut t = build_classic(&pts, &KdConfig::new(2), &mut CostMeter::unbounded()).unwrap();
        t.insert(PointK::new(vec![0.5, 0.5], 1000), &mut CostMeter::unbounded()).unwrap();
        assert_eq!(t.rebuilds(), 0);
        assert!(t.validate());
    }

    #[test]
    fn sorted_inserts_stay_shallow() {
        let n = 1usize << 12;
        let mut t = KdTree::empty(KdConfig::new(2)).unwrap();
        let mut m = CostMeter::unbounded();
        for i in 0..n as u32 {
            let x = i as f64 / n as f64;
            t.insert(PointK::new(vec![x, x], i), &mut m).unwrap();
        }
        assert!(t.validate());
        assert!(t.rebuilds() > 0);
        assert!(t.height() <= 12 + 4, "height {}", t.height());
    }

    #[test]
    fn delete_all_but_one() {
        let pts = random_points(100, 3, 4);
        let mut t = build_classic(&pts, &KdConfig::new(3), &mut CostMeter::unbounded()).unwrap();
        let mut m = CostMeter::unbounded();
        for id in 1..100 {
            t.delete(id, &mut m).unwrap();
        }
        assert_eq!(t.stored(), 1);
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.delete(5, &mut m), Err(KdError::UnknownId(5)));
    }

    #[derive(Debug, Clone)]
    enum Op {
        Insert(f64, f64),
        Delete(usize),
        Query(f64, f64, f64, f64),
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            3 => (0.0f64..1.0, 0.0f64..1.0).prop_map(|(x, y)| Op::Insert(x, y)),
            1 => any::<usize>().prop_map(Op::Delete),
            1 => (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0).prop_map(|(a, b, c, d)| Op::Query(a, b, c, d)),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn dynamic_structures_match_live_set(ops in proptest::collection::vec(op(), 1..300), ann in any::<bool>(), p in 1usize..8) {
            let mode = if ann { KdMode::Ann } else { KdMode::Range };
            let cfg = KdConfig::new(2).with_mode(mode).with_p(p);
            let mut forest = KdForest::new(cfg.clone()).unwrap();
            let mut single = KdTree::empty(cfg).unwrap();
            let mut live: Vec<PointK> = Vec::new();
            let mut m = CostMeter::unbounded();
            for (i, op) in ops.into_iter().enumerate() {
                match op {
                    Op::Insert(x, y) => {
                        let pt = PointK::new(vec![x, y], i as u32);
                        forest.insert(pt.clone(), &mut m).unwrap();
                        single.insert(pt.clone(), &mut m).unwrap();
                        live.push(pt);
                    }
                    Op::Delete(j) if !live.is_empty() => {
                        let id = live.swap_remove(j % live.len()).id;
                        forest.delete(id, &mut m).unwrap();
                        single.delete(id, &mut m).unwrap();
                    }
                    Op::Delete(_) => {}
                    Op::Query(a, b, c, d) => {
                        let lo = [a.min(b), c.min(d)];
                        let hi = [a.max(b), c.max(d)];
                        let want: Vec<PointK> = live.iter().filter(|p| (0..2).all(|k| lo[k] <= p.coords[k] && p.coords[k] <= hi[k])).cloned().collect();
                        prop_assert_eq!(sorted_ids(&forest.range_query(&lo, &hi, &mut m).unwrap().points), sorted_ids(&want));
                        prop_assert_eq!(sorted_ids(&single.range_query(&lo, &hi, &mut m).unwrap().points), sorted_ids(&want));
                    }
                }
                prop_assert!(single.validate());
                prop_assert_eq!(single.live(), live.len());
                prop_assert_eq!(forest.live(), live.len());
                let sizes = forest.sizes();
                prop_assert!(sizes.iter().all(|s| s.is_power_of_two()));
                prop_assert!(sizes.windows(2).all(|w| w[0] > w[1]));
                prop_assert_eq!(sizes.iter().sum::<usize>(), forest.stored());
            }
        }
    }
}
