//! Sorting by incremental insertion into an unbalanced BST.
//!
//! [`incsort_naive`] is the textbook loop and costs a write per descent step.
//! [`incsort_prefix_doubling`] builds the first `n / log n` keys the same way,
//! then inserts the rest in rounds that double the tree: each new key first
//! finds its empty slot by tracing the current tree (reads only), keys are
//! grouped by slot, and each group is inserted below its slot. All variants
//! produce the same tree as sequential insertion in the given order, with
//! node `i` holding `keys[i]`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::cost_model::{CostMeter, CostSnapshot};
use crate::trace_dag::{self, Dag, NodeId};

pub const NIL: u32 = u32::MAX;

/// Words written when a node is created: key, left, right.
const NODE_WORDS: u64 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortNode<K> {
    pub key: K,
    pub left: u32,
    pub right: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortTree<K> {
    pub nodes: Vec<SortNode<K>>,
    pub root: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SortConfig {
    /// The initial round takes `n / initial_fraction` keys; `None` means
    /// ⌊log₂ n⌋.
    pub initial_fraction: Option<usize>,
    /// Per-bucket descent cap for the depth-capped variant.
    pub cap_iters: Option<u32>,
    pub seed: u64,
}

impl Default for SortConfig {
    fn default() -> Self {
        SortConfig {
            initial_fraction: None,
            cap_iters: None,
            seed: 0,
        }
    }
}

impl SortConfig {
    /// Cap `c · log₂ log₂ n`, rounded down and at least 1.
    pub fn capped(n: usize, c: f64, seed: u64) -> Self {
        let lg = libm::log2(n.max(4) as f64);
        let cap = libm::floor(c * libm::log2(lg)).max(1.0) as u32;
        SortConfig {
            initial_fraction: None,
            cap_iters: Some(cap),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SortError {
    #[error("duplicate key at positions {0} and {1}")]
    DuplicateKey(usize, usize),
}

/// What a prefix-doubling run did besides building the tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortRun<K> {
    pub tree: SortTree<K>,
    /// Per-round cost, labelled `round-0` (initial) to `round-r`, plus `final`
    /// when the depth cap postponed anything.
    pub rounds: Vec<CostSnapshot>,
    pub postponed: usize,
}

impl<K: Ord + Copy> SortTree<K> {
    fn unlinked(keys: &[K]) -> Self {
        SortTree {
            nodes: keys
                .iter()
                .map(|&key| SortNode {
                    key,
                    left: NIL,
                    right: NIL,
                })
                .collect(),
            root: NIL,
        }
    }

    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    pub fn in_order(&self) -> Vec<K> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = Vec::new();
        let mut cur = self.root;
        loop {
            while cur != NIL {
                stack.push(cur);
                cur = self.nodes[cur as usize].left;
            }
            let Some(v) = stack.pop() else { break };
            out.push(self.nodes[v as usize].key);
            cur = self.nodes[v as usize].right;
        }
        out
    }

    /// Number of nodes on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        if self.root == NIL {
            return 0;
        }
        let mut best = 0;
        let mut stack = vec![(self.root, 1usize)];
        while let Some((v, d)) = stack.pop() {
            best = best.max(d);
            let n = &self.nodes[v as usize];
            for c in [n.left, n.right] {
                if c != NIL {
                    stack.push((c, d + 1));
                }
            }
        }
        best
    }

    /// Checks the search-tree order over linked nodes.
    pub fn is_bst(&self) -> bool {
        if self.root == NIL {
            return true;
        }
        let mut stack = vec![(self.root, None::<K>, None::<K>)];
        while let Some((v, lo, hi)) = stack.pop() {
            let n = &self.nodes[v as usize];
            if lo.is_some_and(|lo| n.key <= lo) || hi.is_some_and(|hi| n.key >= hi) {
                return false;
            }
            if n.left != NIL {
                stack.push((n.left, lo, Some(n.key)));
            }
            if n.right != NIL {
                stack.push((n.right, Some(n.key), hi));
            }
        }
        true
    }
}

/// Where an insertion currently points: the root slot or a child slot.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
enum Slot {
    Root,
    Child(u32, bool),
}

fn read_slot<K>(tree: &SortTree<K>, slot: Slot) -> u32 {
    match slot {
        Slot::Root => tree.root,
        Slot::Child(p, false) => tree.nodes[p as usize].left,
        Slot::Child(p, true) => tree.nodes[p as usize].right,
    }
}

fn write_slot<K>(tree: &mut SortTree<K>, slot: Slot, v: u32) {
    match slot {
        Slot::Root => tree.root = v,
        Slot::Child(p, false) => tree.nodes[p as usize].left = v,
        Slot::Child(p, true) => tree.nodes[p as usize].right = v,
    }
}

enum Descent {
    Placed,
    /// Stopped at `slot` after exhausting the cap or hitting a blocked slot.
    Stopped(Slot),
}

/// One element's while-loop from `start`. Each step reads the node under the
/// pointer and writes the pointer; placement writes the slot and the node.
fn descend<K: Ord + Copy>(
    tree: &mut SortTree<K>,
    i: u32,
    start: Slot,
    cap: Option<u32>,
    blocked: &BTreeSet<Slot>,
    mut parent: Option<&mut [u32]>,
    meter: &mut CostMeter,
) -> Result<Descent, SortError> {
    let key = tree.nodes[i as usize].key;
    let mut slot = start;
    let mut iters = 0u32;
    loop {
        if blocked.contains(&slot) {
            return Ok(Descent::Stopped(slot));
        }
        iters += 1;
        if cap.is_some_and(|c| iters > c) {
            return Ok(Descent::Stopped(slot));
        }
        let occupant = read_slot(tree, slot);
        meter.read(1);
        if occupant == NIL {
            // Priority write of N into *P, then the node's own fields.
            write_slot(tree, slot, i);
            meter.write(1 + NODE_WORDS);
            // The tracing view needs an upward link.
            if let (Some(parent), Slot::Child(p, _)) = (parent.as_deref_mut(), slot) {
                parent[i as usize] = p;
                meter.write(1);
            }
            return Ok(Descent::Placed);
        }
        // A lost priority write is still charged.
        meter.write(1);
        let other = tree.nodes[occupant as usize].key;
        meter.read(1);
        if key == other {
            return Err(SortError::DuplicateKey(occupant as usize, i as usize));
        }
        slot = Slot::Child(occupant, key > other);
        meter.write(1);
    }
}

/// Sequential insertion in the given order.
pub fn incsort_naive<K: Ord + Copy>(
    keys: &[K],
    meter: &mut CostMeter,
) -> Result<SortTree<K>, SortError> {
    let mut tree = SortTree::unlinked(keys);
    let none = BTreeSet::new();
    for i in 0..keys.len() as u32 {
        descend(&mut tree, i, Slot::Root, None, &none, None, meter)?;
    }
    Ok(tree)
}

/// Linear-write variant; see the module docs.
pub fn incsort_prefix_doubling<K: Ord + Copy>(
    keys: &[K],
    cfg: &SortConfig,
    meter: &mut CostMeter,
) -> Result<SortTree<K>, SortError> {
    let cfg = SortConfig {
        cap_iters: None,
        ..*cfg
    };
    incsort_rounds(keys, &cfg, meter).map(|r| r.tree)
}

/// Depth-capped variant: a bucket element still unplaced after
/// `cfg.cap_iters` loop iterations is postponed, together with everything
/// that later lands in the same subtree, to one final sequential round.
pub fn incsort_depth_capped<K: Ord + Copy>(
    keys: &[K],
    cfg: &SortConfig,
    meter: &mut CostMeter,
) -> Result<SortTree<K>, SortError> {
    incsort_rounds(keys, cfg, meter).map(|r| r.tree)
}

/// Shared round driver; honours `cfg.cap_iters` when set.
pub fn incsort_rounds<K: Ord + Copy>(
    keys: &[K],
    cfg: &SortConfig,
    meter: &mut CostMeter,
) -> Result<SortRun<K>, SortError> {
    let n = keys.len();
    let mut tree = SortTree::unlinked(keys);
    let mut rounds = Vec::new();
    if n == 0 {
        return Ok(SortRun {
            tree,
            rounds,
            postponed: 0,
        });
    }
    let divisor = cfg
        .initial_fraction
        .unwrap_or_else(|| (n.max(2).ilog2()) as usize)
        .max(1);
    let first = n.div_ceil(divisor);
    let mut parent = vec![NIL; n];
    let none = BTreeSet::new();

    let mut before = meter.snapshot("start");
    for i in 0..first as u32 {
        descend(&mut tree, i, Slot::Root, None, &none, Some(&mut parent), meter)?;
    }
    let after = meter.snapshot("round-0");
    rounds.push(before.diff(&after).expect("same meter"));
    before = after;

    let mut blocked: BTreeSet<Slot> = BTreeSet::new();
    let mut postponed: Vec<u32> = Vec::new();
    let mut done = first;
    let mut round = 1;
    while done < n {
        let end = (2 * done).min(n);
        // Locate every new key in the tree as it stood at round start.
        let mut buckets: BTreeMap<Slot, Vec<u32>> = BTreeMap::new();
        for i in done..end {
            let slot = locate(&tree, &parent, keys[i], i, meter)?;
            buckets.entry(slot).or_default().push(i as u32);
            // Semisort placement of the located record.
            meter.write(1);
        }
        for (slot, members) in buckets {
            for i in members {
                match descend(&mut tree, i, slot, cfg.cap_iters, &blocked, Some(&mut parent), meter)? {
                    Descent::Placed => {}
                    Descent::Stopped(at) => {
                        blocked.insert(at);
                        postponed.push(i);
                    }
                }
            }
        }
        let after = meter.snapshot(format!("round-{round}"));
        rounds.push(before.diff(&after).expect("same meter"));
        before = after;
        done = end;
        round += 1;
    }
    let count = postponed.len();
    if count > 0 {
        for &i in &postponed {
            descend(&mut tree, i, Slot::Root, None, &none, None, meter)?;
        }
        let after = meter.snapshot("final");
        rounds.push(before.diff(&after).expect("same meter"));
    }
    Ok(SortRun {
        tree,
        rounds,
        postponed: count,
    })
}

/// The current tree viewed as a DAG whose leaves are its empty slots.
/// Vertex `i < n` is node `i`; vertex `n + 2i + d` is the empty child slot
/// `d` of node `i`.
struct SlotView<'a, K> {
    tree: &'a SortTree<K>,
    parent: &'a [u32],
}

impl<K> SlotView<'_, K> {
    fn n(&self) -> u32 {
        self.tree.nodes.len() as u32
    }

    fn child(&self, v: u32, right: bool) -> u32 {
        let node = &self.tree.nodes[v as usize];
        let c = if right { node.right } else { node.left };
        if c == NIL {
            self.n() + 2 * v + right as u32
        } else {
            c
        }
    }
}

impl<K> Dag for SlotView<'_, K> {
    fn root(&self) -> NodeId {
        self.tree.root
    }
    fn node_count(&self) -> usize {
        3 * self.tree.nodes.len()
    }
    fn out_degree(&self, v: NodeId) -> usize {
        if v < self.n() {
            2
        } else {
            0
        }
    }
    fn successor(&self, v: NodeId, i: usize) -> NodeId {
        self.child(v, i == 1)
    }
    fn in_degree(&self, v: NodeId) -> usize {
        usize::from(v != self.tree.root)
    }
    fn predecessor(&self, v: NodeId, _i: usize) -> NodeId {
        if v < self.n() {
            self.parent[v as usize]
        } else {
            (v - self.n()) / 2
        }
    }
}

/// Finds the empty slot where `key` belongs by tracing the tree with the
/// predicate "the search for `key` passes through this vertex".
fn locate<K: Ord + Copy>(
    tree: &SortTree<K>,
    parent: &[u32],
    key: K,
    index: usize,
    meter: &mut CostMeter,
) -> Result<Slot, SortError> {
    let view = SlotView { tree, parent };
    let n = view.n();
    let mut duplicate = None;
    // Tracing only asks about a vertex after its parent proved visible, so
    // checking the branch taken at the parent decides membership in the path.
    let visible = |v: NodeId| -> bool {
        if v == tree.root {
            return true;
        }
        let (p, right) = if v < n {
            let p = parent[v as usize];
            (p, tree.nodes[p as usize].right == v)
        } else {
            ((v - n) / 2, (v - n) % 2 == 1)
        };
        let pk = tree.nodes[p as usize].key;
        if pk == key {
            duplicate = Some(p as usize);
            return false;
        }
        (key > pk) == right
    };
    let (leaves, _) =
        trace_dag::trace(&view, visible, None, meter).expect("no depth limit was set");
    if let Some(p) = duplicate {
        return Err(SortError::DuplicateKey(p, index));
    }
    let v = leaves[0];
    debug_assert_eq!(leaves.len(), 1);
    let p = (v - n) / 2;
    Ok(Slot::Child(p, (v - n) % 2 == 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn perm(n: usize, seed: u64) -> Vec<u32> {
        let mut v: Vec<u32> = (0..n as u32).collect();
        crate::rng::shuffle(&mut v, seed);
        v
    }

    #[test]
    fn three_keys() {
        let t = incsort_naive(&[3, 1, 2], &mut CostMeter::unbounded()).unwrap();
        assert_eq!(t.nodes[t.root as usize].key, 3);
        assert_eq!(t.in_order(), vec![1, 2, 3]);
    }

    #[test]
    fn sorted_input_is_a_right_spine() {
        let keys: Vec<u32> = (1..=8).collect();
        let t = incsort_naive(&keys, &mut CostMeter::unbounded()).unwrap();
        assert_eq!(t.depth(), 8);
        assert!(t.nodes.iter().all(|n| n.left == NIL));
    }

    #[test]
    fn duplicates_are_rejected() {
        let mut m = CostMeter::unbounded();
        assert!(matches!(
            incsort_naive(&[4, 2, 4], &mut m),
            Err(SortError::DuplicateKey(0, 2))
        ));
        let mut keys: Vec<u32> = perm(200, 3);
        keys[150] = keys[20];
        assert!(incsort_prefix_doubling(&keys, &SortConfig::default(), &mut m).is_err());
        let cfg = SortConfig { cap_iters: Some(1), ..SortConfig::default() };
        assert!(incsort_depth_capped(&keys, &cfg, &mut m).is_err());
    }

    #[test]
    fn random_order_sorts() {
        let keys = perm(1000, 11);
        let t = incsort_naive(&keys, &mut CostMeter::unbounded()).unwrap();
        let mut oracle = keys.clone();
        oracle.sort_unstable();
        assert_eq!(t.in_order(), oracle);
    }

    #[test]
    fn prefix_doubling_matches_sequential() {
        let keys = perm(1024, 5);
        let naive = incsort_naive(&keys, &mut CostMeter::unbounded()).unwrap();
        let pd = incsort_prefix_doubling(&keys, &SortConfig::default(), &mut CostMeter::unbounded())
            .unwrap();
        assert_eq!(naive, pd);
    }

    #[test]
    fn single_key() {
        let mut m = CostMeter::unbounded();
        let t = incsort_prefix_doubling(&[42], &SortConfig::default(), &mut m).unwrap();
        assert_eq!(t.size(), 1);
        assert_eq!(m.writes(), 1 + NODE_WORDS);
    }

    #[test]
    fn uncapped_and_capped_at_infinity_agree() {
        let keys = perm(700, 9);
        let cfg = SortConfig { cap_iters: Some(u32::MAX), ..SortConfig::default() };
        let a = incsort_depth_capped(&keys, &cfg, &mut CostMeter::unbounded()).unwrap();
        let b = incsort_prefix_doubling(&keys, &SortConfig::default(), &mut CostMeter::unbounded())
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cap_of_one_still_sorts() {
        let keys = perm(64, 2);
        let cfg = SortConfig { cap_iters: Some(1), ..SortConfig::default() };
        let run = incsort_rounds(&keys, &cfg, &mut CostMeter::unbounded()).unwrap();
        assert_eq!(run.tree.in_order(), (0..64).collect::<Vec<_>>());
        assert!(run.postponed > 0);
        let naive = incsort_naive(&keys, &mut CostMeter::unbounded()).unwrap();
        assert_eq!(run.tree, naive);
    }

    #[test]
    fn rounds_are_labelled() {
        let keys = perm(4096, 1);
        let run = incsort_rounds(&keys, &SortConfig::default(), &mut CostMeter::unbounded()).unwrap();
        assert_eq!(run.rounds[0].label, "round-0");
        assert_eq!(run.rounds.last().unwrap().label, format!("round-{}", run.rounds.len() - 1));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn all_variants_build_the_same_tree(n in 1usize..600, seed in any::<u64>(), cap in 1u32..6) {
            let keys = perm(n, seed);
            let naive = incsort_naive(&keys, &mut CostMeter::unbounded()).unwrap();
            let pd = incsort_prefix_doubling(&keys, &SortConfig::default(), &mut CostMeter::unbounded()).unwrap();
            let cfg = SortConfig { cap_iters: Some(cap), ..SortConfig::default() };
            let capped = incsort_depth_capped(&keys, &cfg, &mut CostMeter::unbounded()).unwrap();
            prop_assert!(naive.is_bst());
            prop_assert_eq!(&naive, &pd);
            prop_assert_eq!(&naive, &capped);
            let mut oracle = keys.clone();
            oracle.sort_unstable();
            prop_assert_eq!(pd.in_order(), oracle);
        }
    }
}
