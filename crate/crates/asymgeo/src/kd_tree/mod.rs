//! k-d trees with leaf insertion buffers.
//!
//! [`build_classic`] splits at exact medians and writes every point once per
//! level. [`build_batched`] inserts points in prefix-doubling rounds: a leaf
//! buffers up to `p` arrivals before it picks a splitter from them, so each
//! point is rewritten only a constant number of times in expectation. Both
//! builders end with single-point leaves; with `p ≥ n` they agree exactly.
//!
//! Dynamic updates come in two flavours: [`KdForest`] keeps trees whose sizes
//! are distinct powers of two, and [`KdTree::insert`] rebuilds the topmost
//! unbalanced subtree of a single tree.

mod build;
mod dynamic;
mod query;

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

pub use build::{build_batched, build_classic};
pub use dynamic::KdForest;
pub use query::RangeResult;

pub const NIL: u32 = u32::MAX;

/// Words written per node: dimension, value, id, two children, count.
pub(crate) const NODE_WORDS: u64 = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct PointK {
    pub coords: Vec<f64>,
    pub id: u32,
}

impl PointK {
    pub fn new(coords: Vec<f64>, id: u32) -> Self {
        PointK { coords, id }
    }

    pub fn k(&self) -> usize {
        self.coords.len()
    }

    /// Words occupied in memory: the coordinates and the id.
    pub(crate) fn words(&self) -> u64 {
        self.coords.len() as u64 + 1
    }

    pub fn dist2(&self, q: &[f64]) -> f64 {
        self.coords
            .iter()
            .zip(q)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

/// Order along one dimension, ties broken by id.
pub(crate) fn cmp_on(dim: usize, a: &PointK, b: &PointK) -> Ordering {
    a.coords[dim]
        .total_cmp(&b.coords[dim])
        .then(a.id.cmp(&b.id))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitRule {
    #[default]
    CycleDimensions,
    LongestSide,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KdMode {
    #[default]
    Range,
    Ann,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdConfig {
    pub k: usize,
    /// Leaf buffer capacity; `None` picks the mode's default for the size.
    pub p: Option<usize>,
    pub split_rule: SplitRule,
    pub mode: KdMode,
    /// Single-tree rebuild tolerance in range mode; `None` means 2/log₂ n.
    pub epsilon_imbalance: Option<f64>,
    pub seed: u64,
}

impl KdConfig {
    pub fn new(k: usize) -> Self {
        KdConfig {
            k,
            p: None,
            split_rule: SplitRule::default(),
            mode: KdMode::default(),
            epsilon_imbalance: None,
            seed: 0,
        }
    }

    pub fn with_p(mut self, p: usize) -> Self {
        self.p = Some(p);
        self
    }

    pub fn with_mode(mut self, mode: KdMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Buffer capacity for a structure of `n` objects: ⌈log₂³ n⌉ for range
    /// queries, ⌈log₂ n⌉ for nearest neighbours.
    pub fn buffer_size(&self, n: usize) -> usize {
        if let Some(p) = self.p {
            return p;
        }
        let lg = libm::log2(n.max(2) as f64);
        let p = match self.mode {
            KdMode::Range => libm::ceil(lg * lg * lg),
            KdMode::Ann => libm::ceil(lg),
        };
        (p as usize).max(1)
    }

    pub fn imbalance(&self, n: usize) -> f64 {
        self.epsilon_imbalance
            .unwrap_or_else(|| (2.0 / libm::log2(n.max(8) as f64)).min(0.99))
    }

    fn validate(&self) -> Result<(), KdError> {
        if self.k == 0 || self.p == Some(0) {
            return Err(KdError::BadConfig);
        }
        if let Some(e) = self.epsilon_imbalance {
            if !(e > 0.0 && e < 1.0) {
                return Err(KdError::BadConfig);
            }
        }
        Ok(())
    }

    /// Splitting dimension for a node at `depth` whose cell is `cell`.
    pub(crate) fn split_dim(&self, depth: usize, cell: &[(f64, f64)]) -> usize {
        match self.split_rule {
            SplitRule::CycleDimensions => depth % self.k,
            SplitRule::LongestSide => {
                let mut best = 0;
                for d in 1..cell.len() {
                    if cell[d].1 - cell[d].0 > cell[best].1 - cell[best].0 {
                        best = d;
                    }
                }
                best
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KdError {
    #[error("no points")]
    Empty,
    #[error("point has {got} coordinates, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("id {0} appears twice")]
    DuplicateId(u32),
    #[error("unknown id {0}")]
    UnknownId(u32),
    #[error("box has min > max or the wrong dimension")]
    InvalidBox,
    #[error("invalid configuration")]
    BadConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdNode {
    pub split_dim: usize,
    pub split_val: f64,
    pub split_id: u32,
    pub left: u32,
    pub right: u32,
    /// Points held by a leaf; empty for inner nodes.
    pub buffer: Vec<PointK>,
    /// Stored points in the subtree, deleted ones included.
    pub count: usize,
}

impl KdNode {
    pub(crate) fn leaf(buffer: Vec<PointK>) -> Self {
        KdNode {
            split_dim: 0,
            split_val: 0.0,
            split_id: 0,
            left: NIL,
            right: NIL,
            count: buffer.len(),
            buffer,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.left == NIL
    }

    /// True when `pt` belongs to the left child.
    pub fn goes_left(&self, pt: &PointK) -> bool {
        let c = pt.coords[self.split_dim];
        match c.total_cmp(&self.split_val) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => pt.id <= self.split_id,
        }
    }
}

/// One entry of [`KdTree::canonical`].
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Split { dim: usize, val: f64, id: u32 },
    Leaf(Vec<u32>),
}

#[derive(Debug, Clone)]
pub struct KdTree {
    pub cfg: KdConfig,
    pub(crate) nodes: Vec<KdNode>,
    pub(crate) root: u32,
    /// Closed bounding box of every point ever stored.
    pub(crate) bbox: Vec<(f64, f64)>,
    pub(crate) ids: BTreeSet<u32>,
    pub(crate) deleted: BTreeSet<u32>,
    rebuilds: usize,
}

impl KdTree {
    /// An empty tree for incremental use.
    pub fn empty(cfg: KdConfig) -> Result<Self, KdError> {
        cfg.validate()?;
        Ok(KdTree {
            bbox: vec![(f64::INFINITY, f64::NEG_INFINITY); cfg.k],
            cfg,
            nodes: Vec::new(),
            root: NIL,
            ids: BTreeSet::new(),
            deleted: BTreeSet::new(),
            rebuilds: 0,
        })
    }

    pub fn k(&self) -> usize {
        self.cfg.k
    }

    pub fn root(&self) -> Option<&KdNode> {
        self.nodes.get(self.root as usize)
    }

    pub fn node(&self, id: u32) -> &KdNode {
        &self.nodes[id as usize]
    }

    /// Stored points, deleted ones included.
    pub fn stored(&self) -> usize {
        self.ids.len()
    }

    pub fn live(&self) -> usize {
        self.ids.len() - self.deleted.len()
    }

    pub fn is_deleted(&self, id: u32) -> bool {
        self.deleted.contains(&id)
    }

    /// Subtree rebuilds triggered by imbalance or deletions.
    pub fn rebuilds(&self) -> usize {
        self.rebuilds
    }

    /// Edges on the longest root-to-leaf path, counting a leaf buffer of `b`
    /// points as ⌈log₂ b⌉ further levels.
    pub fn height(&self) -> usize {
        if self.root == NIL {
            return 0;
        }
        let mut best = 0;
        let mut stack = vec![(self.root, 0usize)];
        while let Some((v, d)) = stack.pop() {
            let node = &self.nodes[v as usize];
            if node.is_leaf() {
                best = best.max(d + crate::ceil_log2(node.buffer.len()) as usize);
            } else {
                stack.push((node.left, d + 1));
                stack.push((node.right, d + 1));
            }
        }
        best
    }

    /// Every stored point, deleted ones included, in leaf order.
    pub fn points(&self) -> Vec<PointK> {
        let mut out = Vec::with_capacity(self.stored());
        if self.root != NIL {
            self.collect(self.root, &mut out);
        }
        out
    }

    pub fn live_points(&self) -> Vec<PointK> {
        let mut pts = self.points();
        pts.retain(|p| !self.deleted.contains(&p.id));
        pts
    }

    pub(crate) fn collect(&self, v: u32, out: &mut Vec<PointK>) {
        let mut stack = vec![v];
        while let Some(v) = stack.pop() {
            let node = &self.nodes[v as usize];
            if node.is_leaf() {
                out.extend(node.buffer.iter().cloned());
            } else {
                stack.push(node.right);
                stack.push(node.left);
            }
        }
    }

    /// Preorder description of the partition, independent of arena layout.
    pub fn canonical(&self) -> Vec<Shape> {
        let mut out = Vec::new();
        if self.root == NIL {
            return out;
        }
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            let node = &self.nodes[v as usize];
            if node.is_leaf() {
                out.push(Shape::Leaf(node.buffer.iter().map(|p| p.id).collect()));
            } else {
                out.push(Shape::Split {
                    dim: node.split_dim,
                    val: node.split_val,
                    id: node.split_id,
                });
                stack.push(node.right);
                stack.push(node.left);
            }
        }
        out
    }

    /// Checks the partition invariant and subtree counts at every node.
    pub fn validate(&self) -> bool {
        if self.root == NIL {
            return self.ids.is_empty();
        }
        self.check(self.root, &mut Vec::new()).is_some_and(|n| n == self.ids.len())
    }

    /// Returns the subtree's count if it is consistent with the splits on the
    /// path (`path` holds node ids and the side taken).
    fn check(&self, v: u32, path: &mut Vec<(u32, bool)>) -> Option<usize> {
        let node = &self.nodes[v as usize];
        let count = if node.is_leaf() {
            for pt in &node.buffer {
                if pt.k() != self.cfg.k || !self.inside_bbox(pt) {
                    return None;
                }
                for &(a, left) in path.iter() {
                    if self.nodes[a as usize].goes_left(pt) != left {
                        return None;
                    }
                }
            }
            node.buffer.len()
        } else {
            path.push((v, true));
            let l = self.check(node.left, path);
            path.pop();
            path.push((v, false));
            let r = self.check(node.right, path);
            path.pop();
            l? + r?
        };
        (count == node.count).then_some(count)
    }

    fn inside_bbox(&self, pt: &PointK) -> bool {
        pt.coords
            .iter()
            .zip(&self.bbox)
            .all(|(c, (lo, hi))| lo <= c && c <= hi)
    }

    pub(crate) fn check_point(&self, pt: &PointK) -> Result<(), KdError> {
        if pt.k() != self.cfg.k {
            return Err(KdError::Dimension {
                expected: self.cfg.k,
                got: pt.k(),
            });
        }
        Ok(())
    }
}

pub(crate) fn bounding_box(points: &[PointK], k: usize) -> Vec<(f64, f64)> {
    let mut bbox = vec![(f64::INFINITY, f64::NEG_INFINITY); k];
    for p in points {
        for (b, &c) in bbox.iter_mut().zip(&p.coords) {
            b.0 = b.0.min(c);
            b.1 = b.1.max(c);
        }
    }
    bbox
}

/// The two halves of `cell` on either side of a split.
pub(crate) fn split_cell(
    cell: &[(f64, f64)],
    dim: usize,
    val: f64,
) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    let mut l = cell.to_vec();
    let mut r = cell.to_vec();
    l[dim].1 = val;
    r[dim].0 = val;
    (l, r)
}

pub(crate) fn validate_input(points: &[PointK], cfg: &KdConfig) -> Result<(), KdError> {
    cfg.validate()?;
    if points.is_empty() {
        return Err(KdError::Empty);
    }
    let mut seen = BTreeSet::new();
    for p in points {
        if p.k() != cfg.k {
            return Err(KdError::Dimension {
                expected: cfg.k,
                got: p.k(),
            });
        }
        if !seen.insert(p.id) {
            return Err(KdError::DuplicateId(p.id));
        }
    }
    Ok(())
}
