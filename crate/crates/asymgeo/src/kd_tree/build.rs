use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use super::{
    bounding_box, cmp_on, split_cell, validate_input, KdConfig, KdError, KdNode, KdTree, PointK,
    NODE_WORDS,
};
use crate::cost_model::CostMeter;

/// Median-split construction down to single-point leaves. Every level
/// rewrites its points, so writes grow as n log n.
pub fn build_classic(
    points: &[PointK],
    cfg: &KdConfig,
    meter: &mut CostMeter,
) -> Result<KdTree, KdError> {
    validate_input(points, cfg)?;
    let mut tree = KdTree::empty(cfg.clone())?;
    let mut pts = points.to_vec();
    tree.bbox = bounding_box(&pts, cfg.k);
    tree.ids = pts.iter().map(|p| p.id).collect();
    tree.nodes.push(KdNode::leaf(Vec::new()));
    tree.root = 0;
    let cell = tree.bbox.clone();
    fill_classic(&mut tree.nodes, 0, &mut pts, 0, &cell, cfg, true, meter);
    Ok(tree)
}

/// Builds the median-split subtree of `pts` into slot `target`.
///
/// With `in_memory` each level's partitioning is charged; otherwise the
/// points are assumed to sit in small memory and only the output (nodes and
/// the points at the leaves) is written.
#[allow(clippy::too_many_arguments)]
pub(crate) fn fill_classic(
    nodes: &mut Vec<KdNode>,
    target: u32,
    pts: &mut [PointK],
    depth: usize,
    cell: &[(f64, f64)],
    cfg: &KdConfig,
    in_memory: bool,
    meter: &mut CostMeter,
) {
    let m = pts.len();
    debug_assert!(m >= 1);
    let words = pts[0].words();
    if m == 1 {
        nodes[target as usize] = KdNode::leaf(vec![pts[0].clone()]);
        meter.write(NODE_WORDS + words);
        return;
    }
    let dim = cfg.split_dim(depth, cell);
    let lsize = m.div_ceil(2);
    pts.select_nth_unstable_by(lsize - 1, |a, b| cmp_on(dim, a, b));
    let (val, id) = (pts[lsize - 1].coords[dim], pts[lsize - 1].id);
    if in_memory {
        meter.read(m as u64 * words);
        meter.write(m as u64 * words);
    }
    let left = nodes.len() as u32;
    nodes.push(KdNode::leaf(Vec::new()));
    nodes.push(KdNode::leaf(Vec::new()));
    nodes[target as usize] = KdNode {
        split_dim: dim,
        split_val: val,
        split_id: id,
        left,
        right: left + 1,
        buffer: Vec::new(),
        count: m,
    };
    meter.write(NODE_WORDS);
    let (lc, rc) = split_cell(cell, dim, val);
    let (lp, rp) = pts.split_at_mut(lsize);
    fill_classic(nodes, left, lp, depth + 1, &lc, cfg, in_memory, meter);
    fill_classic(nodes, left + 1, rp, depth + 1, &rc, cfg, in_memory, meter);
}

/// Batched-incremental construction with leaf buffers of `p` points.
///
/// Points are shuffled with `cfg.seed`, then inserted in rounds: the first
/// takes `n / log₂ n` points and each later one doubles the total. A point
/// is located in the tree as it stood at round start and appended to its
/// leaf's buffer; leaves that overflowed are then settled. Remaining buffers
/// are finished with median splits in small memory.
pub fn build_batched(
    points: &[PointK],
    cfg: &KdConfig,
    meter: &mut CostMeter,
) -> Result<KdTree, KdError> {
    validate_input(points, cfg)?;
    let n = points.len();
    let p = cfg.buffer_size(n);
    let mut order = points.to_vec();
    crate::rng::shuffle(&mut order, cfg.seed);
    let words = order[0].words();
    meter.read(n as u64 * words);
    meter.write(n as u64 * words);

    let mut tree = KdTree::empty(cfg.clone())?;
    tree.bbox = bounding_box(&order, cfg.k);
    tree.ids = order.iter().map(|p| p.id).collect();
    tree.nodes.push(KdNode::leaf(Vec::new()));
    tree.root = 0;

    let first = n.div_ceil((n.max(2).ilog2() as usize).max(1));
    let (mut start, mut end) = (0, first);
    while start < n {
        let mut overflowed = BTreeSet::new();
        for pt in &order[start..end] {
            let leaf = tree.locate(pt, meter);
            let buf = &mut tree.nodes[leaf as usize].buffer;
            buf.push(pt.clone());
            meter.write(words);
            if buf.len() > p {
                overflowed.insert(leaf);
            }
        }
        if !overflowed.is_empty() {
            for (leaf, depth, cell) in tree.leaf_frames() {
                if overflowed.contains(&leaf) {
                    tree.settle(leaf, depth, &cell, p, meter);
                }
            }
        }
        start = end;
        end = (2 * end).min(n);
    }

    for (leaf, depth, cell) in tree.leaf_frames() {
        let mut buf = core::mem::take(&mut tree.nodes[leaf as usize].buffer);
        let m = buf.len() as u64;
        meter.read(m * words);
        meter.scoped(m * words, |meter| {
            fill_classic(&mut tree.nodes, leaf, &mut buf, depth, &cell, cfg, false, meter)
        });
    }
    tree.fix_counts();
    Ok(tree)
}

impl KdTree {
    /// Leaf reached by `pt`, charging a read per node on the way.
    pub(crate) fn locate(&self, pt: &PointK, meter: &mut CostMeter) -> u32 {
        meter.read(pt.words());
        let mut v = self.root;
        loop {
            meter.read(1);
            let node = &self.nodes[v as usize];
            if node.is_leaf() {
                return v;
            }
            v = if node.goes_left(pt) {
                node.left
            } else {
                node.right
            };
        }
    }

    /// Every leaf with its depth and cell.
    pub(crate) fn leaf_frames(&self) -> Vec<(u32, usize, Vec<(f64, f64)>)> {
        let mut out = Vec::new();
        if self.root == super::NIL {
            return out;
        }
        let mut stack = vec![(self.root, 0usize, self.bbox.clone())];
        while let Some((v, depth, cell)) = stack.pop() {
            let node = &self.nodes[v as usize];
            if node.is_leaf() {
                out.push((v, depth, cell));
            } else {
                let (lc, rc) = split_cell(&cell, node.split_dim, node.split_val);
                stack.push((node.right, depth + 1, rc));
                stack.push((node.left, depth + 1, lc));
            }
        }
        out
    }

    /// Splits an overflowing leaf until every buffer below it holds at most
    /// `p` points.
    ///
    /// The splitter is the lower median of the leaf's first `p + 1` arrivals,
    /// so both children receive part of the sample and the recursion always
    /// shrinks. Buffers keep arrival order.
    pub(crate) fn settle(
        &mut self,
        leaf: u32,
        depth: usize,
        cell: &[(f64, f64)],
        p: usize,
        meter: &mut CostMeter,
    ) {
        if self.nodes[leaf as usize].buffer.len() <= p {
            return;
        }
        let buf = core::mem::take(&mut self.nodes[leaf as usize].buffer);
        let words = buf[0].words();
        let dim = self.cfg.split_dim(depth, cell);
        let (val, id) = meter.scoped(p as u64 + 1, |meter| {
            meter.read((p as u64 + 1) * words);
            let mut sample: Vec<&PointK> = buf[..=p].iter().collect();
            let (_, mid, _) = sample.select_nth_unstable_by(p / 2, |a, b| cmp_on(dim, a, b));
            (mid.coords[dim], mid.id)
        });
        let mut node = KdNode::leaf(Vec::new());
        node.split_dim = dim;
        node.split_val = val;
        node.split_id = id;
        let (lbuf, rbuf): (Vec<PointK>, Vec<PointK>) =
            buf.into_iter().partition(|pt| node.goes_left(pt));
        let moved = (lbuf.len() + rbuf.len()) as u64;
        meter.read(moved * words);
        meter.write(moved * words + 3 * NODE_WORDS);
        node.count = moved as usize;
        node.left = self.nodes.len() as u32;
        node.right = node.left + 1;
        self.nodes.push(KdNode::leaf(lbuf));
        self.nodes.push(KdNode::leaf(rbuf));
        let (l, r) = (node.left, node.right);
        self.nodes[leaf as usize] = node;
        let (lc, rc) = split_cell(cell, dim, val);
        self.settle(l, depth + 1, &lc, p, meter);
        self.settle(r, depth + 1, &rc, p, meter);
    }

    /// Recomputes subtree counts bottom-up.
    pub(crate) fn fix_counts(&mut self) {
        if self.root == super::NIL {
            return;
        }
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            order.push(v);
            let node = &self.nodes[v as usize];
            if !node.is_leaf() {
                stack.push(node.left);
                stack.push(node.right);
            }
        }
        for &v in order.iter().rev() {
            let node = &self.nodes[v as usize];
            let c = if node.is_leaf() {
                node.buffer.len()
            } else {
                self.nodes[node.left as usize].count + self.nodes[node.right as usize].count
            };
            self.nodes[v as usize].count = c;
        }
    }
}
