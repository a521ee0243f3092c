//! Predicate-guided leaf search in a history DAG.
//!
//! Given a root, a query and a visibility predicate, [`trace`] returns every
//! visible vertex of out-degree zero. A vertex is expanded only from its
//! visible predecessor with the smallest id, so each vertex is visited at most
//! once without any visited-set writes. The only large-memory writes are the
//! reported ids.

use alloc::vec;
use alloc::vec::Vec;

use crate::cost_model::CostMeter;

pub type NodeId = u32;

/// Read-only adjacency view used by [`trace`].
///
/// Ids are dense in `0..node_count()`. Predecessors must be listed in
/// ascending id order.
pub trait Dag {
    fn root(&self) -> NodeId;
    fn node_count(&self) -> usize;
    fn out_degree(&self, v: NodeId) -> usize;
    fn successor(&self, v: NodeId, i: usize) -> NodeId;
    fn in_degree(&self, v: NodeId) -> usize;
    fn predecessor(&self, v: NodeId, i: usize) -> NodeId;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceNode<P> {
    pub payload: P,
    preds: [NodeId; 2],
    n_preds: u8,
    succs: Vec<NodeId>,
}

impl<P> TraceNode<P> {
    pub fn preds(&self) -> &[NodeId] {
        &self.preds[..self.n_preds as usize]
    }

    pub fn succs(&self) -> &[NodeId] {
        &self.succs
    }
}

/// Bounded-degree DAG with one payload per vertex.
#[derive(Debug, Clone)]
pub struct TraceDag<P> {
    nodes: Vec<TraceNode<P>>,
    root: NodeId,
    max_out: usize,
    depth_hint: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TraceStats {
    /// Vertices expanded (all of them visible).
    pub visited: u64,
    /// Leaves written to the output.
    pub reported: u64,
    /// Deepest recursion level reached; bounded by the DAG depth.
    pub max_depth: u64,
    /// Largest explicit-stack size, which is what occupies scratch.
    pub max_stack: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DagError {
    #[error("vertex {0} would get more than two predecessors")]
    TooManyPredecessors(NodeId),
    #[error("vertex {0} would exceed the out-degree bound {1}")]
    OutDegree(NodeId, usize),
    #[error("unknown vertex {0}")]
    UnknownVertex(NodeId),
    #[error("non-root vertex {0} has no predecessor")]
    Orphan(NodeId),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(NodeId, NodeId),
    #[error("the root has a predecessor")]
    RootHasPredecessor,
    #[error("the edge list contains a cycle")]
    Cycle,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("search went deeper than the declared depth {0}; the traceable property does not hold")]
    DepthExceeded(usize),
}

pub const DEFAULT_MAX_OUT_DEGREE: usize = 4;

impl<P> TraceDag<P> {
    /// A DAG holding only the root.
    pub fn new(root_payload: P) -> Self {
        Self::with_out_degree(root_payload, DEFAULT_MAX_OUT_DEGREE)
    }

    pub fn with_out_degree(root_payload: P, max_out: usize) -> Self {
        TraceDag {
            nodes: vec![TraceNode {
                payload: root_payload,
                preds: [0; 2],
                n_preds: 0,
                succs: Vec::new(),
            }],
            root: 0,
            max_out,
            depth_hint: None,
        }
    }

    /// Builds a DAG from explicit edges over vertices `0..payloads.len()`.
    pub fn from_edges(
        payloads: Vec<P>,
        root: NodeId,
        edges: &[(NodeId, NodeId)],
        max_out: usize,
    ) -> Result<Self, DagError> {
        let n = payloads.len();
        if root as usize >= n {
            return Err(DagError::UnknownVertex(root));
        }
        let mut nodes: Vec<TraceNode<P>> = payloads
            .into_iter()
            .map(|payload| TraceNode {
                payload,
                preds: [0; 2],
                n_preds: 0,
                succs: Vec::new(),
            })
            .collect();
        for &(u, v) in edges {
            if u as usize >= n {
                return Err(DagError::UnknownVertex(u));
            }
            if v as usize >= n {
                return Err(DagError::UnknownVertex(v));
            }
            if v == root {
                return Err(DagError::RootHasPredecessor);
            }
            if nodes[v as usize].preds().contains(&u) {
                return Err(DagError::DuplicateEdge(u, v));
            }
            link(&mut nodes, u, v, max_out)?;
        }
        for (i, node) in nodes.iter().enumerate() {
            if i as NodeId != root && node.n_preds == 0 {
                return Err(DagError::Orphan(i as NodeId));
            }
        }
        // Kahn's algorithm; only used to reject cyclic input.
        let mut indeg: Vec<u8> = nodes.iter().map(|x| x.n_preds).collect();
        let mut ready = vec![root];
        let mut seen = 0usize;
        while let Some(u) = ready.pop() {
            seen += 1;
            for &s in nodes[u as usize].succs() {
                indeg[s as usize] -= 1;
                if indeg[s as usize] == 0 {
                    ready.push(s);
                }
            }
        }
        if seen != n {
            return Err(DagError::Cycle);
        }
        Ok(TraceDag {
            nodes,
            root,
            max_out,
            depth_hint: None,
        })
    }

    /// Appends a vertex below `preds` (one or two existing vertices).
    pub fn add_node(
        &mut self,
        payload: P,
        preds: &[NodeId],
        meter: &mut CostMeter,
    ) -> Result<NodeId, DagError> {
        let id = self.nodes.len() as NodeId;
        if preds.is_empty() {
            return Err(DagError::Orphan(id));
        }
        if preds.len() > 2 {
            return Err(DagError::TooManyPredecessors(id));
        }
        if preds.len() == 2 && preds[0] == preds[1] {
            return Err(DagError::DuplicateEdge(preds[0], id));
        }
        for &p in preds {
            if p >= id {
                return Err(DagError::UnknownVertex(p));
            }
            if self.nodes[p as usize].succs.len() >= self.max_out {
                return Err(DagError::OutDegree(p, self.max_out));
            }
        }
        self.nodes.push(TraceNode {
            payload,
            preds: [0; 2],
            n_preds: 0,
            succs: Vec::new(),
        });
        for &p in preds {
            link(&mut self.nodes, p, id, self.max_out)?;
        }
        // Payload word, predecessor slots, and one successor slot per parent.
        meter.write(1 + 2 * preds.len() as u64);
        Ok(id)
    }

    pub fn node(&self, v: NodeId) -> &TraceNode<P> {
        &self.nodes[v as usize]
    }

    pub fn payload(&self, v: NodeId) -> &P {
        &self.nodes[v as usize].payload
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn max_out_degree(&self) -> usize {
        self.max_out
    }

    pub fn depth_hint(&self) -> Option<usize> {
        self.depth_hint
    }

    pub fn set_depth_hint(&mut self, hint: Option<usize>) {
        self.depth_hint = hint;
    }

    /// Longest root-to-vertex path, in edges.
    pub fn depth(&self) -> usize {
        // Vertices are not necessarily in topological order after
        // `from_edges`, so walk in Kahn order.
        let n = self.nodes.len();
        let mut indeg: Vec<u8> = self.nodes.iter().map(|x| x.n_preds).collect();
        let mut level = vec![0usize; n];
        let mut ready = vec![self.root];
        let mut deepest = 0;
        while let Some(u) = ready.pop() {
            deepest = deepest.max(level[u as usize]);
            for &s in self.nodes[u as usize].succs() {
                level[s as usize] = level[s as usize].max(level[u as usize] + 1);
                indeg[s as usize] -= 1;
                if indeg[s as usize] == 0 {
                    ready.push(s);
                }
            }
        }
        deepest
    }
}

fn link<P>(
    nodes: &mut [TraceNode<P>],
    u: NodeId,
    v: NodeId,
    max_out: usize,
) -> Result<(), DagError> {
    if nodes[u as usize].succs.len() >= max_out {
        return Err(DagError::OutDegree(u, max_out));
    }
    let target = &mut nodes[v as usize];
    if target.n_preds >= 2 {
        return Err(DagError::TooManyPredecessors(v));
    }
    target.preds[target.n_preds as usize] = u;
    target.n_preds += 1;
    if target.n_preds == 2 && target.preds[0] > target.preds[1] {
        target.preds.swap(0, 1);
    }
    nodes[u as usize].succs.push(v);
    Ok(())
}

impl<P> Dag for TraceDag<P> {
    fn root(&self) -> NodeId {
        self.root
    }
    fn node_count(&self) -> usize {
        self.nodes.len()
    }
    fn out_degree(&self, v: NodeId) -> usize {
        self.nodes[v as usize].succs.len()
    }
    fn successor(&self, v: NodeId, i: usize) -> NodeId {
        self.nodes[v as usize].succs[i]
    }
    fn in_degree(&self, v: NodeId) -> usize {
        self.nodes[v as usize].n_preds as usize
    }
    fn predecessor(&self, v: NodeId, i: usize) -> NodeId {
        self.nodes[v as usize].preds[i]
    }
}

/// Reports every visible vertex of out-degree zero reachable through visible
/// vertices from the root.
///
/// Reads are charged for each predicate evaluation and adjacency lookup; one
/// write is charged per reported id. The explicit stack is declared as
/// scratch. `depth_limit` (usually the DAG's depth hint) turns runaway descent
/// into an error.
pub fn trace<D: Dag + ?Sized>(
    dag: &D,
    mut visible: impl FnMut(NodeId) -> bool,
    depth_limit: Option<usize>,
    meter: &mut CostMeter,
) -> Result<(Vec<NodeId>, TraceStats), TraceError> {
    let mut out = Vec::new();
    let mut stats = TraceStats::default();
    let root = dag.root();
    meter.read(1);
    if !visible(root) {
        return Ok((out, stats));
    }
    let mut stack: Vec<(NodeId, u32)> = vec![(root, 0)];
    let mut scratch = meter.scratch_scope(1);
    let result = loop {
        let Some((v, depth)) = stack.pop() else {
            break Ok(());
        };
        if let Some(limit) = depth_limit {
            if depth as usize > limit {
                break Err(TraceError::DepthExceeded(limit));
            }
        }
        stats.visited += 1;
        stats.max_depth = stats.max_depth.max(depth as u64);
        let deg = dag.out_degree(v);
        meter.read(1);
        if deg == 0 {
            out.push(v);
            meter.write(1);
            stats.reported += 1;
            continue;
        }
        // Reverse push keeps output in successor order.
        for i in (0..deg).rev() {
            let u = dag.successor(v, i);
            meter.read(1);
            if !visible(u) {
                continue;
            }
            if owner_is(dag, u, v, &mut visible, meter) {
                stack.push((u, depth + 1));
            }
        }
        let len = stack.len() as u64;
        stats.max_stack = stats.max_stack.max(len);
        if len > scratch.words() {
            let extra = len - scratch.words();
            scratch.grow(meter, extra);
        }
    };
    meter.release(scratch);
    result.map(|()| (out, stats))
}

/// Whether `v` is the smallest-id visible predecessor of `u`. `v` itself is
/// known to be visible, so only predecessors with smaller ids are evaluated.
fn owner_is<D: Dag + ?Sized>(
    dag: &D,
    u: NodeId,
    v: NodeId,
    visible: &mut impl FnMut(NodeId) -> bool,
    meter: &mut CostMeter,
) -> bool {
    for i in 0..dag.in_degree(u) {
        let w = dag.predecessor(u, i);
        meter.read(1);
        if w == v {
            return true;
        }
        if w < v && visible(w) {
            return false;
        }
    }
    true
}

/// Test oracle: every visible non-root vertex has a visible predecessor.
pub fn check_traceable<D: Dag + ?Sized>(dag: &D, mut visible: impl FnMut(NodeId) -> bool) -> bool {
    let root = dag.root();
    (0..dag.node_count() as NodeId).all(|v| {
        if v == root || !visible(v) {
            return true;
        }
        (0..dag.in_degree(v)).any(|i| visible(dag.predecessor(v, i)))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;
    use proptest::prelude::*;

    fn dag(n: usize, edges: &[(u32, u32)]) -> TraceDag<()> {
        TraceDag::from_edges(vec![(); n], 0, edges, 4).unwrap()
    }

    /// Independent oracle: flood the visible subgraph from the root and keep
    /// visible sinks.
    fn brute_leaves(d: &TraceDag<()>, vis: &[bool]) -> BTreeSet<u32> {
        let mut seen = BTreeSet::new();
        let mut out = BTreeSet::new();
        if !vis[0] {
            return out;
        }
        let mut todo = vec![0u32];
        while let Some(v) = todo.pop() {
            if !seen.insert(v) {
                continue;
            }
            if d.node(v).succs().is_empty() {
                out.insert(v);
            }
            for &s in d.node(v).succs() {
                if vis[s as usize] {
                    todo.push(s);
                }
            }
        }
        out
    }

    #[test]
    fn chain() {
        let d = dag(3, &[(0, 1), (1, 2)]);
        let mut m = CostMeter::unbounded();
        let (leaves, stats) = trace(&d, |_| true, None, &mut m).unwrap();
        assert_eq!(leaves, vec![2]);
        assert_eq!(stats.visited, 3);
    }

    #[test]
    fn diamond_reports_once_via_smaller_parent() {
        let d = dag(4, &[(0, 1), (0, 2), (1, 3), (2, 3)]);
        let mut m = CostMeter::unbounded();
        let (leaves, stats) = trace(&d, |_| true, None, &mut m).unwrap();
        assert_eq!(leaves, vec![3]);
        assert_eq!(stats.visited, 4);
        assert_eq!(m.writes(), 1);
    }

    #[test]
    fn nothing_visible_below_root() {
        let d = dag(3, &[(0, 1), (0, 2)]);
        let mut m = CostMeter::unbounded();
        let (leaves, _) = trace(&d, |v| v == 0, None, &mut m).unwrap();
        assert!(leaves.is_empty());

        let lone: TraceDag<()> = TraceDag::new(());
        let (leaves, _) = trace(&lone, |_| true, None, &mut m).unwrap();
        assert_eq!(leaves, vec![0]);
    }

    #[test]
    fn broken_chain_is_not_traceable() {
        let d = dag(3, &[(0, 1), (1, 2)]);
        assert!(!check_traceable(&d, |v| v != 1));
        assert!(check_traceable(&d, |_| true));
    }

    #[test]
    fn depth_limit_is_enforced() {
        let d = dag(4, &[(0, 1), (1, 2), (2, 3)]);
        let mut m = CostMeter::unbounded();
        assert_eq!(
            trace(&d, |_| true, Some(2), &mut m),
            Err(TraceError::DepthExceeded(2))
        );
        assert!(trace(&d, |_| true, Some(3), &mut m).is_ok());
    }

    #[test]
    fn degree_bounds_are_enforced() {
        let mut m = CostMeter::unbounded();
        let mut d: TraceDag<u8> = TraceDag::with_out_degree(0, 2);
        let a = d.add_node(1, &[0], &mut m).unwrap();
        let b = d.add_node(2, &[0], &mut m).unwrap();
        assert_eq!(d.add_node(3, &[0], &mut m), Err(DagError::OutDegree(0, 2)));
        assert_eq!(
            d.add_node(3, &[a, b, 0], &mut m),
            Err(DagError::TooManyPredecessors(3))
        );
        assert!(TraceDag::from_edges(vec![(); 2], 0, &[(0, 1), (1, 0)], 4).is_err());
        let err = TraceDag::from_edges(vec![(); 3], 0, &[(0, 1), (1, 2), (2, 1)], 4);
        assert!(err.is_err());
    }

    #[test]
    fn scratch_covers_the_stack() {
        let d = dag(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        let mut m = CostMeter::new(10, 3);
        let (_, stats) = trace(&d, |_| true, None, &mut m).unwrap();
        assert_eq!(stats.max_stack, 4);
        assert_eq!(m.scratch_peak(), 4);
        assert!(m.violated());
    }

    /// Random DAG where vertex v takes one or two predecessors among smaller
    /// ids, respecting the out-degree bound.
    fn random_dag() -> impl Strategy<Value = (TraceDag<()>, Vec<bool>)> {
        (2usize..200, any::<u64>()).prop_map(|(n, seed)| {
            use rand::Rng;
            let mut rng = crate::rng::seeded(seed);
            let mut m = CostMeter::unbounded();
            let mut d: TraceDag<()> = TraceDag::new(());
            for v in 1..n as u32 {
                let open: Vec<u32> = (0..v)
                    .filter(|&u| d.node(u).succs().len() < d.max_out_degree())
                    .collect();
                if open.is_empty() {
                    break;
                }
                let a = open[rng.gen_range(0..open.len())];
                let b = open[rng.gen_range(0..open.len())];
                let preds: Vec<u32> = if a == b || rng.gen_bool(0.5) { vec![a] } else { vec![a, b] };
                d.add_node((), &preds, &mut m).unwrap();
            }
            // Visibility closed under "has a visible predecessor": mark a
            // random set, then hide anything left without visible support.
            let mut vis: Vec<bool> = (0..d.len()).map(|_| rng.gen_bool(0.7)).collect();
            vis[0] = true;
            for v in 1..d.len() {
                let supported = d.node(v as u32).preds().iter().any(|&p| vis[p as usize]);
                vis[v] &= supported;
            }
            (d, vis)
        })
    }

    proptest! {
        #[test]
        fn trace_matches_flood((d, vis) in random_dag()) {
            prop_assert!(check_traceable(&d, |v| vis[v as usize]));
            let mut m = CostMeter::unbounded();
            let mut visits = vec![0u32; d.len()];
            let (leaves, stats) = trace(&d, |v| vis[v as usize], None, &mut m).unwrap();
            let got: BTreeSet<u32> = leaves.iter().copied().collect();
            prop_assert_eq!(got.len(), leaves.len());
            prop_assert_eq!(&got, &brute_leaves(&d, &vis));
            prop_assert_eq!(m.writes(), stats.reported);
            prop_assert!(stats.reported <= stats.visited);
            prop_assert!(stats.max_depth as usize <= d.depth());

            // Count expansions through a wrapper DAG view.
            struct Counting<'a> { inner: &'a TraceDag<()>, hits: core::cell::RefCell<&'a mut Vec<u32>> }
            impl Dag for Counting<'_> {
                fn root(&self) -> NodeId { self.inner.root() }
                fn node_count(&self) -> usize { self.inner.node_count() }
                fn out_degree(&self, v: NodeId) -> usize {
                    self.hits.borrow_mut()[v as usize] += 1;
                    self.inner.out_degree(v)
                }
                fn successor(&self, v: NodeId, i: usize) -> NodeId { self.inner.successor(v, i) }
                fn in_degree(&self, v: NodeId) -> usize { self.inner.in_degree(v) }
                fn predecessor(&self, v: NodeId, i: usize) -> NodeId { self.inner.predecessor(v, i) }
            }
            let view = Counting { inner: &d, hits: core::cell::RefCell::new(&mut visits) };
            let mut m2 = CostMeter::unbounded();
            let (again, stats2) = trace(&view, |v| vis[v as usize], None, &mut m2).unwrap();
            prop_assert_eq!(&again, &leaves);
            prop_assert_eq!(stats2, stats);
            drop(view);
            prop_assert!(visits.iter().all(|&c| c <= 1));
        }
    }
}
