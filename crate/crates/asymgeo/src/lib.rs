//! Write-efficient geometry kernels under an asymmetric read/write cost model.
//!
//! Every algorithm takes a [`CostMeter`] and charges large-memory reads and
//! writes as it goes, so write-efficiency claims can be measured rather than
//! assumed. The crate is `no_std` and only needs `alloc`.
//!
//! - [`trace_dag`]: predicate-guided leaf search over history DAGs.
//! - [`inc_sort`]: incremental BST sort, plain and prefix-doubling.
//! - [`kd_tree`]: batched k-d construction, queries and dynamic updates.
//! - [`delaunay`]: round-based incremental Delaunay triangulation.
//! - [`aug_trees`]: interval, priority search and range trees with α-labeling.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod aug_trees;
pub mod cost_model;
pub mod delaunay;
pub mod inc_sort;
pub mod kd_tree;
pub mod rng;
pub mod trace_dag;

pub use cost_model::{CostMeter, CostSnapshot, ScratchScope};

/// ⌈log₂ n⌉, with `ceil_log2(0) == ceil_log2(1) == 0`.
pub fn ceil_log2(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}
