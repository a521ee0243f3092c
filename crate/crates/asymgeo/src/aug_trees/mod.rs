//! Augmented search trees with α-labeling.
//!
//! Three trees share one rebalancing scheme: only *critical* nodes, whose
//! subtree weights fall in the bands `[2αⁱ, 4αⁱ−2]`, track their weight, and
//! a critical node whose weight doubles since it was labeled has its whole
//! subtree rebuilt from sorted order. An update therefore writes
//! O(log_α n) weights instead of O(log n).
//!
//! - [`IntervalTree`]: stabbing queries. Each interval sits at the highest
//!   node whose endpoint key it spans.
//! - [`PriorityTree`]: three-sided queries. Points live at critical nodes in
//!   heap order on y; other nodes only split the x range.
//! - [`RangeTree`]: 2D range queries. Critical nodes carry a y-ordered inner
//!   treap of their subtree.
//!
//! The static builders take input sorted by coordinate and write O(n) words;
//! the sort itself is charged separately (see [`sort_charged`]).

mod interval;
mod labeling;
mod priority;
mod range;
mod rmq;
mod skeleton;
mod tournament;
mod treap;

use alloc::vec::Vec;
use core::cmp::Ordering;

pub use interval::{build_interval_tree, EKey, IntervalTree};
pub use labeling::{band_index, fact_index, inspect_labels, marks, rebuild_cap, LabelReport, Labeled};
pub use priority::{build_priority_tree, PriorityTree};
pub use range::{build_range_tree, RangeTree};
pub use rmq::BlockRmq;
pub use tournament::TournamentTree;
pub use treap::{InnerItem, TreapArena};

use crate::cost_model::CostMeter;

pub const NIL: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub id: u32,
}

impl Interval {
    pub fn new(lo: f64, hi: f64, id: u32) -> Self {
        Interval { lo, hi, id }
    }

    /// Closed containment: `lo ≤ q ≤ hi`.
    pub fn contains(&self, q: f64) -> bool {
        self.lo <= q && q <= self.hi
    }
}

/// A planar point; `y` doubles as the priority in the priority tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
    pub id: u32,
}

impl Point2 {
    pub fn new(x: f64, y: f64, id: u32) -> Self {
        Point2 { x, y, id }
    }

    pub fn key(&self) -> PKey {
        PKey { x: self.x, id: self.id }
    }
}

/// Words per stored interval or point: two coordinates and the id.
pub(crate) const ITEM_WORDS: u64 = 3;

/// x-coordinate with an id tie-break; the search key of range and priority
/// trees.
#[derive(Debug, Clone, Copy)]
pub struct PKey {
    pub x: f64,
    pub id: u32,
}

impl Ord for PKey {
    fn cmp(&self, o: &Self) -> Ordering {
        self.x.total_cmp(&o.x).then(self.id.cmp(&o.id))
    }
}

impl PartialOrd for PKey {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl PartialEq for PKey {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for PKey {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaConfig {
    pub alpha: u64,
    /// Fraction of deleted (or dummy) entries that forces a full rebuild.
    pub deletion_fraction: f64,
}

impl AlphaConfig {
    pub fn new(alpha: u64) -> Result<Self, AugError> {
        let cfg = AlphaConfig {
            alpha,
            deletion_fraction: 0.5,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_deletion_fraction(mut self, f: f64) -> Result<Self, AugError> {
        self.deletion_fraction = f;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), AugError> {
        if self.alpha < 2 {
            return Err(AugError::BadAlpha(self.alpha));
        }
        if !(self.deletion_fraction > 0.0 && self.deletion_fraction <= 1.0) {
            return Err(AugError::BadFraction);
        }
        Ok(())
    }

    pub(crate) fn too_many_dead(&self, dead: u64, total: u64) -> bool {
        dead > 0 && dead as f64 >= self.deletion_fraction * total as f64
    }
}

impl Default for AlphaConfig {
    fn default() -> Self {
        AlphaConfig {
            alpha: 4,
            deletion_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AugError {
    #[error("alpha must be an integer ≥ 2, got {0}")]
    BadAlpha(u64),
    #[error("deletion fraction must lie in (0, 1]")]
    BadFraction,
    #[error("item {0} has a non-finite coordinate or lo > hi")]
    BadItem(u32),
    #[error("id {0} is already present")]
    DuplicateId(u32),
    #[error("id {0} is not present")]
    UnknownId(u32),
    #[error("bulk input is not sorted")]
    Unsorted,
    #[error("index range {lo}..{hi} is invalid for length {len}")]
    BadRange { lo: usize, hi: usize, len: usize },
    #[error("rank {k} exceeds the {valid} valid slots in range")]
    RankOutOfRange { k: usize, valid: usize },
    #[error("slot {0} is already deleted")]
    InvalidSlot(usize),
}

/// Update interface shared by the three trees.
pub trait AugTree {
    type Item: Copy;

    fn insert(&mut self, item: Self::Item, meter: &mut CostMeter) -> Result<(), AugError>;
    fn delete(&mut self, id: u32, meter: &mut CostMeter) -> Result<(), AugError>;
    /// `items` must be sorted by the tree's key.
    fn bulk_insert(&mut self, items: &[Self::Item], meter: &mut CostMeter) -> Result<(), AugError>;
    fn bulk_delete(&mut self, ids: &[u32], meter: &mut CostMeter) -> Result<(), AugError>;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn label_report(&self) -> LabelReport;
}

/// Sorts `v` and charges what a write-efficient comparison sort would:
/// n⌈log₂ n⌉ reads and one write per record.
pub fn sort_charged<T>(
    v: &mut [T],
    words: u64,
    cmp: impl FnMut(&T, &T) -> Ordering,
    meter: &mut CostMeter,
) {
    let n = v.len() as u64;
    meter.read(n * words * crate::ceil_log2(v.len()).max(1) as u64);
    meter.write(n * words);
    v.sort_by(cmp);
}

pub(crate) fn check_point(p: &Point2) -> Result<(), AugError> {
    if p.x.is_finite() && p.y.is_finite() {
        Ok(())
    } else {
        Err(AugError::BadItem(p.id))
    }
}

pub(crate) fn check_unique<T>(items: &[T], id: impl Fn(&T) -> u32) -> Result<(), AugError> {
    let mut ids: Vec<u32> = items.iter().map(id).collect();
    ids.sort_unstable();
    match ids.windows(2).find(|w| w[0] == w[1]) {
        Some(w) => Err(AugError::DuplicateId(w[0])),
        None => Ok(()),
    }
}
