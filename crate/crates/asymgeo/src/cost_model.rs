//! Read/write accounting for the asymmetric memory model.
//!
//! Large-memory writes cost `omega`, everything else costs one unit. Work that
//! fits in the small symmetric memory is declared through [`ScratchScope`]s;
//! its footprint is checked against a budget but its writes are free.

use alloc::string::String;

/// Counts large-memory reads and writes for one logical task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostMeter {
    reads: u64,
    writes: u64,
    omega: u64,
    scratch_budget: u64,
    scratch_current: u64,
    scratch_peak: u64,
    violated: bool,
}

/// Point-in-time copy of a meter's counters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostSnapshot {
    pub label: String,
    pub reads: u64,
    pub writes: u64,
    pub omega: u64,
    pub scratch_peak: u64,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CostError {
    #[error("snapshots are out of order or come from different meters")]
    MismatchedSnapshots,
    #[error("cannot merge meters with different write multipliers ({0} vs {1})")]
    OmegaMismatch(u64, u64),
}

/// Handle for words declared in small memory. Give it back with
/// [`CostMeter::release`].
#[must_use = "scratch stays reserved until released"]
#[derive(Debug)]
pub struct ScratchScope {
    words: u64,
}

impl ScratchScope {
    pub fn words(&self) -> u64 {
        self.words
    }

    /// Enlarges the reservation, e.g. when an explicit stack grows.
    pub fn grow(&mut self, meter: &mut CostMeter, extra: u64) {
        meter.acquire(extra);
        self.words += extra;
    }
}

impl CostMeter {
    pub const DEFAULT_OMEGA: u64 = 10;

    pub fn new(omega: u64, scratch_budget: u64) -> Self {
        assert!(omega >= 1, "omega must be at least 1");
        CostMeter {
            reads: 0,
            writes: 0,
            omega,
            scratch_budget,
            scratch_current: 0,
            scratch_peak: 0,
            violated: false,
        }
    }

    /// A meter with the default multiplier and an effectively unlimited budget.
    pub fn unbounded() -> Self {
        Self::new(Self::DEFAULT_OMEGA, u64::MAX)
    }

    #[inline]
    pub fn read(&mut self, n: u64) {
        self.reads += n;
    }

    #[inline]
    pub fn write(&mut self, n: u64) {
        self.writes += n;
    }

    pub fn reads(&self) -> u64 {
        self.reads
    }

    pub fn writes(&self) -> u64 {
        self.writes
    }

    pub fn omega(&self) -> u64 {
        self.omega
    }

    pub fn charged_work(&self) -> u64 {
        self.reads + self.omega * self.writes
    }

    pub fn scratch_budget(&self) -> u64 {
        self.scratch_budget
    }

    pub fn scratch_peak(&self) -> u64 {
        self.scratch_peak
    }

    pub fn scratch_in_use(&self) -> u64 {
        self.scratch_current
    }

    /// True once any scope pushed usage past the budget.
    pub fn violated(&self) -> bool {
        self.violated
    }

    pub fn set_scratch_budget(&mut self, words: u64) {
        self.scratch_budget = words;
    }

    pub fn scratch_scope(&mut self, words: u64) -> ScratchScope {
        self.acquire(words);
        ScratchScope { words }
    }

    pub fn release(&mut self, scope: ScratchScope) {
        debug_assert!(self.scratch_current >= scope.words);
        self.scratch_current -= scope.words;
    }

    /// Runs `f` with `words` reserved in small memory.
    pub fn scoped<R>(&mut self, words: u64, f: impl FnOnce(&mut CostMeter) -> R) -> R {
        let scope = self.scratch_scope(words);
        let out = f(self);
        self.release(scope);
        out
    }

    fn acquire(&mut self, words: u64) {
        self.scratch_current += words;
        if self.scratch_current > self.scratch_peak {
            self.scratch_peak = self.scratch_current;
        }
        if self.scratch_current > self.scratch_budget {
            self.violated = true;
        }
    }

    pub fn snapshot(&self, label: impl Into<String>) -> CostSnapshot {
        CostSnapshot {
            label: label.into(),
            reads: self.reads,
            writes: self.writes,
            omega: self.omega,
            scratch_peak: self.scratch_peak,
            violated: self.violated,
        }
    }

    /// Folds a child task's meter into this one at a join point.
    ///
    /// Reads and writes add; the peak is the larger of the two since the
    /// tasks' scratch areas are private.
    pub fn merge(&mut self, other: &CostMeter) -> Result<(), CostError> {
        if self.omega != other.omega {
            return Err(CostError::OmegaMismatch(self.omega, other.omega));
        }
        self.reads += other.reads;
        self.writes += other.writes;
        self.scratch_peak = self.scratch_peak.max(other.scratch_peak);
        self.violated |= other.violated;
        Ok(())
    }

    /// A fresh meter with the same multiplier and budget, for a forked task.
    pub fn fork(&self) -> CostMeter {
        CostMeter::new(self.omega, self.scratch_budget)
    }
}

impl CostSnapshot {
    pub fn charged_work(&self) -> u64 {
        self.reads + self.omega * self.writes
    }

    /// Cost accrued between `self` and a later snapshot `later`.
    pub fn diff(&self, later: &CostSnapshot) -> Result<CostSnapshot, CostError> {
        if later.omega != self.omega {
            return Err(CostError::MismatchedSnapshots);
        }
        let reads = later
            .reads
            .checked_sub(self.reads)
            .ok_or(CostError::MismatchedSnapshots)?;
        let writes = later
            .writes
            .checked_sub(self.writes)
            .ok_or(CostError::MismatchedSnapshots)?;
        Ok(CostSnapshot {
            label: later.label.clone(),
            reads,
            writes,
            omega: later.omega,
            scratch_peak: later.scratch_peak,
            violated: later.violated,
        })
    }
}

/// Free-function form of [`CostSnapshot::diff`].
pub fn diff(a: &CostSnapshot, b: &CostSnapshot) -> Result<CostSnapshot, CostError> {
    a.diff(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn snap(reads: u64, writes: u64) -> CostSnapshot {
        CostSnapshot {
            label: String::new(),
            reads,
            writes,
            omega: 1,
            scratch_peak: 0,
            violated: false,
        }
    }

    #[test]
    fn reads_accumulate() {
        let mut m = CostMeter::unbounded();
        m.read(3);
        assert_eq!(m.reads(), 3);
        m.read(0);
        assert_eq!(m.reads(), 3);
        let mut m = CostMeter::unbounded();
        m.read(2);
        m.read(5);
        assert_eq!(m.reads(), 7);
    }

    #[test]
    fn writes_are_multiplied_by_omega() {
        let mut m = CostMeter::new(5, 0);
        m.read(10);
        m.write(4);
        assert_eq!(m.charged_work(), 30);
        m.write(0);
        assert_eq!(m.charged_work(), 30);

        let mut sym = CostMeter::new(1, 0);
        sym.read(6);
        sym.write(7);
        assert_eq!(sym.charged_work(), 13);
    }

    #[test]
    fn nested_scopes_track_peak() {
        let mut m = CostMeter::new(10, 64);
        let outer = m.scratch_scope(32);
        let inner = m.scratch_scope(16);
        assert_eq!(m.scratch_peak(), 48);
        m.release(inner);
        m.release(outer);
        assert!(!m.violated());
        assert_eq!(m.scratch_in_use(), 0);
    }

    #[test]
    fn oversized_scope_flags_violation() {
        let mut m = CostMeter::new(10, 64);
        let s = m.scratch_scope(100);
        m.release(s);
        assert!(m.violated());
    }

    #[test]
    fn empty_scope_changes_nothing() {
        let mut m = CostMeter::new(10, 64);
        let before = m.clone();
        let s = m.scratch_scope(0);
        m.release(s);
        assert_eq!(m, before);
    }

    #[test]
    fn snapshot_diff() {
        let d = snap(2, 3).diff(&snap(5, 4)).unwrap();
        assert_eq!((d.reads, d.writes), (3, 1));
        let d = snap(2, 3).diff(&snap(2, 3)).unwrap();
        assert_eq!((d.reads, d.writes), (0, 0));
        assert_eq!(
            diff(&snap(5, 4), &snap(2, 3)),
            Err(CostError::MismatchedSnapshots)
        );
    }

    #[test]
    fn merge_rejects_different_omega() {
        let mut a = CostMeter::new(2, 8);
        assert!(a.merge(&CostMeter::new(3, 8)).is_err());
    }

    proptest! {
        #[test]
        fn charged_work_formula_holds(omega in 1u64..50, ops in proptest::collection::vec((any::<bool>(), 0u64..100), 0..50)) {
            let mut m = CostMeter::new(omega, 0);
            for (is_write, n) in ops {
                if is_write { m.write(n) } else { m.read(n) }
                prop_assert_eq!(m.charged_work(), m.reads() + omega * m.writes());
            }
        }

        #[test]
        fn merge_is_associative_and_commutative(parts in proptest::collection::vec((0u64..1000, 0u64..1000), 3)) {
            let meters: alloc::vec::Vec<CostMeter> = parts.iter().map(|&(r, w)| {
                let mut m = CostMeter::new(7, 0);
                m.read(r);
                m.write(w);
                m
            }).collect();
            let mut left = meters[0].clone();
            left.merge(&meters[1]).unwrap();
            left.merge(&meters[2]).unwrap();
            let mut right_inner = meters[1].clone();
            right_inner.merge(&meters[2]).unwrap();
            let mut right = meters[0].clone();
            right.merge(&right_inner).unwrap();
            let mut swapped = meters[2].clone();
            swapped.merge(&meters[0]).unwrap();
            swapped.merge(&meters[1]).unwrap();
            prop_assert_eq!((left.reads(), left.writes()), (right.reads(), right.writes()));
            prop_assert_eq!((left.reads(), left.writes()), (swapped.reads(), swapped.writes()));
            let total_r: u64 = parts.iter().map(|p| p.0).sum();
            let total_w: u64 = parts.iter().map(|p| p.1).sum();
            prop_assert_eq!((left.reads(), left.writes()), (total_r, total_w));
        }
    }
}
