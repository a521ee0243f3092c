//! Tournament tree over a fixed array: per-node minimum and valid count.
//!
//! Queries work bottom-up from the range ends, so their cost depends on the
//! range length rather than the array length. A deletion can be confined to
//! a scope: only ancestors whose whole range lies inside it are refreshed.
//! That is sound as long as later queries stay inside the scope or disjoint
//! from it, which holds for the recursive priority-tree build.

use alloc::vec;
use alloc::vec::Vec;

use super::{AugError, NIL};
use crate::cost_model::CostMeter;

#[derive(Debug, Clone)]
pub struct TournamentTree<T> {
    items: Vec<T>,
    /// Leaves start at `size`; `min[v]` is an item index or `NIL`.
    min: Vec<u32>,
    count: Vec<u32>,
    size: usize,
}

impl<T: Ord + Copy> TournamentTree<T> {
    /// Two words (minimum, count) per node are written.
    pub fn new(items: Vec<T>, meter: &mut CostMeter) -> Self {
        let n = items.len();
        let size = n.next_power_of_two().max(1);
        let mut min = vec![NIL; 2 * size];
        let mut count = vec![0u32; 2 * size];
        for i in 0..n {
            min[size + i] = i as u32;
            count[size + i] = 1;
        }
        let mut t = TournamentTree {
            items,
            min,
            count,
            size,
        };
        for v in (1..size).rev() {
            t.pull(v);
        }
        meter.read(n as u64);
        meter.write(2 * (size + n) as u64);
        t
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn item(&self, i: usize) -> T {
        self.items[i]
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.count[self.size + i] == 1
    }

    fn better(&self, a: u32, b: u32) -> u32 {
        match (a, b) {
            (NIL, _) => b,
            (_, NIL) => a,
            _ if self.items[b as usize] < self.items[a as usize] => b,
            _ => a,
        }
    }

    fn pull(&mut self, v: usize) {
        self.min[v] = self.better(self.min[2 * v], self.min[2 * v + 1]);
        self.count[v] = self.count[2 * v] + self.count[2 * v + 1];
    }

    fn check(&self, lo: usize, hi: usize) -> Result<(), AugError> {
        if lo > hi || hi > self.items.len() {
            Err(AugError::BadRange {
                lo,
                hi,
                len: self.items.len(),
            })
        } else {
            Ok(())
        }
    }

    /// Canonical nodes covering `[lo, hi)`, left to right.
    fn cover(&self, lo: usize, hi: usize, meter: &mut CostMeter) -> Vec<usize> {
        let (mut l, mut r) = (lo + self.size, hi + self.size);
        let mut left = Vec::new();
        let mut right = Vec::new();
        while l < r {
            if l & 1 == 1 {
                left.push(l);
                l += 1;
            }
            if r & 1 == 1 {
                r -= 1;
                right.push(r);
            }
            l >>= 1;
            r >>= 1;
        }
        meter.read(2 * (left.len() + right.len()) as u64);
        left.extend(right.into_iter().rev());
        left
    }

    /// Index of the smallest valid item in `[lo, hi)`.
    pub fn range_min(&self, lo: usize, hi: usize, meter: &mut CostMeter) -> Result<Option<usize>, AugError> {
        self.check(lo, hi)?;
        let best = self
            .cover(lo, hi, meter)
            .into_iter()
            .fold(NIL, |b, v| self.better(b, self.min[v]));
        Ok((best != NIL).then_some(best as usize))
    }

    pub fn count_valid(&self, lo: usize, hi: usize, meter: &mut CostMeter) -> Result<usize, AugError> {
        self.check(lo, hi)?;
        Ok(self
            .cover(lo, hi, meter)
            .into_iter()
            .map(|v| self.count[v] as usize)
            .sum())
    }

    /// Index of the `k`-th valid slot in `[lo, hi)`, counting from 1.
    pub fn kth_valid(&self, lo: usize, hi: usize, k: usize, meter: &mut CostMeter) -> Result<usize, AugError> {
        self.check(lo, hi)?;
        let nodes = self.cover(lo, hi, meter);
        let valid: usize = nodes.iter().map(|&v| self.count[v] as usize).sum();
        if k == 0 || k > valid {
            return Err(AugError::RankOutOfRange { k, valid });
        }
        let mut k = k as u32;
        for v in nodes {
            if k > self.count[v] {
                k -= self.count[v];
                continue;
            }
            let mut v = v;
            while v < self.size {
                meter.read(1);
                if k <= self.count[2 * v] {
                    v *= 2;
                } else {
                    k -= self.count[2 * v];
                    v = 2 * v + 1;
                }
            }
            return Ok(v - self.size);
        }
        unreachable!("k was checked against the cover total")
    }

    /// Invalidates slot `i` and refreshes only the ancestors whose range lies
    /// inside `[scope_lo, scope_hi)`.
    pub fn delete_scoped(
        &mut self,
        i: usize,
        scope_lo: usize,
        scope_hi: usize,
        meter: &mut CostMeter,
    ) -> Result<(), AugError> {
        self.check(scope_lo, scope_hi)?;
        if i >= self.items.len() || i < scope_lo || i >= scope_hi {
            return Err(AugError::BadRange {
                lo: i,
                hi: i + 1,
                len: self.items.len(),
            });
        }
        if !self.is_valid(i) {
            return Err(AugError::InvalidSlot(i));
        }
        let mut v = self.size + i;
        self.min[v] = NIL;
        self.count[v] = 0;
        meter.write(2);
        let mut width = 1;
        loop {
            v >>= 1;
            width <<= 1;
            if v == 0 {
                break;
            }
            // Padding past the array end holds nothing, so it counts as inside.
            let start = v * width - self.size;
            let end = (start + width).min(self.items.len());
            if start < scope_lo || end > scope_hi {
                break;
            }
            meter.read(2);
            meter.write(2);
            self.pull(v);
        }
        Ok(())
    }

    /// Invalidates slot `i` everywhere.
    pub fn delete(&mut self, i: usize, meter: &mut CostMeter) -> Result<(), AugError> {
        self.delete_scoped(i, 0, self.items.len(), meter)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m() -> CostMeter {
        CostMeter::unbounded()
    }

    #[test]
    fn range_min_on_a_small_array() {
        let t = TournamentTree::new(vec![5, 3, 8, 1], &mut m());
        assert_eq!(t.range_min(0, 3, &mut m()).unwrap(), Some(1));
        assert_eq!(t.range_min(0, 4, &mut m()).unwrap(), Some(3));
        assert_eq!(t.range_min(2, 2, &mut m()).unwrap(), None);
    }

    #[test]
    fn kth_valid_first_of_full_range() {
        let t = TournamentTree::new(vec!['a', 'b', 'c'], &mut m());
        assert_eq!(t.kth_valid(0, 3, 1, &mut m()).unwrap(), 0);
        assert_eq!(
            t.kth_valid(0, 3, 4, &mut m()),
            Err(AugError::RankOutOfRange { k: 4, valid: 3 })
        );
    }

    #[test]
    fn delete_exposes_the_next_minimum() {
        let mut t = TournamentTree::new(vec![5, 3, 8, 1], &mut m());
        t.delete(1, &mut m()).unwrap();
        assert_eq!(t.range_min(0, 3, &mut m()).unwrap(), Some(0));
        assert_eq!(t.delete(1, &mut m()), Err(AugError::InvalidSlot(1)));
    }

    proptest! {
        #[test]
        fn scoped_deletes_agree_with_a_scan(
            vals in proptest::collection::vec(0u32..1000, 1..200),
            ops in proptest::collection::vec((0usize..200, 0usize..200, 0usize..200, 1usize..20), 1..40),
        ) {
            let n = vals.len();
            let mut t = TournamentTree::new(vals.clone(), &mut m());
            let mut valid = vec![true; n];
            // Nested scopes: each step narrows to a sub-range, as the
            // recursive build does.
            let (mut lo, mut hi) = (0, n);
            for (a, b, d, k) in ops {
                if hi <= lo { break; }
                let (x, y) = (lo + a % (hi - lo), lo + b % (hi - lo));
                let (qa, qb) = (x.min(y), x.max(y) + 1);
                let scan_min = (qa..qb).filter(|&i| valid[i]).min_by_key(|&i| (vals[i], i));
                prop_assert_eq!(t.range_min(qa, qb, &mut m()).unwrap(), scan_min);
                let live: Vec<usize> = (qa..qb).filter(|&i| valid[i]).collect();
                match t.kth_valid(qa, qb, k, &mut m()) {
                    Ok(i) => prop_assert_eq!(Some(&i), live.get(k - 1)),
                    Err(_) => prop_assert!(k > live.len()),
                }
                let di = lo + d % (hi - lo);
                if valid[di] {
                    t.delete_scoped(di, lo, hi, &mut m()).unwrap();
                    valid[di] = false;
                }
                lo = qa;
                hi = qb;
            }
        }
    }
}
