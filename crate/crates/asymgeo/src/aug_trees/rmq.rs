//! Range-minimum over a depth array, used for LCA queries.
//!
//! In a binary search tree the LCA of the nodes at in-order positions `a ≤ b`
//! is the shallowest node in positions `a..=b`, so an in-order depth array
//! plays the role of the Euler tour. Minima of blocks of size ~log n go into
//! a sparse table, giving O(n) words written overall; a query scans at most
//! two partial blocks.

use alloc::vec::Vec;

use crate::cost_model::CostMeter;

#[derive(Debug, Clone)]
pub struct BlockRmq {
    depth: Vec<u32>,
    block: usize,
    /// `table[j][b]`: position of the minimum over blocks `b .. b + 2^j`.
    table: Vec<Vec<u32>>,
}

impl BlockRmq {
    pub fn new(depth: Vec<u32>, meter: &mut CostMeter) -> Self {
        let n = depth.len();
        let block = (crate::ceil_log2(n.max(2)) as usize).max(1);
        let nb = n.div_ceil(block);
        let mut first = Vec::with_capacity(nb);
        for b in 0..nb {
            let lo = b * block;
            let hi = (lo + block).min(n);
            first.push(argmin(&depth, lo, hi) as u32);
        }
        meter.read(n as u64);
        let mut table = alloc::vec![first];
        let mut span = 1;
        while 2 * span <= nb {
            let prev = table.last().map(|t| t.as_slice()).unwrap_or(&[]);
            let next: Vec<u32> = (0..=nb - 2 * span)
                .map(|b| pick(&depth, prev[b], prev[b + span]))
                .collect();
            meter.read(2 * next.len() as u64);
            table.push(next);
            span *= 2;
        }
        let words: usize = table.iter().map(|t| t.len()).sum();
        meter.write((n + words) as u64);
        BlockRmq {
            depth,
            block,
            table,
        }
    }

    pub fn depth(&self, pos: usize) -> u32 {
        self.depth[pos]
    }

    /// Leftmost position of the minimum depth in `a..=b`.
    pub fn query(&self, a: usize, b: usize, meter: &mut CostMeter) -> usize {
        debug_assert!(a <= b && b < self.depth.len());
        let (ba, bb) = (a / self.block, b / self.block);
        if ba == bb {
            meter.read((b - a + 1) as u64);
            return argmin(&self.depth, a, b + 1);
        }
        let head_end = (ba + 1) * self.block;
        meter.read((head_end - a) as u64);
        let mut best = argmin(&self.depth, a, head_end) as u32;
        if ba + 1 < bb {
            let (l, r) = (ba + 1, bb - 1);
            let j = (usize::BITS - 1 - (r - l + 1).leading_zeros()) as usize;
            meter.read(2);
            let m = pick(&self.depth, self.table[j][l], self.table[j][r + 1 - (1 << j)]);
            best = pick(&self.depth, best, m);
        }
        let tail_start = bb * self.block;
        meter.read((b + 1 - tail_start) as u64);
        let tail = argmin(&self.depth, tail_start, b + 1) as u32;
        pick(&self.depth, best, tail) as usize
    }
}

fn argmin(d: &[u32], lo: usize, hi: usize) -> usize {
    let mut best = lo;
    for i in lo + 1..hi {
        if d[i] < d[best] {
            best = i;
        }
    }
    best
}

/// The shallower position, the left one on ties.
fn pick(d: &[u32], a: u32, b: u32) -> u32 {
    let (x, y) = (a.min(b), a.max(b));
    if d[y as usize] < d[x as usize] {
        y
    } else {
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn matches_a_scan(d in proptest::collection::vec(0u32..20, 1..300), qs in proptest::collection::vec((0usize..300, 0usize..300), 1..50)) {
            let mut m = CostMeter::unbounded();
            let r = BlockRmq::new(d.clone(), &mut m);
            for (x, y) in qs {
                let (a, b) = ((x % d.len()).min(y % d.len()), (x % d.len()).max(y % d.len()));
                prop_assert_eq!(r.query(a, b, &mut m), argmin(&d, a, b + 1));
            }
        }
    }

    #[test]
    fn preprocessing_writes_are_linear() {
        for n in [1usize << 10, 1 << 14] {
            let mut m = CostMeter::unbounded();
            let _ = BlockRmq::new((0..n as u32).map(|i| i.trailing_zeros()).collect(), &mut m);
            assert!(m.writes() <= 3 * n as u64, "{n}: {}", m.writes());
        }
    }
}
