//! Arena treaps used as inner trees.
//!
//! Many small treaps share one arena; a treap is just its root index.
//! Priorities are a hash of the item id, so a rebuilt inner tree has the same
//! shape as the one it replaces. Single inserts and deletes rotate, which
//! writes O(1) words in expectation; bulk merges go through split and union.

use alloc::vec::Vec;

use super::NIL;
use crate::cost_model::CostMeter;
use crate::rng::mix64;

/// Priority plus two child links.
const LINK_WORDS: u64 = 3;

pub trait InnerItem: Copy + Ord {
    /// Words occupied by the item itself.
    const WORDS: u64;
    fn id(&self) -> u32;
}

#[derive(Debug, Clone)]
struct TNode<T> {
    item: T,
    prio: u64,
    left: u32,
    right: u32,
}

#[derive(Debug, Clone)]
pub struct TreapArena<T> {
    nodes: Vec<TNode<T>>,
    free: Vec<u32>,
}

impl<T: InnerItem> Default for TreapArena<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: InnerItem> TreapArena<T> {
    pub fn new() -> Self {
        TreapArena {
            nodes: Vec::new(),
            free: Vec::new(),
        }
    }

    /// Items held by all treaps in the arena.
    pub fn live(&self) -> usize {
        self.nodes.len() - self.free.len()
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
        self.free.clear();
    }

    fn alloc(&mut self, item: T, meter: &mut CostMeter) -> u32 {
        meter.write(T::WORDS + LINK_WORDS);
        let node = TNode {
            item,
            prio: mix64(item.id() as u64),
            left: NIL,
            right: NIL,
        };
        match self.free.pop() {
            Some(i) => {
                self.nodes[i as usize] = node;
                i
            }
            None => {
                self.nodes.push(node);
                (self.nodes.len() - 1) as u32
            }
        }
    }

    fn n(&self, t: u32) -> &TNode<T> {
        &self.nodes[t as usize]
    }

    fn set_left(&mut self, t: u32, c: u32, meter: &mut CostMeter) {
        if self.nodes[t as usize].left != c {
            self.nodes[t as usize].left = c;
            meter.write(1);
        }
    }

    fn set_right(&mut self, t: u32, c: u32, meter: &mut CostMeter) {
        if self.nodes[t as usize].right != c {
            self.nodes[t as usize].right = c;
            meter.write(1);
        }
    }

    /// Inserts `item` (assumed absent) and returns the new root.
    pub fn insert(&mut self, t: u32, item: T, meter: &mut CostMeter) -> u32 {
        if t == NIL {
            return self.alloc(item, meter);
        }
        meter.read(1);
        if item < self.n(t).item {
            let l = self.insert(self.n(t).left, item, meter);
            self.set_left(t, l, meter);
            if self.n(l).prio > self.n(t).prio {
                // rotate right
                self.set_left(t, self.n(l).right, meter);
                self.set_right(l, t, meter);
                return l;
            }
        } else {
            let r = self.insert(self.n(t).right, item, meter);
            self.set_right(t, r, meter);
            if self.n(r).prio > self.n(t).prio {
                self.set_right(t, self.n(r).left, meter);
                self.set_left(r, t, meter);
                return r;
            }
        }
        t
    }

    /// Removes the item equal to `item`; returns the new root and whether it
    /// was found.
    pub fn remove(&mut self, t: u32, item: &T, meter: &mut CostMeter) -> (u32, bool) {
        if t == NIL {
            return (NIL, false);
        }
        meter.read(1);
        match item.cmp(&self.n(t).item) {
            core::cmp::Ordering::Less => {
                let (l, found) = self.remove(self.n(t).left, item, meter);
                self.set_left(t, l, meter);
                (t, found)
            }
            core::cmp::Ordering::Greater => {
                let (r, found) = self.remove(self.n(t).right, item, meter);
                self.set_right(t, r, meter);
                (t, found)
            }
            core::cmp::Ordering::Equal => {
                let (l, r) = (self.n(t).left, self.n(t).right);
                self.free.push(t);
                (self.join(l, r, meter), true)
            }
        }
    }

    /// Concatenates two treaps whose items are all ordered `a < b`.
    pub fn join(&mut self, a: u32, b: u32, meter: &mut CostMeter) -> u32 {
        if a == NIL {
            return b;
        }
        if b == NIL {
            return a;
        }
        meter.read(2);
        if self.n(a).prio > self.n(b).prio {
            let r = self.join(self.n(a).right, b, meter);
            self.set_right(a, r, meter);
            a
        } else {
            let l = self.join(a, self.n(b).left, meter);
            self.set_left(b, l, meter);
            b
        }
    }

    /// Splits into items `< key` and items `≥ key`.
    pub fn split(&mut self, t: u32, key: &T, meter: &mut CostMeter) -> (u32, u32) {
        if t == NIL {
            return (NIL, NIL);
        }
        meter.read(1);
        if self.n(t).item < *key {
            let (l, r) = self.split(self.n(t).right, key, meter);
            self.set_right(t, l, meter);
            (t, r)
        } else {
            let (l, r) = self.split(self.n(t).left, key, meter);
            self.set_left(t, r, meter);
            (l, t)
        }
    }

    /// Merges two treaps with disjoint item sets.
    pub fn union(&mut self, a: u32, b: u32, meter: &mut CostMeter) -> u32 {
        if a == NIL {
            return b;
        }
        if b == NIL {
            return a;
        }
        meter.read(2);
        let (a, b) = if self.n(a).prio >= self.n(b).prio {
            (a, b)
        } else {
            (b, a)
        };
        let key = self.n(a).item;
        let (bl, br) = self.split(b, &key, meter);
        let l = self.union(self.n(a).left, bl, meter);
        let r = self.union(self.n(a).right, br, meter);
        self.set_left(a, l, meter);
        self.set_right(a, r, meter);
        a
    }

    /// Builds a treap from strictly increasing items in linear time.
    pub fn build_sorted(&mut self, items: &[T], meter: &mut CostMeter) -> u32 {
        debug_assert!(items.windows(2).all(|w| w[0] < w[1]));
        let mut spine: Vec<u32> = Vec::new();
        for &item in items {
            let v = self.alloc(item, meter);
            let mut last = NIL;
            while let Some(&top) = spine.last() {
                if self.n(top).prio >= self.n(v).prio {
                    break;
                }
                last = spine.pop().unwrap_or(NIL);
            }
            self.nodes[v as usize].left = last;
            if let Some(&top) = spine.last() {
                self.nodes[top as usize].right = v;
            }
            spine.push(v);
        }
        spine.first().copied().unwrap_or(NIL)
    }

    /// Adds a sorted batch: a rotation insert for one item, a union otherwise.
    pub fn insert_batch(&mut self, t: u32, items: &[T], meter: &mut CostMeter) -> u32 {
        match items {
            [] => t,
            [one] => self.insert(t, *one, meter),
            _ => {
                let b = self.build_sorted(items, meter);
                self.union(t, b, meter)
            }
        }
    }

    /// Frees every node of the treap rooted at `t`.
    pub fn free_tree(&mut self, t: u32) {
        let mut stack = Vec::new();
        if t != NIL {
            stack.push(t);
        }
        while let Some(v) = stack.pop() {
            let n = self.n(v);
            for c in [n.left, n.right] {
                if c != NIL {
                    stack.push(c);
                }
            }
            self.free.push(v);
        }
    }

    /// In-order items, one read per node.
    pub fn to_vec(&self, t: u32, meter: &mut CostMeter) -> Vec<T> {
        let mut out = Vec::new();
        self.walk(t, &mut |x| out.push(*x), meter);
        out
    }

    pub fn len(&self, t: u32) -> usize {
        let mut n = 0;
        self.walk(t, &mut |_| n += 1, &mut CostMeter::unbounded());
        n
    }

    fn walk(&self, t: u32, f: &mut impl FnMut(&T), meter: &mut CostMeter) {
        let mut stack = Vec::new();
        let mut cur = t;
        loop {
            while cur != NIL {
                meter.read(1);
                stack.push(cur);
                cur = self.n(cur).left;
            }
            match stack.pop() {
                Some(v) => {
                    f(&self.n(v).item);
                    cur = self.n(v).right;
                }
                None => break,
            }
        }
    }

    /// Items of the prefix on which `keep` holds (`keep` must be monotone:
    /// true then false in key order).
    pub fn prefix(&self, t: u32, keep: &impl Fn(&T) -> bool, out: &mut Vec<T>, meter: &mut CostMeter) {
        let mut cur = t;
        while cur != NIL {
            meter.read(1);
            let n = self.n(cur);
            if keep(&n.item) {
                self.walk(n.left, &mut |x| out.push(*x), meter);
                out.push(n.item);
                cur = n.right;
            } else {
                cur = n.left;
            }
        }
    }

    /// Items with `lo ≤ item ≤ hi` in the order given by the two predicates
    /// `above_lo` and `below_hi`.
    pub fn range(
        &self,
        t: u32,
        above_lo: &impl Fn(&T) -> bool,
        below_hi: &impl Fn(&T) -> bool,
        out: &mut Vec<T>,
        meter: &mut CostMeter,
    ) {
        if t == NIL {
            return;
        }
        meter.read(1);
        let n = self.n(t);
        let (a, b) = (above_lo(&n.item), below_hi(&n.item));
        if a {
            self.range(n.left, above_lo, below_hi, out, meter);
        }
        if a && b {
            out.push(n.item);
        }
        if b {
            self.range(n.right, above_lo, below_hi, out, meter);
        }
    }

    /// Checks heap order on priorities and strict in-order sorting.
    pub fn is_valid(&self, t: u32) -> bool {
        let items = self.to_vec(t, &mut CostMeter::unbounded());
        if !items.windows(2).all(|w| w[0] < w[1]) {
            return false;
        }
        let mut stack = Vec::new();
        if t != NIL {
            stack.push(t);
        }
        while let Some(v) = stack.pop() {
            for c in [self.n(v).left, self.n(v).right] {
                if c != NIL {
                    if self.n(c).prio > self.n(v).prio {
                        return false;
                    }
                    stack.push(c);
                }
            }
        }
        true
    }
}
