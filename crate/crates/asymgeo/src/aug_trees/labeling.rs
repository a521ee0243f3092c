//! Weight bands, the marking rule and a checker for the labeling bounds.
//!
//! Weights are node counts plus one, so an empty subtree weighs 1 and a leaf
//! weighs 2.

use alloc::vec;
use alloc::vec::Vec;

use super::NIL;

/// The `i` with `2αⁱ ≤ w ≤ 4αⁱ − 2`, if any.
pub fn band_index(w: u64, alpha: u64) -> Option<u32> {
    band_with_floor(w, alpha, 0)
}

/// The `i` with `2αⁱ − 1 ≤ w ≤ 4αⁱ − 2`. Every critical node's initial
/// weight has one.
pub fn fact_index(w: u64, alpha: u64) -> Option<u32> {
    band_with_floor(w, alpha, 1)
}

fn band_with_floor(w: u64, alpha: u64, slack: u64) -> Option<u32> {
    let mut a: u64 = 1;
    let mut i = 0;
    while 2 * a - slack <= w {
        if w <= 4 * a - 2 {
            return Some(i);
        }
        a = a.checked_mul(alpha)?;
        i += 1;
    }
    None
}

/// The marking rule: `w` lies in a band, or `w = 2αⁱ − 1` while the sibling
/// weighs `2αⁱ`. Nodes of weight `cap` or more are never marked.
pub fn marks(w: u64, sibling: Option<u64>, alpha: u64, cap: u64) -> bool {
    if w >= cap {
        return false;
    }
    if band_index(w, alpha).is_some() {
        return true;
    }
    match sibling {
        Some(s) => s == w + 1 && s == 2 * power_below(s, alpha),
        None => false,
    }
}

/// Largest αⁱ with 2αⁱ ≤ s.
fn power_below(s: u64, alpha: u64) -> u64 {
    let mut a: u64 = 1;
    while let Some(next) = a.checked_mul(alpha) {
        if 2 * next > s {
            break;
        }
        a = next;
    }
    a
}

/// Marking cap for a subtree rebuilt under a critical node of initial weight
/// `s`: with `2αⁱ − 1 ≤ s ≤ 4αⁱ − 2`, nodes of weight ≥ `2αⁱ⁺¹ − 1` stay
/// unmarked, so the rebuilt root cannot jump a band above its old parent.
pub fn rebuild_cap(s: u64, alpha: u64) -> u64 {
    match fact_index(s, alpha) {
        Some(i) => 2 * alpha.saturating_pow(i + 1) - 1,
        None => u64::MAX,
    }
}

/// Read access for [`inspect_labels`].
pub trait Labeled {
    fn root(&self) -> u32;
    /// Upper bound on node ids.
    fn id_bound(&self) -> usize;
    fn children(&self, v: u32) -> [u32; 2];
    fn is_critical(&self, v: u32) -> bool;
    /// Weight stored at `v`; meaningful for critical nodes and the root.
    fn tracked_weight(&self, v: u32) -> u64;
    fn alpha(&self) -> u64;
}

/// Labeling measurements over a whole tree, using true subtree weights.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelReport {
    pub alpha: u64,
    pub nodes: u64,
    pub critical: u64,
    /// Critical parent/child pairs, the root excluded.
    pub pairs: u64,
    /// Pairs outside `max{(α/4)|B|, (3/2)|B| − 1} ≤ |A| ≤ (4α+2)|B|`.
    pub ratio_violations: u64,
    /// Smallest and largest |A|/|B| seen over the pairs.
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Most critical nodes on one root-to-node path, the root included.
    pub max_critical_on_path: u32,
    /// Longest edge count from a critical node up to its nearest critical
    /// ancestor (the root counts).
    pub max_gap: u32,
    /// Critical nodes (or the root) whose stored weight is stale.
    pub weight_mismatches: u64,
}

impl LabelReport {
    /// `3·log_α n`, with the logarithm floored at 1 so tiny trees are not
    /// held to a bound below two levels.
    pub fn path_bound(&self) -> f64 {
        let n = self.nodes.max(2) as f64;
        3.0 * (libm::log(n) / libm::log(self.alpha as f64)).max(1.0)
    }

    pub fn gap_bound(&self) -> u32 {
        4 * self.alpha as u32 + 1
    }

    pub fn holds(&self) -> bool {
        self.ratio_violations == 0
            && self.weight_mismatches == 0
            && self.max_critical_on_path as f64 <= self.path_bound()
            && self.max_gap <= self.gap_bound()
    }
}

pub fn inspect_labels<T: Labeled + ?Sized>(t: &T) -> LabelReport {
    let alpha = t.alpha();
    let mut rep = LabelReport {
        alpha,
        min_ratio: f64::INFINITY,
        max_ratio: 0.0,
        ..LabelReport::default()
    };
    let root = t.root();
    if root == NIL {
        rep.min_ratio = 0.0;
        return rep;
    }
    // True weights, post-order.
    let mut weight = vec![0u64; t.id_bound()];
    let mut order = Vec::new();
    let mut stack = vec![root];
    while let Some(v) = stack.pop() {
        order.push(v);
        for c in t.children(v) {
            if c != NIL {
                stack.push(c);
            }
        }
    }
    for &v in order.iter().rev() {
        let [l, r] = t.children(v);
        let w = |c: u32| if c == NIL { 1 } else { weight[c as usize] };
        weight[v as usize] = w(l) + w(r);
    }
    rep.nodes = order.len() as u64;

    // (node, nearest tracked ancestor, critical count so far, edges since it)
    let mut stack = vec![(root, NIL, 1u32, 0u32)];
    while let Some((v, anc, count, gap)) = stack.pop() {
        let is_root = v == root;
        let crit = t.is_critical(v);
        let w = weight[v as usize];
        let (mut anc, mut count, mut gap) = (anc, count, gap);
        if crit || is_root {
            if t.tracked_weight(v) != w {
                rep.weight_mismatches += 1;
            }
        }
        if crit && !is_root {
            rep.critical += 1;
            count += 1;
            rep.max_gap = rep.max_gap.max(gap);
            if anc != root {
                check_pair(&mut rep, weight[anc as usize], w);
            }
            anc = v;
            gap = 0;
        } else if is_root {
            anc = v;
            if crit {
                rep.critical += 1;
            }
        }
        rep.max_critical_on_path = rep.max_critical_on_path.max(count);
        for c in t.children(v) {
            if c != NIL {
                stack.push((c, anc, count, gap + 1));
            }
        }
    }
    if rep.pairs == 0 {
        rep.min_ratio = 0.0;
    }
    rep
}

fn check_pair(rep: &mut LabelReport, a: u64, b: u64) {
    rep.pairs += 1;
    let (a, b) = (a as f64, b as f64);
    let alpha = rep.alpha as f64;
    let lower = (alpha / 4.0 * b).max(1.5 * b - 1.0);
    let upper = (4.0 * alpha + 2.0) * b;
    if a < lower || a > upper {
        rep.ratio_violations += 1;
    }
    let ratio = a / b;
    rep.min_ratio = rep.min_ratio.min(ratio);
    rep.max_ratio = rep.max_ratio.max(ratio);
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn leaves_are_in_the_lowest_band() {
        for alpha in [2, 3, 4, 16] {
            assert_eq!(band_index(2, alpha), Some(0));
            assert!(marks(2, None, alpha, u64::MAX));
        }
    }

    #[test]
    fn bands_for_alpha_four() {
        assert_eq!(band_index(8, 4), Some(1));
        assert_eq!(band_index(14, 4), Some(1));
        assert_eq!(band_index(15, 4), None);
        assert_eq!(band_index(32, 4), Some(2));
        assert_eq!(fact_index(7, 4), Some(1));
        // 2α − 1 = 7 with a sibling of weight 8
        assert!(marks(7, Some(8), 4, u64::MAX));
        assert!(!marks(7, Some(9), 4, u64::MAX));
        assert!(!marks(7, None, 4, u64::MAX));
        assert_eq!(rebuild_cap(10, 4), 31);
        assert!(!marks(32, None, 4, 31));
    }

    proptest! {
        #[test]
        fn band_index_matches_a_scan(w in 1u64..100_000, alpha in 2u64..20) {
            let mut scan = None;
            let mut a = 1u64;
            for i in 0..20 {
                if a > w {
                    break;
                }
                if 2 * a <= w && w <= 4 * a - 2 {
                    scan = Some(i);
                }
                a = match a.checked_mul(alpha) { Some(x) => x, None => break };
            }
            prop_assert_eq!(band_index(w, alpha), scan);
        }
    }
}
