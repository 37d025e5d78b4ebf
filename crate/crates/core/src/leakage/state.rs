use std::cmp::Ordering;
use std::collections::HashMap;

use crate::block::BlockId;
use crate::error::{Error, Result};

use super::facts::Fact;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Bounds {
    lo: Option<BlockId>,
    hi: Option<BlockId>,
}

/// What the server knows about the order of stored items.
///
/// Pivots are totally ordered among themselves. Every other item is known
/// only to lie strictly between two pivots (either may be unbounded). Two
/// items are comparable exactly when a pivot separates them, so counting
/// needs no transitive closure.
#[derive(Clone, Debug, Default)]
pub struct PartialOrderState {
    pivots: Vec<BlockId>,
    rank: HashMap<BlockId, usize>,
    items: HashMap<BlockId, Bounds>,
    history: Vec<Fact>,
}

fn leak(msg: impl Into<String>) -> Error {
    Error::Leakage(msg.into())
}

impl PartialOrderState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn replay(facts: &[Fact]) -> Result<Self> {
        let mut s = Self::new();
        for f in facts {
            s.apply(f)?;
        }
        Ok(s)
    }

    /// Number of live items, pivots included.
    pub fn len(&self) -> usize {
        self.pivots.len() + self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pivot_count(&self) -> usize {
        self.pivots.len()
    }

    /// Pivots in their known order.
    pub fn pivots(&self) -> &[BlockId] {
        &self.pivots
    }

    pub fn is_pivot(&self, id: BlockId) -> bool {
        self.rank.contains_key(&id)
    }

    pub fn history(&self) -> &[Fact] {
        &self.history
    }

    /// Known bounds of a non-pivot item.
    pub fn bounds(&self, id: BlockId) -> Option<(Option<BlockId>, Option<BlockId>)> {
        self.items.get(&id).map(|b| (b.lo, b.hi))
    }

    pub fn apply(&mut self, fact: &Fact) -> Result<()> {
        match fact {
            Fact::Inserted(id) => self.insert(*id),
            Fact::Classified { item, lower, upper } => {
                self.record_classification(*item, *lower, *upper)
            }
            Fact::Promoted(ids) => self.record_pivot_promotion(ids),
        }
    }

    pub fn insert(&mut self, id: BlockId) -> Result<()> {
        if self.rank.contains_key(&id) || self.items.contains_key(&id) {
            return Err(leak(format!("item {} inserted twice", id.0)));
        }
        self.items.insert(id, Bounds::default());
        self.history.push(Fact::Inserted(id));
        Ok(())
    }

    fn pivot_rank(&self, id: BlockId) -> Result<usize> {
        self.rank
            .get(&id)
            .copied()
            .ok_or_else(|| leak(format!("item {} is not a known pivot", id.0)))
    }

    /// Ranks on the extended scale where -1 and `k` stand for unbounded.
    fn span(&self, b: Bounds) -> (i64, i64) {
        let lo = b.lo.map_or(-1, |p| self.rank[&p] as i64);
        let hi =
            b.hi.map_or(self.pivots.len() as i64, |p| self.rank[&p] as i64);
        (lo, hi)
    }

    /// Learns `lower < item <= upper`.
    pub fn record_classification(
        &mut self,
        item: BlockId,
        lower: Option<BlockId>,
        upper: Option<BlockId>,
    ) -> Result<()> {
        let lo = lower.map(|p| self.pivot_rank(p)).transpose()?;
        let hi = upper.map(|p| self.pivot_rank(p)).transpose()?;
        if let Some(&r) = self.rank.get(&item) {
            let ok = lo.map_or(true, |l| l < r) && hi.map_or(true, |h| r <= h);
            if !ok {
                return Err(leak(format!(
                    "pivot {} placed outside its known position",
                    item.0
                )));
            }
        } else {
            let cur = *self
                .items
                .get(&item)
                .ok_or_else(|| leak(format!("unknown item {}", item.0)))?;
            let mut next = cur;
            if let Some(l) = lo {
                if cur.lo.map_or(true, |c| self.rank[&c] < l) {
                    next.lo = lower;
                }
            }
            if let Some(h) = hi {
                if upper == Some(item) {
                    return Err(leak(format!("non-pivot {} bounded by itself", item.0)));
                }
                if cur.hi.map_or(true, |c| self.rank[&c] > h) {
                    next.hi = upper;
                }
            }
            let (a, b) = self.span(next);
            if a >= b {
                return Err(leak(format!("item {} has an empty interval", item.0)));
            }
            self.items.insert(item, next);
        }
        self.history.push(Fact::Classified { item, lower, upper });
        Ok(())
    }

    /// Learns the outcome of comparing `i` with `j`. One side must be a
    /// pivot; `Less` means `i < j`.
    pub fn record_comparison(&mut self, i: BlockId, j: BlockId, outcome: Ordering) -> Result<()> {
        match (self.is_pivot(i), self.is_pivot(j), outcome) {
            (true, true, o) => {
                if self.rank[&i].cmp(&self.rank[&j]) != o {
                    return Err(leak(format!(
                        "pivots {} and {} compared inconsistently",
                        i.0, j.0
                    )));
                }
                Ok(())
            }
            (_, _, Ordering::Equal) if i != j => Err(leak("distinct items compared equal")),
            (_, _, Ordering::Equal) => Ok(()),
            (false, true, Ordering::Less) => self.record_classification(i, None, Some(j)),
            (false, true, Ordering::Greater) => self.record_classification(i, Some(j), None),
            (true, false, Ordering::Less) => self.record_classification(j, Some(i), None),
            (true, false, Ordering::Greater) => self.record_classification(j, None, Some(i)),
            (false, false, _) => Err(leak(format!(
                "comparison of non-pivots {} and {} is only learned through promotion",
                i.0, j.0
            ))),
        }
    }

    /// `ids`, listed in increasing order, become pivots. They must share one
    /// interval with no pivot inside it.
    pub fn record_pivot_promotion(&mut self, ids: &[BlockId]) -> Result<()> {
        let Some(first) = ids.first() else {
            return Ok(());
        };
        let b = *self
            .items
            .get(first)
            .ok_or_else(|| leak(format!("promoted item {} is not a live non-pivot", first.0)))?;
        for id in ids {
            match self.items.get(id) {
                Some(x) if *x == b => {}
                Some(_) => return Err(leak("promoted items do not share an interval")),
                None => {
                    return Err(leak(format!(
                        "promoted item {} is not a live non-pivot",
                        id.0
                    )))
                }
            }
        }
        let (lo, hi) = self.span(b);
        if hi != lo + 1 {
            return Err(leak("promotion interval still contains pivots"));
        }
        let at = (lo + 1) as usize;
        for id in ids {
            self.items.remove(id);
        }
        self.pivots.splice(at..at, ids.iter().copied());
        if self.pivots.len() != self.rank.len() + ids.len() {
            return Err(leak("promoted item repeated"));
        }
        for (r, &p) in self.pivots.iter().enumerate().skip(at) {
            self.rank.insert(p, r);
        }
        self.history.push(Fact::Promoted(ids.to_vec()));
        Ok(())
    }

    /// Inclusive range of pivot gaps each non-pivot may occupy, in id order.
    pub(crate) fn slot_ranges(&self) -> Vec<(BlockId, usize, usize)> {
        let mut out: Vec<_> = self
            .items
            .iter()
            .map(|(&id, &b)| {
                let (lo, hi) = self.span(b);
                (id, (lo + 1) as usize, hi as usize)
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Pairs of live items whose relative order does not follow from
    /// anything revealed.
    pub fn incomparable_pairs(&self) -> u64 {
        let ranges = self.slot_ranges();
        let m = ranges.len() as u64;
        let mut ends: Vec<usize> = ranges.iter().map(|r| r.2).collect();
        ends.sort_unstable();
        let separated: u64 = ranges
            .iter()
            .map(|&(_, s, _)| ends.partition_point(|&e| e < s) as u64)
            .sum();
        let pivot_pairs: u64 = ranges.iter().map(|&(_, s, e)| (e - s) as u64).sum();
        m * m.saturating_sub(1) / 2 - separated + pivot_pairs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(i: u64) -> BlockId {
        BlockId(i)
    }

    fn fresh(n: u64) -> PartialOrderState {
        let mut s = PartialOrderState::new();
        for i in 1..=n {
            s.insert(id(i)).unwrap();
        }
        s
    }

    #[test]
    fn nothing_revealed_means_all_pairs() {
        for n in [0u64, 1, 2, 10, 1000] {
            assert_eq!(fresh(n).incomparable_pairs(), n * n.saturating_sub(1) / 2);
        }
    }

    #[test]
    fn two_facts_over_four_labels_leave_three_pairs() {
        // l1 > l2 and l2 > l4: promote l2, then place l1 above and l4 below.
        let mut s = fresh(4);
        s.record_pivot_promotion(&[id(2)]).unwrap();
        s.record_comparison(id(1), id(2), Ordering::Greater)
            .unwrap();
        s.record_comparison(id(4), id(2), Ordering::Less).unwrap();
        assert_eq!(s.incomparable_pairs(), 3);
    }

    #[test]
    fn promotion_splits_a_bucket() {
        let mut s = fresh(10);
        s.record_pivot_promotion(&[id(3), id(7)]).unwrap();
        for (i, lo, hi) in [
            (1, None, Some(3)),
            (2, None, Some(3)),
            (4, Some(3), Some(7)),
            (5, Some(7), None),
        ] {
            s.record_classification(id(i), lo.map(id), hi.map(id))
                .unwrap();
        }
        // Pivots are comparable to each other and to the four placed items.
        let snap = s.slot_ranges();
        assert_eq!(snap.len(), 8);
        assert_eq!(s.pivot_count(), 2);
        // 1,2 share a gap; 6,8,9,10 span all three gaps.
        let unplaced = 4u64;
        let want = 1 + unplaced * (unplaced - 1) / 2 + unplaced * 4 + unplaced * 2;
        assert_eq!(s.incomparable_pairs(), want);
    }

    #[test]
    fn inconsistent_facts_are_rejected() {
        let mut s = fresh(4);
        s.record_pivot_promotion(&[id(1), id(2)]).unwrap();
        // Item above 2 and below 1 contradicts 1 < 2.
        s.record_classification(id(3), Some(id(2)), None).unwrap();
        assert!(s.record_classification(id(3), None, Some(id(1))).is_err());
        assert!(s.record_comparison(id(2), id(1), Ordering::Less).is_err());
        assert!(s.record_comparison(id(3), id(4), Ordering::Less).is_err());
        assert!(s.insert(id(1)).is_err());
        assert!(s.record_classification(id(9), None, None).is_err());
    }

    #[test]
    fn promotion_needs_a_tight_shared_interval() {
        let mut s = fresh(6);
        s.record_pivot_promotion(&[id(1)]).unwrap();
        s.record_classification(id(2), Some(id(1)), None).unwrap();
        // 2 and 3 have different intervals.
        assert!(s.record_pivot_promotion(&[id(2), id(3)]).is_err());
        // 3 is unbounded but a pivot exists: not tight.
        assert!(s.record_pivot_promotion(&[id(3)]).is_err());
        s.record_pivot_promotion(&[id(2)]).unwrap();
        assert_eq!(s.pivots(), &[id(1), id(2)]);
    }

    #[test]
    fn pivot_reclassification_is_checked_not_stored() {
        let mut s = fresh(3);
        s.record_pivot_promotion(&[id(1), id(2)]).unwrap();
        s.record_classification(id(2), Some(id(1)), Some(id(2)))
            .unwrap();
        assert!(s.record_classification(id(1), Some(id(2)), None).is_err());
    }
}
