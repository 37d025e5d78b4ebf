use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::state::PartialOrderState;
use crate::block::BlockId;

/// Items sharing one known interval. Ranks are pivot ranks; `None` is
/// unbounded.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bucket {
    pub lo_rank: Option<usize>,
    pub hi_rank: Option<usize>,
    pub size: usize,
}

/// Known pivots in order, and how the remaining items group by interval.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeSnapshot {
    pub pivots: Vec<BlockId>,
    pub buckets: Vec<Bucket>,
}

impl KnowledgeSnapshot {
    pub fn of(state: &PartialOrderState) -> Self {
        let k = state.pivot_count();
        let mut groups: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for (_, s, e) in state.slot_ranges() {
            *groups.entry((s, e)).or_default() += 1;
        }
        let buckets = groups
            .into_iter()
            .map(|((s, e), size)| Bucket {
                lo_rank: s.checked_sub(1),
                hi_rank: (e < k).then_some(e),
                size,
            })
            .collect();
        KnowledgeSnapshot {
            pivots: state.pivots().to_vec(),
            buckets,
        }
    }

    pub fn unordered_items(&self) -> usize {
        self.buckets.iter().map(|b| b.size).sum()
    }

    /// CSV with columns `kind,lo_rank,hi_rank,size,lo_value,hi_value`. The
    /// value columns are filled when `label_of` is given and left empty
    /// otherwise.
    pub fn to_table(&self, label_of: Option<&dyn Fn(BlockId) -> u64>) -> String {
        let value = |rank: Option<usize>| match (rank, label_of) {
            (Some(r), Some(f)) => f(self.pivots[r]).to_string(),
            _ => String::new(),
        };
        let rank = |r: Option<usize>| r.map_or(String::new(), |r| r.to_string());
        let mut out = String::from("kind,lo_rank,hi_rank,size,lo_value,hi_value\n");
        for r in 0..self.pivots.len() {
            let v = value(Some(r));
            writeln!(out, "pivot,{r},{r},1,{v},{v}").unwrap();
        }
        for b in &self.buckets {
            writeln!(
                out,
                "bucket,{},{},{},{},{}",
                rank(b.lo_rank),
                rank(b.hi_rank),
                b.size,
                value(b.lo_rank),
                value(b.hi_rank)
            )
            .unwrap();
        }
        out
    }
}

pub fn knowledge_snapshot(state: &PartialOrderState) -> KnowledgeSnapshot {
    KnowledgeSnapshot::of(state)
}
