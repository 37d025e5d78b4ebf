use std::collections::BTreeMap;

use crate::protocol::Op;

/// Plaintext range index used as ground truth.
#[derive(Clone, Debug, Default)]
pub struct PlainIndex {
    entries: BTreeMap<u64, Vec<Vec<u8>>>,
    len: usize,
}

impl PlainIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn insert(&mut self, label: u64, payload: &[u8]) {
        self.entries
            .entry(label)
            .or_default()
            .push(payload.to_vec());
        self.len += 1;
    }

    /// Entries with `lo <= label <= hi`, sorted by label then payload.
    pub fn range(&self, lo: u64, hi: u64) -> Vec<(u64, Vec<u8>)> {
        if lo > hi {
            return Vec::new();
        }
        let mut out: Vec<_> = self
            .entries
            .range(lo..=hi)
            .flat_map(|(&l, ps)| ps.iter().map(move |p| (l, p.clone())))
            .collect();
        out.sort();
        out
    }

    pub fn count(&self, lo: u64, hi: u64) -> usize {
        if lo > hi {
            return 0;
        }
        self.entries.range(lo..=hi).map(|(_, ps)| ps.len()).sum()
    }
}

/// Expected answer to every search in `ops`, in order.
pub fn brute_force(ops: &[Op]) -> Vec<Vec<(u64, Vec<u8>)>> {
    let mut idx = PlainIndex::new();
    let mut out = Vec::new();
    for op in ops {
        match op {
            Op::Insert { label, payload } => idx.insert(*label, payload),
            Op::Search { lo, hi } => out.push(idx.range(*lo, *hi)),
        }
    }
    out
}
