use std::cell::Cell;
use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::crypto::{EffectiveTuple, OriginBits};

/// A fixed randomized order over the values of one operation sequence,
/// answering pairwise order queries. Indices are 1-based, matching profile
/// indices.
#[derive(Clone, Debug)]
pub struct Rord {
    rank: Vec<u32>,
    queries: Cell<u64>,
}

impl Rord {
    fn from_sorted_positions(order: Vec<usize>) -> Self {
        let mut rank = vec![0u32; order.len()];
        for (r, i) in order.into_iter().enumerate() {
            rank[i] = r as u32;
        }
        Rord {
            rank,
            queries: Cell::new(0),
        }
    }

    /// The order the key holder actually sees: effective tuples of every
    /// value, listed by profile index.
    pub fn from_tuples(tuples: &[EffectiveTuple]) -> Self {
        let mut order: Vec<usize> = (0..tuples.len()).collect();
        order.sort_by(|&a, &b| tuples[a].cmp(&tuples[b]));
        Self::from_sorted_positions(order)
    }

    /// Plaintext values with ties broken uniformly at random.
    pub fn from_values<R: Rng + ?Sized>(values: &[(u64, OriginBits)], rng: &mut R) -> Self {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.shuffle(rng);
        order.sort_by_key(|&i| values[i]);
        Self::from_sorted_positions(order)
    }

    pub fn len(&self) -> usize {
        self.rank.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rank.is_empty()
    }

    /// Position of value `index` in the order, from 0.
    pub fn rank(&self, index: u32) -> u32 {
        self.queries.set(self.queries.get() + 1);
        self.rank[index as usize - 1]
    }

    pub fn compare(&self, i: u32, j: u32) -> Ordering {
        self.rank(i).cmp(&self.rank(j))
    }

    pub fn queries(&self) -> u64 {
        self.queries.get()
    }
}
