use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::Op;

pub const DEFAULT_MEAN_RANGE: f64 = 100.0;
pub const DEFAULT_LABEL_SPACE: u64 = 1 << 32;

/// Where searches sit in the operation sequence.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    #[default]
    UniformInterleaved,
    BunchedAtEnd,
    SingleRepeated,
}

impl Placement {
    pub const ALL: [Placement; 3] = [
        Placement::UniformInterleaved,
        Placement::BunchedAtEnd,
        Placement::SingleRepeated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Placement::UniformInterleaved => "uniform-interleaved",
            Placement::BunchedAtEnd => "bunched-at-end",
            Placement::SingleRepeated => "single-repeated",
        }
    }
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Placement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" | "uniform-interleaved" => Ok(Placement::UniformInterleaved),
            "bunched" | "bunched-at-end" => Ok(Placement::BunchedAtEnd),
            "repeated" | "single-repeated" => Ok(Placement::SingleRepeated),
            other => Err(Error::config(format!("unknown placement {other:?}"))),
        }
    }
}

/// Largest `r` with `r^k <= n`.
pub fn floor_root(n: u64, k: u32) -> u64 {
    if n < 2 || k == 1 {
        return n;
    }
    let mut r = (n as f64).powf(1.0 / k as f64) as u64;
    while r.checked_pow(k).map_or(true, |p| p > n) {
        r -= 1;
    }
    while (r + 1).checked_pow(k).is_some_and(|p| p <= n) {
        r += 1;
    }
    r
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    /// Inserts.
    pub n: usize,
    /// Searches.
    pub m: usize,
    /// Client capacity.
    pub capacity: usize,
    pub placement: Placement,
    /// Mean number of labels a search should match.
    pub mean_range: f64,
    pub seed: u64,
    /// Labels are drawn uniformly from `0..label_space`.
    pub label_space: u64,
}

impl WorkloadSpec {
    /// `m = floor(sqrt n)`, `L = floor(n^(1/4))` (at least 2), mean range 100.
    pub fn new(n: usize) -> Self {
        WorkloadSpec {
            n,
            m: floor_root(n as u64, 2) as usize,
            capacity: default_capacity(n),
            placement: Placement::default(),
            mean_range: DEFAULT_MEAN_RANGE,
            seed: 0,
            label_space: DEFAULT_LABEL_SPACE,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_placement(mut self, placement: Placement) -> Self {
        self.placement = placement;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.capacity < 2 {
            return Err(Error::config(format!(
                "capacity must be at least 2, got {}",
                self.capacity
            )));
        }
        if !(self.mean_range.is_finite() && self.mean_range >= 1.0) {
            return Err(Error::config(format!(
                "mean range must be at least 1, got {}",
                self.mean_range
            )));
        }
        if self.label_space == 0 {
            return Err(Error::config("label space is empty"));
        }
        if self.m > 0 && self.n == 0 {
            return Err(Error::config("searches need at least one insert"));
        }
        Ok(())
    }
}

pub fn default_capacity(n: usize) -> usize {
    (floor_root(n as u64, 4) as usize).max(2)
}

/// Counts over label ranks, for order statistics of the labels inserted so
/// far.
struct Fenwick {
    tree: Vec<u32>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Fenwick {
            tree: vec![0; n + 1],
        }
    }

    fn add(&mut self, rank: usize) {
        let mut i = rank + 1;
        while i < self.tree.len() {
            self.tree[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Rank of the `k`-th (0-based) present element.
    fn kth(&self, mut k: u32) -> usize {
        let mut pos = 0;
        let mut step = (self.tree.len() - 1).next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] <= k {
                pos = next;
                k -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

/// Picks `[lo, hi]` covering `size` consecutive present labels, starting
/// from a uniform position.
fn pick_range<R: Rng>(
    rng: &mut R,
    size: usize,
    present: usize,
    label_at: impl Fn(usize) -> u64,
) -> (u64, u64) {
    let s = size.clamp(1, present);
    let start = rng.gen_range(0..=present - s);
    (label_at(start), label_at(start + s - 1))
}

/// Reproducible operation sequence for `spec`. Insert `i` carries the
/// payload `i` as 8 big-endian bytes.
pub fn gen_workload(spec: &WorkloadSpec) -> Result<Vec<Op>> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let inserts = (0..spec.n)
        .map(|i| {
            (
                rng.gen_range(0..spec.label_space),
                (i as u64).to_be_bytes().to_vec(),
            )
        })
        .collect();
    interleave(inserts, spec, &mut rng)
}

/// Places `spec.m` searches among the given inserts, which keep their
/// order. `spec.n` and `spec.label_space` are ignored.
pub fn add_searches(inserts: &[Op], spec: &WorkloadSpec) -> Result<Vec<Op>> {
    let inserts: Vec<(u64, Vec<u8>)> = inserts
        .iter()
        .filter_map(|op| match op {
            Op::Insert { label, payload } => Some((*label, payload.clone())),
            Op::Search { .. } => None,
        })
        .collect();
    let spec = WorkloadSpec {
        n: inserts.len(),
        label_space: 1,
        ..spec.clone()
    };
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    interleave(inserts, &spec, &mut rng)
}

fn interleave(
    inserts: Vec<(u64, Vec<u8>)>,
    spec: &WorkloadSpec,
    rng: &mut ChaCha20Rng,
) -> Result<Vec<Op>> {
    let n = inserts.len();
    let sizes = Geometric::new(1.0 / spec.mean_range).map_err(|e| Error::config(e.to_string()))?;
    let mut by_rank: Vec<(u64, usize)> = inserts.iter().map(|(l, _)| *l).zip(0..).collect();
    by_rank.sort_unstable();
    let mut rank_of = vec![0; n];
    for (r, &(_, i)) in by_rank.iter().enumerate() {
        rank_of[i] = r;
    }
    let full = |r: usize| by_rank[r].0;

    let is_search: Vec<bool> = match spec.placement {
        Placement::BunchedAtEnd => (0..n + spec.m).map(|i| i >= n).collect(),
        _ => {
            let mut v = vec![false; n + spec.m];
            for i in index::sample(rng, n + spec.m, spec.m) {
                v[i] = true;
            }
            v
        }
    };
    let repeated = (spec.placement == Placement::SingleRepeated && spec.m > 0).then(|| {
        let size = sizes.sample(rng) as usize + 1;
        pick_range(rng, size, n, full)
    });

    let mut present = Fenwick::new(n);
    let mut inserts = inserts.into_iter().enumerate();
    let mut inserted = 0usize;
    let mut ops = Vec::with_capacity(n + spec.m);
    for search in is_search {
        if !search {
            let (i, (label, payload)) = inserts.next().expect("one flag per insert");
            present.add(rank_of[i]);
            ops.push(Op::Insert { label, payload });
            inserted += 1;
            continue;
        }
        let (lo, hi) = match repeated {
            Some(r) => r,
            None => {
                let size = sizes.sample(rng) as usize + 1;
                if inserted == 0 {
                    pick_range(rng, size, n, full)
                } else {
                    pick_range(rng, size, inserted, |k| full(present.kth(k as u32)))
                }
            }
        };
        ops.push(Op::Search { lo, hi });
    }
    Ok(ops)
}
