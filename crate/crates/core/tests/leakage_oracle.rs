mod common;

use std::collections::HashMap;

use pope_core::bench::{gen_workload, Placement, WorkloadSpec};
use pope_core::leakage::{knowledge_snapshot, pair_bound, replay_checkpoints, Fact};
use pope_core::protocol::{LocalSession, Op, Session};
use pope_core::{keygen, BlockId, MopeServer, PartialOrderState, PopeClient, PopeServer};

use common::{choose2, keys_by_id};

/// Edges `a -> b` meaning `a < b`, from the raw fact log.
fn edges(facts: &[Fact]) -> Vec<(BlockId, BlockId)> {
    let mut out = Vec::new();
    for f in facts {
        match f {
            Fact::Inserted(_) => {}
            Fact::Classified { item, lower, upper } => {
                if let Some(l) = lower {
                    out.push((*l, *item));
                }
                if let Some(u) = upper.filter(|u| u != item) {
                    out.push((*item, u));
                }
            }
            Fact::Promoted(ids) => out.extend(ids.windows(2).map(|w| (w[0], w[1]))),
        }
    }
    out
}

/// Pairs neither of which reaches the other, by bitset transitive closure.
fn closure_incomparable(ids: &[BlockId], edges: &[(BlockId, BlockId)]) -> u64 {
    let n = ids.len();
    let idx: HashMap<BlockId, usize> = ids.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    let words = n.div_ceil(64);
    let mut reach = vec![vec![0u64; words]; n];
    for &(a, b) in edges {
        let (a, b) = (idx[&a], idx[&b]);
        reach[a][b / 64] |= 1 << (b % 64);
    }
    // Floyd-Warshall over bit rows.
    for k in 0..n {
        let row_k = reach[k].clone();
        for row in reach.iter_mut() {
            if row[k / 64] >> (k % 64) & 1 == 1 {
                for (w, r) in row.iter_mut().zip(&row_k) {
                    *w |= r;
                }
            }
        }
    }
    let mut count = 0;
    for i in 0..n {
        for j in i + 1..n {
            let ij = reach[i][j / 64] >> (j % 64) & 1;
            let ji = reach[j][i / 64] >> (i % 64) & 1;
            if ij == 0 && ji == 0 {
                count += 1;
            }
        }
    }
    count
}

fn ops(n: usize, l: usize, m: usize, seed: u64, placement: Placement) -> Vec<Op> {
    let mut spec = WorkloadSpec::new(n)
        .with_seed(seed)
        .with_placement(placement);
    spec.capacity = l;
    spec.m = m;
    spec.mean_range = 10.0;
    spec.label_space = 300;
    gen_workload(&spec).unwrap()
}

#[test]
fn interval_count_matches_transitive_closure() {
    let mut cases = 0;
    for seed in 0..40u64 {
        let n = 20 + (seed as usize * 37) % 181;
        let l = 2 + seed as usize % 5;
        let m = 1 + seed as usize % 12;
        let placement = Placement::ALL[seed as usize % 3];
        let ops = ops(n, l, m, seed, placement);
        let key = keygen(Some(seed));
        let mut s = LocalSession::new(
            PopeServer::new(l, seed).unwrap(),
            PopeClient::with_seed(&key, l, seed).unwrap(),
        );
        let log = s.server().facts().unwrap().clone();
        assert!(log.facts().is_empty());
        let mut prefix = 0;
        for op in &ops {
            s.run_op(op).unwrap();
            let log = s.server().facts().unwrap();
            // Check after every op so intermediate states are covered too.
            if log.ops() % 7 != 0 && log.ops() != ops.len() {
                continue;
            }
            let facts = log.facts();
            let state = PartialOrderState::replay(facts).unwrap();
            let ids: Vec<BlockId> = facts
                .iter()
                .filter_map(|f| match f {
                    Fact::Inserted(id) => Some(*id),
                    _ => None,
                })
                .collect();
            assert_eq!(
                state.incomparable_pairs(),
                closure_incomparable(&ids, &edges(facts)),
                "seed {seed}"
            );
            prefix = facts.len();
            cases += 1;
        }
        assert!(prefix > 0);
    }
    assert!(cases > 100);
}

#[test]
fn every_fact_is_true_of_the_plaintext() {
    for seed in 0..10u64 {
        let l = 2 + seed as usize % 4;
        let ops = ops(400, l, 30, seed, Placement::UniformInterleaved);
        let key = keygen(Some(seed));
        let mut s = LocalSession::new(
            PopeServer::new(l, seed).unwrap(),
            PopeClient::with_seed(&key, l, seed).unwrap(),
        );
        for op in &ops {
            s.run_op(op).unwrap();
        }
        let keys = keys_by_id(s.server().tree(), s.client().codec());
        let facts = s.server().facts().unwrap().facts();
        for (a, b) in edges(facts) {
            assert!(keys[&a] < keys[&b], "fact {a:?} < {b:?} is false");
        }
    }
}

#[test]
fn incomparable_pairs_never_increase() {
    let ops = ops(2000, 4, 60, 3, Placement::UniformInterleaved);
    let key = keygen(Some(3));
    let mut s = LocalSession::new(
        PopeServer::new(4, 3).unwrap(),
        PopeClient::with_seed(&key, 4, 3).unwrap(),
    );
    let mut searches_seen = Vec::new();
    for (i, op) in ops.iter().enumerate() {
        s.run_op(op).unwrap();
        if matches!(op, Op::Search { .. }) {
            searches_seen.push(i);
        }
    }
    let log = s.server().facts().unwrap();
    // Inserts add new pairs, so compare across each search only.
    let cps: Vec<usize> = searches_seen.iter().flat_map(|&i| [i, i + 1]).collect();
    let counts: HashMap<usize, u64> = replay_checkpoints(log, &cps).unwrap().into_iter().collect();
    for &i in &searches_seen {
        assert!(
            counts[&(i + 1)] <= counts[&i],
            "search at op {i} increased the count"
        );
    }
}

#[test]
fn no_queries_means_all_pairs_and_one_bucket() {
    let key = keygen(Some(1));
    let mut s = LocalSession::new(
        PopeServer::new(3, 1).unwrap(),
        PopeClient::with_seed(&key, 3, 1).unwrap(),
    );
    for i in 0..500u64 {
        s.insert(i, b"").unwrap();
    }
    let state = PartialOrderState::replay(s.server().facts().unwrap().facts()).unwrap();
    assert_eq!(state.incomparable_pairs(), choose2(500));
    let snap = knowledge_snapshot(&state);
    assert!(snap.pivots.is_empty());
    assert_eq!(snap.buckets.len(), 1);
    assert_eq!(snap.buckets[0].size, 500);
}

#[test]
fn first_full_range_query_promotes_capacity_pivots() {
    for l in [3usize, 5, 8] {
        let key = keygen(Some(l as u64));
        let mut s = LocalSession::new(
            PopeServer::new(l, 2).unwrap(),
            PopeClient::with_seed(&key, l, 2).unwrap(),
        );
        for i in 0..1000u64 {
            s.insert(i, b"").unwrap();
        }
        // A range just past every label touches only the root split.
        s.search(5000, 6000).unwrap();
        let state = PartialOrderState::replay(s.server().facts().unwrap().facts()).unwrap();
        let snap = knowledge_snapshot(&state);
        assert!(snap.pivots.len() >= l);
        let root_split_pivots = s.server().tree().stats().pivots_promoted as usize;
        assert_eq!(snap.pivots.len(), root_split_pivots);
        assert_eq!(snap.unordered_items(), 1000 - snap.pivots.len());
        assert!(snap.buckets.len() <= snap.pivots.len() + 1);
    }
}

#[test]
fn measured_bound_holds_for_many_runs() {
    for seed in 0..12u64 {
        let (n, l, m) = (1500, 2 + seed as usize % 6, 1 + seed as usize * 3);
        let ops = ops(n, l, m, seed, Placement::ALL[seed as usize % 3]);
        let key = keygen(Some(seed));
        let mut s = LocalSession::new(
            PopeServer::new(l, seed).unwrap(),
            PopeClient::with_seed(&key, l, seed).unwrap(),
        );
        for op in &ops {
            s.run_op(op).unwrap();
        }
        let state = PartialOrderState::replay(s.server().facts().unwrap().facts()).unwrap();
        let k = state.pivot_count() as u64;
        let b = pair_bound(n as u64, m as u64, l as u64, k);
        assert!(state.incomparable_pairs() >= b.measured, "seed {seed}");
    }
}

#[test]
fn mope_reveals_a_total_order() {
    let ops = ops(800, 4, 20, 1, Placement::UniformInterleaved);
    let key = keygen(Some(1));
    let mut s = LocalSession::new(
        MopeServer::new(),
        PopeClient::with_seed(&key, 4, 1).unwrap(),
    );
    for op in &ops {
        s.run_op(op).unwrap();
        let state = PartialOrderState::replay(s.server().facts().unwrap().facts()).unwrap();
        assert_eq!(state.incomparable_pairs(), 0);
    }
}
