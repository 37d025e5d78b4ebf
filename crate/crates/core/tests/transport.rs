mod common;

use pope_core::bench::{
    execute, gen_workload, ExperimentConfig, Scheme, TransportKind, WorkloadSpec,
};
use pope_core::protocol::{LocalSession, Op, Session, SocketSession};
use pope_core::{keygen, Error, PopeClient, PopeServer};

use common::{check_main_invariant, stored_multiset};

fn events(scheme: Scheme, transport: TransportKind, ops: &[Op]) -> Vec<pope_core::protocol::Event> {
    let mut cfg = ExperimentConfig::new(scheme, 4).with_seed(21);
    cfg.transport = transport;
    cfg.keep_events = true;
    let run = execute(ops, &cfg).unwrap();
    assert!(run.report.complete, "{:?}", run.report.error);
    assert_eq!(run.report.mismatches, Some(0));
    run.transcript.events().to_vec()
}

#[test]
fn socket_and_inproc_transcripts_are_identical() {
    let ops = gen_workload(&WorkloadSpec::new(3000).with_seed(6)).unwrap();
    for scheme in [Scheme::Pope, Scheme::Mope] {
        let a = events(scheme, TransportKind::Inproc, &ops);
        let b = events(scheme, TransportKind::Socket, &ops);
        assert!(!a.is_empty());
        assert_eq!(a, b, "{scheme}");
    }
}

#[test]
fn chunk_size_changes_messages_not_rounds() {
    let ops = gen_workload(&WorkloadSpec::new(4000).with_seed(2)).unwrap();
    let run = |chunk| {
        let mut cfg = ExperimentConfig::new(Scheme::Pope, 8).with_seed(1);
        cfg.chunk_size = chunk;
        pope_core::bench::run_experiment(&ops, &cfg).unwrap()
    };
    let (a, b) = (run(1), run(4096));
    assert_eq!(a.total_rounds, b.total_rounds);
    assert_eq!(a.ciphertexts_sent, b.ciphertexts_sent);
    assert_eq!(a.incomparable_pairs, b.incomparable_pairs);
}

#[test]
fn failed_split_leaves_a_consistent_tree() {
    let key = keygen(Some(4));
    let mut s = LocalSession::new(
        PopeServer::new(3, 4).unwrap(),
        PopeClient::with_seed(&key, 3, 4).unwrap(),
    );
    let mut inserted = Vec::new();
    for i in 0..2000u64 {
        let label = i * 7919 % 500;
        s.insert(label, &i.to_be_bytes()).unwrap();
        inserted.push((label, i.to_be_bytes().to_vec()));
    }
    let mut failures = 0;
    for (q, budget) in (0..40u64).zip([0u64, 1, 2, 3, 5, 8].iter().cycle()) {
        s.client_mut()
            .oracle_mut()
            .set_comparison_budget(Some(*budget));
        let lo = q * 11 % 480;
        if s.search(lo, lo + 15).is_err() {
            failures += 1;
        }
        check_main_invariant(s.server().tree(), s.client().codec()).unwrap();
        s.server().tree().check_structure(false).unwrap();
        let mut stored = stored_multiset(s.server().tree(), s.client());
        stored.sort();
        inserted.sort();
        assert_eq!(stored, inserted);
    }
    assert!(failures > 0);
    s.client_mut().oracle_mut().set_comparison_budget(None);
    for lo in [0u64, 100, 250, 470] {
        let got = s.search(lo, lo + 20).unwrap().sorted();
        let want: Vec<_> = inserted
            .iter()
            .filter(|(l, _)| (lo..=lo + 20).contains(l))
            .cloned()
            .collect();
        assert_eq!(got, want);
    }
    s.server().tree().check_structure(true).unwrap();
}

#[test]
fn socket_session_is_fail_stop() {
    let key = keygen(Some(9));
    let mut client = PopeClient::with_seed(&key, 3, 9).unwrap();
    client.oracle_mut().set_comparison_budget(Some(0));
    let mut s = SocketSession::connect(PopeServer::new(3, 9).unwrap(), client).unwrap();
    for i in 0..50u64 {
        s.insert(i, b"").unwrap();
    }
    // Bad arguments are refused locally and do not end the session.
    assert!(matches!(s.search(9, 3), Err(Error::Argument(_))));
    assert!(s.search(3, 9).is_err());
    assert!(s.insert(1, b"").is_err());
    let (server, transcript) = s.finish().unwrap();
    assert_eq!(server.tree().block_count(), 50);
    assert_eq!(transcript.metrics().one_way_msgs, 50);
}

#[test]
fn latency_is_paid_per_round_only() {
    use std::time::{Duration, Instant};
    let key = keygen(Some(1));
    let mut s = LocalSession::new(
        PopeServer::new(4, 1).unwrap(),
        PopeClient::with_seed(&key, 4, 1).unwrap(),
    )
    .with_latency(Duration::from_millis(20));
    let t = Instant::now();
    for i in 0..200u64 {
        s.insert(i, b"").unwrap();
    }
    assert!(t.elapsed() < Duration::from_millis(20));
    let t = Instant::now();
    s.search(10, 20).unwrap();
    let rounds = s.transcript().metrics().rounds;
    assert!(rounds > 0);
    assert!(t.elapsed() >= Duration::from_millis(20 * rounds));
}
