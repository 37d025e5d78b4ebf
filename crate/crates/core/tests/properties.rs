mod common;

use proptest::prelude::*;

use pope_core::bench::brute_force;
use pope_core::leakage::replay_checkpoints;
use pope_core::protocol::{decode, encode, LocalSession, Message, Op, Session};
use pope_core::{keygen, MopeServer, PopeClient, PopeServer};

use common::{check_main_invariant, check_shape, stored_multiset};

fn op_strategy(max_label: u64) -> impl Strategy<Value = Op> {
    prop_oneof![
        4 => (0..max_label, proptest::collection::vec(any::<u8>(), 0..6))
            .prop_map(|(label, payload)| Op::Insert { label, payload }),
        1 => (0..max_label, 0..max_label).prop_map(|(a, b)| Op::Search { lo: a.min(b), hi: a.max(b) }),
    ]
}

fn ops_strategy() -> impl Strategy<Value = (usize, Vec<Op>)> {
    (2usize..7, 1u64..200)
        .prop_flat_map(|(l, max)| (Just(l), proptest::collection::vec(op_strategy(max), 0..300)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pope_matches_brute_force_and_keeps_invariants((l, ops) in ops_strategy(), seed in any::<u64>()) {
        let key = keygen(Some(seed));
        let mut s = LocalSession::new(
            PopeServer::new(l, seed).unwrap(),
            PopeClient::with_seed(&key, l, seed).unwrap(),
        );
        let want = brute_force(&ops);
        let mut got = Vec::new();
        let mut inserted = Vec::new();
        for op in &ops {
            match op {
                Op::Insert { label, payload } => {
                    s.insert(*label, payload).unwrap();
                    inserted.push((*label, payload.clone()));
                }
                Op::Search { lo, hi } => {
                    got.push(s.search(*lo, *hi).unwrap().sorted());
                    prop_assert!(check_shape(s.server().tree()).is_ok());
                }
            }
            prop_assert!(check_main_invariant(s.server().tree(), s.client().codec()).is_ok());
        }
        prop_assert_eq!(got, want);
        inserted.sort();
        prop_assert_eq!(stored_multiset(s.server().tree(), s.client()), inserted);
        let m = *s.transcript().metrics();
        prop_assert_eq!(m.ciphertexts_sent, m.tally.total());
        prop_assert_eq!(s.transcript().recount_rounds(), m.rounds);
        prop_assert_eq!(s.transcript().recount_ciphertexts(), m.ciphertexts_sent);
        for c in s.transcript().ops() {
            if c.kind == pope_core::protocol::OpKind::Insert {
                prop_assert_eq!((c.rounds, c.one_way_msgs, c.ciphertexts.total()), (0, 1, 2));
            }
        }
    }

    #[test]
    fn mope_matches_brute_force((_, ops) in ops_strategy(), seed in any::<u64>()) {
        let key = keygen(Some(seed));
        let mut s = LocalSession::new(MopeServer::new(), PopeClient::with_seed(&key, 4, seed).unwrap());
        let want = brute_force(&ops);
        let mut got = Vec::new();
        for op in &ops {
            if let Op::Search { lo, hi } = op {
                got.push(s.search(*lo, *hi).unwrap().sorted());
            } else {
                s.run_op(op).unwrap();
            }
        }
        prop_assert!(s.server().check_structure().is_ok());
        prop_assert_eq!(got, want);
    }

    #[test]
    fn searches_only_refine_knowledge((l, ops) in ops_strategy(), seed in any::<u64>()) {
        let key = keygen(Some(seed));
        let mut s = LocalSession::new(
            PopeServer::new(l, seed).unwrap(),
            PopeClient::with_seed(&key, l, seed).unwrap(),
        );
        let mut around = Vec::new();
        for (i, op) in ops.iter().enumerate() {
            s.run_op(op).unwrap();
            if matches!(op, Op::Search { .. }) {
                around.push(i);
                around.push(i + 1);
            }
        }
        let counts = replay_checkpoints(s.server().facts().unwrap(), &around).unwrap();
        let get = |c: usize| counts.iter().find(|x| x.0 == c).unwrap().1;
        for pair in around.chunks(2) {
            prop_assert!(get(pair[1]) <= get(pair[0]));
        }
    }

    #[test]
    fn frames_round_trip(labels in proptest::collection::vec(any::<[u8; 32]>(), 0..20), index in any::<u32>()) {
        let cts: Vec<_> = labels.iter().map(pope_core::LabelCiphertext::from_bytes).collect();
        for msg in [
            Message::SortRequest { labels: cts.clone() },
            Message::SortReply { labels: cts.clone() },
            Message::LocateReply { index },
        ] {
            let bytes = encode(&msg);
            prop_assert_eq!(decode(&bytes).unwrap(), (msg, bytes.len()));
        }
    }

    #[test]
    fn decoder_survives_arbitrary_bytes(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
        let _ = decode(&bytes);
    }
}
