use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::message::{Kind, Message};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    ToServer,
    ToClient,
}

/// What the server observed about one message: everything except the
/// ciphertext bytes themselves.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub direction: Direction,
    pub kind: Kind,
    pub body_len: u32,
    pub ciphertexts: u32,
    pub indices: Vec<u32>,
}

/// Ciphertexts sent, split by the part of the protocol that sent them.
/// Range-result bodies are never counted here.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CiphertextTally {
    pub insert_uploads: u64,
    pub search_endpoints: u64,
    pub pivot_uploads: u64,
    pub buffer_streams: u64,
    pub sort_exchanges: u64,
    pub node_uploads: u64,
}

impl CiphertextTally {
    pub fn total(&self) -> u64 {
        self.insert_uploads
            + self.search_endpoints
            + self.pivot_uploads
            + self.buffer_streams
            + self.sort_exchanges
            + self.node_uploads
    }

    fn add(&mut self, kind: Kind, n: u64) {
        match kind {
            Kind::Insert => self.insert_uploads += n,
            Kind::Search => self.search_endpoints += n,
            Kind::SplitPivots | Kind::LocateRequest => self.pivot_uploads += n,
            Kind::SplitStreamItem => self.buffer_streams += n,
            Kind::SortRequest | Kind::SortReply => self.sort_exchanges += n,
            Kind::MopeNode => self.node_uploads += n,
            _ => debug_assert_eq!(n, 0, "{kind:?} carries no counted ciphertexts"),
        }
    }

    pub fn merge(&mut self, other: &CiphertextTally) {
        self.insert_uploads += other.insert_uploads;
        self.search_endpoints += other.search_endpoints;
        self.pivot_uploads += other.pivot_uploads;
        self.buffer_streams += other.buffer_streams;
        self.sort_exchanges += other.sort_exchanges;
        self.node_uploads += other.node_uploads;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Insert,
    Search,
}

/// Cost of a single client operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCost {
    pub kind: OpKind,
    pub rounds: u64,
    pub one_way_msgs: u64,
    pub ciphertexts: CiphertextTally,
    pub result_blocks: u64,
}

impl OpCost {
    fn new(kind: OpKind) -> Self {
        OpCost {
            kind,
            rounds: 0,
            one_way_msgs: 0,
            ciphertexts: CiphertextTally::default(),
            result_blocks: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub rounds: u64,
    pub one_way_msgs: u64,
    pub ciphertexts_sent: u64,
    pub tally: CiphertextTally,
    pub result_blocks: u64,
    pub inserts: u64,
    pub searches: u64,
}

impl Metrics {
    pub fn merge(&mut self, other: &Metrics) {
        self.rounds += other.rounds;
        self.one_way_msgs += other.one_way_msgs;
        self.ciphertexts_sent += other.ciphertexts_sent;
        self.tally.merge(&other.tally);
        self.result_blocks += other.result_blocks;
        self.inserts += other.inserts;
        self.searches += other.searches;
    }
}

/// Global counters that many sessions can add into without a lock.
#[derive(Debug, Default)]
pub struct SharedMetrics {
    rounds: AtomicU64,
    one_way_msgs: AtomicU64,
    ciphertexts_sent: AtomicU64,
    result_blocks: AtomicU64,
    inserts: AtomicU64,
    searches: AtomicU64,
}

impl SharedMetrics {
    pub fn absorb(&self, m: &Metrics) {
        self.rounds.fetch_add(m.rounds, Ordering::Relaxed);
        self.one_way_msgs
            .fetch_add(m.one_way_msgs, Ordering::Relaxed);
        self.ciphertexts_sent
            .fetch_add(m.ciphertexts_sent, Ordering::Relaxed);
        self.result_blocks
            .fetch_add(m.result_blocks, Ordering::Relaxed);
        self.inserts.fetch_add(m.inserts, Ordering::Relaxed);
        self.searches.fetch_add(m.searches, Ordering::Relaxed);
    }

    /// Totals so far. The per-category tally is not tracked globally.
    pub fn snapshot(&self) -> Metrics {
        Metrics {
            rounds: self.rounds.load(Ordering::Relaxed),
            one_way_msgs: self.one_way_msgs.load(Ordering::Relaxed),
            ciphertexts_sent: self.ciphertexts_sent.load(Ordering::Relaxed),
            tally: CiphertextTally::default(),
            result_blocks: self.result_blocks.load(Ordering::Relaxed),
            inserts: self.inserts.load(Ordering::Relaxed),
            searches: self.searches.load(Ordering::Relaxed),
        }
    }
}

/// The server's record of a session.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcript {
    events: Vec<Event>,
    ops: Vec<OpCost>,
    metrics: Metrics,
    current: Option<OpCost>,
    metrics_only: bool,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    /// Keeps counters and per-op costs but drops the per-message event log.
    pub fn metrics_only() -> Self {
        Transcript {
            metrics_only: true,
            ..Self::default()
        }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn ops(&self) -> &[OpCost] {
        &self.ops
    }

    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }

    pub fn begin_op(&mut self, kind: OpKind) {
        debug_assert!(self.current.is_none(), "operations do not nest");
        match kind {
            OpKind::Insert => self.metrics.inserts += 1,
            OpKind::Search => self.metrics.searches += 1,
        }
        self.current = Some(OpCost::new(kind));
    }

    /// Closes the current operation, returning its cost.
    pub fn end_op(&mut self) -> Option<OpCost> {
        let cost = self.current.take()?;
        self.ops.push(cost);
        Some(cost)
    }

    pub(crate) fn note_round(&mut self) {
        self.metrics.rounds += 1;
        if let Some(c) = self.current.as_mut() {
            c.rounds += 1;
        }
    }

    pub(crate) fn record(&mut self, direction: Direction, msg: &Message) {
        let kind = msg.kind();
        let cts = msg.ciphertext_count() as u64;
        let cur = self.current.as_mut();
        if kind == Kind::RangeResult {
            let blocks = cts / 2;
            self.metrics.result_blocks += blocks;
            if let Some(c) = cur {
                c.result_blocks += blocks;
            }
        } else {
            self.metrics.ciphertexts_sent += cts;
            self.metrics.tally.add(kind, cts);
            if kind == Kind::Insert {
                self.metrics.one_way_msgs += 1;
            }
            if let Some(c) = cur {
                c.ciphertexts.add(kind, cts);
                if kind == Kind::Insert {
                    c.one_way_msgs += 1;
                }
            }
        }
        if !self.metrics_only {
            self.events.push(Event {
                direction,
                kind,
                body_len: msg.body_len() as u32,
                ciphertexts: cts as u32,
                indices: msg.indices(),
            });
        }
    }

    /// Rounds recomputed from the raw event log alone.
    pub fn recount_rounds(&self) -> u64 {
        self.events
            .iter()
            .filter(|e| e.direction == Direction::ToClient && e.kind.opens_round())
            .count() as u64
    }

    /// Ciphertexts recomputed from the raw event log alone.
    pub fn recount_ciphertexts(&self) -> u64 {
        self.events
            .iter()
            .filter(|e| e.kind != Kind::RangeResult)
            .map(|e| e.ciphertexts as u64)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::EncryptedBlock;
    use crate::crypto::{LabelCiphertext, PayloadCiphertext};

    fn ct() -> LabelCiphertext {
        LabelCiphertext::from_parts([1; 16], [2; 16])
    }

    #[test]
    fn insert_is_one_way_with_no_rounds() {
        let mut t = Transcript::new();
        t.begin_op(OpKind::Insert);
        t.record(
            Direction::ToServer,
            &Message::Insert {
                block: EncryptedBlock::new(ct(), PayloadCiphertext::from_bytes(vec![0; 30])),
            },
        );
        let cost = t.end_op().unwrap();
        assert_eq!(cost.rounds, 0);
        assert_eq!(cost.one_way_msgs, 1);
        assert_eq!(cost.ciphertexts.total(), 2);
        assert_eq!(t.metrics().rounds, 0);
        assert_eq!(t.metrics().one_way_msgs, 1);
    }

    #[test]
    fn range_results_are_excluded_from_bandwidth() {
        let mut t = Transcript::new();
        t.begin_op(OpKind::Search);
        t.record(
            Direction::ToServer,
            &Message::Search {
                left: ct(),
                right: ct(),
            },
        );
        t.note_round();
        t.record(
            Direction::ToClient,
            &Message::SortRequest {
                labels: vec![ct(); 3],
            },
        );
        t.record(
            Direction::ToServer,
            &Message::SortReply {
                labels: vec![ct(); 3],
            },
        );
        t.record(
            Direction::ToClient,
            &Message::RangeResult {
                blocks: vec![EncryptedBlock::new(ct(), PayloadCiphertext::from_bytes(vec![])); 5],
            },
        );
        t.end_op();
        let m = t.metrics();
        assert_eq!(m.ciphertexts_sent, 2 + 6);
        assert_eq!(m.tally.sort_exchanges, 6);
        assert_eq!(m.tally.search_endpoints, 2);
        assert_eq!(m.result_blocks, 5);
        assert_eq!(m.ciphertexts_sent, m.tally.total());
        assert_eq!(t.recount_rounds(), m.rounds);
        assert_eq!(t.recount_ciphertexts(), m.ciphertexts_sent);
    }

    #[test]
    fn metrics_only_skips_event_log() {
        let mut t = Transcript::metrics_only();
        t.record(Direction::ToClient, &Message::LocateReply { index: 1 });
        assert!(t.events().is_empty());
    }

    #[test]
    fn shared_metrics_accumulate() {
        let shared = SharedMetrics::default();
        let m = Metrics {
            rounds: 3,
            one_way_msgs: 2,
            ciphertexts_sent: 10,
            ..Metrics::default()
        };
        std::thread::scope(|s| {
            for _ in 0..4 {
                s.spawn(|| shared.absorb(&m));
            }
        });
        let total = shared.snapshot();
        assert_eq!(total.rounds, 12);
        assert_eq!(total.ciphertexts_sent, 40);
    }
}
