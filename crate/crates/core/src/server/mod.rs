//! The POPE server: an unsorted-buffer tree refined lazily during searches.

mod snapshot;
mod tree;

use std::collections::{HashMap, HashSet};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub use snapshot::SNAPSHOT_VERSION;
pub use tree::{Node, NodeId, Pivot, PopeTree, StoredBlock, TreeStats};

use crate::block::{BlockId, EncryptedBlock};
use crate::crypto::{LabelCiphertext, LABEL_CT_BYTES};
use crate::error::{Error, Result};
use crate::leakage::{Fact, FactLog};
use crate::protocol::{Channel, Message, RangeServer};

pub const DEFAULT_CHUNK_SIZE: usize = 1024;

pub struct PopeServer {
    tree: PopeTree,
    rng: ChaCha20Rng,
    chunk_size: usize,
    next_id: u64,
    pivot_ids: HashSet<BlockId>,
    facts: Option<FactLog>,
}

impl PopeServer {
    /// Fresh server whose pivot sampling is driven by `seed`.
    pub fn new(capacity: usize, seed: u64) -> Result<Self> {
        Ok(PopeServer {
            tree: PopeTree::new(capacity)?,
            rng: ChaCha20Rng::seed_from_u64(seed),
            chunk_size: DEFAULT_CHUNK_SIZE,
            next_id: 0,
            pivot_ids: HashSet::new(),
            facts: Some(FactLog::new()),
        })
    }

    /// Resumes from a restored tree. Block ids continue after the largest
    /// stored one.
    pub fn from_tree(tree: PopeTree, seed: u64) -> Self {
        let next_id = tree.blocks().map(|(_, b)| b.id.0 + 1).max().unwrap_or(0);
        let pivot_ids = tree
            .preorder()
            .into_iter()
            .flat_map(|u| tree.node(u).list().iter().map(|p| p.id).collect::<Vec<_>>())
            .collect();
        PopeServer {
            tree,
            rng: ChaCha20Rng::seed_from_u64(seed),
            chunk_size: DEFAULT_CHUNK_SIZE,
            next_id,
            pivot_ids,
            facts: None,
        }
    }

    pub fn with_chunk_size(mut self, chunk_size: usize) -> Result<Self> {
        if chunk_size == 0 {
            return Err(Error::config("chunk size must be positive"));
        }
        self.chunk_size = chunk_size;
        Ok(self)
    }

    /// Stops recording leakage facts.
    pub fn without_leakage(mut self) -> Self {
        self.facts = None;
        self
    }

    pub fn capacity(&self) -> usize {
        self.tree.capacity()
    }

    pub fn chunk_size(&self) -> usize {
        self.chunk_size
    }

    pub fn tree(&self) -> &PopeTree {
        &self.tree
    }

    pub fn facts(&self) -> Option<&FactLog> {
        self.facts.as_ref()
    }

    pub fn is_pivot(&self, id: BlockId) -> bool {
        self.pivot_ids.contains(&id)
    }

    pub fn pivot_count(&self) -> usize {
        self.pivot_ids.len()
    }

    fn note(&mut self, fact: Fact) {
        if let Some(log) = self.facts.as_mut() {
            log.push(fact);
        }
    }

    fn note_classified(&mut self, items: &[BlockId], pivots: &[BlockId], targets: &[u32]) {
        if self.facts.is_none() {
            return;
        }
        for (&item, &t) in items.iter().zip(targets) {
            let t = t as usize;
            self.note(Fact::Classified {
                item,
                lower: t.checked_sub(1).map(|i| pivots[i]),
                upper: pivots.get(t).copied(),
            });
        }
    }

    /// Walks from the root to the leaf holding `endpoint`, flushing every
    /// buffer on the way and splitting oversized leaves.
    pub fn split(&mut self, endpoint: LabelCiphertext, ch: &mut Channel<'_>) -> Result<NodeId> {
        let mut grown = None;
        let res = self.descend(endpoint, ch, &mut grown);
        if let Some(p) = grown {
            self.tree.rebalance(p);
        }
        res
    }

    fn descend(
        &mut self,
        endpoint: LabelCiphertext,
        ch: &mut Channel<'_>,
        grown: &mut Option<NodeId>,
    ) -> Result<NodeId> {
        let mut u = self.tree.root();
        loop {
            let node = self.tree.node(u);
            if !node.is_leaf() {
                let pivots = self.tree.pivot_labels(u);
                let k = pivots.len();
                let loc = if node.buffer().is_empty() {
                    let replies = ch.round(vec![Message::LocateRequest { pivots, endpoint }])?;
                    locate_index(&replies[0], k)?
                } else {
                    let items: Vec<_> = node.buffer().iter().map(|b| b.block.label).collect();
                    let (targets, loc) = self.partition_round(ch, pivots, endpoint, &items)?;
                    let blocks = std::mem::take(&mut self.tree.node_mut(u).buffer);
                    let ids: Vec<_> = blocks.iter().map(|b| b.id).collect();
                    let pivot_ids: Vec<_> = self.tree.node(u).list().iter().map(|p| p.id).collect();
                    self.note_classified(&ids, &pivot_ids, &targets);
                    self.tree.distribute(u, blocks, &targets);
                    self.tree.stats.internal_flushes += 1;
                    loc
                };
                u = self.tree.node(u).children()[loc as usize];
                continue;
            }

            let cap = self.tree.capacity();
            if node.buffer().len() <= cap {
                return Ok(u);
            }
            let candidates: Vec<usize> = node
                .buffer()
                .iter()
                .enumerate()
                .filter(|(_, b)| !self.pivot_ids.contains(&b.id))
                .map(|(i, _)| i)
                .collect();
            let take = cap.min(candidates.len());
            let picks = index::sample(&mut self.rng, candidates.len(), take);
            let sample: Vec<&StoredBlock> = picks
                .iter()
                .map(|i| &node.buffer()[candidates[i]])
                .collect();
            let labels: Vec<_> = sample.iter().map(|b| b.block.label).collect();
            let by_bytes: HashMap<[u8; LABEL_CT_BYTES], BlockId> = sample
                .iter()
                .map(|b| (b.block.label.to_bytes(), b.id))
                .collect();

            let replies = ch.round(vec![Message::SortRequest { labels }])?;
            let sorted = match &replies[0] {
                Message::SortReply { labels } => labels.clone(),
                other => return Err(unexpected("sort reply", other)),
            };
            let sorted_ids = match_permutation(&sorted, &by_bytes)?;

            let items: Vec<_> = node.buffer().iter().map(|b| b.block.label).collect();
            let (targets, loc) = self.partition_round(ch, sorted.clone(), endpoint, &items)?;

            let blocks = std::mem::take(&mut self.tree.node_mut(u).buffer);
            let ids: Vec<_> = blocks.iter().map(|b| b.id).collect();
            self.note(Fact::Promoted(sorted_ids.clone()));
            self.note_classified(&ids, &sorted_ids, &targets);
            self.pivot_ids.extend(sorted_ids.iter().copied());
            let pivots = sorted_ids
                .iter()
                .zip(&sorted)
                .map(|(&id, &label)| Pivot { id, label })
                .collect();
            let (parent, leaves) = self.tree.split_leaf(u, pivots, blocks, &targets);
            *grown = Some(parent);
            u = leaves[loc as usize];
        }
    }

    /// One pipelined exchange: pivots and endpoint, then the stream in
    /// chunks. Returns the bucket of every item and of the endpoint.
    fn partition_round(
        &self,
        ch: &mut Channel<'_>,
        pivots: Vec<LabelCiphertext>,
        endpoint: LabelCiphertext,
        items: &[LabelCiphertext],
    ) -> Result<(Vec<u32>, u32)> {
        let k = pivots.len();
        let chunks: Vec<&[LabelCiphertext]> = items.chunks(self.chunk_size).collect();
        let mut msgs = Vec::with_capacity(chunks.len() + 1);
        msgs.push(Message::SplitPivots {
            pivots,
            endpoint,
            chunks: chunks.len() as u32,
        });
        msgs.extend(
            chunks
                .iter()
                .map(|c| Message::SplitStreamItem { items: c.to_vec() }),
        );
        let replies = ch.round(msgs)?;

        let mut targets = Vec::with_capacity(items.len());
        for (reply, chunk) in replies.iter().zip(&chunks) {
            match reply {
                Message::ClassifyReply { indices } if indices.len() == chunk.len() => {
                    if let Some(bad) = indices.iter().find(|&&i| i as usize > k) {
                        return Err(Error::protocol(format!(
                            "bucket {bad} out of range 0..={k}"
                        )));
                    }
                    targets.extend_from_slice(indices);
                }
                other => return Err(unexpected("classify reply for a full chunk", other)),
            }
        }
        let loc = locate_index(replies.last().expect("at least one reply"), k)?;
        Ok((targets, loc))
    }
}

fn unexpected(want: &str, got: &Message) -> Error {
    Error::protocol(format!("expected {want}, got {:?}", got.kind()))
}

fn locate_index(reply: &Message, k: usize) -> Result<u32> {
    match reply {
        Message::LocateReply { index } if *index as usize <= k => Ok(*index),
        Message::LocateReply { index } => Err(Error::protocol(format!(
            "located child {index} out of range 0..={k}"
        ))),
        other => Err(unexpected("locate reply", other)),
    }
}

fn match_permutation(
    sorted: &[LabelCiphertext],
    by_bytes: &HashMap<[u8; LABEL_CT_BYTES], BlockId>,
) -> Result<Vec<BlockId>> {
    if sorted.len() != by_bytes.len() {
        return Err(Error::protocol("sort reply changed the sample size"));
    }
    let mut seen = HashSet::with_capacity(sorted.len());
    sorted
        .iter()
        .map(|c| {
            let id = *by_bytes
                .get(&c.to_bytes())
                .ok_or_else(|| Error::protocol("sort reply contains a foreign label"))?;
            if !seen.insert(id) {
                return Err(Error::protocol("sort reply repeats a label"));
            }
            Ok(id)
        })
        .collect()
}

impl RangeServer for PopeServer {
    fn insert(&mut self, block: EncryptedBlock, _ch: &mut Channel<'_>) -> Result<()> {
        let id = BlockId(self.next_id);
        self.next_id += 1;
        self.tree.push_root(StoredBlock { id, block });
        self.note(Fact::Inserted(id));
        Ok(())
    }

    fn search(
        &mut self,
        left: LabelCiphertext,
        right: LabelCiphertext,
        ch: &mut Channel<'_>,
    ) -> Result<Vec<EncryptedBlock>> {
        let lo = self.split(left, ch)?;
        let hi = self.split(right, ch)?;
        self.tree.range_collect(lo, hi)
    }

    fn end_op(&mut self) {
        if let Some(log) = self.facts.as_mut() {
            log.end_op();
        }
    }
}

impl std::fmt::Debug for PopeServer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PopeServer")
            .field("capacity", &self.capacity())
            .field("blocks", &self.tree.block_count())
            .field("height", &self.tree.height())
            .finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::client::PopeClient;
    use crate::crypto::keygen;
    use crate::protocol::{LocalSession, Session};

    fn session(cap: usize, seed: u64) -> LocalSession<PopeServer> {
        let key = keygen(Some(seed));
        LocalSession::new(
            PopeServer::new(cap, seed).unwrap(),
            PopeClient::with_seed(&key, cap, seed).unwrap(),
        )
    }

    #[test]
    fn small_root_leaf_is_left_alone() {
        let mut s = session(4, 1);
        for l in [5, 1, 3] {
            s.insert(l, b"x").unwrap();
        }
        let r = s.search(0, 10).unwrap();
        assert_eq!(r.sorted().len(), 3);
        assert_eq!(s.server().tree().height(), 0);
        assert_eq!(s.transcript().metrics().rounds, 0);
    }

    #[test]
    fn first_split_builds_root_with_l_pivots() {
        let mut s = session(4, 2);
        for l in 0..5u64 {
            s.insert(l, &[]).unwrap();
        }
        s.search(100, 100).unwrap();
        let t = s.server().tree();
        assert_eq!(t.height(), 1);
        let root = t.node(t.root());
        assert_eq!(root.list().len(), 4);
        assert_eq!(root.children().len(), 5);
        assert!(root.buffer().is_empty());
        assert_eq!(t.block_count(), 5);
    }

    #[test]
    fn bad_sort_reply_is_rejected_and_tree_untouched() {
        struct Liar;
        impl crate::protocol::ClientLink for Liar {
            fn exchange(&mut self, reqs: &[Message]) -> Result<Vec<Message>> {
                match &reqs[0] {
                    Message::SortRequest { labels } => Ok(vec![Message::SortReply {
                        labels: labels[1..].to_vec(),
                    }]),
                    _ => unreachable!(),
                }
            }
        }
        let key = keygen(Some(3));
        let mut c = PopeClient::with_seed(&key, 2, 3).unwrap();
        let mut srv = PopeServer::new(2, 3).unwrap();
        let mut t = crate::protocol::Transcript::new();
        let mut link = Liar;
        let mut ch = Channel::new(&mut link, &mut t);
        for l in 0..5 {
            srv.insert(c.encrypt_block(l, &[]).unwrap(), &mut ch)
                .unwrap();
        }
        let before = srv.tree().clone();
        let e = c.encrypt_label(2, crate::crypto::OriginBits::Left).unwrap();
        assert!(matches!(srv.split(e, &mut ch), Err(Error::Protocol(_))));
        assert_eq!(srv.tree(), &before);
    }

    #[test]
    fn chunking_does_not_change_placement() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let labels: Vec<u64> = (0..500).map(|_| rng.gen_range(0..1000)).collect();
        let run = |chunk: usize| {
            let key = keygen(Some(4));
            let srv = PopeServer::new(5, 4)
                .unwrap()
                .with_chunk_size(chunk)
                .unwrap();
            let mut s = LocalSession::new(srv, PopeClient::with_seed(&key, 5, 4).unwrap());
            for &l in &labels {
                s.insert(l, &[]).unwrap();
            }
            let r = s.search(100, 300).unwrap();
            (
                r.sorted(),
                s.transcript().metrics().rounds,
                s.server().tree().clone(),
            )
        };
        let (a, ra, ta) = run(1);
        let (b, rb, tb) = run(1024);
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        assert_eq!(ta, tb);
    }

    #[test]
    fn zero_chunk_size_is_config_error() {
        assert!(matches!(
            PopeServer::new(4, 0).unwrap().with_chunk_size(0),
            Err(Error::Config(_))
        ));
        assert!(PopeServer::new(1, 0).is_err());
    }
}
