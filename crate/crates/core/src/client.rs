//! The stateless client.
//!
//! Between operations the client keeps only its key. During an operation it
//! answers the server's sort, classify and locate requests while holding at
//! most `capacity` pivots plus a constant number of other ciphertexts.

use std::cmp::Ordering;

use rand::rngs::OsRng;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::block::EncryptedBlock;
use crate::crypto::{
    EffectiveTuple, LabelCiphertext, LabelCodec, OriginBits, PayloadCipher, SecretKey,
};
use crate::error::{Error, Result};
use crate::mope::MOPE_NODE_CAPACITY;
use crate::protocol::{Message, Responder};

/// Anything that can place label ciphertexts in the total order.
pub trait LabelOrder {
    type Key: Ord + Copy;

    fn order_key(&self, ct: &LabelCiphertext) -> Result<Self::Key>;
}

impl LabelOrder for LabelCodec {
    type Key = EffectiveTuple;

    fn order_key(&self, ct: &LabelCiphertext) -> Result<EffectiveTuple> {
        Ok(self.decrypt(ct))
    }
}

/// Index of the bucket holding `x` among sorted pivots: the number of
/// pivots strictly below `x`, so `pivots[i-1] < x <= pivots[i]`.
pub fn bucket_of<K: Ord>(pivots: &[K], x: &K) -> u32 {
    pivots.partition_point(|p| p < x) as u32
}

#[derive(Debug)]
struct PendingPartition<K> {
    pivots: Vec<K>,
    endpoint: K,
    chunks_left: u32,
}

/// Answers the server's ordering requests for any [`LabelOrder`].
#[derive(Debug)]
pub struct OrderOracle<O: LabelOrder> {
    order: O,
    capacity: usize,
    pending: Option<PendingPartition<O::Key>>,
    peak_working_set: usize,
    comparison_requests: u64,
    comparison_budget: Option<u64>,
}

impl<O: LabelOrder> OrderOracle<O> {
    pub fn new(order: O, capacity: usize) -> Self {
        OrderOracle {
            order,
            capacity,
            pending: None,
            peak_working_set: 0,
            comparison_requests: 0,
            comparison_budget: None,
        }
    }

    pub fn order(&self) -> &O {
        &self.order
    }

    pub fn order_mut(&mut self) -> &mut O {
        &mut self.order
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Largest number of ciphertexts held at once while answering a request.
    pub fn peak_working_set(&self) -> usize {
        self.peak_working_set
    }

    /// Ciphertexts the server has asked this client to order so far.
    pub fn comparison_requests(&self) -> u64 {
        self.comparison_requests
    }

    /// Refuse to answer once the server has asked about more than `budget`
    /// ciphertexts. A malicious server gets cut off at the cost bound.
    pub fn set_comparison_budget(&mut self, budget: Option<u64>) {
        self.comparison_budget = budget;
    }

    fn check_capacity(&self, requested: usize) -> Result<()> {
        if requested > self.capacity {
            return Err(Error::Capacity {
                requested,
                capacity: self.capacity,
            });
        }
        Ok(())
    }

    fn charge(&mut self, n: usize) -> Result<()> {
        self.comparison_requests += n as u64;
        match self.comparison_budget {
            Some(b) if self.comparison_requests > b => Err(Error::protocol(format!(
                "comparison budget of {b} exhausted"
            ))),
            _ => Ok(()),
        }
    }

    fn touch(&mut self, working_set: usize) {
        self.peak_working_set = self.peak_working_set.max(working_set);
    }

    fn keys(&self, cts: &[LabelCiphertext]) -> Result<Vec<O::Key>> {
        cts.iter().map(|c| self.order.order_key(c)).collect()
    }

    fn sorted_keys(&self, pivots: &[LabelCiphertext]) -> Result<Vec<O::Key>> {
        let keys = self.keys(pivots)?;
        if keys.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::protocol("pivot list is not strictly sorted"));
        }
        Ok(keys)
    }

    /// Sorts up to `capacity` labels.
    pub fn sort_pivots(&mut self, labels: &[LabelCiphertext]) -> Result<Vec<LabelCiphertext>> {
        self.check_capacity(labels.len())?;
        self.charge(labels.len())?;
        self.touch(labels.len());
        let mut keyed: Vec<(O::Key, LabelCiphertext)> = labels
            .iter()
            .map(|c| Ok((self.order.order_key(c)?, *c)))
            .collect::<Result<_>>()?;
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(keyed.into_iter().map(|(_, c)| c).collect())
    }

    /// Buckets each streamed label against sorted pivots, one item at a time.
    pub fn classify_stream(
        &mut self,
        sorted_pivots: &[LabelCiphertext],
        stream: &[LabelCiphertext],
    ) -> Result<Vec<u32>> {
        self.check_capacity(sorted_pivots.len())?;
        let pivots = self.sorted_keys(sorted_pivots)?;
        self.classify_keys(&pivots, stream)
    }

    fn classify_keys(&mut self, pivots: &[O::Key], stream: &[LabelCiphertext]) -> Result<Vec<u32>> {
        self.charge(stream.len())?;
        // pivots + endpoint + the item in hand
        self.touch(pivots.len() + 2);
        stream
            .iter()
            .map(|c| Ok(bucket_of(pivots, &self.order.order_key(c)?)))
            .collect()
    }

    /// Child index whose interval contains the endpoint.
    pub fn locate_endpoint(
        &mut self,
        sorted_pivots: &[LabelCiphertext],
        endpoint: &LabelCiphertext,
    ) -> Result<u32> {
        self.check_capacity(sorted_pivots.len())?;
        let pivots = self.sorted_keys(sorted_pivots)?;
        self.charge(1)?;
        self.touch(pivots.len() + 1);
        Ok(bucket_of(&pivots, &self.order.order_key(endpoint)?))
    }

    /// Drops any half-finished partition exchange.
    pub fn reset(&mut self) {
        self.pending = None;
    }
}

impl<O: LabelOrder> Responder for OrderOracle<O> {
    fn respond(&mut self, msg: &Message) -> Result<Vec<Message>> {
        match msg {
            Message::SortRequest { labels } => Ok(vec![Message::SortReply {
                labels: self.sort_pivots(labels)?,
            }]),
            Message::LocateRequest { pivots, endpoint } => Ok(vec![Message::LocateReply {
                index: self.locate_endpoint(pivots, endpoint)?,
            }]),
            Message::SplitPivots {
                pivots,
                endpoint,
                chunks,
            } => {
                self.check_capacity(pivots.len())?;
                let pivots = self.sorted_keys(pivots)?;
                let endpoint = self.order.order_key(endpoint)?;
                self.charge(1)?;
                if *chunks == 0 {
                    self.touch(pivots.len() + 1);
                    return Ok(vec![Message::LocateReply {
                        index: bucket_of(&pivots, &endpoint),
                    }]);
                }
                self.pending = Some(PendingPartition {
                    pivots,
                    endpoint,
                    chunks_left: *chunks,
                });
                Ok(Vec::new())
            }
            Message::SplitStreamItem { items } => {
                let Some(mut p) = self.pending.take() else {
                    return Err(Error::protocol("stream item without pivots"));
                };
                let indices = self.classify_keys(&p.pivots, items)?;
                let mut out = vec![Message::ClassifyReply { indices }];
                p.chunks_left -= 1;
                if p.chunks_left == 0 {
                    out.push(Message::LocateReply {
                        index: bucket_of(&p.pivots, &p.endpoint),
                    });
                } else {
                    self.pending = Some(p);
                }
                Ok(out)
            }
            Message::MopeNode { keys, target } => {
                if keys.len() > self.capacity.max(MOPE_NODE_CAPACITY) {
                    return Err(Error::Capacity {
                        requested: keys.len(),
                        capacity: self.capacity.max(MOPE_NODE_CAPACITY),
                    });
                }
                let keys = self.sorted_keys(keys)?;
                self.charge(1)?;
                self.touch(keys.len() + 1);
                Ok(vec![Message::MopeIndex {
                    index: bucket_of(&keys, &self.order.order_key(target)?),
                }])
            }
            other => Err(Error::protocol(format!(
                "client cannot answer {:?}",
                other.kind()
            ))),
        }
    }
}

/// Decrypted search answer.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SearchResult {
    /// `(label, payload)` pairs, in the order the server returned them.
    pub entries: Vec<(u64, Vec<u8>)>,
    /// Blocks the server returned that fell outside the range.
    pub residue: usize,
}

impl SearchResult {
    pub fn labels(&self) -> Vec<u64> {
        self.entries.iter().map(|(l, _)| *l).collect()
    }

    /// Entries sorted by label then payload, for multiset comparison.
    pub fn sorted(mut self) -> Vec<(u64, Vec<u8>)> {
        self.entries.sort();
        self.entries
    }
}

/// The client: a key, an encryption RNG, and the per-call scratch of its
/// order oracle.
pub struct PopeClient {
    oracle: OrderOracle<LabelCodec>,
    payload: PayloadCipher,
    rng: ChaCha20Rng,
}

impl PopeClient {
    pub fn new(key: &SecretKey, capacity: usize) -> Result<Self> {
        Self::with_seed(key, capacity, OsRng.next_u64())
    }

    /// Client whose encryption randomness is reproducible.
    pub fn with_seed(key: &SecretKey, capacity: usize, seed: u64) -> Result<Self> {
        Self::with_codec(LabelCodec::new(key), key, capacity, seed)
    }

    pub fn with_codec(
        codec: LabelCodec,
        key: &SecretKey,
        capacity: usize,
        seed: u64,
    ) -> Result<Self> {
        if capacity < 2 {
            return Err(Error::config(format!(
                "client capacity must be at least 2, got {capacity}"
            )));
        }
        Ok(PopeClient {
            oracle: OrderOracle::new(codec, capacity),
            payload: PayloadCipher::new(key),
            rng: ChaCha20Rng::seed_from_u64(seed),
        })
    }

    pub fn codec(&self) -> &LabelCodec {
        self.oracle.order()
    }

    pub fn oracle(&self) -> &OrderOracle<LabelCodec> {
        &self.oracle
    }

    pub fn oracle_mut(&mut self) -> &mut OrderOracle<LabelCodec> {
        &mut self.oracle
    }

    pub fn capacity(&self) -> usize {
        self.oracle.capacity()
    }

    pub fn encrypt_label(&mut self, label: u64, origin: OriginBits) -> Result<LabelCiphertext> {
        self.oracle.order.encrypt(&mut self.rng, label, origin)
    }

    pub fn encrypt_block(&mut self, label: u64, payload: &[u8]) -> Result<EncryptedBlock> {
        let label = self.encrypt_label(label, OriginBits::Insert)?;
        let payload = self.payload.encrypt(&mut self.rng, payload);
        Ok(EncryptedBlock { label, payload })
    }

    /// Endpoint ciphertexts for the inclusive range `[lo, hi]`.
    pub fn encrypt_endpoints(
        &mut self,
        lo: u64,
        hi: u64,
    ) -> Result<(LabelCiphertext, LabelCiphertext)> {
        if lo > hi {
            return Err(Error::Argument(format!(
                "range [{lo}, {hi}] has left endpoint above right"
            )));
        }
        Ok((
            self.encrypt_label(lo, OriginBits::Left)?,
            self.encrypt_label(hi, OriginBits::Right)?,
        ))
    }

    /// Decrypts returned blocks and drops those outside the endpoints. The
    /// filter compares effective tuples, so inclusivity comes entirely from
    /// the origin bits.
    pub fn open_results(
        &self,
        left: &LabelCiphertext,
        right: &LabelCiphertext,
        blocks: Vec<EncryptedBlock>,
    ) -> Result<SearchResult> {
        let codec = self.codec();
        let (lo, hi) = (codec.decrypt(left), codec.decrypt(right));
        let mut out = SearchResult::default();
        for b in blocks {
            let t = codec.decrypt(&b.label);
            if t.cmp(&lo) == Ordering::Greater && t.cmp(&hi) == Ordering::Less {
                out.entries
                    .push((t.label, self.payload.decrypt(&b.payload)?));
            } else {
                out.residue += 1;
            }
        }
        Ok(out)
    }

    pub fn decrypt_payload(&self, block: &EncryptedBlock) -> Result<Vec<u8>> {
        self.payload.decrypt(&block.payload)
    }
}

impl Responder for PopeClient {
    fn respond(&mut self, msg: &Message) -> Result<Vec<Message>> {
        let out = self.oracle.respond(msg);
        if out.is_err() {
            self.oracle.reset();
        }
        out
    }
}

impl std::fmt::Debug for PopeClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PopeClient")
            .field("capacity", &self.capacity())
            .finish_non_exhaustive()
    }
}
