use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::rord::Rord;
use crate::client::{LabelOrder, OrderOracle, PopeClient, SearchResult};
use crate::crypto::{
    EffectiveTuple, LabelCiphertext, LabelCodec, OriginBits, PayloadCipher, SecretKey,
    LABEL_CT_BYTES,
};
use crate::error::{Error, Result};
use crate::protocol::{dispatch, InProcessLink, Message, Op, RangeServer, Transcript};

/// An operation with every value replaced by a fresh 1-based index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum ProfileOp {
    Insert { index: u32, payload_len: usize },
    Range { left: u32, right: u32 },
}

/// Profile of an operation sequence, plus the total number of indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Profile {
    pub ops: Vec<ProfileOp>,
    pub values: u32,
}

impl Profile {
    pub fn of(ops: &[Op]) -> Profile {
        let mut next = 0u32;
        let mut fresh = || {
            next += 1;
            next
        };
        let ops = ops
            .iter()
            .map(|op| match op {
                Op::Insert { payload, .. } => ProfileOp::Insert {
                    index: fresh(),
                    payload_len: payload.len(),
                },
                Op::Search { .. } => ProfileOp::Range {
                    left: fresh(),
                    right: fresh(),
                },
            })
            .collect();
        Profile { ops, values: next }
    }

    /// Plaintext values by index, with the origin each was encrypted under.
    pub fn values(ops: &[Op]) -> Vec<(u64, OriginBits)> {
        ops.iter()
            .flat_map(|op| match op {
                Op::Insert { label, .. } => vec![(*label, OriginBits::Insert)],
                Op::Search { lo, hi } => vec![(*lo, OriginBits::Left), (*hi, OriginBits::Right)],
            })
            .collect()
    }
}

/// A real run, with every value's effective tuple kept for building the
/// matching randomized order.
pub struct RecordedRun<S> {
    pub server: S,
    pub transcript: Transcript,
    pub tuples: Vec<EffectiveTuple>,
    pub results: Vec<SearchResult>,
}

impl<S> RecordedRun<S> {
    pub fn rord(&self) -> Rord {
        Rord::from_tuples(&self.tuples)
    }
}

pub fn run_recorded<S: RangeServer>(
    mut server: S,
    mut client: PopeClient,
    ops: &[Op],
) -> Result<RecordedRun<S>> {
    let mut transcript = Transcript::new();
    let mut tuples = Vec::new();
    let mut results = Vec::new();
    for op in ops {
        match op {
            Op::Insert { label, payload } => {
                let block = client.encrypt_block(*label, payload)?;
                tuples.push(client.codec().decrypt(&block.label));
                dispatch(
                    &mut server,
                    Message::Insert { block },
                    &mut InProcessLink::new(&mut client),
                    &mut transcript,
                )?;
            }
            Op::Search { lo, hi } => {
                let (left, right) = client.encrypt_endpoints(*lo, *hi)?;
                tuples.push(client.codec().decrypt(&left));
                tuples.push(client.codec().decrypt(&right));
                let reply = dispatch(
                    &mut server,
                    Message::Search { left, right },
                    &mut InProcessLink::new(&mut client),
                    &mut transcript,
                )?;
                match reply {
                    Some(Message::RangeResult { blocks }) => {
                        results.push(client.open_results(&left, &right, blocks)?)
                    }
                    other => {
                        return Err(Error::protocol(format!(
                            "expected a range result, got {other:?}"
                        )))
                    }
                }
            }
        }
    }
    Ok(RecordedRun {
        server,
        transcript,
        tuples,
        results,
    })
}

/// Orders simulator ciphertexts by the rank of the index each stands for.
struct RordOrder {
    rord: Rord,
    index_of: HashMap<[u8; LABEL_CT_BYTES], u32>,
}

impl LabelOrder for RordOrder {
    type Key = u32;

    fn order_key(&self, ct: &LabelCiphertext) -> Result<u32> {
        let i = self
            .index_of
            .get(&ct.to_bytes())
            .ok_or_else(|| Error::protocol("simulator asked about a ciphertext it never sent"))?;
        Ok(self.rord.rank(*i))
    }
}

/// Output of [`simulate_view`].
pub struct SimulatedView<S> {
    pub server: S,
    pub transcript: Transcript,
}

/// Produces a server view from the profile and order-oracle answers alone.
/// Every label is an encryption of 0 and every payload is zeros of the
/// profiled length, all under `key`.
pub fn simulate_view<S: RangeServer>(
    mut server: S,
    profile: &Profile,
    rord: Rord,
    key: &SecretKey,
    capacity: usize,
    seed: u64,
) -> Result<SimulatedView<S>> {
    if rord.len() != profile.values as usize {
        return Err(Error::Argument(format!(
            "order covers {} values, profile has {}",
            rord.len(),
            profile.values
        )));
    }
    let codec = LabelCodec::new(key);
    let payloads = PayloadCipher::new(key);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut oracle = OrderOracle::new(
        RordOrder {
            rord,
            index_of: HashMap::new(),
        },
        capacity,
    );
    let mut transcript = Transcript::new();
    for op in &profile.ops {
        let msg = match *op {
            ProfileOp::Insert { index, payload_len } => {
                let label = codec.encrypt(&mut rng, 0, OriginBits::Insert)?;
                oracle.order_mut().index_of.insert(label.to_bytes(), index);
                let payload = payloads.encrypt(&mut rng, &vec![0u8; payload_len]);
                Message::Insert {
                    block: crate::block::EncryptedBlock::new(label, payload),
                }
            }
            ProfileOp::Range { left, right } => {
                let l = codec.encrypt(&mut rng, 0, OriginBits::Left)?;
                let r = codec.encrypt(&mut rng, 0, OriginBits::Right)?;
                let map = &mut oracle.order_mut().index_of;
                map.insert(l.to_bytes(), left);
                map.insert(r.to_bytes(), right);
                Message::Search { left: l, right: r }
            }
        };
        dispatch(
            &mut server,
            msg,
            &mut InProcessLink::new(&mut oracle),
            &mut transcript,
        )?;
    }
    Ok(SimulatedView { server, transcript })
}
