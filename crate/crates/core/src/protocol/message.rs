use serde::{Deserialize, Serialize};

use crate::block::EncryptedBlock;
use crate::crypto::{LabelCiphertext, LABEL_CT_BYTES};

/// One-byte message kind on the wire.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
#[repr(u8)]
pub enum Kind {
    Insert = 0x01,
    Search = 0x02,
    SplitPivots = 0x03,
    SplitStreamItem = 0x04,
    ClassifyReply = 0x05,
    SortRequest = 0x06,
    SortReply = 0x07,
    LocateRequest = 0x08,
    LocateReply = 0x09,
    RangeResult = 0x0a,
    MopeNode = 0x0b,
    MopeIndex = 0x0c,
    Close = 0x0d,
    Ack = 0x0e,
    Error = 0xff,
}

impl Kind {
    pub const ALL: [Kind; 15] = [
        Kind::Insert,
        Kind::Search,
        Kind::SplitPivots,
        Kind::SplitStreamItem,
        Kind::ClassifyReply,
        Kind::SortRequest,
        Kind::SortReply,
        Kind::LocateRequest,
        Kind::LocateReply,
        Kind::RangeResult,
        Kind::MopeNode,
        Kind::MopeIndex,
        Kind::Close,
        Kind::Ack,
        Kind::Error,
    ];

    pub fn from_byte(b: u8) -> Option<Kind> {
        Kind::ALL.iter().copied().find(|k| *k as u8 == b)
    }

    /// Server-to-client messages that open a blocking exchange. Each round
    /// starts with exactly one of these.
    pub fn opens_round(self) -> bool {
        matches!(
            self,
            Kind::SplitPivots | Kind::SortRequest | Kind::LocateRequest | Kind::MopeNode
        )
    }
}

/// Every message exchanged between client and server.
///
/// Indices are zero-based: a classification index `i` over sorted pivots
/// `p_0..p_{k-1}` means `p_{i-1} < x <= p_i`, with `i = 0` below every pivot
/// and `i = k` above all of them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    /// Client stores a block. One-way.
    Insert {
        block: EncryptedBlock,
    },
    /// Client opens a range search with its two endpoint ciphertexts.
    Search {
        left: LabelCiphertext,
        right: LabelCiphertext,
    },
    /// Sorted pivot list of a node being flushed, the endpoint being located,
    /// and the number of `SplitStreamItem` chunks that follow.
    SplitPivots {
        pivots: Vec<LabelCiphertext>,
        endpoint: LabelCiphertext,
        chunks: u32,
    },
    SplitStreamItem {
        items: Vec<LabelCiphertext>,
    },
    ClassifyReply {
        indices: Vec<u32>,
    },
    SortRequest {
        labels: Vec<LabelCiphertext>,
    },
    SortReply {
        labels: Vec<LabelCiphertext>,
    },
    LocateRequest {
        pivots: Vec<LabelCiphertext>,
        endpoint: LabelCiphertext,
    },
    LocateReply {
        index: u32,
    },
    RangeResult {
        blocks: Vec<EncryptedBlock>,
    },
    /// One mOPE descent step: a B-tree node's keys plus the ciphertext being
    /// placed.
    MopeNode {
        keys: Vec<LabelCiphertext>,
        target: LabelCiphertext,
    },
    MopeIndex {
        index: u32,
    },
    Close,
    /// Completion of an interactive insert (mOPE only).
    Ack,
    Error {
        code: u16,
        message: String,
    },
}

impl Message {
    pub fn kind(&self) -> Kind {
        match self {
            Message::Insert { .. } => Kind::Insert,
            Message::Search { .. } => Kind::Search,
            Message::SplitPivots { .. } => Kind::SplitPivots,
            Message::SplitStreamItem { .. } => Kind::SplitStreamItem,
            Message::ClassifyReply { .. } => Kind::ClassifyReply,
            Message::SortRequest { .. } => Kind::SortRequest,
            Message::SortReply { .. } => Kind::SortReply,
            Message::LocateRequest { .. } => Kind::LocateRequest,
            Message::LocateReply { .. } => Kind::LocateReply,
            Message::RangeResult { .. } => Kind::RangeResult,
            Message::MopeNode { .. } => Kind::MopeNode,
            Message::MopeIndex { .. } => Kind::MopeIndex,
            Message::Close => Kind::Close,
            Message::Ack => Kind::Ack,
            Message::Error { .. } => Kind::Error,
        }
    }

    /// Encoded body length in bytes, without the six-byte frame header.
    pub fn body_len(&self) -> usize {
        const CT: usize = LABEL_CT_BYTES;
        let list = |n: usize| 4 + n * CT;
        match self {
            Message::Insert { block } => CT + 4 + block.payload.len(),
            Message::Search { .. } => 2 * CT,
            Message::SplitPivots { pivots, .. } => list(pivots.len()) + CT + 4,
            Message::SplitStreamItem { items } => list(items.len()),
            Message::ClassifyReply { indices } => 4 + 4 * indices.len(),
            Message::SortRequest { labels } | Message::SortReply { labels } => list(labels.len()),
            Message::LocateRequest { pivots, .. } => list(pivots.len()) + CT,
            Message::LocateReply { index: _ } | Message::MopeIndex { index: _ } => 4,
            Message::RangeResult { blocks } => {
                4 + blocks
                    .iter()
                    .map(|b| CT + 4 + b.payload.len())
                    .sum::<usize>()
            }
            Message::MopeNode { keys, .. } => list(keys.len()) + CT,
            Message::Close | Message::Ack => 0,
            Message::Error { message, .. } => 2 + 4 + message.len(),
        }
    }

    /// Label and payload ciphertexts carried by this message.
    pub fn ciphertext_count(&self) -> usize {
        match self {
            Message::Insert { .. } => 2,
            Message::Search { .. } => 2,
            Message::SplitPivots { pivots, .. } => pivots.len() + 1,
            Message::SplitStreamItem { items } => items.len(),
            Message::SortRequest { labels } | Message::SortReply { labels } => labels.len(),
            Message::LocateRequest { pivots, .. } => pivots.len() + 1,
            Message::RangeResult { blocks } => 2 * blocks.len(),
            Message::MopeNode { keys, .. } => keys.len() + 1,
            Message::ClassifyReply { .. }
            | Message::LocateReply { .. }
            | Message::MopeIndex { .. }
            | Message::Close
            | Message::Ack
            | Message::Error { .. } => 0,
        }
    }

    /// Index values carried by a reply, in order.
    pub fn indices(&self) -> Vec<u32> {
        match self {
            Message::ClassifyReply { indices } => indices.clone(),
            Message::LocateReply { index } | Message::MopeIndex { index } => vec![*index],
            _ => Vec::new(),
        }
    }

    pub fn error(err: &crate::error::Error) -> Message {
        Message::Error {
            code: err.wire_code(),
            message: err.to_string(),
        }
    }
}
