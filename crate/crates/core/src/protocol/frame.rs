//! Length-prefixed framing.
//!
//! ```text
//! frame   := len:u32be version:u8 kind:u8 body
//! len     := 2 + |body|
//! ```
//!
//! Body layouts (all integers big-endian, `ct` = 32-byte label ciphertext,
//! `payload` = u32 length then `nonce || body || tag`, `cts` = u32 count then
//! that many `ct`):
//!
//! | kind               | body                              |
//! |--------------------|-----------------------------------|
//! | INSERT             | ct payload                        |
//! | SEARCH             | ct(left) ct(right)                |
//! | SPLIT_PIVOTS       | cts ct(endpoint) u32(chunks)      |
//! | SPLIT_STREAM_ITEM  | cts                               |
//! | CLASSIFY_REPLY     | u32 count, count x u32            |
//! | SORT_REQUEST/REPLY | cts                               |
//! | LOCATE_REQUEST     | cts ct(endpoint)                  |
//! | LOCATE_REPLY       | u32                               |
//! | RANGE_RESULT       | u32 count, count x (ct payload)   |
//! | MOPE_NODE          | cts ct(target)                    |
//! | MOPE_INDEX         | u32                               |
//! | CLOSE, ACK         | (empty)                           |
//! | ERROR              | u16 code, u32 len, utf-8 text     |

use std::io::{self, Read, Write};

use thiserror::Error;

use super::message::{Kind, Message};
use crate::block::EncryptedBlock;
use crate::crypto::{LabelCiphertext, PayloadCiphertext, LABEL_CT_BYTES};

pub const PROTOCOL_VERSION: u8 = 1;
pub const HEADER_BYTES: usize = 6;
pub const MAX_FRAME_BYTES: usize = 64 << 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrameError {
    #[error("truncated frame: need {needed} bytes, have {have}")]
    Truncated { needed: usize, have: usize },
    #[error("unsupported protocol version {0}")]
    Version(u8),
    #[error("unknown message kind 0x{0:02x}")]
    UnknownKind(u8),
    #[error("frame of {0} bytes exceeds limit")]
    Oversize(usize),
    #[error("malformed {kind:?} body: {reason}")]
    Malformed { kind: Kind, reason: &'static str },
    #[error("connection closed")]
    Closed,
}

pub fn encode(msg: &Message) -> Vec<u8> {
    let body_len = msg.body_len();
    let mut out = Vec::with_capacity(HEADER_BYTES + body_len);
    out.extend_from_slice(&((body_len + 2) as u32).to_be_bytes());
    out.push(PROTOCOL_VERSION);
    out.push(msg.kind() as u8);
    encode_body(msg, &mut out);
    debug_assert_eq!(out.len(), HEADER_BYTES + body_len);
    out
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_be_bytes());
}

fn put_ct(out: &mut Vec<u8>, ct: &LabelCiphertext) {
    out.extend_from_slice(&ct.to_bytes());
}

fn put_cts(out: &mut Vec<u8>, cts: &[LabelCiphertext]) {
    put_u32(out, cts.len() as u32);
    for ct in cts {
        put_ct(out, ct);
    }
}

fn put_block(out: &mut Vec<u8>, block: &EncryptedBlock) {
    put_ct(out, &block.label);
    put_u32(out, block.payload.len() as u32);
    out.extend_from_slice(block.payload.as_bytes());
}

fn encode_body(msg: &Message, out: &mut Vec<u8>) {
    match msg {
        Message::Insert { block } => put_block(out, block),
        Message::Search { left, right } => {
            put_ct(out, left);
            put_ct(out, right);
        }
        Message::SplitPivots {
            pivots,
            endpoint,
            chunks,
        } => {
            put_cts(out, pivots);
            put_ct(out, endpoint);
            put_u32(out, *chunks);
        }
        Message::SplitStreamItem { items } => put_cts(out, items),
        Message::ClassifyReply { indices } => {
            put_u32(out, indices.len() as u32);
            for i in indices {
                put_u32(out, *i);
            }
        }
        Message::SortRequest { labels } | Message::SortReply { labels } => put_cts(out, labels),
        Message::LocateRequest { pivots, endpoint } => {
            put_cts(out, pivots);
            put_ct(out, endpoint);
        }
        Message::LocateReply { index } | Message::MopeIndex { index } => put_u32(out, *index),
        Message::RangeResult { blocks } => {
            put_u32(out, blocks.len() as u32);
            for b in blocks {
                put_block(out, b);
            }
        }
        Message::MopeNode { keys, target } => {
            put_cts(out, keys);
            put_ct(out, target);
        }
        Message::Close | Message::Ack => {}
        Message::Error { code, message } => {
            out.extend_from_slice(&code.to_be_bytes());
            put_u32(out, message.len() as u32);
            out.extend_from_slice(message.as_bytes());
        }
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    kind: Kind,
}

impl<'a> Cursor<'a> {
    fn bad(&self, reason: &'static str) -> FrameError {
        FrameError::Malformed {
            kind: self.kind,
            reason,
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], FrameError> {
        if self.buf.len() < n {
            return Err(self.bad("body shorter than declared contents"));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u16(&mut self) -> Result<u16, FrameError> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, FrameError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn ct(&mut self) -> Result<LabelCiphertext, FrameError> {
        Ok(LabelCiphertext::from_bytes(
            self.take(LABEL_CT_BYTES)?.try_into().unwrap(),
        ))
    }

    fn count(&mut self, elem: usize) -> Result<usize, FrameError> {
        let n = self.u32()? as usize;
        if n.saturating_mul(elem) > self.buf.len() {
            return Err(self.bad("element count exceeds body length"));
        }
        Ok(n)
    }

    fn cts(&mut self) -> Result<Vec<LabelCiphertext>, FrameError> {
        let n = self.count(LABEL_CT_BYTES)?;
        (0..n).map(|_| self.ct()).collect()
    }

    fn block(&mut self) -> Result<EncryptedBlock, FrameError> {
        let label = self.ct()?;
        let len = self.u32()? as usize;
        let payload = PayloadCiphertext::from_bytes(self.take(len)?.to_vec());
        Ok(EncryptedBlock { label, payload })
    }

    fn finish(self) -> Result<(), FrameError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(self.bad("trailing bytes"))
        }
    }
}

fn decode_body(kind: Kind, body: &[u8]) -> Result<Message, FrameError> {
    let mut c = Cursor { buf: body, kind };
    let msg = match kind {
        Kind::Insert => Message::Insert { block: c.block()? },
        Kind::Search => Message::Search {
            left: c.ct()?,
            right: c.ct()?,
        },
        Kind::SplitPivots => Message::SplitPivots {
            pivots: c.cts()?,
            endpoint: c.ct()?,
            chunks: c.u32()?,
        },
        Kind::SplitStreamItem => Message::SplitStreamItem { items: c.cts()? },
        Kind::ClassifyReply => {
            let n = c.count(4)?;
            Message::ClassifyReply {
                indices: (0..n).map(|_| c.u32()).collect::<Result<_, _>>()?,
            }
        }
        Kind::SortRequest => Message::SortRequest { labels: c.cts()? },
        Kind::SortReply => Message::SortReply { labels: c.cts()? },
        Kind::LocateRequest => Message::LocateRequest {
            pivots: c.cts()?,
            endpoint: c.ct()?,
        },
        Kind::LocateReply => Message::LocateReply { index: c.u32()? },
        Kind::RangeResult => {
            // Each block is at least a ciphertext plus a length word.
            let n = c.count(LABEL_CT_BYTES + 4)?;
            Message::RangeResult {
                blocks: (0..n).map(|_| c.block()).collect::<Result<_, _>>()?,
            }
        }
        Kind::MopeNode => Message::MopeNode {
            keys: c.cts()?,
            target: c.ct()?,
        },
        Kind::MopeIndex => Message::MopeIndex { index: c.u32()? },
        Kind::Close => Message::Close,
        Kind::Ack => Message::Ack,
        Kind::Error => {
            let code = c.u16()?;
            let len = c.u32()? as usize;
            let text = c.take(len)?;
            let message = String::from_utf8(text.to_vec()).map_err(|_| c.bad("invalid utf-8"))?;
            Message::Error { code, message }
        }
    };
    c.finish()?;
    Ok(msg)
}

/// Decodes one frame from the front of `buf`, returning the message and the
/// number of bytes consumed.
pub fn decode(buf: &[u8]) -> Result<(Message, usize), FrameError> {
    if buf.len() < 4 {
        return Err(FrameError::Truncated {
            needed: 4,
            have: buf.len(),
        });
    }
    let len = u32::from_be_bytes(buf[..4].try_into().unwrap()) as usize;
    if len > MAX_FRAME_BYTES {
        return Err(FrameError::Oversize(len));
    }
    if len < 2 {
        return Err(FrameError::Truncated {
            needed: HEADER_BYTES,
            have: 4 + len,
        });
    }
    let total = 4 + len;
    if buf.len() < total {
        return Err(FrameError::Truncated {
            needed: total,
            have: buf.len(),
        });
    }
    let msg = decode_frame_contents(&buf[4..total])?;
    Ok((msg, total))
}

fn decode_frame_contents(contents: &[u8]) -> Result<Message, FrameError> {
    if contents[0] != PROTOCOL_VERSION {
        return Err(FrameError::Version(contents[0]));
    }
    let kind = Kind::from_byte(contents[1]).ok_or(FrameError::UnknownKind(contents[1]))?;
    decode_body(kind, &contents[2..])
}

/// Incremental decoder over a byte stream. A malformed frame is consumed and
/// reported; the stream stays usable for the frames after it.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    /// `Ok(None)` means more bytes are needed.
    pub fn next_message(&mut self) -> Result<Option<Message>, FrameError> {
        match decode(&self.buf) {
            Ok((msg, used)) => {
                self.buf.drain(..used);
                Ok(Some(msg))
            }
            Err(FrameError::Truncated { .. }) => {
                // A declared length below the header size can never complete.
                if self.buf.len() >= 4 {
                    let len = u32::from_be_bytes(self.buf[..4].try_into().unwrap()) as usize;
                    if len < 2 && self.buf.len() >= 4 + len {
                        self.buf.drain(..4 + len);
                        return Err(FrameError::Truncated {
                            needed: HEADER_BYTES,
                            have: 4 + len,
                        });
                    }
                }
                Ok(None)
            }
            Err(FrameError::Oversize(len)) => {
                self.buf.clear();
                Err(FrameError::Oversize(len))
            }
            Err(e) => {
                let len = u32::from_be_bytes(self.buf[..4].try_into().unwrap()) as usize;
                self.buf.drain(..4 + len);
                Err(e)
            }
        }
    }
}

pub fn write_message<W: Write>(w: &mut W, msg: &Message) -> io::Result<()> {
    w.write_all(&encode(msg))
}

/// Blocking read of exactly one frame.
pub fn read_message<R: Read>(r: &mut R) -> Result<Message, crate::error::Error> {
    let mut len_buf = [0u8; 4];
    match r.read_exact(&mut len_buf) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Err(FrameError::Closed.into()),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_be_bytes(len_buf) as usize;
    if len > MAX_FRAME_BYTES {
        return Err(FrameError::Oversize(len).into());
    }
    let mut contents = vec![0u8; len];
    r.read_exact(&mut contents).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            crate::error::Error::from(FrameError::Truncated {
                needed: 4 + len,
                have: 4,
            })
        } else {
            e.into()
        }
    })?;
    if len < 2 {
        return Err(FrameError::Truncated {
            needed: HEADER_BYTES,
            have: 4 + len,
        }
        .into());
    }
    Ok(decode_frame_contents(&contents)?)
}
