//! Wire messages, framing, transports and cost accounting.

mod frame;
mod message;
mod session;
mod transcript;
mod transport;

pub use frame::{
    decode, encode, read_message, write_message, FrameDecoder, FrameError, HEADER_BYTES,
    MAX_FRAME_BYTES, PROTOCOL_VERSION,
};
pub use message::{Kind, Message};
pub use session::{LocalSession, Op, OpOutcome, Session, SocketSession};
pub use transcript::{
    CiphertextTally, Direction, Event, Metrics, OpCost, OpKind, SharedMetrics, Transcript,
};
pub use transport::{
    dispatch, expected_replies, serve_connection, Channel, ClientLink, InProcessLink, RangeServer,
    Responder, StreamLink,
};
