//! Range search over encrypted labels with a stateless client.
//!
//! The server keeps a buffer tree whose order is revealed only as searches
//! need it. See the crate README for the protocol and the measured claims.

pub mod bench;
pub mod block;
pub mod client;
pub mod crypto;
pub mod error;
pub mod leakage;
pub mod mope;
pub mod protocol;
pub mod server;

pub use block::{BlockId, EncryptedBlock};
pub use client::{OrderOracle, PopeClient, SearchResult};
pub use crypto::{keygen, LabelCiphertext, LabelCodec, OriginBits, SecretKey};
pub use error::{Error, Result};
pub use leakage::{PartialOrderState, Rord};
pub use mope::MopeServer;
pub use protocol::{LocalSession, Op, Session, SocketSession, Transcript};
pub use server::{PopeServer, PopeTree};
