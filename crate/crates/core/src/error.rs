use std::io;

use thiserror::Error;

use crate::protocol::FrameError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("label {value} does not fit in {width} bits")]
    LabelOverflow { value: u64, width: u32 },

    #[error("payload failed authentication")]
    Integrity,

    /// The peer sent something the protocol does not allow at this point.
    #[error("protocol violation: {0}")]
    Protocol(String),

    /// A request asked the client to hold more than `capacity` ciphertexts.
    #[error("client capacity exceeded: {requested} ciphertexts requested, capacity {capacity}")]
    Capacity { requested: usize, capacity: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("peer reported error {code}: {message}")]
    Remote { code: u16, message: String },

    #[error(transparent)]
    Frame(#[from] FrameError),

    #[error("leakage state integrity: {0}")]
    Leakage(String),

    #[error("ingestion error: {0}")]
    Ingest(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub fn protocol(msg: impl Into<String>) -> Self {
        Error::Protocol(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Stable numeric code used when an error crosses the wire.
    pub fn wire_code(&self) -> u16 {
        match self {
            Error::Config(_) => 1,
            Error::LabelOverflow { .. } => 2,
            Error::Integrity => 3,
            Error::Protocol(_) => 4,
            Error::Capacity { .. } => 5,
            Error::Argument(_) => 6,
            Error::Remote { code, .. } => *code,
            Error::Frame(_) => 7,
            Error::Leakage(_) => 8,
            Error::Ingest(_) => 9,
            Error::Io(_) => 10,
        }
    }
}
