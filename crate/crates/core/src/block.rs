use crate::crypto::{LabelCiphertext, PayloadCiphertext};

/// Label ciphertext plus opaque payload ciphertext; the unit the server
/// stores and returns.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EncryptedBlock {
    pub label: LabelCiphertext,
    pub payload: PayloadCiphertext,
}

impl EncryptedBlock {
    pub fn new(label: LabelCiphertext, payload: PayloadCiphertext) -> Self {
        EncryptedBlock { label, payload }
    }
}

/// Server-assigned identity of a stored block, in arrival order.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize,
)]
pub struct BlockId(pub u64);
