//! Label and payload encryption.
//!
//! Labels are encrypted as two cipher blocks: a random block `r` and
//! `PRP(r + 1) XOR (label || origin || 0...)`. The tie-breaking value used to
//! order equal labels is never transmitted; the key holder recomputes it as
//! `PRP(r + 2)`.

mod key;
mod label;
mod payload;

pub use key::{keygen, SecretKey};
pub use label::{
    EffectiveTuple, LabelCiphertext, LabelCodec, OriginBits, BLOCK_BYTES, DEFAULT_LABEL_WIDTH,
    LABEL_CT_BYTES,
};
pub use payload::{PayloadCipher, PayloadCiphertext, NONCE_BYTES, TAG_BYTES};
