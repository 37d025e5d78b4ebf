use aes_gcm::aead::{Aead, KeyInit};
use aes_gcm::{Aes128Gcm, Nonce};
use rand::{CryptoRng, RngCore};

use super::SecretKey;
use crate::error::{Error, Result};

pub const NONCE_BYTES: usize = 12;
pub const TAG_BYTES: usize = 16;

/// Authenticated payload ciphertext laid out as `nonce || body || tag`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PayloadCiphertext(Vec<u8>);

impl PayloadCiphertext {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        PayloadCiphertext(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Length of the plaintext this ciphertext would decrypt to.
    pub fn plaintext_len(&self) -> usize {
        self.0.len().saturating_sub(NONCE_BYTES + TAG_BYTES)
    }
}

impl std::fmt::Debug for PayloadCiphertext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PayloadCiphertext({} bytes)", self.0.len())
    }
}

/// AES-128-GCM over payload bytes.
#[derive(Clone)]
pub struct PayloadCipher {
    aead: Aes128Gcm,
}

impl PayloadCipher {
    pub fn new(key: &SecretKey) -> Self {
        PayloadCipher {
            aead: Aes128Gcm::new_from_slice(&key.payload).expect("16-byte key"),
        }
    }

    pub fn encrypt<R: RngCore + CryptoRng>(&self, rng: &mut R, plain: &[u8]) -> PayloadCiphertext {
        let mut nonce = [0u8; NONCE_BYTES];
        rng.fill_bytes(&mut nonce);
        let body = self
            .aead
            .encrypt(Nonce::from_slice(&nonce), plain)
            .expect("in-memory AEAD encryption cannot fail");
        let mut out = Vec::with_capacity(NONCE_BYTES + body.len());
        out.extend_from_slice(&nonce);
        out.extend_from_slice(&body);
        PayloadCiphertext(out)
    }

    pub fn decrypt(&self, ct: &PayloadCiphertext) -> Result<Vec<u8>> {
        if ct.0.len() < NONCE_BYTES + TAG_BYTES {
            return Err(Error::Integrity);
        }
        let (nonce, body) = ct.0.split_at(NONCE_BYTES);
        self.aead
            .decrypt(Nonce::from_slice(nonce), body)
            .map_err(|_| Error::Integrity)
    }
}
