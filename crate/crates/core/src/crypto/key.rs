use rand::rngs::OsRng;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Client secret: a PRP key for labels and an independent AEAD key for payloads.
#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey {
    pub(crate) prp: [u8; 16],
    pub(crate) payload: [u8; 16],
}

impl SecretKey {
    pub fn from_bytes(prp: [u8; 16], payload: [u8; 16]) -> Self {
        SecretKey { prp, payload }
    }

    pub fn prp_key(&self) -> &[u8; 16] {
        &self.prp
    }

    pub fn payload_key(&self) -> &[u8; 16] {
        &self.payload
    }
}

impl std::fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

/// Generates a fresh key, or a reproducible one when `seed` is given.
pub fn keygen(seed: Option<u64>) -> SecretKey {
    let mut prp = [0u8; 16];
    let mut payload = [0u8; 16];
    match seed {
        Some(seed) => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.fill_bytes(&mut prp);
            rng.fill_bytes(&mut payload);
        }
        None => {
            OsRng.fill_bytes(&mut prp);
            OsRng.fill_bytes(&mut payload);
        }
    }
    SecretKey { prp, payload }
}
