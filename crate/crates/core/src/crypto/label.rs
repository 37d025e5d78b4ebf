use std::cmp::Ordering;
use std::fmt;

use aes::cipher::generic_array::GenericArray;
use aes::cipher::{BlockEncrypt, KeyInit};
use aes::Aes128;
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use super::SecretKey;
use crate::error::{Error, Result};

pub const BLOCK_BYTES: usize = 16;
pub const LABEL_CT_BYTES: usize = 2 * BLOCK_BYTES;
pub const DEFAULT_LABEL_WIDTH: u32 = 64;

const BLOCK_BITS: u32 = 128;

/// Where a label came from. Query endpoints sort around inserted labels of
/// the same value so that inclusive range bounds fall out of the ordering.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum OriginBits {
    Left = 0b00,
    Insert = 0b01,
    Right = 0b11,
}

impl OriginBits {
    pub fn bits(self) -> u8 {
        self as u8
    }

    pub fn from_bits(bits: u8) -> Option<Self> {
        match bits {
            0b00 => Some(OriginBits::Left),
            0b01 => Some(OriginBits::Insert),
            0b11 => Some(OriginBits::Right),
            _ => None,
        }
    }
}

/// Two-block label ciphertext `(r, PRP(r+1) ^ (label || origin || 0..))`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabelCiphertext {
    r: [u8; BLOCK_BYTES],
    masked: [u8; BLOCK_BYTES],
}

impl LabelCiphertext {
    pub fn from_parts(r: [u8; BLOCK_BYTES], masked: [u8; BLOCK_BYTES]) -> Self {
        LabelCiphertext { r, masked }
    }

    pub fn from_bytes(bytes: &[u8; LABEL_CT_BYTES]) -> Self {
        let mut r = [0u8; BLOCK_BYTES];
        let mut masked = [0u8; BLOCK_BYTES];
        r.copy_from_slice(&bytes[..BLOCK_BYTES]);
        masked.copy_from_slice(&bytes[BLOCK_BYTES..]);
        LabelCiphertext { r, masked }
    }

    pub fn to_bytes(&self) -> [u8; LABEL_CT_BYTES] {
        let mut out = [0u8; LABEL_CT_BYTES];
        out[..BLOCK_BYTES].copy_from_slice(&self.r);
        out[BLOCK_BYTES..].copy_from_slice(&self.masked);
        out
    }

    pub fn r(&self) -> &[u8; BLOCK_BYTES] {
        &self.r
    }

    pub fn masked(&self) -> &[u8; BLOCK_BYTES] {
        &self.masked
    }
}

impl fmt::Debug for LabelCiphertext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LabelCiphertext(")?;
        for b in &self.r[..4] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..)")
    }
}

/// Decrypted label with everything needed to place it in the total order.
///
/// Field order is the comparison order: label, origin, recomputed tie-break,
/// then the raw ciphertext bytes so that only identical ciphertexts compare
/// equal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EffectiveTuple {
    pub label: u64,
    /// Raw two-bit origin field. `0b10` never comes out of honest encryption.
    pub origin: u8,
    pub tiebreak: u128,
    pub ctbytes: [u8; LABEL_CT_BYTES],
}

impl EffectiveTuple {
    pub fn origin_bits(&self) -> Option<OriginBits> {
        OriginBits::from_bits(self.origin)
    }
}

/// Label encryption under a fixed key and label width.
#[derive(Clone)]
pub struct LabelCodec {
    cipher: Aes128,
    width: u32,
}

impl LabelCodec {
    pub fn new(key: &SecretKey) -> Self {
        Self::with_width(key, DEFAULT_LABEL_WIDTH).expect("default width is valid")
    }

    pub fn with_width(key: &SecretKey, width: u32) -> Result<Self> {
        if width == 0 || width > 64 {
            return Err(Error::config(format!(
                "label width must be in 1..=64, got {width}"
            )));
        }
        Ok(LabelCodec {
            cipher: Aes128::new(GenericArray::from_slice(&key.prp)),
            width,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    /// Raw single-block PRP evaluation.
    pub fn prp(&self, block: u128) -> u128 {
        let mut b = GenericArray::from(block.to_be_bytes());
        self.cipher.encrypt_block(&mut b);
        u128::from_be_bytes(b.into())
    }

    fn pack(&self, label: u64, origin: OriginBits) -> Result<u128> {
        if self.width < 64 && label >> self.width != 0 {
            return Err(Error::LabelOverflow {
                value: label,
                width: self.width,
            });
        }
        let shift = BLOCK_BITS - self.width;
        Ok(((label as u128) << shift) | ((origin.bits() as u128) << (shift - 2)))
    }

    pub fn encrypt<R: RngCore + CryptoRng>(
        &self,
        rng: &mut R,
        label: u64,
        origin: OriginBits,
    ) -> Result<LabelCiphertext> {
        let plain = self.pack(label, origin)?;
        let mut r = [0u8; BLOCK_BYTES];
        rng.fill_bytes(&mut r);
        let pad = self.prp(u128::from_be_bytes(r).wrapping_add(1));
        Ok(LabelCiphertext {
            r,
            masked: (pad ^ plain).to_be_bytes(),
        })
    }

    /// Tie-break value `PRP(r + 2)`.
    pub fn tiebreak(&self, ct: &LabelCiphertext) -> u128 {
        self.prp(u128::from_be_bytes(ct.r).wrapping_add(2))
    }

    pub fn decrypt(&self, ct: &LabelCiphertext) -> EffectiveTuple {
        let r = u128::from_be_bytes(ct.r);
        let plain = self.prp(r.wrapping_add(1)) ^ u128::from_be_bytes(ct.masked);
        let shift = BLOCK_BITS - self.width;
        EffectiveTuple {
            label: (plain >> shift) as u64,
            origin: ((plain >> (shift - 2)) & 0b11) as u8,
            tiebreak: self.prp(r.wrapping_add(2)),
            ctbytes: ct.to_bytes(),
        }
    }

    pub fn compare(&self, a: &LabelCiphertext, b: &LabelCiphertext) -> Ordering {
        if a == b {
            return Ordering::Equal;
        }
        self.decrypt(a).cmp(&self.decrypt(b))
    }
}

impl fmt::Debug for LabelCodec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LabelCodec")
            .field("width", &self.width)
            .finish_non_exhaustive()
    }
}
