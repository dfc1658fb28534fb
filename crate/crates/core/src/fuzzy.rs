//! Fuzzy commitment: seal a binary template under a random key with a
//! repetition code and a salted SHA-256 key hash; verification tolerates up
//! to the code's correction radius in bit errors.
//!
//! The reject path is a single code path and returns no score or corrected
//! error count, so the accept/reject output carries no distance signal.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::bits::BinaryTemplate;
use crate::error::{Error, Result};

pub const CODEC_REPETITION: &str = "repetition";
const MAGIC: &[u8; 4] = b"FCM1";

/// Block repetition code: each message bit repeated `rho` times,
/// block-contiguous; corrects t = (rho-1)/2 errors per block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EccCodec {
    name: String,
    rho: u16,
    n: u32,
}

impl EccCodec {
    pub fn repetition(rho: u16, n: u32) -> Result<Self> {
        if rho == 0 || rho % 2 == 0 {
            return Err(Error::Domain(format!("repetition factor rho must be odd, got {rho}")));
        }
        if n == 0 || n % rho as u32 != 0 {
            return Err(Error::Domain(format!("rho = {rho} must divide codeword length n = {n}")));
        }
        Ok(Self { name: CODEC_REPETITION.to_string(), rho, n })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rho(&self) -> u16 {
        self.rho
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    pub fn k_bits(&self) -> usize {
        (self.n / self.rho as u32) as usize
    }

    /// Guaranteed per-block correction radius.
    pub fn t(&self) -> usize {
        (self.rho as usize - 1) / 2
    }
}

pub fn ecc_encode(message: &BinaryTemplate, codec: &EccCodec) -> Result<BinaryTemplate> {
    if message.len() != codec.k_bits() {
        return Err(Error::Dimension { what: "ecc message", expected: codec.k_bits(), actual: message.len() });
    }
    let rho = codec.rho as usize;
    let mut out = BinaryTemplate::zeros(codec.n());
    for (i, bit) in message.iter().enumerate() {
        if bit {
            for r in 0..rho {
                out.set(i * rho + r, true);
            }
        }
    }
    Ok(out)
}

/// Per-block majority vote; total on valid lengths (nearest-codeword
/// decoding for repetition codes).
pub fn ecc_decode(received: &BinaryTemplate, codec: &EccCodec) -> Result<BinaryTemplate> {
    if received.len() != codec.n() {
        return Err(Error::Dimension { what: "ecc received word", expected: codec.n(), actual: received.len() });
    }
    let rho = codec.rho as usize;
    let mut out = BinaryTemplate::zeros(codec.k_bits());
    for i in 0..codec.k_bits() {
        let ones = (0..rho).filter(|r| received.get(i * rho + r)).count();
        if ones * 2 > rho {
            out.set(i, true);
        }
    }
    Ok(out)
}

/// Helper data plus salted key hash; the key itself is never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Commitment {
    helper: BinaryTemplate,
    key_hash: [u8; 32],
    salt: [u8; 16],
    codec: EccCodec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyOutcome {
    pub accepted: bool,
    /// Populated only on accept, for diagnostics.
    pub corrected_errors: Option<usize>,
}

fn key_digest(salt: &[u8; 16], key: &BinaryTemplate) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(salt);
    h.update(key.as_bytes());
    h.finalize().into()
}

/// Seal `template` under a fresh random key derived from `key_seed`.
/// The salt is drawn from the same seeded stream so enrollment with fixed
/// seeds serializes byte-identically; production callers draw `key_seed`
/// from OS entropy.
pub fn commit(template: &BinaryTemplate, codec: &EccCodec, key_seed: u64) -> Result<Commitment> {
    if template.len() != codec.n() {
        return Err(Error::Dimension { what: "commit template", expected: codec.n(), actual: template.len() });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(key_seed);
    let mut key_bytes = vec![0u8; (codec.k_bits() + 7) / 8];
    rng.fill_bytes(&mut key_bytes);
    if codec.k_bits() % 8 != 0 {
        let last = key_bytes.len() - 1;
        key_bytes[last] &= 0xFFu8 << (8 - codec.k_bits() % 8);
    }
    let key = BinaryTemplate::from_bytes(codec.k_bits(), key_bytes)?;
    let mut salt = [0u8; 16];
    rng.fill_bytes(&mut salt);

    let helper = ecc_encode(&key, codec)?.xor(template)?;
    let key_hash = key_digest(&salt, &key);
    Ok(Commitment { helper, key_hash, salt, codec: codec.clone() })
}

/// Unseal with a query template: decode helper XOR query, accept iff the
/// recovered key hashes to the stored digest.
pub fn verify_commitment(query: &BinaryTemplate, c: &Commitment) -> Result<VerifyOutcome> {
    if query.len() != c.codec.n() {
        return Err(Error::Dimension { what: "verify query", expected: c.codec.n(), actual: query.len() });
    }
    let noisy = c.helper.xor(query)?;
    let key = ecc_decode(&noisy, &c.codec)?;
    let accepted = key_digest(&c.salt, &key) == c.key_hash;
    let corrected_errors = if accepted {
        Some(ecc_encode(&key, &c.codec)?.hamming_distance(&noisy)?)
    } else {
        None
    };
    Ok(VerifyOutcome { accepted, corrected_errors })
}

impl Commitment {
    pub fn codec(&self) -> &EccCodec {
        &self.codec
    }

    pub fn helper(&self) -> &BinaryTemplate {
        &self.helper
    }

    pub fn salt(&self) -> &[u8; 16] {
        &self.salt
    }

    pub fn key_hash(&self) -> &[u8; 32] {
        &self.key_hash
    }

    /// Normative wire layout, little-endian lengths:
    /// "FCM1" | name len (u16) + bytes | rho (u16) | n (u32) | salt (16) |
    /// key_hash (32) | helper (ceil(n/8) bytes, MSB-first packing).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        let name = self.codec.name.as_bytes();
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name);
        out.extend_from_slice(&self.codec.rho.to_le_bytes());
        out.extend_from_slice(&self.codec.n.to_le_bytes());
        out.extend_from_slice(&self.salt);
        out.extend_from_slice(&self.key_hash);
        out.extend_from_slice(self.helper.as_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, usize)> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur.take(4)?;
        if magic != MAGIC {
            return Err(Error::Integrity("bad commitment magic".into()));
        }
        let name_len = u16::from_le_bytes(cur.take(2)?.try_into().unwrap()) as usize;
        let name = String::from_utf8(cur.take(name_len)?.to_vec())
            .map_err(|_| Error::Integrity("codec name is not UTF-8".into()))?;
        if name != CODEC_REPETITION {
            return Err(Error::Integrity(format!("unknown codec {name:?}")));
        }
        let rho = u16::from_le_bytes(cur.take(2)?.try_into().unwrap());
        let n = u32::from_le_bytes(cur.take(4)?.try_into().unwrap());
        let codec = EccCodec::repetition(rho, n)
            .map_err(|e| Error::Integrity(format!("invalid codec parameters: {e}")))?;
        let salt: [u8; 16] = cur.take(16)?.try_into().unwrap();
        let key_hash: [u8; 32] = cur.take(32)?.try_into().unwrap();
        let helper_bytes = cur.take((n as usize + 7) / 8)?.to_vec();
        let helper = BinaryTemplate::from_bytes(n as usize, helper_bytes)?;
        Ok((Commitment { helper, key_hash, salt, codec }, cur.pos))
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.pos + len > self.bytes.len() {
            return Err(Error::Integrity("truncated commitment buffer".into()));
        }
        let s = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }
}
