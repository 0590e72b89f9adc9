//! Hash utilities: content digests and deterministic unit draws.
//!
//! Randomness throughout the crate is derived by hashing a structured key
//! rather than by consuming a sequential generator. Draws are therefore
//! independent of iteration order and identical across runs, platforms, and
//! thread schedules, which is what makes common-random-number comparisons and
//! byte-reproducible outputs possible.

use sha2::{Digest, Sha256};

/// Hex-encoded SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn unit_from_digest(digest: &[u8]) -> f64 {
    let mut raw = [0u8; 8];
    raw.copy_from_slice(&digest[..8]);
    // 53 mantissa bits, same construction as a standard f64 uniform
    let bits = u64::from_be_bytes(raw) >> 11;
    bits as f64 / (1u64 << 53) as f64
}

/// Uniform draw in [0, 1) determined entirely by the key parts.
pub fn unit_draw(parts: &[&str]) -> f64 {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part.as_bytes());
        hasher.update([0x1f]);
    }
    unit_from_digest(&hasher.finalize())
}

/// Allocation-free keyed draw for hot loops. Text and number parts feed the
/// hash with distinct framing, so the key space cannot collide with itself
/// or with `unit_draw`.
#[derive(Clone)]
pub struct KeyedDraw(Sha256);

impl KeyedDraw {
    pub fn new(label: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update([0x02]);
        hasher.update(label.as_bytes());
        hasher.update([0x1f]);
        KeyedDraw(hasher)
    }

    pub fn text(mut self, part: &str) -> Self {
        self.0.update([0x00]);
        self.0.update(part.as_bytes());
        self.0.update([0x1f]);
        self
    }

    pub fn num(mut self, part: u64) -> Self {
        self.0.update([0x01]);
        self.0.update(part.to_be_bytes());
        self
    }

    pub fn unit(self) -> f64 {
        unit_from_digest(&self.0.finalize())
    }
}
