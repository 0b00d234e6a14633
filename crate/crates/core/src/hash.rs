//! Keccak-256 helpers.

use tiny_keccak::{Hasher, Keccak};

pub fn keccak256(data: &[u8]) -> [u8; 32] {
    let mut k = Keccak::v256();
    let mut out = [0u8; 32];
    k.update(data);
    k.finalize(&mut out);
    out
}

/// First four bytes of the Keccak-256 digest.
pub fn keccak256_prefix4(data: &[u8]) -> [u8; 4] {
    let d = keccak256(data);
    [d[0], d[1], d[2], d[3]]
}
