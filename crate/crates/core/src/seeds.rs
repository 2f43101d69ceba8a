//! Deterministic derivation of random streams.
//!
//! Every stochastic component (splits, seed pools, surrogate training,
//! Thompson draws, bootstrap resamples) pulls from a ChaCha stream keyed by
//! a label plus its context. Results are therefore identical regardless of
//! execution order or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Build a ChaCha stream from a label, a context string (typically a
/// landscape digest or model id), and integer parts (seed, cycle, ...).
pub fn stream(label: &str, context: &str, parts: &[u64]) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(label.as_bytes());
    h.update([0u8]);
    h.update(context.as_bytes());
    h.update([0u8]);
    for p in parts {
        h.update(p.to_le_bytes());
    }
    let seed: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(seed)
}

/// SHA-256 of `data` as lowercase hex; used for content and config digests.
pub fn digest_hex(data: &[u8]) -> String {
    use std::fmt::Write as _;
    let bytes = Sha256::digest(data);
    let mut out = String::with_capacity(64);
    for b in bytes {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Derive a plain `u64` sub-seed from the same keyed hash.
pub fn sub_seed(label: &str, context: &str, parts: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(label.as_bytes());
    h.update([0u8]);
    h.update(context.as_bytes());
    h.update([0u8]);
    for p in parts {
        h.update(p.to_le_bytes());
    }
    let bytes = h.finalize();
    u64::from_le_bytes(bytes[..8].try_into().unwrap())
}
