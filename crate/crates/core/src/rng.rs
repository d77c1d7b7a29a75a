//! Keyed deterministic random streams.
//!
//! Every stream is a ChaCha8 generator whose 256-bit seed is the SHA-256 of a
//! textual key, so the same key yields the same numbers on every platform and
//! independent of the order in which streams are requested.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn stream(domain: &str, parts: &[&dyn std::fmt::Display]) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(domain.as_bytes());
    for p in parts {
        hasher.update(b"\x1f");
        hasher.update(p.to_string().as_bytes());
    }
    ChaCha8Rng::from_seed(hasher.finalize().into())
}
