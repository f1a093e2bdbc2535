//! Seed derivation for reproducible random streams.
//!
//! Every stochastic step draws from its own ChaCha stream keyed by a base
//! seed and a label, so results never depend on how many values some other
//! step happened to consume.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives an independent generator from `seed` and a sequence of labels.
pub fn stream(seed: u64, labels: &[&[u8]]) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive(seed, labels))
}

/// Derives a 64-bit child seed from `seed` and a sequence of labels.
pub fn child_seed(seed: u64, labels: &[&[u8]]) -> u64 {
    let bytes = derive(seed, labels);
    u64::from_le_bytes(bytes[..8].try_into().expect("32-byte digest"))
}

fn derive(seed: u64, labels: &[&[u8]]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    for label in labels {
        // length prefix keeps ("ab","c") and ("a","bc") apart
        hasher.update((label.len() as u64).to_le_bytes());
        hasher.update(label);
    }
    hasher.finalize().into()
}
