//! Seed derivation for reproducible, order-independent random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream whose seed is a
//! hash of the root seed, a purpose label and an index. Reordering or
//! parallelising the consumers never changes what any one of them draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type SimRng = ChaCha8Rng;

/// Derives the seed for the `(label, index)` substream of `root`.
pub fn derive_seed(root: u64, label: &str, index: u64) -> u64 {
    let digest = Sha256::new()
        .chain_update(root.to_le_bytes())
        .chain_update((label.len() as u64).to_le_bytes())
        .chain_update(label.as_bytes())
        .chain_update(index.to_le_bytes())
        .finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(head)
}

pub fn stream(root: u64, label: &str, index: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, label, index))
}

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}
