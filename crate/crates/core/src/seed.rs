//! Seeded randomness. Every random decision in the toolkit draws from a
//! [`ChaCha8Rng`], whose output stream is stable across platforms and
//! crate versions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive a child seed from a base seed and a path of string components,
/// e.g. `derive_seed(run_seed, &["generate", sentence_id, "3"])`.
pub fn derive_seed(base: u64, parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn derived_rng(base: u64, parts: &[&str]) -> SeededRng {
    rng_from_seed(derive_seed(base, parts))
}
