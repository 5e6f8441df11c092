//! Per-task random streams.
//!
//! Task `k` of a run with master seed `m` draws from a ChaCha20 stream seeded
//! with the first eight bytes of `SHA-256(tag ‖ m ‖ k)`. Streams depend only on
//! `(m, k)`, never on scheduling, and are identical across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

pub type Stream = ChaCha20Rng;

const TAG: &[u8] = b"ee-lab/child-seed/v1";

pub fn child_seed(master_seed: u64, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(TAG);
    hasher.update(master_seed.to_le_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn stream(seed: u64) -> Stream {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn child_stream(master_seed: u64, index: u64) -> Stream {
    stream(child_seed(master_seed, index))
}
