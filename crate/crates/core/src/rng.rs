//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator keyed by the master seed plus a tuple
//! of counters, so the stream a task sees depends only on its coordinates and
//! never on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Domain tags that keep streams for different purposes disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Episodes = 1,
    Measurement = 2,
    Split = 3,
    Dataset = 4,
    Training = 5,
    Subsample = 6,
}

/// Stream for `(master_seed, domain, major, minor)`.
pub fn derive_stream(master_seed: u64, domain: Domain, major: u64, minor: u64) -> StreamRng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    key[16..24].copy_from_slice(&major.to_le_bytes());
    key[24..].copy_from_slice(&minor.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Plain seeded stream for callers that hold a single seed.
pub fn seeded(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives a child seed, e.g. one per trial.
pub fn derive_seed(master_seed: u64, domain: Domain, index: u64) -> u64 {
    use rand::RngCore;
    derive_stream(master_seed, domain, index, u64::MAX).next_u64()
}
