//! Reproducible random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream keyed by
//! `(seed, domain)` and selected by a 64-bit stream index. ChaCha is a
//! counter-based cipher, so the stream for draw `i` does not depend on
//! how many other draws ran before it or on which thread ran them.
//!
//! Key layout: bytes 0..8 = `seed` (little endian), 8..16 = `domain`
//! (little endian), 16..32 = zero. The stream index is passed to
//! `ChaCha8Rng::set_stream`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains. Different purposes never share a key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    /// Column permutations of a science table; stream = column index.
    Permutation = 1,
    /// Treatment assignments; stream = draw index.
    Assignment = 2,
    /// Seeds for the populations of a multi-population protocol.
    Population = 3,
}

pub fn stream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Derives an independent child seed, e.g. one per population.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    use rand::RngCore;
    stream(seed, Domain::Population, index).next_u64()
}
