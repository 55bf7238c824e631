//! Seeded random draws with a fixed, documented layout.
//!
//! Every randomized stage gets its own ChaCha8 stream keyed by
//! `(seed, domain)` and selected by a per-item index (usually the pair id):
//!
//! * key bytes `0..8` = seed (little endian), `8..16` = domain tag (little
//!   endian), `16..32` = zero;
//! * stream id = item index; block counter starts at zero;
//! * every draw consumes exactly one `u64` from the stream.
//!
//! A uniform `f64` is `(x >> 11) * 2^-53`; a Bernoulli(p) draw is
//! `uniform < p`; an index below `n` is `(x * n) >> 64` in 128-bit arithmetic.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Keeps the streams of unrelated stages apart under one user seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Sampler = 1,
    RareChoice = 2,
    PlacementShuffle = 3,
}

pub struct DrawStream {
    rng: ChaCha8Rng,
}

impl DrawStream {
    pub fn new(seed: u64, domain: Domain, index: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(index);
        DrawStream { rng }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Index in `0..n`; `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// One Fisher-Yates pass: for `i` from `len-1` down to 1, swap `i` with `below(i+1)`.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
