//! Counter-based random streams.
//!
//! Every draw is keyed by `(seed, stream tag, worker, counter)`. The four words
//! form the 256-bit ChaCha key, so distinct tuples give independent streams and
//! the value of a draw never depends on the order in which events are handled.
//! The keyed ChaCha block seeds a xoshiro generator that produces the bulk
//! draws.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type Stream = Xoshiro256PlusPlus;

/// Stream tags keep unrelated consumers of randomness apart.
pub mod tag {
    pub const DURATION: u64 = 0x6475_7261;
    pub const NOISE: u64 = 0x6e6f_6973;
    pub const PRESET: u64 = 0x7072_6573;
    pub const UNIFORM_ALLOC: u64 = 0x7574_6100;
    pub const MONTE_CARLO: u64 = 0x6d63_6d63;
    pub const ARMS: u64 = 0x6172_6d73;
    pub const VERIFY: u64 = 0x7665_7269;
}

pub fn stream(seed: u64, tag: u64, worker: u64, counter: u64) -> Stream {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&tag.to_le_bytes());
    key[16..24].copy_from_slice(&worker.to_le_bytes());
    key[24..32].copy_from_slice(&counter.to_le_bytes());
    let mut state = [0u8; 32];
    ChaCha8Rng::from_seed(key).fill_bytes(&mut state);
    Xoshiro256PlusPlus::from_seed(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_key_same_draws() {
        let a: Vec<u64> = stream(7, tag::NOISE, 3, 11).random_iter().take(4).collect();
        let b: Vec<u64> = stream(7, tag::NOISE, 3, 11).random_iter().take(4).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn counter_changes_draws() {
        let a: u64 = stream(7, tag::NOISE, 3, 11).random();
        let b: u64 = stream(7, tag::NOISE, 3, 12).random();
        assert_ne!(a, b);
    }
}
