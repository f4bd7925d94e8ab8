//! Seeded random streams. Every consumer of randomness in a run draws from
//! its own stream so that changing one subsystem does not perturb the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream identifiers.
pub mod streams {
    pub const PLACEMENT: u64 = 1;
    pub const MOBILITY: u64 = 2;
    pub const FLOWS: u64 = 3;
    pub const MAC: u64 = 4;
    pub const LOSS: u64 = 5;
    pub const PROTOCOL: u64 = 6;
}

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Sub-stream keyed by an entity index (a node or a flow slot).
pub fn substream(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream(7, streams::FLOWS).random();
        let b: u64 = stream(7, streams::FLOWS).random();
        let c: u64 = stream(7, streams::MAC).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let s0: u64 = substream(7, streams::MOBILITY, 0).random();
        let s1: u64 = substream(7, streams::MOBILITY, 1).random();
        assert_ne!(s0, s1);
    }
}
