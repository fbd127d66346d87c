//! Seeded random substreams.
//!
//! Parallel loops (permutations, Monte-Carlo draws, LISA regions) key each unit of
//! work by `(seed, index)` so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator for work item `index` under `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn substreams_differ_and_repeat() {
        let a: u64 = substream(7, 0).random();
        let b: u64 = substream(7, 1).random();
        let a2: u64 = substream(7, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, a2);
    }
}
