//! Keyed random streams.
//!
//! Every random draw in the planner comes from a stream derived from a key
//! path such as `(seed, tile_id, cell)` or `(seed, region, edge, segment)`,
//! so scheduling order never changes a result.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A position in a key tree. Children are derived, never drawn, so
/// sibling keys are independent of the order they are visited in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn root(seed: u64) -> Self {
        StreamKey(mix64(seed))
    }

    pub fn child(self, index: u64) -> Self {
        StreamKey(mix64(self.0 ^ mix64(index.wrapping_add(0x632B_E59B_D9B4_E019))))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// A single uniform draw in `[0, 1)` tied to this key.
    pub fn unit(self) -> f64 {
        // 53 high bits
        (mix64(self.0 ^ 0xD6E8_FEB8_6659_FD93) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
