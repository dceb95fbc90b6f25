//! Seeded random streams.
//!
//! Every randomized step draws from a ChaCha8 stream keyed by the user seed,
//! a fixed purpose tag and a stream index (replicate, row block, iteration).
//! Independent indices never share state, so results do not depend on the
//! order in which replicates or blocks are executed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for; keeps different consumers of one seed apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Permutation,
    ConditionalPermutation,
    DataBlock,
    MekroRestart,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Permutation => 0x7065_726d_7574_6531,
            Purpose::ConditionalPermutation => 0x636f_6e64_7065_726d,
            Purpose::DataBlock => 0x6461_7461_626c_6b31,
            Purpose::MekroRestart => 0x6d65_6b72_6f72_7374,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The generator for `(seed, purpose, index)`.
pub fn stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ purpose.tag()));
    rng.set_stream(index);
    rng
}
