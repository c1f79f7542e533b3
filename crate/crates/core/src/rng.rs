//! Seeded RNG streams.
//!
//! Every random draw in a run comes from a ChaCha8 stream keyed by
//! `(root seed, purpose, round, client)`. Streams for different keys are
//! independent, so client work can run in any order or in parallel and still
//! reproduce bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// What a stream is used for. The discriminant is folded into the key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Init = 1,
    Partition = 2,
    Selection = 3,
    ServerRounding = 4,
    ClientRounding = 5,
    ClientNoise = 6,
    Data = 7,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the stream for `(seed, purpose, round, client)`.
pub fn stream(seed: u64, purpose: Purpose, round: u64, client: u64) -> SimRng {
    let mut key = splitmix64(seed);
    for word in [purpose as u64, round, client] {
        key = splitmix64(key ^ word);
    }
    ChaCha8Rng::seed_from_u64(key)
}
