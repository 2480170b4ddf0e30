//! Seedable, splittable random streams.
//!
//! Every consumer of randomness (a restart, one determinization call, a
//! Monte-Carlo run) derives its own ChaCha stream from the master seed and a
//! short label path, so results do not depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream for `master` at the given label path, e.g. `[restart, step]`.
pub fn stream(master: u64, labels: &[u64]) -> StreamRng {
    let mut id = splitmix64(labels.len() as u64);
    for &label in labels {
        id = splitmix64(id ^ splitmix64(label));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(id);
    rng
}
