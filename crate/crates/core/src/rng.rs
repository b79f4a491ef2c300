//! Named, seed-derived random substreams.
//!
//! Every consumer draws from its own stream, so adding or reordering
//! consumers never perturbs the numbers another consumer sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn name_hash(name: &str) -> u64 {
    // FNV-1a
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Stream for a named subsystem, e.g. `"detector"`.
pub fn stream(seed: u64, name: &str) -> SimRng {
    SimRng::seed_from_u64(splitmix64(seed ^ splitmix64(name_hash(name))))
}

/// Per-target particle stream: scenario seed combined with the target id.
pub fn particle_stream(seed: u64, target_id: u64) -> SimRng {
    SimRng::seed_from_u64(splitmix64(seed ^ target_id) ^ name_hash("particles"))
}
