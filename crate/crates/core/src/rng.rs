//! Counter-based random substreams.
//!
//! Every (seed, path, person, inequity) tuple owns an independent ChaCha8
//! stream; draw `t` of that stream is the shock at time `t`. Parallel
//! schedules therefore cannot change what any entry sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomStream {
    pub seed: u64,
    pub path: u64,
    pub person: u64,
    pub inequity: u64,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, path: 0, person: 0, inequity: 0 }
    }

    pub fn with_path(self, path: u64) -> Self {
        Self { path, ..self }
    }

    pub fn entry(self, person: usize, inequity: usize) -> Self {
        Self { person: person as u64, inequity: inequity as u64, ..self }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let id = mix(mix(mix(0x5eed_5eed_5eed, self.path), self.person), self.inequity);
        rng.set_stream(id);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn mix(acc: u64, v: u64) -> u64 {
    splitmix64(acc ^ splitmix64(v))
}
