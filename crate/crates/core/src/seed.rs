//! Seed derivation.
//!
//! Every randomized routine takes a [`SeedSpec`] and derives child streams
//! from stable labels (component name, user index, replication, ...), never
//! from call order. Two runs with the same master seed therefore draw the
//! same numbers no matter how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    state: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

impl SeedSpec {
    pub fn new(master: u64) -> Self {
        SeedSpec {
            state: splitmix64(master),
        }
    }

    /// Child stream identified by a label.
    pub fn derive(&self, label: &str) -> SeedSpec {
        SeedSpec {
            state: splitmix64(self.state ^ fnv1a(label.as_bytes())),
        }
    }

    /// Child stream identified by a label and an index (user, replication, ...).
    pub fn derive_index(&self, label: &str, index: u64) -> SeedSpec {
        let labelled = self.derive(label);
        SeedSpec {
            state: splitmix64(labelled.state ^ splitmix64(index.wrapping_add(0x5851_f42d))),
        }
    }

    /// Child stream keyed by a floating-point parameter value.
    pub fn derive_value(&self, label: &str, value: f64) -> SeedSpec {
        self.derive_index(label, value.to_bits())
    }

    pub fn as_u64(&self) -> u64 {
        self.state
    }

    /// Rebuilds a spec from a value returned by [`SeedSpec::as_u64`].
    pub fn from_u64(state: u64) -> Self {
        SeedSpec { state }
    }

    pub fn rng(&self) -> StreamRng {
        StreamRng::seed_from_u64(self.state)
    }
}
