//! Splittable seed derivation.
//!
//! Every random stream in the crate is a [`ChaCha8Rng`] seeded from a
//! [`Seed`]. Children are derived by mixing the parent with a tag through
//! SplitMix64, so a child depends only on its parent and its own tag: adding
//! a batch never perturbs the streams of the other batches.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Seed(pub u64);

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Seed {
    pub fn child(self, tag: u64) -> Seed {
        Seed(splitmix64(self.0 ^ splitmix64(tag.wrapping_add(0x632B_E59B_D9B4_E019))))
    }

    /// Child seed for a named stream, e.g. `seed.named("dropout")`.
    pub fn named(self, name: &str) -> Seed {
        // FNV-1a over the name keeps tags stable across builds.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in name.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        self.child(h)
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
    }
}
