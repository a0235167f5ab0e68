//! Deterministic randomness.
//!
//! Every random stream in the pipeline is keyed by a 64-bit seed. Sub-streams
//! are derived with [`derive_seed`], which hashes a role tag into the parent
//! seed. Streams that must be reproducible independently of any RNG crate
//! (the LSH hyperplanes) use [`CounterNormal`]: a SplitMix64 counter hash
//! feeding the Box–Muller transform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a64(tag: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Child seed for the stream named `tag`: `splitmix64(seed ^ fnv1a64(tag))`.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    splitmix64(seed ^ fnv1a64(tag))
}

/// ChaCha8 generator for the stream named `tag` under `seed`.
pub fn stream(seed: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag))
}

/// Counter-based standard-normal source.
///
/// Value `n` depends only on `(seed, n)`: uniforms `u1, u2` come from hashing
/// counters `2⌊n/2⌋` and `2⌊n/2⌋ + 1`, and even/odd `n` take the cosine/sine
/// branch of Box–Muller. Prefixes are therefore stable across output lengths.
#[derive(Debug, Clone, Copy)]
pub struct CounterNormal {
    key: u64,
}

impl CounterNormal {
    pub fn new(seed: u64) -> Self {
        Self {
            key: splitmix64(seed),
        }
    }

    fn uniform(&self, counter: u64) -> f64 {
        let bits = splitmix64(self.key ^ splitmix64(counter));
        // (0, 1]: never zero, so ln() below is finite.
        ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn sample(&self, n: u64) -> f64 {
        let pair = n & !1;
        let u1 = self.uniform(pair);
        let u2 = self.uniform(pair + 1);
        let r = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        if n & 1 == 0 {
            r * angle.cos()
        } else {
            r * angle.sin()
        }
    }
}
