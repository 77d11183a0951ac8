//! Deterministic random streams keyed by `(seed, call-site tag, extra words)`.
//!
//! Every stochastic routine derives its own ChaCha stream from a key instead
//! of sharing a generator, so results do not depend on evaluation order or on
//! how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable 64-bit key builder. Not cryptographic; only needs to spread keys.
#[derive(Clone, Copy, Debug)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn new(seed: u64, tag: &str) -> Self {
        let mut h = splitmix(seed);
        for b in tag.bytes() {
            h = splitmix(h ^ u64::from(b));
        }
        StreamKey(h)
    }

    pub fn with(self, word: u64) -> Self {
        StreamKey(splitmix(self.0 ^ splitmix(word)))
    }

    pub fn with_f64(self, v: f64) -> Self {
        // canonicalize -0.0 so keys agree for equal values
        let v = if v == 0.0 { 0.0 } else { v };
        self.with(v.to_bits())
    }

    pub fn with_point(self, x: &[f64]) -> Self {
        x.iter().fold(self.with(x.len() as u64), |k, &v| k.with_f64(v))
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}
