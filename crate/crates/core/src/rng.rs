//! Deterministic random streams keyed by (seed, stream id).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use rand::Rng;

/// A reproducible random source. Equal `(seed, stream)` pairs give equal draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomStream {
    pub seed: u64,
    pub stream: u64,
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn label_hash(label: &str) -> u64 {
    label
        .bytes()
        .fold(0xCBF2_9CE4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3))
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Child stream for a named purpose.
    pub fn derive(&self, label: &str) -> Self {
        Self {
            seed: self.seed,
            stream: splitmix64(self.stream ^ label_hash(label)),
        }
    }

    /// Child stream for an index (element, trial, ...).
    pub fn child(&self, index: u64) -> Self {
        Self {
            seed: self.seed,
            stream: splitmix64(self.stream.wrapping_add(splitmix64(index ^ 0x5851_F42D_4C95_7F2D))),
        }
    }

    /// Counter-based generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream);
        r
    }

    /// Single uniform draw in [0,1) that depends only on `(seed, stream, index)`.
    pub fn uniform_at(&self, index: u64) -> f64 {
        let h = splitmix64(splitmix64(self.seed ^ self.stream.rotate_left(17)) ^ splitmix64(index));
        (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
