//! Counter-based random streams.
//!
//! Every draw is a pure function of `(key, counter)`, where the key is
//! derived from the master seed and a list of tags (replication index,
//! horizon index, ...). Simulation step `k` reads from its own counter block,
//! so the Gaussian increment of step `k` depends only on `(seed, tags, k)`.

use rand::RngCore;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
/// Counter block size per simulation step; the ziggurat normal sampler
/// essentially never needs more than a handful of words.
const STEP_BLOCK_BITS: u32 = 8;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key of one independent stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        Self(mix64(seed ^ 0x6A09_E667_F3BC_C909))
    }

    /// Child stream for a tag; `key.child(a).child(b)` differs from
    /// `key.child(b).child(a)`.
    pub fn child(self, tag: u64) -> Self {
        Self(mix64(self.0.wrapping_add(mix64(tag.wrapping_add(GOLDEN)))))
    }

    pub fn derive(seed: u64, tags: &[u64]) -> Self {
        tags.iter().fold(Self::new(seed), |k, &t| k.child(t))
    }

    /// Sequential generator starting at counter 0.
    pub fn rng(self) -> CounterRng {
        CounterRng {
            key: self.0,
            counter: 0,
        }
    }

    /// Generator positioned at the counter block of simulation step `step`.
    #[inline]
    pub fn step_rng(self, step: u64) -> CounterRng {
        CounterRng {
            key: self.0,
            counter: step << STEP_BLOCK_BITS,
        }
    }
}

/// SplitMix-style generator: output `i` is `mix(key + i·γ)`.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl RngCore for CounterRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        let v = mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)));
        self.counter = self.counter.wrapping_add(1);
        v
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let v = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&v[..chunk.len()]);
        }
    }
}
