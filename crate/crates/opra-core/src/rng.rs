//! Counter-based deterministic random number generation.
//!
//! Sampling here must be reproducible independent of thread scheduling, so
//! instead of a stateful generator shared across work items, each work item
//! derives its own stream from `(seed, path)`. The generator itself is a
//! counter mixed through the SplitMix64 finalizer: output `i` of a stream is
//! a pure function of `(key, i)`, so streams can be recreated at any point.

/// Weyl increment (odd, from the golden ratio) used to step the counter.
const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer: a bijective 64-bit mixer with good avalanche.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A counter-based RNG with named substreams.
///
/// Streams derived with different `path`s from the same seed are
/// independent for practical purposes; the same `(seed, path)` always
/// reproduces the same sequence.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    /// Root stream for a seed.
    pub fn new(seed: u64) -> Self {
        Self {
            key: mix(seed ^ GAMMA),
            counter: 0,
        }
    }

    /// Derive the substream identified by `path`, e.g. `&[replication, purpose]`.
    pub fn stream(seed: u64, path: &[u64]) -> Self {
        let mut key = mix(seed ^ GAMMA);
        for &part in path {
            key = mix(key ^ mix(part.wrapping_mul(GAMMA) ^ 0x5851_f42d_4c95_7f2d));
        }
        Self { key, counter: 0 }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix(self.key ^ self.counter.wrapping_mul(GAMMA))
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `[0, n)`. `n` must be positive.
    pub fn next_index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (((self.next_u64() as u128) * (n as u128)) >> 64) as usize
    }

    /// Sample an index from a probability vector by inverse-CDF walk.
    ///
    /// Probabilities are assumed nonnegative; any rounding shortfall is
    /// assigned to the last index.
    pub fn sample_categorical(&mut self, probs: &[f64]) -> usize {
        debug_assert!(!probs.is_empty());
        let u = self.next_f64();
        let mut acc = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        probs.len() - 1
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_index(i + 1);
            items.swap(i, j);
        }
    }
}
