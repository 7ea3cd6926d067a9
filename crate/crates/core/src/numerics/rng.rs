//! Counter-based random number generator.
//!
//! The `n`-th output of a stream with key `k` is `splitmix64(k + n·γ)` where
//! `γ = 0x9E3779B97F4A7C15` and `splitmix64` is the standard finalizer
//! (shifts 30/27/31, multipliers `0xBF58476D1CE4E5B9` and
//! `0x94D049BB133111EB`). Substreams derive their key from the parent key and
//! an FNV-1a hash of a label, so any implementation can regenerate a stream
//! from `(seed, label path, counter)` alone.

/// Identifier recorded in checkpoints and manifests.
pub const RNG_ALGORITHM: &str = "splitmix64-counter/fnv1a-fork/v1";

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rng {
    key: u64,
    counter: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            key: mix(seed ^ 0x5DEE_CE66_D1CE_5EED),
            counter: 0,
        }
    }

    /// Independent substream identified by a label. Does not advance `self`.
    pub fn fork(&self, label: &str) -> Rng {
        Rng {
            key: mix(self.key ^ fnv1a(label.as_bytes())),
            counter: 0,
        }
    }

    /// Independent substream identified by an index (patient, split, ...).
    pub fn fork_index(&self, index: u64) -> Rng {
        Rng {
            key: mix(self.key.wrapping_add(mix(index.wrapping_add(GAMMA)))),
            counter: 0,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix(self.key.wrapping_add(self.counter.wrapping_mul(GAMMA)))
    }

    /// Uniform on `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer on `[lo, hi]` inclusive.
    pub fn int_range(&mut self, lo: u64, hi: u64) -> u64 {
        assert!(lo <= hi);
        let span = hi - lo + 1;
        if span == 0 {
            return self.next_u64();
        }
        // Lemire's multiply-shift with rejection.
        let threshold = span.wrapping_neg() % span;
        loop {
            let m = (self.next_u64() as u128) * (span as u128);
            if (m as u64) >= threshold {
                return lo + (m >> 64) as u64;
            }
        }
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Standard normal via Box–Muller (one value per call).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Fisher–Yates shuffle, iterating from the back.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.int_range(0, i as u64) as usize;
            items.swap(i, j);
        }
    }
}
