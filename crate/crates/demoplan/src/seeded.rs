//! Deterministic pseudo-random generation and stable hashing.
//!
//! Fixture adapters and the trial harness must behave identically across
//! runs, platforms, and dependency upgrades, so randomness is hand-rolled
//! rather than pulled from an external crate: a SplitMix64 stream keyed by
//! explicit seeds, and FNV-1a for hashing request payloads into sub-seeds.

/// SplitMix64 generator. Small state, full 64-bit period, stable forever.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn range_f64(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, n). `n` must be nonzero.
    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }
}

/// FNV-1a over raw bytes. Used to key per-request fixture randomness.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Derives an independent sub-seed from a base seed and a label, so that
/// distinct roles and trial indices draw from unrelated streams.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    let mut rng = SplitMix64::new(base ^ fnv1a(label.as_bytes()));
    rng.next_u64()
}

/// Sub-seed for trial `index` of a batch keyed by `base`.
pub fn trial_seed(base: u64, index: u64) -> u64 {
    let mut rng = SplitMix64::new(base.wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15)));
    rng.next_u64()
}
