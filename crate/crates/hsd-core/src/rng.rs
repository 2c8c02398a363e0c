//! Seeded pseudo-random stream for weight initialization and synthetic
//! corpora.
//!
//! SplitMix64 is small, fast and stable across platforms and toolchain
//! releases, which keeps seeded artifacts (weights, corpora, golden
//! checksums) bit-reproducible forever. External RNG crates are avoided on
//! purpose: their stream definitions may change between major versions.

/// SplitMix64 generator (public-domain constants).
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

    /// Uniform in `[0, 1)` using the top 24 bits, so the value is exact in
    /// an `f32` mantissa.
    pub fn next_f32(&mut self) -> f32 {
        (self.next_u64() >> 40) as f32 / (1u32 << 24) as f32
    }

    /// Uniform in `[0, n)`. Modulo bias is negligible for the small ranges
    /// used here (token ids, lengths).
    pub fn next_below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "next_below needs a positive bound");
        self.next_u64() % n
    }
}
