//! Counter-based random streams.
//!
//! Every random quantity in a cascade is addressed by a key derived from
//! `(master_seed, replica_index, node)`. A stream is SplitMix64 started at
//! that key, so the `k`-th output is a pure function of `(key, k)` and the
//! order in which nodes are visited never changes the numbers they get.

use rand_core::{impls, RngCore};

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline(always)]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Key identifying one independent replica of an experiment.
#[inline]
pub fn replica_key(master_seed: u64, replica_index: u64) -> u64 {
    mix64(mix64(master_seed ^ 0x6a09_e667_f3bc_c908).wrapping_add(replica_index.wrapping_mul(GOLDEN)))
}

/// Key of a tree node given its depth and its index among the `2^depth`
/// nodes of that level (first path bit most significant).
#[inline(always)]
pub fn node_key(replica_key: u64, depth: u32, index: u64) -> u64 {
    let packed = ((depth as u64) << 40) | index;
    mix64(replica_key ^ packed.wrapping_mul(GOLDEN).wrapping_add(0x3c6e_f372_fe94_f82b))
}

/// Maps 64 random bits to a double strictly inside (0, 1).
#[inline(always)]
pub fn open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// A deterministic stream of random bits keyed by a 64-bit value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    key: u64,
    counter: u64,
}

impl RngStream {
    pub fn new(key: u64) -> Self {
        Self { key, counter: 0 }
    }

    /// Stream for one replica of an experiment, independent of all others.
    pub fn for_replica(master_seed: u64, replica_index: u64) -> Self {
        Self::new(replica_key(master_seed, replica_index))
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Derives an independent child stream; `self` is not advanced.
    pub fn split(&self, tag: u64) -> Self {
        Self::new(mix64(self.key ^ mix64(tag.wrapping_add(GOLDEN))))
    }

    #[inline(always)]
    pub fn next_bits(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform draw in the open interval (0, 1).
    #[inline(always)]
    pub fn uniform(&mut self) -> f64 {
        open_unit(self.next_bits())
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        (self.next_bits() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.next_bits()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        impls::fill_bytes_via_next(self, dest)
    }
}
