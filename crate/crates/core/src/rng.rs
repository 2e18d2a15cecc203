//! Deterministic named random substreams.
//!
//! Every source of randomness in the pipeline (the per-pair revenue draw,
//! the AP shuffle, the global-selector draws, each scenario-generation
//! distribution) pulls from its own substream derived from a root seed and
//! a label. Two runs with the same root seed therefore consume identical
//! random values per purpose, and a change in one consumer can never shift
//! the draws seen by an unrelated consumer. This is what makes
//! common-random-number deviation testing possible.
//!
//! Derivation is intentionally self-contained (FNV-1a label hashing plus a
//! SplitMix64 finalizer) so substream assignment stays stable regardless of
//! compiler or dependency upgrades.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// FNV-1a over raw bytes. Stable across platforms and releases.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// SplitMix64 finalizer; bijective on u64.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(GOLDEN);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a seed with a salt into a new seed.
pub fn mix(seed: u64, salt: u64) -> u64 {
    splitmix64(seed ^ salt.wrapping_mul(GOLDEN))
}

/// Seed for the `index`-th trial of an experiment rooted at `master`.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    mix(master, index.wrapping_add(1))
}

/// A family of named substreams rooted at one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    root: u64,
}

impl Streams {
    pub fn new(root: u64) -> Self {
        Streams { root }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    fn seed_for(&self, label: &str, a: u64, b: u64) -> u64 {
        let mut s = mix(self.root, fnv1a(label.as_bytes()));
        s = mix(s, a);
        mix(s, b)
    }

    /// The substream named `label`.
    pub fn stream(&self, label: &str) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed_for(label, 0, 0))
    }

    /// The substream named `label` and indexed by `(a, b)`, e.g. one
    /// independent stream per (AP, cloudlet) pair.
    pub fn indexed(&self, label: &str, a: u64, b: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed_for(label, a.wrapping_add(1), b.wrapping_add(1)))
    }

    /// A lightweight indexed substream for the per-pair draws of the inner
    /// pipeline loop, which creates one stream per (AP, cloudlet) pair per
    /// run and takes only a draw or two from each.
    pub fn quick(&self, label: &str, a: u64, b: u64) -> QuickRng {
        QuickRng { state: self.seed_for(label, a.wrapping_add(1), b.wrapping_add(1)) }
    }
}

/// SplitMix64 stream: statistically solid for short draw sequences and an
/// order of magnitude cheaper to key than a block cipher.
#[derive(Debug, Clone)]
pub struct QuickRng {
    state: u64,
}

impl RngCore for QuickRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        let out = splitmix64(self.state);
        self.state = self.state.wrapping_add(GOLDEN);
        out
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        let mut chunks = dest.chunks_exact_mut(8);
        for chunk in &mut chunks {
            chunk.copy_from_slice(&self.next_u64().to_le_bytes());
        }
        let rem = chunks.into_remainder();
        if !rem.is_empty() {
            let bytes = self.next_u64().to_le_bytes();
            rem.copy_from_slice(&bytes[..rem.len()]);
        }
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_deterministic() {
        let a = Streams::new(7);
        let b = Streams::new(7);
        let xs: Vec<u64> = (0..8).map(|_| 0u64).collect();
        let mut ra = a.stream("alpha");
        let mut rb = b.stream("alpha");
        for _ in xs {
            assert_eq!(ra.gen::<u64>(), rb.gen::<u64>());
        }
    }

    #[test]
    fn labels_and_indices_separate_streams() {
        let s = Streams::new(7);
        let mut one = s.stream("alpha");
        let mut two = s.stream("beta");
        assert_ne!(one.gen::<u64>(), two.gen::<u64>());

        let mut p = s.indexed("pair", 1, 2);
        let mut q = s.indexed("pair", 2, 1);
        assert_ne!(p.gen::<u64>(), q.gen::<u64>());
    }

    #[test]
    fn derivation_is_frozen() {
        // Regression pins: if these change, every recorded experiment
        // rooted at a documented seed changes meaning.
        assert_eq!(splitmix64(0), 0xe220a8397b1dcdaf);
        assert_eq!(mix(42, 1), 0x28efe333b266f103);
        let s = Streams::new(42);
        assert_eq!(s.stream("acrc-m").gen::<u64>(), 0x80aa5a1b858deb9f);
        assert_eq!(s.indexed("acrc-m", 3, 7).gen::<u64>(), 0xd88d524e4e241282);
    }

    #[test]
    fn quick_streams_are_deterministic_and_separate() {
        let s = Streams::new(7);
        let mut a = s.quick("pair", 1, 2);
        let mut b = s.quick("pair", 1, 2);
        for _ in 0..4 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut c = s.quick("pair", 2, 1);
        assert_ne!(a.next_u64(), c.next_u64());
        // Uniform draws hit every value of a small range.
        let mut counts = [0u32; 4];
        for i in 0..4_000u64 {
            let mut r = s.quick("m", i, 0);
            counts[rand::Rng::gen_range(&mut r, 0..4usize)] += 1;
        }
        assert!(counts.iter().all(|c| *c > 800), "{counts:?}");
    }

    #[test]
    fn trial_seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for t in 0..10_000u64 {
            assert!(seen.insert(trial_seed(99, t)));
        }
    }
}
