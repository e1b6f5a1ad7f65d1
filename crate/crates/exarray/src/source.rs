//! Deterministic seeded map from finite label sets to uniform values.
//!
//! The generator never stores an array: every value U_A is recomputed on
//! demand as a pseudorandom function of (master seed, canonical encoding of
//! A). The encoding is length-prefixed sorted labels, so {2,5} and {5,2}
//! collide by construction. U_∅ is hardwired to 1, the dissociated case.

use crate::error::{Error, Result};
use crate::index::IndexSet;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const SET_TAG: u64 = 0x5bd1_e995_9b5f_37c1;
const DERIVE_TAG: u64 = 0xd134_2543_de82_ef95;
const SCALE_53: f64 = 1.0 / 9007199254740992.0; // 2^-53

/// SplitMix64 finalizer; full-period bijection on u64.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn to_unit(h: u64) -> f64 {
    (h >> 11) as f64 * SCALE_53
}

/// Deterministic source of i.i.d.-like Uniform[0,1) values indexed by
/// canonical label sets.
#[derive(Debug, Clone)]
pub struct UniformSource {
    master_seed: u64,
    k_max: usize,
}

impl UniformSource {
    pub fn new(master_seed: u64, k_max: usize) -> Self {
        UniformSource { master_seed, k_max }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// An independent child source; used for auxiliary draws (Monte Carlo
    /// redraws, replication streams) so they never collide with array values.
    pub fn derive(&self, salt: u64) -> UniformSource {
        UniformSource {
            master_seed: mix64(self.master_seed ^ salt.wrapping_mul(DERIVE_TAG) ^ GOLDEN),
            k_max: self.k_max,
        }
    }

    #[inline]
    fn hash_sorted(&self, labels: &[u64]) -> u64 {
        let mut h = mix64(self.master_seed ^ (labels.len() as u64).wrapping_mul(SET_TAG));
        for &label in labels {
            h = mix64(h ^ label.wrapping_mul(GOLDEN));
        }
        h
    }

    /// The value attached to a canonical set; the empty set maps to 1 exactly.
    pub fn u_value(&self, set: &IndexSet) -> Result<f64> {
        if set.len() > self.k_max {
            return Err(Error::invalid(format!(
                "set size {} exceeds k_max {}",
                set.len(),
                self.k_max
            )));
        }
        Ok(self.u_value_unchecked(set.labels()))
    }

    /// Same as `u_value` but on a pre-sorted label slice; hot-path entry.
    #[inline]
    pub(crate) fn u_value_unchecked(&self, sorted_labels: &[u64]) -> f64 {
        if sorted_labels.is_empty() {
            return 1.0;
        }
        debug_assert!(sorted_labels.windows(2).all(|w| w[0] < w[1]));
        to_unit(self.hash_sorted(sorted_labels))
    }

    /// Two-element set {lo, hi}, lo < hi; identical to the slice route but
    /// without touching a scratch buffer.
    #[inline]
    pub(crate) fn u_value_pair(&self, lo: u64, hi: u64) -> f64 {
        debug_assert!(lo < hi);
        let mut h = mix64(self.master_seed ^ 2u64.wrapping_mul(SET_TAG));
        h = mix64(h ^ lo.wrapping_mul(GOLDEN));
        h = mix64(h ^ hi.wrapping_mul(GOLDEN));
        to_unit(h)
    }
}

/// Sequential counter-based stream of uniforms; each (seed, counter) pair
/// maps to one value, so streams replay exactly.
#[derive(Debug, Clone)]
pub struct UniformStream {
    seed: u64,
    counter: u64,
}

impl UniformStream {
    pub fn new(seed: u64) -> Self {
        UniformStream { seed: mix64(seed ^ GOLDEN), counter: 0 }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.seed ^ self.counter.wrapping_mul(GOLDEN))
    }

    pub fn next_uniform(&mut self) -> f64 {
        to_unit(self.next_u64())
    }

    /// Uniform ±1 sign.
    pub fn next_sign(&mut self) -> f64 {
        if self.next_u64() & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Derives the master seed for one replication of an experiment.
pub fn replication_seed(master: u64, tag: u64, replication: u64) -> u64 {
    mix64(mix64(master ^ tag.wrapping_mul(SET_TAG)) ^ replication.wrapping_mul(GOLDEN))
}
