//! Seeded randomness.
//!
//! Every stochastic operation in the crate takes an explicit [`Seed`] and
//! draws from [`ChaCha8Rng`] seeded through `SeedableRng::seed_from_u64`.
//! Identical seeds and inputs give bit-identical outputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// The project-wide generator.
pub type Generator = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl Seed {
    pub fn generator(self) -> Generator {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Sub-seed for an independent stream identified by `label` and `index`.
    pub fn derive(self, label: &str, index: u64) -> Seed {
        let mut hasher = Sha256::new();
        hasher.update(self.0.to_le_bytes());
        hasher.update((label.len() as u64).to_le_bytes());
        hasher.update(label.as_bytes());
        hasher.update(index.to_le_bytes());
        let digest = hasher.finalize();
        let mut head = [0u8; 8];
        head.copy_from_slice(&digest[..8]);
        Seed(u64::from_le_bytes(head))
    }
}

impl From<u64> for Seed {
    fn from(value: u64) -> Self {
        Seed(value)
    }
}

/// Inverse-CDF draw from a probability vector.
///
/// Falls back to the last index with positive mass when rounding leaves the
/// uniform draw beyond the cumulative sum.
pub fn sample_index<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let target: f64 = rng.random::<f64>();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if target < acc {
                return i;
            }
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        let master = Seed(7);
        assert_eq!(master.derive("drf", 0), master.derive("drf", 0));
        assert_ne!(master.derive("drf", 0), master.derive("drf", 1));
        assert_ne!(master.derive("drf", 0), master.derive("codec", 0));
        assert_ne!(master.derive("drf", 0), Seed(8).derive("drf", 0));
    }

    #[test]
    fn point_mass_is_always_drawn() {
        let mut rng = Seed(3).generator();
        for _ in 0..100 {
            assert_eq!(sample_index(&mut rng, &[0.0, 1.0, 0.0]), 1);
        }
    }
}
