//! Deterministic seed derivation.
//!
//! All randomness in the crate flows through [`ChaCha8Rng`] instances seeded
//! via [`derive_seed`], so every run with the same root seed reproduces
//! bit-identically regardless of thread schedule or call order. Substreams
//! are addressed by a purpose label plus an index, which keeps independent
//! samplers decorrelated without any shared mutable state.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; a cheap, well-mixed 64-bit permutation.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a root seed, a purpose label, and an index.
///
/// The label is folded in bytewise so distinct purposes ("samples",
/// "verify-pairs", ...) get unrelated streams even at equal indices.
pub fn derive_seed(root: u64, label: &str, index: u64) -> u64 {
    let mut h = splitmix64(root);
    for &b in label.as_bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    splitmix64(h ^ index)
}

/// A ChaCha stream for the given root seed, purpose label, and index.
pub fn stream(root: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, label, index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        let a = derive_seed(7, "samples", 0);
        let b = derive_seed(7, "samples", 1);
        let c = derive_seed(7, "verify", 0);
        assert_eq!(a, derive_seed(7, "samples", 0));
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn streams_reproduce() {
        let x: f64 = stream(42, "t", 3).random();
        let y: f64 = stream(42, "t", 3).random();
        assert_eq!(x.to_bits(), y.to_bits());
    }
}
