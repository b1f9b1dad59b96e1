//! Seeded random number generation.
//!
//! Every stochastic routine takes an explicit `u64` seed and builds a
//! [`MtdRng`] (ChaCha8) from it, so results are reproducible bit-for-bit
//! across platforms and thread counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type MtdRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> MtdRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One step of the splitmix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a base seed and a path of integer labels.
///
/// `derive_seed(b, &[p0, p1])` is `splitmix64(splitmix64(splitmix64(b) ^ p0) ^ p1)`.
/// Distinct label paths give statistically independent streams.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(base), |acc, &label| splitmix64(acc ^ label))
}

/// Stable 64-bit label for a string (FNV-1a), for use in [`derive_seed`] paths.
pub fn label(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_seed_same_stream() {
        let mut a = rng_from_seed(7);
        let mut b = rng_from_seed(7);
        for _ in 0..16 {
            assert_eq!(a.gen::<u64>(), b.gen::<u64>());
        }
    }

    #[test]
    fn derived_seeds_differ_by_path() {
        let s = derive_seed(1, &[0, 1]);
        assert_ne!(s, derive_seed(1, &[1, 0]));
        assert_ne!(s, derive_seed(2, &[0, 1]));
        assert_eq!(s, derive_seed(1, &[0, 1]));
    }

    #[test]
    fn splitmix_reference_value() {
        // First output of the reference splitmix64 generator seeded with 0.
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
    }
}
