//! Seeded random test tensors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::pipeline::{check_cp, CpOptions, CpStatus};
use crate::tensor::SymmetricTensor;

fn check_shape(m: usize, n: usize, r: usize) -> Result<()> {
    if m < 1 || n < 1 || r < 1 {
        return Err(Error::InvalidOptions(format!("order, dimension and length must be positive (got m={m}, n={n}, r={r})")));
    }
    Ok(())
}

/// Generators with entries uniform in `[0, 1)`, as columns.
pub fn nonnegative_generators(n: usize, r: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..r).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect()
}

/// `Σ_k (v^k)^{⊗m}` with nonnegative random `v^k`; CP by construction.
pub fn cp_random(m: usize, n: usize, r: usize, seed: u64) -> Result<SymmetricTensor> {
    check_shape(m, n, r)?;
    SymmetricTensor::from_rank_one_sum(m, n, &nonnegative_generators(n, r, seed))
}

/// `Σ_k (u^k)^{⊗m}` with standard normal `u^k`. Draws that happen to be
/// entrywise nonnegative are kept only if the checker does not find them CP.
pub fn notcp_random(m: usize, n: usize, r: usize, seed: u64) -> Result<SymmetricTensor> {
    check_shape(m, n, r)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..64 {
        let gens: Vec<Vec<f64>> = (0..r).map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let t = SymmetricTensor::from_rank_one_sum(m, n, &gens)?;
        if !t.entrywise_nonnegative() {
            return Ok(t);
        }
        let out = check_cp(&t, &CpOptions { seed, ..CpOptions::default() })?;
        if out.status != CpStatus::CompletelyPositive {
            return Ok(t);
        }
    }
    Err(Error::InvalidOptions(format!("no non-CP draw found for m={m}, n={n}, r={r}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cp_random_is_nonnegative_and_reproducible() {
        let a = cp_random(3, 3, 2, 7).unwrap();
        assert!(a.entrywise_nonnegative());
        assert_eq!(a, cp_random(3, 3, 2, 7).unwrap());
        assert_ne!(a, cp_random(3, 3, 2, 8).unwrap());
    }

    #[test]
    fn notcp_random_has_a_negative_entry_for_odd_order() {
        for seed in 0..10 {
            let a = notcp_random(3, 4, 5, seed).unwrap();
            assert!(!a.entrywise_nonnegative());
        }
    }

    #[test]
    fn zero_sizes_are_rejected() {
        assert!(cp_random(3, 0, 2, 0).is_err());
        assert!(notcp_random(3, 2, 0, 0).is_err());
    }
}
