use rand::Rng;

use super::WeightVector;
use crate::error::{Error, Result};
use crate::rng::seeded;

/// Exactly k nonzero entries at uniformly chosen positions, each ±U(0.3, 1),
/// rescaled to the given ℓ₂ norm.
pub fn random_k_sparse(n: usize, k: usize, norm: f64, seed: u64) -> Result<WeightVector> {
    if k == 0 || k > n {
        return Err(Error::Domain(format!("need 1 ≤ k ≤ n, got k = {k}, n = {n}")));
    }
    let mut r = seeded(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    let mut v = vec![0.0; n];
    for i in 0..k {
        let j = r.random_range(i..n);
        idx.swap(i, j);
        let sign = if r.random::<bool>() { 1.0 } else { -1.0 };
        v[idx[i]] = sign * r.random_range(0.3..1.0);
    }
    WeightVector::with_norm(v, norm)
}

/// Every entry ±U(0.8, 1.2), rescaled to the given ℓ₂ norm.
pub fn random_spread(n: usize, norm: f64, seed: u64) -> Result<WeightVector> {
    if n == 0 {
        return Err(Error::EmptyVector("n must be ≥ 1".into()));
    }
    let mut r = seeded(seed);
    let v = (0..n)
        .map(|_| {
            let sign = if r.random::<bool>() { 1.0 } else { -1.0 };
            sign * r.random_range(0.8..1.2)
        })
        .collect();
    WeightVector::with_norm(v, norm)
}

/// First [`random_spread`] draw (seeds derived from `seed`) whose distance
/// to k-sparse is at least `min_distance`. Gives up after 1000 draws.
pub fn random_far(n: usize, k: usize, min_distance: f64, norm: f64, seed: u64) -> Result<WeightVector> {
    for j in 0..1000 {
        let w = random_spread(n, norm, crate::rng::derive_seed(seed, j))?;
        if crate::testers::dist_to_k_sparse(&w, k)? >= min_distance {
            return Ok(w);
        }
    }
    Err(Error::Domain(format!(
        "no spread vector with n = {n} reaches distance {min_distance} from {k}-sparse"
    )))
}
