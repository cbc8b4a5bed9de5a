use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::distributions::SampleBatch;
use crate::error::{Error, Result};
use crate::numeric::ln_binomial;

/// Largest number of candidate supports enumerated.
pub const ENUMERATION_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Recovery {
    Sparse { support: Vec<usize>, weights: Vec<f64>, residual: f64 },
    NotKSparse,
}

/// Calls `f` on every s-subset of 0..n in lexicographic order until it returns true.
fn for_each_subset<F: FnMut(&[usize]) -> bool>(n: usize, s: usize, mut f: F) -> bool {
    if s > n {
        return false;
    }
    let mut idx: Vec<usize> = (0..s).collect();
    'outer: loop {
        if f(&idx) {
            return true;
        }
        let mut i = s;
        while i > 0 {
            i -= 1;
            if idx[i] < i + n - s {
                idx[i] += 1;
                for j in i + 1..s {
                    idx[j] = idx[j - 1] + 1;
                }
                continue 'outer;
            }
        }
        return false;
    }
}

/// Searches supports of size 0..=k (smallest first) for a weight vector that
/// reproduces every label of a noiseless batch.
pub fn noiseless_recover(batch: &SampleBatch, k: usize) -> Result<Recovery> {
    let x = batch
        .x()
        .ok_or_else(|| Error::Precondition("noiseless recovery needs the design matrix".into()))?;
    let n = batch.n();
    let m = batch.m();
    if m < k + 1 {
        return Err(Error::InsufficientSamples { needed: k + 1, got: m });
    }
    let kk = k.min(n);
    let total: f64 = (0..=kk).map(|s| ln_binomial(n as u64, s as u64).exp()).sum();
    if total > ENUMERATION_LIMIT {
        return Err(Error::ResourceLimit(format!(
            "{total:.3e} candidate supports exceed the limit {ENUMERATION_LIMIT:e}"
        )));
    }
    let y = batch.y();
    let ymax = y.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let tol = 1e-8 * ymax.max(1.0);
    if ymax <= tol {
        return Ok(Recovery::Sparse { support: vec![], weights: vec![], residual: ymax });
    }
    let rows = k + 1;
    let mut found: Option<Recovery> = None;
    for s in 1..=kk {
        let hit = for_each_subset(n, s, |sup| {
            let a = DMatrix::from_fn(rows, s, |i, j| x[i * n + sup[j]]);
            let b = DVector::from_fn(rows, |i, _| y[i]);
            let svd = a.svd(true, true);
            let sol = match svd.solve(&b, 1e-12) {
                Ok(v) => v,
                Err(_) => return false,
            };
            let wmax = sol.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            if sol.iter().any(|v| v.abs() <= 1e-9 * wmax.max(1e-300)) {
                return false;
            }
            let mut residual = 0.0f64;
            for i in 0..m {
                let pred: f64 = sup.iter().zip(sol.iter()).map(|(&j, w)| x[i * n + j] * w).sum();
                residual = residual.max((y[i] - pred).abs());
                if residual > tol {
                    return false;
                }
            }
            found = Some(Recovery::Sparse { support: sup.to_vec(), weights: sol.iter().copied().collect(), residual });
            true
        });
        if hit {
            break;
        }
    }
    Ok(found.unwrap_or(Recovery::NotKSparse))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{sample_dataset, MarginalModel, NoiseModel, WeightVector};

    #[test]
    fn subsets_enumerated_in_order() {
        let mut seen = vec![];
        for_each_subset(4, 2, |s| {
            seen.push(s.to_vec());
            false
        });
        assert_eq!(seen.len(), 6);
        assert_eq!(seen[0], vec![0, 1]);
        assert_eq!(seen[5], vec![2, 3]);
        let mut count = 0;
        for_each_subset(3, 3, |_| {
            count += 1;
            false
        });
        assert_eq!(count, 1);
    }

    #[test]
    fn recovers_scaled_basis_vector() {
        let w = WeightVector::basis(5, 1, 3.0).unwrap();
        let b = sample_dataset(&MarginalModel::standard_gaussian(), &NoiseModel::zero(), &w, 2, 11).unwrap();
        match noiseless_recover(&b, 1).unwrap() {
            Recovery::Sparse { support, weights, residual } => {
                assert_eq!(support, vec![1]);
                assert!((weights[0] - 3.0).abs() < 1e-10);
                assert!(residual <= 1e-8);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_vector_and_guards() {
        let w = WeightVector::new(vec![0.0; 4]).unwrap();
        let b = sample_dataset(&MarginalModel::standard_gaussian(), &NoiseModel::zero(), &w, 3, 1).unwrap();
        assert!(matches!(noiseless_recover(&b, 2).unwrap(), Recovery::Sparse { ref support, .. } if support.is_empty()));
        assert!(matches!(noiseless_recover(&b, 3), Err(Error::InsufficientSamples { .. })));
        let big = WeightVector::new(vec![1.0; 60]).unwrap();
        let b = sample_dataset(&MarginalModel::standard_gaussian(), &NoiseModel::zero(), &big, 8, 1).unwrap();
        assert!(matches!(noiseless_recover(&b, 7), Err(Error::ResourceLimit(_))));
    }
}
