use crate::distributions::{l2_norm, WeightVector};
use crate::error::{Error, Result};

/// ‖w restricted to all but its k largest magnitudes‖₂ / ‖w‖₂.
pub fn dist_to_k_sparse(w: &WeightVector, k: usize) -> Result<f64> {
    if w.is_zero() {
        return Err(Error::Domain("distance to sparsity is undefined for w = 0".into()));
    }
    if k >= w.len() {
        return Ok(0.0);
    }
    let mut mags: Vec<f64> = w.entries().iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    Ok((l2_norm(&mags[k..]) / w.norm2()).min(1.0))
}
