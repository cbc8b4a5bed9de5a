//! Sparsity testers, schedules, the exact distance to k-sparsity and noiseless
//! support recovery.

mod distance;
mod general;
mod noiseless;
mod schedule;
mod sympoly;

pub use distance::dist_to_k_sparse;
pub use general::{general_tester, recommended_samples_general, top_magnitudes, GeneralParams};
pub use noiseless::{noiseless_recover, Recovery, ENUMERATION_LIMIT};
pub use schedule::{build_schedule, Schedule, ScheduleKind, ScheduleMode, GAP_SCAN_LIMIT};
pub use sympoly::{
    newton_sym_from_power_sums, recommended_samples_sympoly, sym_poly_threshold, sym_poly_tester,
    SymPolyParams,
};

use serde::{Deserialize, Serialize};

use crate::cumulants::{cumulants_to_moments, symmetrized_cumulants, CumulantVector};
use crate::distributions::{symmetrize_labels, MarginalModel, NoiseModel, SampleBatch};
use crate::error::{Error, Result};

/// Default magnitude below which a model cumulant counts as zero.
pub const DEFAULT_CUMULANT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Sparse,
    FarFromSparse,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictFlags {
    /// The batch is smaller than the calculator's recommendation.
    pub insufficient_samples: bool,
    /// s₂ was numerically zero; the verdict defaults to Sparse.
    pub degenerate_norm: bool,
    /// The ℓ₂² estimate came out negative and was clamped to 0.
    pub clamped_norm: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestVerdict {
    pub decision: Decision,
    pub w_tilde: Vec<f64>,
    pub s2: f64,
    pub statistic: f64,
    pub threshold: f64,
    pub distance_estimate: Option<f64>,
    pub samples_used: usize,
    pub recommended_samples: u64,
    pub flags: VerdictFlags,
}

/// Model quantities after symmetrization and division by C.
struct Prepared {
    labels: Vec<f64>,
    x_sym: CumulantVector,
    noise_sym: CumulantVector,
}

fn check_unit_variance(model: &MarginalModel) -> Result<()> {
    let var = model.exact_cumulants(2)?.order(2);
    if (var - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition(format!(
            "testers assume Var(X) = 1 (got {var}); standardize the marginal"
        )));
    }
    Ok(())
}

/// Cumulants κ₁..κ_L of (X − X′)/√2.
fn sym_model_cumulants(model: &MarginalModel, l: usize) -> Result<CumulantVector> {
    Ok(symmetrized_cumulants(&model.exact_cumulants(l)?))
}

/// Cumulants κ₁..κ_L of (η − η′)/(√2·C).
fn sym_noise_cumulants(noise: &NoiseModel, l: usize, c: f64) -> Result<CumulantVector> {
    let raw = CumulantVector::new((1..=l).map(|i| noise.cumulant(i)).collect::<Result<_>>()?);
    let s = symmetrized_cumulants(&raw);
    Ok(CumulantVector::new(
        s.as_slice().iter().enumerate().map(|(i, v)| v / c.powi(i as i32 + 1)).collect(),
    ))
}

fn prepare(
    batch: &SampleBatch,
    model: &MarginalModel,
    noise: &NoiseModel,
    c: f64,
    max_order: usize,
) -> Result<Prepared> {
    check_unit_variance(model)?;
    if batch.m() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: batch.m() });
    }
    let inv = 1.0 / c;
    let labels: Vec<f64> = symmetrize_labels(batch.y()).into_iter().map(|v| v * inv).collect();
    Ok(Prepared {
        labels,
        x_sym: sym_model_cumulants(model, max_order)?,
        noise_sym: sym_noise_cumulants(noise, max_order, c)?,
    })
}

/// m_{ℓ} of the symmetrized model (unscaled), orders 1..L.
fn sym_moments(k: &CumulantVector) -> Result<Vec<f64>> {
    Ok(cumulants_to_moments(k)?.into_vec())
}
