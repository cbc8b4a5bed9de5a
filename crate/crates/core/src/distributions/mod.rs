//! Marginal and noise models, batch sampling and symmetrization.

mod batch;
mod config;
mod marginal;
pub mod moments;
mod noise;
mod weights;

pub use batch::{
    l2_norm, sample_dataset, sample_labels, sample_marginal, sample_noise, symmetrize_batch,
    symmetrize_labels, BatchMeta, SampleBatch, WeightVector,
};
pub use config::ModelConfig;
pub use marginal::{MarginalKind, MarginalModel};
pub use noise::{NoiseKind, NoiseModel, DEFAULT_NOISE_ORDER};
pub use weights::{random_far, random_k_sparse, random_spread};

use crate::cumulants::MomentVector;
use crate::error::Result;

/// Anything with an exact moment oracle.
pub trait MomentOracle {
    fn exact_moments(&self, max_order: usize) -> Result<MomentVector>;
}

impl MomentOracle for MarginalModel {
    fn exact_moments(&self, max_order: usize) -> Result<MomentVector> {
        MarginalModel::exact_moments(self, max_order)
    }
}

impl MomentOracle for NoiseModel {
    fn exact_moments(&self, max_order: usize) -> Result<MomentVector> {
        NoiseModel::exact_moments(self, max_order)
    }
}

/// m₁..m_L of a marginal or noise model.
pub fn exact_moments<M: MomentOracle + ?Sized>(model: &M, max_order: usize) -> Result<MomentVector> {
    model.exact_moments(max_order)
}
