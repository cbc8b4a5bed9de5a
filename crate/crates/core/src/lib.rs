//! Testing whether the weight vector behind noisy linear measurements
//! y = w·x + η is k-sparse, using cumulants of the labels.

pub mod cumulants;
pub mod distributions;
pub mod error;
pub mod estimation;
pub mod lowerbounds;
pub mod numeric;
pub mod rng;
pub mod stats;
pub mod testers;

pub use error::{Error, Result};
