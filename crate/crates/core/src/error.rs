use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("no sampler available for {0}")]
    UnsupportedSampler(String),
    #[error("numerical failure in {what} (residual {residual:e})")]
    Numerical { what: String, residual: f64 },
    #[error("empty vector: {0}")]
    EmptyVector(String),
    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("cumulant of order {order} is degenerate ({value:e})")]
    DegenerateCumulant { order: usize, value: f64 },
    #[error("no nonzero even cumulant found up to order {scanned_to}; the marginal behaves like a Gaussian")]
    GaussianObstruction { scanned_to: usize },
    #[error("exact moments unavailable past order {available} (requested {requested})")]
    Truncated { available: usize, requested: usize },
    #[error("schedule order at slot {slot} overflows (log10 order = {log10_order:.3e})")]
    ScheduleOverflow { slot: usize, log10_order: f64 },
    #[error("resource limit: {0}")]
    ResourceLimit(String),
    #[error("no root found within radius {radius} after {evaluations} evaluations (best |M| = {best:e})")]
    RootNotFound {
        radius: f64,
        evaluations: usize,
        best: f64,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn numerical(what: impl Into<String>, residual: f64) -> Self {
        Error::Numerical {
            what: what.into(),
            residual,
        }
    }

    /// True for failures of floating-point machinery rather than bad inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical { .. } | Error::RootNotFound { .. } | Error::ScheduleOverflow { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
