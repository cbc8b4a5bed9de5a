use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::Zero;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::moments;
use crate::cumulants::{moments_to_cumulants_exact, CumulantVector, MomentVector};
use crate::error::{Error, Result};
use crate::numeric::{rational_from_f64, rational_to_f64};

/// Default order up to which noise cumulants are precomputed.
pub const DEFAULT_NOISE_ORDER: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseKind {
    Zero,
    /// N(0, c²) given by its standard deviation c.
    Gaussian { std_dev: f64 },
    /// Raw (unstandardized) Poisson(λ).
    Poisson { lambda: f64 },
    /// ±a with equal probability.
    Rademacher { scale: f64 },
    CustomMoments(Vec<f64>),
}

impl NoiseKind {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseKind::Zero => "zero",
            NoiseKind::Gaussian { .. } => "gaussian",
            NoiseKind::Poisson { .. } => "poisson",
            NoiseKind::Rademacher { .. } => "rademacher",
            NoiseKind::CustomMoments(_) => "custom",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            NoiseKind::Zero => vec![],
            NoiseKind::Gaussian { std_dev } => vec![*std_dev],
            NoiseKind::Poisson { lambda } => vec![*lambda],
            NoiseKind::Rademacher { scale } => vec![*scale],
            NoiseKind::CustomMoments(m) => m.clone(),
        }
    }

    pub fn from_parts(kind: &str, p: &[f64]) -> Result<Self> {
        let one = || {
            if p.len() == 1 {
                Ok(p[0])
            } else {
                Err(Error::Config(format!("{kind} noise takes 1 parameter, got {}", p.len())))
            }
        };
        Ok(match kind {
            "zero" | "none" => {
                if !p.is_empty() {
                    return Err(Error::Config("zero noise takes no parameters".into()));
                }
                NoiseKind::Zero
            }
            "gaussian" | "normal" => NoiseKind::Gaussian { std_dev: one()? },
            "poisson" => NoiseKind::Poisson { lambda: one()? },
            "rademacher" => NoiseKind::Rademacher { scale: one()? },
            "custom" => NoiseKind::CustomMoments(p.to_vec()),
            other => return Err(Error::Config(format!("unknown noise kind '{other}'"))),
        })
    }

    fn validate(&self) -> Result<()> {
        if self.params().iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("noise parameters must be finite".into()));
        }
        match self {
            NoiseKind::Gaussian { std_dev } if *std_dev < 0.0 => Err(Error::Domain(format!("c = {std_dev} must be ≥ 0"))),
            NoiseKind::Poisson { lambda } if !(*lambda > 0.0) => Err(Error::Domain(format!("λ = {lambda} must be positive"))),
            NoiseKind::Rademacher { scale } if *scale < 0.0 => Err(Error::Domain(format!("scale {scale} must be ≥ 0"))),
            _ => Ok(()),
        }
    }

    fn raw_moments(&self, l: usize) -> Result<Vec<BigRational>> {
        match self {
            NoiseKind::Zero => Ok(vec![BigRational::zero(); l]),
            NoiseKind::Gaussian { std_dev } => {
                let c = rational_from_f64(*std_dev)?;
                let var = &c * &c;
                // Recurrence on the exact variance c² rather than a rounded square.
                let mut m = vec![num_traits::One::one(), BigRational::zero()];
                for i in 2..=l {
                    let next = BigRational::from_integer((i as i64 - 1).into()) * &var * &m[i - 2];
                    m.push(next);
                }
                m.remove(0);
                m.truncate(l);
                Ok(m)
            }
            NoiseKind::Poisson { lambda } => moments::poisson(*lambda, l),
            NoiseKind::Rademacher { scale } => moments::scaled_rademacher(*scale, l),
            NoiseKind::CustomMoments(m) => {
                if l > m.len() {
                    return Err(Error::Truncated { available: m.len(), requested: l });
                }
                m[..l].iter().map(|&v| rational_from_f64(v)).collect()
            }
        }
    }
}

#[derive(Debug, Clone)]
enum NoiseSampler {
    Zero,
    Normal(Normal<f64>),
    Poisson(Poisson<f64>),
    Rademacher(f64),
}

/// Label-noise distribution with cached cumulants.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    kind: NoiseKind,
    known_cumulants: CumulantVector,
    sampler: Option<NoiseSampler>,
}

impl PartialEq for NoiseModel {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl NoiseModel {
    pub fn new(kind: NoiseKind) -> Result<Self> {
        let order = match &kind {
            NoiseKind::CustomMoments(m) => m.len().min(DEFAULT_NOISE_ORDER),
            _ => DEFAULT_NOISE_ORDER,
        };
        Self::with_max_order(kind, order)
    }

    pub fn with_max_order(kind: NoiseKind, max_order: usize) -> Result<Self> {
        kind.validate()?;
        let raw = kind.raw_moments(max_order)?;
        let k = moments_to_cumulants_exact(&raw)?;
        let known_cumulants = CumulantVector::new(k.iter().map(rational_to_f64).collect());
        let sampler = match &kind {
            NoiseKind::Zero => Some(NoiseSampler::Zero),
            NoiseKind::Gaussian { std_dev } if *std_dev == 0.0 => Some(NoiseSampler::Zero),
            NoiseKind::Gaussian { std_dev } => Some(NoiseSampler::Normal(
                Normal::new(0.0, *std_dev).map_err(|e| Error::Domain(e.to_string()))?,
            )),
            NoiseKind::Poisson { lambda } => Some(NoiseSampler::Poisson(
                Poisson::new(*lambda).map_err(|e| Error::Domain(e.to_string()))?,
            )),
            NoiseKind::Rademacher { scale } => Some(NoiseSampler::Rademacher(*scale)),
            NoiseKind::CustomMoments(_) => None,
        };
        Ok(Self { kind, known_cumulants, sampler })
    }

    pub fn zero() -> Self {
        Self::new(NoiseKind::Zero).expect("valid")
    }

    pub fn kind(&self) -> &NoiseKind {
        &self.kind
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.sampler, Some(NoiseSampler::Zero))
    }

    pub fn known_cumulants(&self) -> &CumulantVector {
        &self.known_cumulants
    }

    /// κ_ℓ(η), from the cache when available.
    pub fn cumulant(&self, l: usize) -> Result<f64> {
        if let Some(v) = self.known_cumulants.get(l) {
            return Ok(v);
        }
        let raw = self.kind.raw_moments(l)?;
        let k = moments_to_cumulants_exact(&raw)?;
        Ok(rational_to_f64(&k[l - 1]))
    }

    pub fn exact_moments_rational(&self, l: usize) -> Result<Vec<BigRational>> {
        self.kind.raw_moments(l)
    }

    pub fn exact_moments(&self, l: usize) -> Result<MomentVector> {
        if l == 0 {
            return Err(Error::Domain("max order must be ≥ 1".into()));
        }
        Ok(MomentVector::new(self.kind.raw_moments(l)?.iter().map(rational_to_f64).collect()))
    }

    pub fn variance(&self) -> Result<f64> {
        self.cumulant(2)
    }

    pub(crate) fn check_sampler(&self) -> Result<()> {
        if self.sampler.is_none() {
            return Err(Error::UnsupportedSampler(format!("{} noise", self.kind.name())));
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.sampler.as_ref().expect("sampler checked") {
            NoiseSampler::Zero => 0.0,
            NoiseSampler::Normal(n) => n.sample(rng),
            NoiseSampler::Poisson(p) => p.sample(rng),
            NoiseSampler::Rademacher(a) => {
                if rng.random::<bool>() {
                    *a
                } else {
                    -*a
                }
            }
        }
    }

    pub fn to_config(&self) -> ModelConfig {
        ModelConfig {
            kind: self.kind.name().to_string(),
            params: self.kind.params(),
            standardized: false,
        }
    }
}

impl TryFrom<ModelConfig> for NoiseModel {
    type Error = Error;

    fn try_from(c: ModelConfig) -> Result<Self> {
        if c.standardized {
            return Err(Error::Config("noise models cannot be standardized".into()));
        }
        NoiseModel::new(NoiseKind::from_parts(&c.kind, &c.params)?)
    }
}

impl Serialize for NoiseModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_config().serialize(s)
    }
}

impl<'de> Deserialize<'de> for NoiseModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let c = ModelConfig::deserialize(d)?;
        NoiseModel::try_from(c).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_config())
    }
}

impl FromStr for NoiseModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NoiseModel::try_from(s.parse::<ModelConfig>()?)
    }
}
