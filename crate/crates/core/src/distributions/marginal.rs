use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson, Uniform};
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::moments;
use crate::cumulants::{moments_to_cumulants, CumulantVector, MomentVector};
use crate::error::{Error, Result};
use crate::numeric::rational_to_f64;

/// Coordinate distribution kinds.
#[derive(Debug, Clone, PartialEq)]
pub enum MarginalKind {
    Rademacher,
    DiscreteUniform(Vec<f64>),
    ContinuousUniform { a: f64, b: f64 },
    Gaussian { mean: f64, variance: f64 },
    Poisson { lambda: f64 },
    GaussBernoulliMixture { gamma: f64 },
    CustomMoments(Vec<f64>),
}

impl MarginalKind {
    pub fn name(&self) -> &'static str {
        match self {
            MarginalKind::Rademacher => "rademacher",
            MarginalKind::DiscreteUniform(_) => "discrete",
            MarginalKind::ContinuousUniform { .. } => "uniform",
            MarginalKind::Gaussian { .. } => "gaussian",
            MarginalKind::Poisson { .. } => "poisson",
            MarginalKind::GaussBernoulliMixture { .. } => "mixture",
            MarginalKind::CustomMoments(_) => "custom",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            MarginalKind::Rademacher => vec![],
            MarginalKind::DiscreteUniform(s) => s.clone(),
            MarginalKind::ContinuousUniform { a, b } => vec![*a, *b],
            MarginalKind::Gaussian { mean, variance } => vec![*mean, *variance],
            MarginalKind::Poisson { lambda } => vec![*lambda],
            MarginalKind::GaussBernoulliMixture { gamma } => vec![*gamma],
            MarginalKind::CustomMoments(m) => m.clone(),
        }
    }

    pub fn from_parts(kind: &str, p: &[f64]) -> Result<Self> {
        let arity = |n: usize| {
            if p.len() == n {
                Ok(())
            } else {
                Err(Error::Config(format!("{kind} takes {n} parameter(s), got {}", p.len())))
            }
        };
        Ok(match kind {
            "rademacher" => {
                arity(0)?;
                MarginalKind::Rademacher
            }
            "discrete" | "discrete_uniform" => MarginalKind::DiscreteUniform(p.to_vec()),
            // Bare `uniform` and `gaussian` mean U(−1, 1) and N(0, 1).
            "uniform" | "continuous_uniform" if p.is_empty() => MarginalKind::ContinuousUniform { a: -1.0, b: 1.0 },
            "uniform" | "continuous_uniform" => {
                arity(2)?;
                MarginalKind::ContinuousUniform { a: p[0], b: p[1] }
            }
            "gaussian" | "normal" if p.is_empty() => MarginalKind::Gaussian { mean: 0.0, variance: 1.0 },
            "gaussian" | "normal" => {
                arity(2)?;
                MarginalKind::Gaussian { mean: p[0], variance: p[1] }
            }
            "poisson" => {
                arity(1)?;
                MarginalKind::Poisson { lambda: p[0] }
            }
            "mixture" | "gauss_bernoulli" => {
                arity(1)?;
                MarginalKind::GaussBernoulliMixture { gamma: p[0] }
            }
            "custom" => MarginalKind::CustomMoments(p.to_vec()),
            other => return Err(Error::Config(format!("unknown marginal kind '{other}'"))),
        })
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Domain(msg));
        if self.params().iter().any(|v| !v.is_finite()) {
            return bad(format!("{} parameters must be finite", self.name()));
        }
        match self {
            MarginalKind::DiscreteUniform(s) if s.is_empty() => bad("empty support".into()),
            MarginalKind::ContinuousUniform { a, b } if !(b > a) => bad(format!("need a < b, got ({a}, {b})")),
            MarginalKind::Gaussian { variance, .. } if !(*variance > 0.0) => bad(format!("variance {variance} must be positive")),
            MarginalKind::Poisson { lambda } if !(*lambda > 0.0) => bad(format!("λ = {lambda} must be positive")),
            MarginalKind::GaussBernoulliMixture { gamma } if !(0.0..=1.0).contains(gamma) => bad(format!("γ = {gamma} outside [0, 1]")),
            _ => Ok(()),
        }
    }

    /// Exact raw moments m₁..m_L before any standardization.
    pub(crate) fn raw_moments(&self, l: usize) -> Result<Vec<BigRational>> {
        match self {
            MarginalKind::Rademacher => Ok(moments::rademacher(l)),
            MarginalKind::DiscreteUniform(s) => moments::discrete_uniform(s, l),
            MarginalKind::ContinuousUniform { a, b } => moments::continuous_uniform(*a, *b, l),
            MarginalKind::Gaussian { mean, variance } => moments::gaussian(*mean, *variance, l),
            MarginalKind::Poisson { lambda } => moments::poisson(*lambda, l),
            MarginalKind::GaussBernoulliMixture { gamma } => moments::gauss_bernoulli(*gamma, l),
            MarginalKind::CustomMoments(m) => {
                if l > m.len() {
                    return Err(Error::Truncated { available: m.len(), requested: l });
                }
                m[..l].iter().map(|&v| crate::numeric::rational_from_f64(v)).collect()
            }
        }
    }

    fn raw_support_bound(&self) -> (f64, f64) {
        match self {
            MarginalKind::Rademacher => (-1.0, 1.0),
            MarginalKind::DiscreteUniform(s) => (
                s.iter().copied().fold(f64::INFINITY, f64::min),
                s.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ),
            MarginalKind::ContinuousUniform { a, b } => (*a, *b),
            MarginalKind::GaussBernoulliMixture { gamma } if *gamma == 1.0 => (-1.0, 1.0),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }
}

#[derive(Debug, Clone)]
enum Sampler {
    Rademacher,
    Discrete(Vec<f64>),
    Uniform(Uniform<f64>),
    Normal(Normal<f64>),
    Poisson(Poisson<f64>),
    Mixture(f64),
}

impl Sampler {
    #[inline]
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Sampler::Discrete(s) => s[rng.random_range(0..s.len())],
            Sampler::Uniform(u) => u.sample(rng),
            Sampler::Normal(n) => n.sample(rng),
            Sampler::Poisson(p) => p.sample(rng),
            Sampler::Mixture(g) => {
                let u: f64 = rng.random();
                let z: f64 = rand_distr::StandardNormal.sample(rng);
                let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                if u < *g {
                    s
                } else {
                    z
                }
            }
        }
    }
}

/// Univariate coordinate distribution with an exact moment oracle and an
/// optional affine standardization x ↦ (x − shift)/scale.
#[derive(Debug, Clone)]
pub struct MarginalModel {
    kind: MarginalKind,
    standardized: bool,
    shift: f64,
    scale: f64,
    support_bound: f64,
    sampler: Option<Sampler>,
}

impl PartialEq for MarginalModel {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.standardized == other.standardized
    }
}

impl MarginalModel {
    pub fn new(kind: MarginalKind, standardized: bool) -> Result<Self> {
        kind.validate()?;
        let (shift, scale) = if standardized {
            let raw = kind.raw_moments(2)?;
            let mean = rational_to_f64(&raw[0]);
            let var = rational_to_f64(&(&raw[1] - &raw[0] * &raw[0]));
            if !(var > 0.0) {
                return Err(Error::Domain(format!(
                    "cannot standardize {} with variance {var}",
                    kind.name()
                )));
            }
            (mean, var.sqrt())
        } else {
            (0.0, 1.0)
        };
        let (lo, hi) = kind.raw_support_bound();
        let support_bound = ((lo - shift).abs().max((hi - shift).abs())) / scale;
        let sampler = match &kind {
            MarginalKind::Rademacher => Some(Sampler::Rademacher),
            MarginalKind::DiscreteUniform(s) => Some(Sampler::Discrete(s.clone())),
            MarginalKind::ContinuousUniform { a, b } => Some(Sampler::Uniform(
                Uniform::new_inclusive(*a, *b).map_err(|e| Error::Domain(e.to_string()))?,
            )),
            MarginalKind::Gaussian { mean, variance } => Some(Sampler::Normal(
                Normal::new(*mean, variance.sqrt()).map_err(|e| Error::Domain(e.to_string()))?,
            )),
            MarginalKind::Poisson { lambda } => Some(Sampler::Poisson(
                Poisson::new(*lambda).map_err(|e| Error::Domain(e.to_string()))?,
            )),
            MarginalKind::GaussBernoulliMixture { gamma } => Some(Sampler::Mixture(*gamma)),
            MarginalKind::CustomMoments(_) => None,
        };
        Ok(Self { kind, standardized, shift, scale, support_bound, sampler })
    }

    pub fn rademacher() -> Self {
        Self::new(MarginalKind::Rademacher, false).expect("valid")
    }

    pub fn standard_gaussian() -> Self {
        Self::new(MarginalKind::Gaussian { mean: 0.0, variance: 1.0 }, false).expect("valid")
    }

    pub fn kind(&self) -> &MarginalKind {
        &self.kind
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    /// Largest |value| a sample can take (∞ for unbounded kinds and custom moments).
    pub fn support_bound(&self) -> f64 {
        match self.kind {
            MarginalKind::CustomMoments(_) => f64::INFINITY,
            _ => self.support_bound,
        }
    }

    pub fn affine(&self) -> (f64, f64) {
        (self.shift, self.scale)
    }

    pub(crate) fn is_rademacher(&self) -> bool {
        matches!(self.kind, MarginalKind::Rademacher)
    }

    pub fn has_sampler(&self) -> bool {
        self.sampler.is_some()
    }

    pub(crate) fn check_sampler(&self) -> Result<()> {
        if self.sampler.is_none() {
            return Err(Error::UnsupportedSampler(format!("{} marginal", self.kind.name())));
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let s = self.sampler.as_ref().expect("sampler checked").draw(rng);
        if self.standardized {
            (s - self.shift) / self.scale
        } else {
            s
        }
    }

    /// Exact moments as rationals, when every order is representable.
    pub fn exact_moments_rational(&self, l: usize) -> Result<Option<Vec<BigRational>>> {
        let raw = self.kind.raw_moments(l)?;
        if !self.standardized {
            return Ok(Some(raw));
        }
        Ok(moments::standardize(&raw).into_iter().collect())
    }

    pub fn exact_moments(&self, l: usize) -> Result<MomentVector> {
        if l == 0 {
            return Err(Error::Domain("max order must be ≥ 1".into()));
        }
        let raw = self.kind.raw_moments(l)?;
        let values = if self.standardized {
            moments::standardize_f64(&raw)
        } else {
            raw.iter().map(rational_to_f64).collect()
        };
        Ok(MomentVector::new(values))
    }

    pub fn exact_cumulants(&self, l: usize) -> Result<CumulantVector> {
        match self.exact_moments_rational(l)? {
            Some(q) => {
                let k = crate::cumulants::moments_to_cumulants_exact(&q)?;
                Ok(CumulantVector::new(k.iter().map(rational_to_f64).collect()))
            }
            None => moments_to_cumulants(&self.exact_moments(l)?),
        }
    }

    /// True when all odd moments through order 15 vanish exactly.
    pub fn is_symmetric(&self) -> bool {
        let l = match &self.kind {
            MarginalKind::CustomMoments(m) => m.len().min(15),
            _ => 15,
        };
        match self.exact_moments(l) {
            Ok(m) => (1..=l).step_by(2).all(|i| m.order(i) == 0.0),
            Err(_) => false,
        }
    }

    pub fn to_config(&self) -> ModelConfig {
        ModelConfig {
            kind: self.kind.name().to_string(),
            params: self.kind.params(),
            standardized: self.standardized,
        }
    }
}

impl TryFrom<ModelConfig> for MarginalModel {
    type Error = Error;

    fn try_from(c: ModelConfig) -> Result<Self> {
        MarginalModel::new(MarginalKind::from_parts(&c.kind, &c.params)?, c.standardized)
    }
}

impl Serialize for MarginalModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_config().serialize(s)
    }
}

impl<'de> Deserialize<'de> for MarginalModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let c = ModelConfig::deserialize(d)?;
        MarginalModel::try_from(c).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for MarginalModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_config())
    }
}

impl FromStr for MarginalModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MarginalModel::try_from(s.parse::<ModelConfig>()?)
    }
}
