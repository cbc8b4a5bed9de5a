//! Yes/no instance generators for the indistinguishability constructions and
//! Monte Carlo measurement of the Bayes classifier's advantage.

mod gaussian;
mod poisson;

pub use gaussian::{
    expect1_closed_form, gaussian_log_pdfs, gen_gaussian_hidden, r_moment_closed_form, refinement_coupling,
    CouplingResult,
};
pub use poisson::{gen_poisson_noniid, gen_poisson_unknown_noise, poisson_log_likelihoods};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::SampleBatch;
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::stats::binomial_stderr;

/// Below this many trials per label the reported standard error is flagged.
pub const MIN_RELIABLE_TRIALS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Construction {
    /// x ~ Poi(1)^{n/2} × Poi(spread)^{n/2}; yes: w = e_i from the second
    /// half, no: sum of `spread` basis vectors from the first half.
    PoissonNonIid { spread: u32 },
    /// x ~ Poi(1)ⁿ; yes: w = e_i with Poi(spread) noise, no: sum of `spread`
    /// basis vectors with Poi(1) noise.
    PoissonUnknownNoise { spread: u32 },
    /// x ~ N(0,1)^{t×n}; yes: y = (hidden block sum)/√k + N(0,c²),
    /// no: y ~ N(0, 1+c²) independent of x.
    GaussianHidden { c: f64, k: usize },
}

impl Construction {
    pub fn name(&self) -> &'static str {
        match self {
            Construction::PoissonNonIid { .. } => "poisson_noniid",
            Construction::PoissonUnknownNoise { .. } => "poisson_unknown_noise",
            Construction::GaussianHidden { .. } => "gaussian_hidden",
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            Construction::PoissonNonIid { spread } => {
                if n == 0 || n % 2 == 1 {
                    return Err(Error::Domain(format!("n = {n} must be even and positive")));
                }
                if spread == 0 {
                    return Err(Error::Domain("spread must be ≥ 1".into()));
                }
            }
            Construction::PoissonUnknownNoise { spread } => {
                if n == 0 {
                    return Err(Error::Domain("n must be ≥ 1".into()));
                }
                if spread == 0 {
                    return Err(Error::Domain("spread must be ≥ 1".into()));
                }
            }
            Construction::GaussianHidden { c, k } => {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(Error::Domain(format!("c = {c} must be positive")));
                }
                if k == 0 || n == 0 || n % k != 0 {
                    return Err(Error::Domain(format!("k = {k} must divide n = {n}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Yes,
    No,
}

/// One generated instance together with the hidden choice of w.
#[derive(Debug, Clone, PartialEq)]
pub struct LBInstance {
    pub construction: Construction,
    pub label: Label,
    pub n: usize,
    pub t: usize,
    pub seed: u64,
    pub batch: SampleBatch,
    /// Basis indices summed into w, with multiplicity.
    pub hidden: Vec<usize>,
}

impl LBInstance {
    pub fn weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.n];
        let scale = match self.construction {
            Construction::GaussianHidden { k, .. } => 1.0 / (k as f64).sqrt(),
            _ => 1.0,
        };
        for &i in &self.hidden {
            w[i] += scale;
        }
        w
    }
}

/// Draws one instance of the construction.
pub fn generate(construction: Construction, n: usize, t: usize, seed: u64, label: Label) -> Result<LBInstance> {
    match construction {
        Construction::PoissonNonIid { spread } => gen_poisson_noniid(n, t, spread, seed, label),
        Construction::PoissonUnknownNoise { spread } => gen_poisson_unknown_noise(n, t, spread, seed, label),
        Construction::GaussianHidden { c, k } => gen_gaussian_hidden(n, t, c, k, seed, label),
    }
}

/// ln-likelihoods (no, yes) of an instance's data under the construction.
/// For the Poisson constructions the common x factor is left out.
pub fn log_likelihoods(inst: &LBInstance) -> Result<(f64, f64)> {
    let x = inst
        .batch
        .x()
        .ok_or_else(|| Error::Precondition("instance has no design matrix".into()))?;
    match inst.construction {
        Construction::GaussianHidden { c, k } => gaussian_log_pdfs(x, inst.batch.y(), inst.n, c, k),
        _ => poisson_log_likelihoods(inst.construction, x, inst.batch.y(), inst.n),
    }
}

/// Score of the Bayes rule on one instance: 2 if correct, 1 on a tie, 0 if wrong.
pub fn classify_score(inst: &LBInstance) -> Result<u8> {
    let (no, yes) = log_likelihoods(inst)?;
    let guess = if yes > no {
        Some(Label::Yes)
    } else if no > yes {
        Some(Label::No)
    } else {
        None
    };
    Ok(match guess {
        None => 1,
        Some(g) if g == inst.label => 2,
        Some(_) => 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Advantage {
    /// Pr[correct] − 1/2.
    pub advantage: f64,
    pub stderr: f64,
    /// Instances per label.
    pub trials: usize,
    /// Correct classifications, ties counted as 1/2.
    pub correct: f64,
    pub warning: Option<String>,
}

/// Seed of instance `index` with the given label under `master`.
pub fn instance_seed(master: u64, index: usize, label: Label) -> u64 {
    let bit = match label {
        Label::Yes => 0,
        Label::No => 1,
    };
    derive_seed(master, 2 * index as u64 + bit)
}

/// Classifies `trials` instances of each label with the exact likelihood
/// comparison and reports its advantage over random guessing.
pub fn distinguisher_advantage(
    construction: Construction,
    n: usize,
    t: usize,
    trials: usize,
    seed: u64,
) -> Result<Advantage> {
    construction.validate(n)?;
    if trials == 0 {
        return Err(Error::Domain("trials must be ≥ 1".into()));
    }
    if t == 0 {
        return Err(Error::Domain("t must be ≥ 1".into()));
    }
    let scores: Vec<Result<u8>> = (0..2 * trials)
        .into_par_iter()
        .map(|j| {
            let label = if j % 2 == 0 { Label::Yes } else { Label::No };
            let inst = generate(construction, n, t, instance_seed(seed, j / 2, label), label)?;
            classify_score(&inst)
        })
        .collect();
    let mut half_points = 0u64;
    for s in scores {
        half_points += s? as u64;
    }
    let total = 2 * trials as u64;
    let correct = half_points as f64 / 2.0;
    let p = correct / total as f64;
    let warning = (trials < MIN_RELIABLE_TRIALS)
        .then(|| format!("{trials} trials per label; the standard error is unreliable below {MIN_RELIABLE_TRIALS}"));
    Ok(Advantage { advantage: p - 0.5, stderr: binomial_stderr(p, total), trials, correct, warning })
}

/// Labels y pooled over `instances` independent instances with a fixed label.
pub fn pooled_labels(
    construction: Construction,
    n: usize,
    t: usize,
    instances: usize,
    seed: u64,
    label: Label,
) -> Result<Vec<f64>> {
    let parts: Vec<Result<Vec<f64>>> = (0..instances)
        .into_par_iter()
        .map(|i| Ok(generate(construction, n, t, instance_seed(seed, i, label), label)?.batch.into_labels()))
        .collect();
    let mut out = Vec::with_capacity(instances * t);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}
