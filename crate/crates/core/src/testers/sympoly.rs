use std::ops::Div;

use serde::{Deserialize, Serialize};

use super::{prepare, sym_model_cumulants, sym_moments, Decision, TestVerdict, VerdictFlags, DEFAULT_CUMULANT_FLOOR};
use crate::cumulants::{symmetrized_cumulants, CumulantVector, Scalar, MAX_ORDER};
use crate::distributions::{MarginalModel, NoiseModel, SampleBatch};
use crate::error::{Error, Result};
use crate::estimation::{empirical_cumulants, estimate_norm2, power_sum_from_cumulant, sample_size_power_sum};
use crate::numeric::ln_factorial;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymPolyParams {
    pub k: usize,
    pub eps: f64,
    pub norm_bound: f64,
    pub cumulant_floor: f64,
}

impl SymPolyParams {
    pub fn new(k: usize, eps: f64, norm_bound: f64) -> Self {
        Self { k, eps, norm_bound, cumulant_floor: DEFAULT_CUMULANT_FLOOR }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Precondition("k must be ≥ 1".into()));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::Domain(format!("ε = {} must lie in (0, 1]", self.eps)));
        }
        if !(self.norm_bound >= 1.0) || !self.norm_bound.is_finite() {
            return Err(Error::Domain(format!("C = {} must be ≥ 1", self.norm_bound)));
        }
        if 2 * self.k + 2 > MAX_ORDER {
            return Err(Error::Domain(format!("k = {} needs orders past {MAX_ORDER}", self.k)));
        }
        Ok(())
    }

    /// ln of C^{−(4k+4)} ε^{2k} / (k+1)!.
    fn ln_gap(&self) -> f64 {
        let k = self.k as f64;
        -(4.0 * k + 4.0) * self.norm_bound.ln() + 2.0 * k * self.eps.ln() - ln_factorial(self.k as u64 + 1)
    }
}

/// Decision threshold (1/2)·C^{−(4k+4)} ε^{2k}/(k+1)!.
pub fn sym_poly_threshold(params: &SymPolyParams) -> f64 {
    0.5 * params.ln_gap().exp()
}

/// Sym₁..Sym_L from power sums p₁..p_L via ℓ·Sym_ℓ = Σ_{i=1}^{ℓ} (−1)^{i−1} Sym_{ℓ−i} pᵢ.
pub fn newton_sym_from_power_sums<T: Scalar + Div<Output = T>>(p: &[T]) -> Vec<T> {
    let mut e: Vec<T> = vec![T::one()];
    for l in 1..=p.len() {
        let terms = (1..=l).map(|i| {
            let t = e[l - i].clone() * p[i - 1].clone();
            if i % 2 == 1 {
                t
            } else {
                -t
            }
        });
        let s = T::sum(terms);
        e.push(s / T::from_u64(l as u64));
    }
    e.remove(0);
    e
}

/// Calculator sample size: each M′_{2i} to additive ε′ with failure probability 1/(10(k+1)).
pub fn recommended_samples_sympoly(
    params: &SymPolyParams,
    model: &MarginalModel,
    noise: &NoiseModel,
) -> Result<u64> {
    params.validate()?;
    let k = params.k;
    let top = 4 * k + 4;
    if top > MAX_ORDER {
        return Ok(u64::MAX);
    }
    let ln_eps_prime = params.ln_gap() - (3.0 * (k as f64 + 1.0)).ln();
    let eps_prime = ln_eps_prime.exp();
    if eps_prime == 0.0 {
        return Ok(u64::MAX);
    }
    let xk = sym_model_cumulants(model, top)?;
    let xm = sym_moments(&xk)?;
    let raw = CumulantVector::new((1..=top).map(|i| noise.cumulant(i)).collect::<Result<_>>()?);
    let nm = sym_moments(&symmetrized_cumulants(&raw))?;
    let tau = (1..=k + 1).map(|i| xk.order(2 * i).abs()).fold(f64::INFINITY, f64::min);
    if !(tau > 0.0) {
        return Ok(u64::MAX);
    }
    let fail = 1.0 / (10.0 * (k as f64 + 1.0));
    let mut worst = 1u64;
    for i in 1..=k + 1 {
        let l = 2 * i;
        let m = sample_size_power_sum(l, eps_prime, fail, tau, params.norm_bound, xm[2 * l - 1], nm[2 * l - 1].max(0.0))?;
        worst = worst.max(m);
    }
    Ok(worst)
}

/// Estimates ‖w/C‖_{2i}^{2i} for i ≤ k+1, turns them into Sym_{k+1} of the
/// squared weights and rejects when it exceeds the threshold.
pub fn sym_poly_tester(
    batch: &SampleBatch,
    params: &SymPolyParams,
    model: &MarginalModel,
    noise: &NoiseModel,
) -> Result<TestVerdict> {
    params.validate()?;
    let k = params.k;
    let top = 2 * k + 2;
    let prep = prepare(batch, model, noise, params.norm_bound, top)?;
    for i in 2..=k + 1 {
        let v = prep.x_sym.order(2 * i);
        if v.abs() < params.cumulant_floor || v == 0.0 {
            return Err(Error::DegenerateCumulant { order: 2 * i, value: v });
        }
    }
    let y = &prep.labels;
    let norm = estimate_norm2(y, prep.noise_sym.order(2))?;
    let ky = empirical_cumulants(y, top, true)?;
    let mut m = Vec::with_capacity(k + 1);
    for i in 1..=k + 1 {
        let l = 2 * i;
        let est = power_sum_from_cumulant(
            ky.order(l),
            l,
            prep.x_sym.order(l),
            prep.noise_sym.order(l),
            y.len(),
            params.cumulant_floor,
        )?;
        m.push(est.value.min(1.0));
    }
    let sym = newton_sym_from_power_sums(&m);
    let statistic = sym[k];
    let threshold = sym_poly_threshold(params);
    let recommended = recommended_samples_sympoly(params, model, noise)?;
    let flags = VerdictFlags {
        insufficient_samples: (batch.m() as u64) < recommended,
        degenerate_norm: false,
        clamped_norm: norm.clamped,
    };
    let decision = if statistic > threshold { Decision::FarFromSparse } else { Decision::Sparse };
    Ok(TestVerdict {
        decision,
        w_tilde: vec![],
        s2: norm.value,
        statistic,
        threshold,
        distance_estimate: None,
        samples_used: batch.m(),
        recommended_samples: recommended,
        flags,
    })
}
