use serde::{Deserialize, Serialize};

use super::{
    prepare, sym_model_cumulants, sym_moments, Decision, Schedule, ScheduleKind, TestVerdict,
    VerdictFlags, DEFAULT_CUMULANT_FLOOR,
};
use crate::cumulants::{symmetrized_cumulants, CumulantVector, MAX_ORDER};
use crate::distributions::{MarginalModel, NoiseModel, SampleBatch};
use crate::error::{Error, Result};
use crate::estimation::{empirical_cumulants, estimate_norm2, power_sum_from_cumulant, sample_size_power_sum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralParams {
    pub k: usize,
    /// Distance ≤ c counts as sparse.
    pub c: f64,
    /// Distance ≥ s counts as far.
    pub s: f64,
    /// C with 1/C ≤ ‖w‖₂ ≤ C.
    pub norm_bound: f64,
    pub cumulant_floor: f64,
}

impl GeneralParams {
    pub fn new(k: usize, c: f64, s: f64, norm_bound: f64) -> Self {
        Self { k, c, s, norm_bound, cumulant_floor: DEFAULT_CUMULANT_FLOOR }
    }

    /// ε = (s² − c²)/(2C⁴).
    pub fn eps(&self) -> f64 {
        (self.s * self.s - self.c * self.c) / (2.0 * self.norm_bound.powi(4))
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Precondition("k must be ≥ 1".into()));
        }
        if !(0.0 <= self.c && self.c < self.s && self.s <= 1.0) {
            return Err(Error::Domain(format!("need 0 ≤ c < s ≤ 1, got c = {}, s = {}", self.c, self.s)));
        }
        if !(self.norm_bound >= 1.0) || !self.norm_bound.is_finite() {
            return Err(Error::Domain(format!("C = {} must be ≥ 1", self.norm_bound)));
        }
        Ok(())
    }
}

/// Calculator sample size for the schedule: the largest per-order requirement,
/// each order estimated to (δ_j/(5ℓ_j))^{ℓ_j}/(2k) with failure probability 1/(10(k+1)).
/// Practical schedules use δ_j = ε/(12k).
pub fn recommended_samples_general(
    schedule: &Schedule,
    params: &GeneralParams,
    model: &MarginalModel,
    noise: &NoiseModel,
) -> Result<u64> {
    let k = params.k as f64;
    let fail = 1.0 / (10.0 * (k + 1.0));
    if schedule.impractical {
        return Ok(u64::MAX);
    }
    let max_l = *schedule.orders.iter().max().expect("k ≥ 1");
    if 2 * max_l > MAX_ORDER {
        return Ok(u64::MAX);
    }
    let xk = sym_model_cumulants(model, 2 * max_l)?;
    let xm = sym_moments(&xk)?;
    let raw = CumulantVector::new((1..=2 * max_l).map(|i| noise.cumulant(i)).collect::<Result<_>>()?);
    let nm = sym_moments(&symmetrized_cumulants(&raw))?;
    let mut worst = 1u64;
    for (j, &l) in schedule.orders.iter().enumerate() {
        let ln_delta = match (&schedule.kind, &schedule.ln_deltas) {
            (ScheduleKind::PaperExact, Some(d)) => d[j],
            _ => (schedule.eps / (12.0 * k)).ln(),
        };
        let lf = l as f64;
        let ln_target = lf * (ln_delta - (5.0 * lf).ln()) - (2.0 * k).ln();
        let target = ln_target.exp();
        if target == 0.0 {
            return Ok(u64::MAX);
        }
        let tau = xk.order(l).abs();
        let m = sample_size_power_sum(
            l,
            target,
            fail,
            tau,
            params.norm_bound,
            xm[2 * l - 1],
            nm[2 * l - 1].max(0.0),
        )?;
        worst = worst.max(m);
    }
    Ok(worst)
}

/// Peels off the largest magnitudes one at a time: w̃_j = |M_{ℓ_j} − Σ_{i<j} w̃_i^{ℓ_j}|^{1/ℓ_j},
/// capped at 1. `orders` and `power_sums` are paired.
pub fn top_magnitudes(orders: &[usize], power_sums: &[f64]) -> Vec<f64> {
    let mut w_tilde: Vec<f64> = Vec::with_capacity(orders.len());
    for (&l, &m) in orders.iter().zip(power_sums) {
        let lf = l as f64;
        let peeled = w_tilde.iter().map(|w| w.powf(lf)).sum::<f64>();
        let residual = m - peeled;
        // A residual at the rounding level of the subtraction is treated as
        // zero; its ℓ-th root would otherwise be of the order of w̃₁.
        let noise = 4.0 * lf * f64::EPSILON * (m.abs() + peeled);
        let wj = if residual.abs() <= noise { 0.0 } else { (residual.abs().ln() / lf).exp().min(1.0) };
        w_tilde.push(wj);
    }
    w_tilde
}

/// The tolerant tester: estimates the top-k magnitudes from power sums of
/// decreasing order and compares their mass with the ℓ₂² estimate.
pub fn general_tester(
    batch: &SampleBatch,
    params: &GeneralParams,
    model: &MarginalModel,
    noise: &NoiseModel,
    schedule: &Schedule,
) -> Result<TestVerdict> {
    params.validate()?;
    if schedule.k != params.k || schedule.orders.len() != params.k {
        return Err(Error::Precondition(format!(
            "schedule built for k = {} but tester called with k = {}",
            schedule.k, params.k
        )));
    }
    if schedule.impractical || schedule.orders.iter().any(|&l| l > MAX_ORDER) {
        return Err(Error::Precondition(format!(
            "schedule orders {:?} exceed the largest supported order {MAX_ORDER}",
            schedule.orders
        )));
    }
    let c = params.norm_bound;
    let max_l = *schedule.orders.iter().max().expect("k ≥ 1");
    let prep = prepare(batch, model, noise, c, max_l.max(2))?;
    let y = &prep.labels;

    let gap = params.s * params.s - params.c * params.c;
    let norm = estimate_norm2(y, prep.noise_sym.order(2))?;
    let s2 = norm.value;
    let mut flags = VerdictFlags { clamped_norm: norm.clamped, ..Default::default() };
    let recommended = recommended_samples_general(schedule, params, model, noise)?;
    flags.insufficient_samples = (batch.m() as u64) < recommended;

    let ky = empirical_cumulants(y, max_l, true)?;
    let mut sums = Vec::with_capacity(params.k);
    for &l in &schedule.orders {
        let est = power_sum_from_cumulant(
            ky.order(l),
            l,
            prep.x_sym.order(l),
            prep.noise_sym.order(l),
            y.len(),
            params.cumulant_floor,
        )?;
        sums.push(est.value);
    }
    let w_tilde = top_magnitudes(&schedule.orders, &sums);
    let statistic: f64 = w_tilde.iter().map(|w| w * w).sum();
    let threshold = (1.0 - gap / 2.0) * s2;
    if s2 <= 1e-12 {
        flags.degenerate_norm = true;
        return Ok(TestVerdict {
            decision: Decision::Sparse,
            w_tilde,
            s2,
            statistic,
            threshold,
            distance_estimate: None,
            samples_used: batch.m(),
            recommended_samples: recommended,
            flags,
        });
    }
    let decision = if statistic >= threshold { Decision::Sparse } else { Decision::FarFromSparse };
    Ok(TestVerdict {
        decision,
        w_tilde,
        s2,
        statistic,
        threshold,
        distance_estimate: Some((1.0 - statistic / s2).max(0.0).sqrt()),
        samples_used: batch.m(),
        recommended_samples: recommended,
        flags,
    })
}
