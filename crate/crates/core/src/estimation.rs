//! Sample estimators of label moments, cumulants and power sums ‖w‖_ℓ^ℓ, and
//! the matching sample-size calculator.

use serde::{Deserialize, Serialize};

use crate::cumulants::{moments_to_cumulants, CumulantVector, MomentVector};
use crate::distributions::{NoiseKind, NoiseModel};
use crate::error::{Error, Result};
use crate::numeric::Neumaier;

/// Fixed reduction block; partial sums are combined in index order.
const CHUNK: usize = 4096;

/// Estimate M_ℓ of ‖w‖_ℓ^ℓ with the quantities that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSumEstimate {
    pub order: usize,
    pub value: f64,
    pub samples_used: usize,
    pub kappa_x: f64,
    pub kappa_noise: f64,
}

/// s₂ with a flag recording whether a negative estimate was clamped to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norm2Estimate {
    pub value: f64,
    pub clamped: bool,
}

fn check_input(y: &[f64], l: usize) -> Result<()> {
    if y.is_empty() {
        return Err(Error::EmptyVector("no samples".into()));
    }
    if l == 0 {
        return Err(Error::Domain("moment order must be ≥ 1".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("samples must be finite".into()));
    }
    Ok(())
}

fn max_abs(y: &[f64]) -> f64 {
    y.iter().fold(0.0f64, |a, b| a.max(b.abs()))
}

/// True if max|y|^ℓ stays comfortably inside the f64 range.
fn direct_is_safe(max: f64, l: usize) -> bool {
    max == 0.0 || (l as f64 * max.ln()).abs() < 600.0
}

/// Σ yᵢ^ℓ / m in sign/log-magnitude form, shifted by ℓ·ln max|y|.
fn log_moment(y: &[f64], l: usize, max: f64) -> Result<f64> {
    let shift = l as f64 * max.ln();
    let mut total = Neumaier::new();
    for chunk in y.chunks(CHUNK) {
        let mut acc = Neumaier::new();
        for &v in chunk {
            if v == 0.0 {
                continue;
            }
            let mag = (l as f64 * v.abs().ln() - shift).exp();
            let neg = v < 0.0 && l % 2 == 1;
            acc.add(if neg { -mag } else { mag });
        }
        total.add(acc.value());
    }
    let s = total.value() / y.len() as f64;
    if s == 0.0 {
        return Ok(0.0);
    }
    let ln = shift + s.abs().ln();
    if ln > f64::MAX.ln() {
        return Err(Error::numerical(format!("moment of order {l} overflows"), ln));
    }
    Ok(s.signum() * ln.exp())
}

/// (1/m) Σ yᵢ^ℓ with compensated block summation.
pub fn empirical_moment(y: &[f64], l: usize) -> Result<f64> {
    check_input(y, l)?;
    let max = max_abs(y);
    if !direct_is_safe(max, l) {
        return log_moment(y, l, max);
    }
    let mut total = Neumaier::new();
    for chunk in y.chunks(CHUNK) {
        let mut acc = Neumaier::new();
        for &v in chunk {
            acc.add(v.powi(l as i32));
        }
        total.add(acc.value());
    }
    Ok(total.value() / y.len() as f64)
}

/// m̃₁..m̃_L in one pass over the data.
pub fn empirical_moments(y: &[f64], max_order: usize) -> Result<MomentVector> {
    check_input(y, max_order)?;
    let max = max_abs(y);
    if !direct_is_safe(max, max_order) {
        let v = (1..=max_order).map(|l| empirical_moment(y, l)).collect::<Result<Vec<_>>>()?;
        return Ok(MomentVector::new(v));
    }
    let mut total = vec![Neumaier::new(); max_order];
    let mut acc = vec![Neumaier::new(); max_order];
    for chunk in y.chunks(CHUNK) {
        acc.iter_mut().for_each(|a| *a = Neumaier::new());
        for &v in chunk {
            let mut p = 1.0;
            for a in acc.iter_mut() {
                p *= v;
                a.add(p);
            }
        }
        for (t, a) in total.iter_mut().zip(&acc) {
            t.add(a.value());
        }
    }
    let m = y.len() as f64;
    Ok(MomentVector::new(total.iter().map(|t| t.value() / m).collect()))
}

/// (1/m) Σ |yᵢ|^p for real p > 0.
pub fn empirical_abs_moment(y: &[f64], p: f64) -> Result<f64> {
    check_input(y, 1)?;
    Ok(crate::numeric::neumaier_sum(y.iter().map(|v| v.abs().powf(p))) / y.len() as f64)
}

/// Plug-in cumulants κ̃₁..κ̃_L. With `symmetric` set the odd empirical moments
/// are replaced by exact zeros before the transform.
pub fn empirical_cumulants(y: &[f64], max_order: usize, symmetric: bool) -> Result<CumulantVector> {
    let mut m = empirical_moments(y, max_order)?.into_vec();
    if symmetric {
        for (i, v) in m.iter_mut().enumerate() {
            if i % 2 == 0 {
                *v = 0.0;
            }
        }
    }
    moments_to_cumulants(&MomentVector::new(m))
}

pub fn empirical_cumulant(y: &[f64], l: usize, symmetric: bool) -> Result<f64> {
    if symmetric && l % 2 == 1 {
        check_input(y, l)?;
        return Ok(0.0);
    }
    Ok(empirical_cumulants(y, l, symmetric)?.order(l))
}

/// M_ℓ = (κ̃_ℓ(y) − κ_ℓ(η)) / κ_ℓ(X) given the plug-in cumulant of y.
pub fn power_sum_from_cumulant(
    kappa_y: f64,
    l: usize,
    kappa_x: f64,
    kappa_noise: f64,
    samples: usize,
    floor: f64,
) -> Result<PowerSumEstimate> {
    if l == 0 || l % 2 == 1 {
        return Err(Error::Domain(format!("power-sum order {l} must be even and ≥ 2")));
    }
    if kappa_x.abs() <= floor || kappa_x == 0.0 {
        return Err(Error::DegenerateCumulant { order: l, value: kappa_x });
    }
    Ok(PowerSumEstimate {
        order: l,
        value: (kappa_y - kappa_noise) / kappa_x,
        samples_used: samples,
        kappa_x,
        kappa_noise,
    })
}

/// Estimate of ‖w‖_ℓ^ℓ from symmetrized labels.
pub fn estimate_power_sum(y: &[f64], l: usize, kappa_x: f64, kappa_noise: f64) -> Result<PowerSumEstimate> {
    if l == 0 || l % 2 == 1 {
        return Err(Error::Domain(format!("power-sum order {l} must be even and ≥ 2")));
    }
    if kappa_x == 0.0 {
        return Err(Error::DegenerateCumulant { order: l, value: kappa_x });
    }
    let k = empirical_cumulant(y, l, true)?;
    power_sum_from_cumulant(k, l, kappa_x, kappa_noise, y.len(), 0.0)
}

/// s₂ = m̃₂(y) − m₂(η), clamped at 0.
pub fn estimate_norm2(y: &[f64], m2_noise: f64) -> Result<Norm2Estimate> {
    let s = empirical_moment(y, 2)? - m2_noise;
    Ok(if s < 0.0 {
        Norm2Estimate { value: 0.0, clamped: true }
    } else {
        Norm2Estimate { value: s, clamped: false }
    })
}

/// min{1, max{0, M}^{1/ℓ}}, computed through the logarithm.
pub fn linf_extract(m: f64, l: usize) -> f64 {
    if !(m > 0.0) || l == 0 {
        return 0.0;
    }
    (m.ln() / l as f64).exp().min(1.0)
}

/// ⌈64 · (2ℓ)^{4ℓ} · (m_{2ℓ}(X) + m_{2ℓ}(η)) · C^{2ℓ} / (δ ε² τ²)⌉, saturating at u64::MAX.
/// The constant and exponents are a heuristic reading of the moment-variance bound.
pub fn sample_size_power_sum(
    l: usize,
    eps: f64,
    delta: f64,
    tau: f64,
    c: f64,
    m2l_x: f64,
    m2l_noise: f64,
) -> Result<u64> {
    for (name, v) in [("ε", eps), ("δ", delta), ("τ", tau), ("C", c)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Domain(format!("{name} = {v} must be positive and finite")));
        }
    }
    if l == 0 {
        return Err(Error::Domain("order must be ≥ 1".into()));
    }
    let moments = m2l_x + m2l_noise;
    if !(moments >= 0.0) {
        return Err(Error::Domain(format!("moment sum {moments} must be nonnegative")));
    }
    if moments == 0.0 {
        return Ok(1);
    }
    let lf = l as f64;
    let ln = 64f64.ln() + 4.0 * lf * (2.0 * lf).ln() + moments.ln() + 2.0 * lf * c.ln()
        - delta.ln()
        - 2.0 * eps.ln()
        - 2.0 * tau.ln();
    if ln >= (u64::MAX as f64).ln() {
        return Ok(u64::MAX);
    }
    Ok((ln.exp().ceil() as u64).max(1))
}

/// Noise model whose moments are the empirical moments of noise-only samples.
pub fn calibrate_noise(samples: &[f64], max_order: usize) -> Result<NoiseModel> {
    let m = empirical_moments(samples, max_order)?;
    NoiseModel::new(NoiseKind::CustomMoments(m.into_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn moment_examples() {
        assert_eq!(empirical_moment(&[1.0; 9], 7).unwrap(), 1.0);
        let alt = [1.0, -1.0, 1.0, -1.0];
        assert_eq!(empirical_moment(&alt, 2).unwrap(), 1.0);
        assert_eq!(empirical_moment(&alt, 3).unwrap(), 0.0);
        assert!(empirical_moment(&[], 2).is_err());
        let mv = empirical_moments(&[0.5, 2.0, -1.0], 4).unwrap();
        assert_relative_eq!(mv.order(3), (0.125 + 8.0 - 1.0) / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn huge_orders_use_log_form() {
        let y = [10.0, -10.0, 5.0];
        let v = empirical_moment(&y, 301).unwrap();
        assert_relative_eq!(v, 5f64.powi(301) / 3.0, max_relative = 1e-12);
        assert!(empirical_moment(&[1e10], 800).is_err());
        let tiny = empirical_moment(&[0.5], 800).unwrap();
        assert_relative_eq!(tiny, 0.5f64.powi(800), max_relative = 1e-12);
    }

    #[test]
    fn cumulant_contracts() {
        assert_eq!(empirical_cumulant(&[0.0; 10], 4, true).unwrap(), 0.0);
        assert_eq!(empirical_cumulant(&[1.0, 2.0, 5.0], 3, true).unwrap(), 0.0);
        let k = empirical_cumulant(&[1.0, -1.0], 4, true).unwrap();
        assert_eq!(k, -2.0);
    }

    #[test]
    fn power_sum_and_norm() {
        let e = estimate_power_sum(&[1.0, -1.0], 4, -2.0, 0.0).unwrap();
        assert_eq!(e.value, 1.0);
        assert!(matches!(estimate_power_sum(&[1.0], 4, 0.0, 0.0), Err(Error::DegenerateCumulant { .. })));
        assert!(estimate_power_sum(&[1.0], 3, 1.0, 0.0).is_err());
        let n = estimate_norm2(&[0.1, -0.1], 0.5).unwrap();
        assert!(n.clamped && n.value == 0.0);
    }

    #[test]
    fn linf_examples() {
        assert_eq!(linf_extract(1.0, 10), 1.0);
        assert_relative_eq!(linf_extract(0.0625, 4), 0.5, epsilon = 1e-15);
        assert_eq!(linf_extract(-3.0, 4), 0.0);
        assert_eq!(linf_extract(5.0, 2), 1.0);
    }

    #[test]
    fn sample_size_properties() {
        let base = sample_size_power_sum(2, 0.1, 0.5, 1.0, 1.0, 1.0, 0.0).unwrap();
        let half = sample_size_power_sum(2, 0.05, 0.5, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert!((half as f64 / base as f64 - 4.0).abs() < 1e-6);
        let one = sample_size_power_sum(2, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(one, 64 * 4u64.pow(8));
        let mut prev = 0;
        for t in [1.0, 1e-3, 1e-6, 1e-9] {
            let m = sample_size_power_sum(2, 1.0, 1.0, t, 1.0, 1.0, 0.0).unwrap();
            assert!(m > prev);
            prev = m;
        }
        assert_eq!(sample_size_power_sum(2, 1.0, 1.0, 1e-300, 1.0, 1.0, 0.0).unwrap(), u64::MAX);
        assert!(sample_size_power_sum(2, 0.0, 1.0, 1.0, 1.0, 1.0, 0.0).is_err());
        assert!(sample_size_power_sum(2, 1.0, -1.0, 1.0, 1.0, 1.0, 0.0).is_err());
    }
}
