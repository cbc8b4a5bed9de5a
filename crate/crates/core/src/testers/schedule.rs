use serde::{Deserialize, Serialize};

use crate::cumulants::{find_nonzero_cumulant, MAX_ORDER};
use crate::distributions::MarginalModel;
use crate::error::{Error, Result};

/// Orders above this are not checked for nonzero cumulants.
pub const GAP_SCAN_LIMIT: usize = MAX_ORDER;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScheduleMode {
    PaperExact,
    /// User-chosen orders ℓ₁ > … > ℓ_k.
    Practical(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    PaperExact,
    Practical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub k: usize,
    pub eps: f64,
    pub norm_bound: f64,
    pub orders: Vec<usize>,
    /// δ₁ < … < δ_k (PaperExact only). May underflow to 0; see `ln_deltas`.
    pub deltas: Option<Vec<f64>>,
    pub ln_deltas: Option<Vec<f64>>,
    /// min_i |κ_{ℓᵢ}(X)| when every order was checked.
    pub tau: Option<f64>,
    pub kind: ScheduleKind,
    /// False if some order was beyond the nonzero-cumulant scan range.
    pub cumulants_verified: bool,
    /// True if an order exceeds what the estimators can evaluate.
    pub impractical: bool,
}

fn scan(model: &MarginalModel, start: usize, limit: usize, floor: f64) -> Result<Option<usize>> {
    if model.is_symmetric() {
        return find_nonzero_cumulant(model, start, limit, floor);
    }
    // Asymmetric models are symmetrized by the testers; κ_ℓ(X−X′) = 2κ_ℓ(X) for even ℓ.
    let k = model.exact_cumulants(limit)?;
    let first = if start % 2 == 0 { start + 2 } else { start + 1 };
    Ok((first.max(2)..=limit).step_by(2).find(|&j| k.order(j).abs() >= floor))
}

fn scan_limit(model: &MarginalModel) -> Result<usize> {
    match model.kind() {
        crate::distributions::MarginalKind::CustomMoments(m) => Ok(m.len().min(GAP_SCAN_LIMIT)),
        _ => Ok(GAP_SCAN_LIMIT),
    }
}

fn even_ceil(x: f64) -> f64 {
    let c = x.ceil();
    if c % 2.0 == 0.0 {
        c
    } else {
        c + 1.0
    }
}

/// Orders and error parameters for the general tester.
pub fn build_schedule(
    k: usize,
    eps: f64,
    norm_bound: f64,
    model: &MarginalModel,
    mode: ScheduleMode,
    cumulant_floor: f64,
) -> Result<Schedule> {
    if k == 0 {
        return Err(Error::Domain("k must be ≥ 1".into()));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Domain(format!("ε = {eps} must lie in (0, 1]")));
    }
    if !(norm_bound >= 1.0) || !norm_bound.is_finite() {
        return Err(Error::Domain(format!("C = {norm_bound} must be ≥ 1")));
    }
    let limit = scan_limit(model)?;
    // A model with no nonzero even cumulant past order 2 is indistinguishable
    // from a Gaussian by these statistics.
    if scan(model, 2, limit, cumulant_floor)?.is_none() {
        return Err(Error::GaussianObstruction { scanned_to: limit });
    }
    let cumulant_at = |l: usize| -> Result<f64> { Ok(model.exact_cumulants(l)?.order(l)) };

    match mode {
        ScheduleMode::Practical(orders) => {
            if orders.len() != k {
                return Err(Error::Domain(format!(
                    "practical schedule needs k = {k} orders, got {}",
                    orders.len()
                )));
            }
            for &l in &orders {
                if l < 2 || l % 2 == 1 {
                    return Err(Error::Domain(format!("schedule order {l} must be even and ≥ 2")));
                }
                if l > MAX_ORDER {
                    return Err(Error::Domain(format!("schedule order {l} exceeds {MAX_ORDER}")));
                }
            }
            if orders.windows(2).any(|p| p[0] <= p[1]) {
                return Err(Error::Domain(format!("schedule orders {orders:?} must be strictly decreasing")));
            }
            let mut tau = f64::INFINITY;
            for &l in &orders {
                let kap = cumulant_at(l)?;
                if kap.abs() < cumulant_floor || kap == 0.0 {
                    return Err(Error::DegenerateCumulant { order: l, value: kap });
                }
                tau = tau.min(kap.abs());
            }
            Ok(Schedule {
                k,
                eps,
                norm_bound,
                orders,
                deltas: None,
                ln_deltas: None,
                tau: Some(tau),
                kind: ScheduleKind::Practical,
                cumulants_verified: true,
                impractical: false,
            })
        }
        ScheduleMode::PaperExact => {
            let max_ln_order = (2f64.powi(53)).ln();
            let mut ln_deltas = vec![0.0; k];
            let mut orders = vec![0usize; k];
            let mut verified = true;
            let mut ln_d = (eps / (12.0 * k as f64)).ln();
            for slot in (0..k).rev() {
                if slot + 1 < k {
                    let next_l = orders[slot + 1] as f64;
                    ln_d = next_l * (ln_deltas[slot + 1] - (5.0 * next_l).ln()) - (2.0 * k as f64).ln();
                }
                ln_deltas[slot] = ln_d;
                let ln_l = 100f64.ln() - 3.0 * ln_d;
                if ln_l > max_ln_order {
                    return Err(Error::ScheduleOverflow {
                        slot: slot + 1,
                        log10_order: ln_l / std::f64::consts::LN_10,
                    });
                }
                let mut l = even_ceil((ln_l).exp() * (1.0 - 1e-15)) as usize;
                if l <= limit {
                    match scan(model, l.saturating_sub(2), limit, cumulant_floor)? {
                        Some(j) => l = j,
                        None => verified = false,
                    }
                } else {
                    verified = false;
                }
                orders[slot] = l;
            }
            let tau = if verified {
                let mut t = f64::INFINITY;
                for &l in &orders {
                    t = t.min(cumulant_at(l)?.abs());
                }
                Some(t)
            } else {
                None
            };
            let impractical = orders.iter().any(|&l| l > MAX_ORDER);
            Ok(Schedule {
                k,
                eps,
                norm_bound,
                orders,
                deltas: Some(ln_deltas.iter().map(|v| v.exp()).collect()),
                ln_deltas: Some(ln_deltas),
                tau,
                kind: ScheduleKind::PaperExact,
                cumulants_verified: verified,
                impractical,
            })
        }
    }
}
