//! Small statistical helpers used by the experiment harness.

use statrs::distribution::{Beta, ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Two-sided Clopper–Pearson interval for a binomial proportion.
pub fn clopper_pearson(successes: u64, trials: u64, confidence: f64) -> Result<(f64, f64)> {
    if trials == 0 || successes > trials {
        return Err(Error::Domain(format!("{successes} successes out of {trials} trials")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Domain(format!("confidence {confidence} outside (0, 1)")));
    }
    let alpha = 1.0 - confidence;
    let (x, n) = (successes as f64, trials as f64);
    let lo = if successes == 0 {
        0.0
    } else {
        Beta::new(x, n - x + 1.0)
            .map_err(|e| Error::numerical(e.to_string(), f64::NAN))?
            .inverse_cdf(alpha / 2.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        Beta::new(x + 1.0, n - x)
            .map_err(|e| Error::numerical(e.to_string(), f64::NAN))?
            .inverse_cdf(1.0 - alpha / 2.0)
    };
    Ok((lo, hi))
}

/// Binomial standard error sqrt(p(1−p)/n).
pub fn binomial_stderr(p: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    (p * (1.0 - p) / n as f64).max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSample {
    pub statistic: f64,
    pub p_value: f64,
    /// Degrees of freedom (chi-square) or effective sample size (KS).
    pub df: f64,
}

/// Survival function of the Kolmogorov distribution.
fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        s += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TwoSample> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyVector("two-sample test needs both samples".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok(TwoSample { statistic: d, p_value: kolmogorov_sf(lambda), df: ne })
}

/// Chi-square homogeneity test on two count vectors over the same bins.
/// Adjacent bins are merged until each merged bin holds at least 10 counts.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> Result<TwoSample> {
    if a.len() != b.len() {
        return Err(Error::Domain(format!("bin counts differ: {} vs {}", a.len(), b.len())));
    }
    let mut bins: Vec<(f64, f64)> = vec![];
    let (mut ca, mut cb) = (0u64, 0u64);
    for (&x, &y) in a.iter().zip(b) {
        ca += x;
        cb += y;
        if ca + cb >= 10 {
            bins.push((ca as f64, cb as f64));
            ca = 0;
            cb = 0;
        }
    }
    if ca + cb > 0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += ca as f64;
                last.1 += cb as f64;
            }
            None => bins.push((ca as f64, cb as f64)),
        }
    }
    let na: f64 = bins.iter().map(|p| p.0).sum();
    let nb: f64 = bins.iter().map(|p| p.1).sum();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::EmptyVector("two-sample test needs both samples".into()));
    }
    if bins.len() < 2 {
        return Ok(TwoSample { statistic: 0.0, p_value: 1.0, df: 0.0 });
    }
    let (ra, rb) = ((nb / na).sqrt(), (na / nb).sqrt());
    let stat: f64 = bins
        .iter()
        .map(|&(x, y)| {
            let d = x * ra - y * rb;
            d * d / (x + y)
        })
        .sum();
    let df = (bins.len() - 1) as f64;
    let chi = ChiSquared::new(df).map_err(|e| Error::numerical(e.to_string(), f64::NAN))?;
    Ok(TwoSample { statistic: stat, p_value: chi.sf(stat), df })
}

/// Counts of nonnegative integer-valued samples, indexed by value.
pub fn integer_histogram(values: &[f64]) -> Result<Vec<u64>> {
    let mut counts: Vec<u64> = vec![];
    for &v in values {
        if !(v >= 0.0 && v.fract() == 0.0 && v < 1e7) {
            return Err(Error::Domain(format!("{v} is not a small nonnegative integer")));
        }
        let i = v as usize;
        if i >= counts.len() {
            counts.resize(i + 1, 0);
        }
        counts[i] += 1;
    }
    Ok(counts)
}

/// Chi-square homogeneity test for two samples of nonnegative integers.
pub fn chi_square_integer_samples(a: &[f64], b: &[f64]) -> Result<TwoSample> {
    let mut ha = integer_histogram(a)?;
    let mut hb = integer_histogram(b)?;
    let len = ha.len().max(hb.len());
    ha.resize(len, 0);
    hb.resize(len, 0);
    chi_square_two_sample(&ha, &hb)
}
