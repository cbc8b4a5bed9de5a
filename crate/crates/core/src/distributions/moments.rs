//! Closed-form raw moments, exact in rational arithmetic.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::Result;
use crate::numeric::{binomial_table_big, rational_from_f64};

fn int(v: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// Prepends m₀ = 1 so that index ℓ holds m_ℓ.
fn with_zeroth(mut v: Vec<BigRational>) -> Vec<BigRational> {
    v.insert(0, BigRational::one());
    v
}

pub fn rademacher(l: usize) -> Vec<BigRational> {
    (1..=l)
        .map(|i| if i % 2 == 0 { BigRational::one() } else { BigRational::zero() })
        .collect()
}

pub fn scaled_rademacher(a: f64, l: usize) -> Result<Vec<BigRational>> {
    let a = rational_from_f64(a)?;
    let mut p = BigRational::one();
    Ok((1..=l)
        .map(|i| {
            p = &p * &a;
            if i % 2 == 0 {
                p.clone()
            } else {
                BigRational::zero()
            }
        })
        .collect())
}

pub fn discrete_uniform(support: &[f64], l: usize) -> Result<Vec<BigRational>> {
    let pts: Vec<BigRational> = support.iter().map(|&s| rational_from_f64(s)).collect::<Result<_>>()?;
    let count = int(pts.len() as u64);
    let mut powers = pts.clone();
    let mut out = Vec::with_capacity(l);
    for i in 1..=l {
        if i > 1 {
            for (p, s) in powers.iter_mut().zip(&pts) {
                *p = &*p * s;
            }
        }
        let total = powers.iter().fold(BigRational::zero(), |a, b| a + b);
        out.push(total / &count);
    }
    Ok(out)
}

pub fn continuous_uniform(a: f64, b: f64, l: usize) -> Result<Vec<BigRational>> {
    let a = rational_from_f64(a)?;
    let b = rational_from_f64(b)?;
    let width = &b - &a;
    let mut pa = a.clone();
    let mut pb = b.clone();
    let mut out = Vec::with_capacity(l);
    for i in 1..=l {
        pa = &pa * &a;
        pb = &pb * &b;
        out.push((&pb - &pa) / (int(i as u64 + 1) * &width));
    }
    Ok(out)
}

pub fn gaussian(mean: f64, variance: f64, l: usize) -> Result<Vec<BigRational>> {
    let mu = rational_from_f64(mean)?;
    let s2 = rational_from_f64(variance)?;
    let mut m = vec![BigRational::one(), mu.clone()];
    for i in 2..=l {
        let next = &mu * &m[i - 1] + int(i as u64 - 1) * &s2 * &m[i - 2];
        m.push(next);
    }
    m.remove(0);
    m.truncate(l);
    Ok(m)
}

/// Touchard recursion m_ℓ = λ Σ_{j<ℓ} C(ℓ−1, j) m_j.
pub fn poisson(lambda: f64, l: usize) -> Result<Vec<BigRational>> {
    let lam = rational_from_f64(lambda)?;
    let binom = binomial_table_big(l);
    let mut m = vec![BigRational::one()];
    for i in 1..=l {
        let mut acc = BigRational::zero();
        for j in 0..i {
            acc += BigRational::from_integer(binom[i - 1][j].clone()) * &m[j];
        }
        m.push(&lam * acc);
    }
    m.remove(0);
    Ok(m)
}

/// N(0,1) with probability 1−γ and a Rademacher sign with probability γ.
pub fn gauss_bernoulli(gamma: f64, l: usize) -> Result<Vec<BigRational>> {
    let g = rational_from_f64(gamma)?;
    let gm = gaussian(0.0, 1.0, l)?;
    let rm = rademacher(l);
    Ok(gm
        .into_iter()
        .zip(rm)
        .map(|(a, b)| (BigRational::one() - &g) * a + &g * b)
        .collect())
}

/// Exact square root of a nonnegative rational, if it has one.
pub fn rational_sqrt(r: &BigRational) -> Option<BigRational> {
    if r.is_negative() {
        return None;
    }
    let n = r.numer().sqrt();
    let d = r.denom().sqrt();
    if &(&n * &n) == r.numer() && &(&d * &d) == r.denom() {
        Some(BigRational::new(n, d))
    } else {
        None
    }
}

/// Standardized moments E[((X−μ)/σ)^ℓ]. Returns the exact even/odd values when
/// representable; entries that need an irrational σ are returned as `None`.
pub fn standardize(raw: &[BigRational]) -> Vec<Option<BigRational>> {
    let l = raw.len();
    if l == 0 {
        return vec![];
    }
    let mu = raw[0].clone();
    let var = if l >= 2 {
        &raw[1] - &mu * &mu
    } else {
        BigRational::one()
    };
    let m = with_zeroth(raw.to_vec());
    let binom = binomial_table_big(l);
    let neg_mu = -mu;
    let mut neg_pows = vec![BigRational::one()];
    for i in 1..=l {
        let next = &neg_pows[i - 1] * &neg_mu;
        neg_pows.push(next);
    }
    let sigma = rational_sqrt(&var);
    let mut out = Vec::with_capacity(l);
    let mut var_pow = BigRational::one();
    for i in 1..=l {
        let mut c = BigRational::zero();
        for j in 0..=i {
            c += BigRational::from_integer(binom[i][j].clone()) * &m[j] * &neg_pows[i - j];
        }
        if i % 2 == 0 {
            var_pow = &var_pow * &var;
            out.push(Some(c / &var_pow));
        } else if c.is_zero() {
            out.push(Some(c));
        } else {
            out.push(sigma.as_ref().map(|s| c / (&var_pow * s)));
        }
    }
    out
}

/// Standardized moments in f64 using the exact central moments.
pub fn standardize_f64(raw: &[BigRational]) -> Vec<f64> {
    use crate::numeric::rational_to_f64;
    let exact = standardize(raw);
    if raw.len() < 2 {
        return exact.iter().map(|v| v.as_ref().map(rational_to_f64).unwrap_or(0.0)).collect();
    }
    let var = rational_to_f64(&(&raw[1] - &raw[0] * &raw[0]));
    let sigma = var.sqrt();
    let mu = raw[0].clone();
    let m = with_zeroth(raw.to_vec());
    let binom = binomial_table_big(raw.len());
    exact
        .into_iter()
        .enumerate()
        .map(|(idx, v)| match v {
            Some(q) => rational_to_f64(&q),
            None => {
                let i = idx + 1;
                let mut c = BigRational::zero();
                let neg_mu = -mu.clone();
                for j in 0..=i {
                    let mut p = BigRational::one();
                    for _ in 0..(i - j) {
                        p = &p * &neg_mu;
                    }
                    c += BigRational::from_integer(binom[i][j].clone()) * &m[j] * p;
                }
                rational_to_f64(&c) / sigma.powi(i as i32)
            }
        })
        .collect()
}
