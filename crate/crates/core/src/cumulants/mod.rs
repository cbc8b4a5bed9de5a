//! Moment and cumulant sequences and the transforms between them.
//!
//! Both directions go through incomplete Bell polynomials. With f64 input the
//! values are converted to exact dyadic rationals for orders up to
//! [`EXACT_ORDER_LIMIT`] and rounded once at the end; above that the sums are
//! evaluated in f64 with compensated summation.

mod bell;
mod search;

pub use bell::{bell_polynomial, bell_polynomial_exact, bell_table, Scalar};
pub use search::{find_nonzero_cumulant, mgf_root_search, MgfRoot};

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{
    binomial_table, binomial_table_big, factorial_big, rational_from_f64, rational_to_f64,
};

/// Largest order handled by the transforms.
pub const MAX_ORDER: usize = 64;
/// Largest order evaluated in exact rational arithmetic on the f64 path.
pub const EXACT_ORDER_LIMIT: usize = 24;

/// Raw moments m₁..m_L (index 0 holds order 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    values: Vec<f64>,
}

/// Cumulants κ₁..κ_L (index 0 holds order 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulantVector {
    values: Vec<f64>,
}

macro_rules! order_indexed {
    ($t:ty) => {
        impl $t {
            pub fn new(values: Vec<f64>) -> Self {
                Self { values }
            }

            /// Value at order `l` (1-based). Panics if out of range.
            pub fn order(&self, l: usize) -> f64 {
                assert!(l >= 1 && l <= self.values.len(), "order {l} out of range");
                self.values[l - 1]
            }

            pub fn get(&self, l: usize) -> Option<f64> {
                if l == 0 {
                    None
                } else {
                    self.values.get(l - 1).copied()
                }
            }

            pub fn max_order(&self) -> usize {
                self.values.len()
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.values
            }

            pub fn into_vec(self) -> Vec<f64> {
                self.values
            }

            pub fn truncated(&self, l: usize) -> Self {
                Self {
                    values: self.values[..l.min(self.values.len())].to_vec(),
                }
            }
        }
    };
}

order_indexed!(MomentVector);
order_indexed!(CumulantVector);

fn check_len(l: usize) -> Result<()> {
    if l > MAX_ORDER {
        return Err(Error::Domain(format!(
            "order {l} exceeds the supported maximum {MAX_ORDER}"
        )));
    }
    Ok(())
}

/// κ_ℓ = Σ_k (−1)^{k−1}(k−1)! B_{ℓ,k}(m₁,…) over any scalar type.
pub fn moments_to_cumulants_generic<T: Scalar>(m: &[T]) -> Vec<T> {
    let l = m.len();
    let table = bell_table(m);
    let mut fact = T::one();
    let mut signed_fact = Vec::with_capacity(l + 1);
    signed_fact.push(T::zero());
    for k in 1..=l {
        if k > 1 {
            fact = fact * T::from_u64((k - 1) as u64);
        }
        signed_fact.push(if k % 2 == 1 { fact.clone() } else { -fact.clone() });
    }
    (1..=l)
        .map(|n| T::sum((1..=n).map(|k| signed_fact[k].clone() * table[n][k].clone())))
        .collect()
}

/// m_ℓ = Σ_k B_{ℓ,k}(κ₁,…) over any scalar type.
pub fn cumulants_to_moments_generic<T: Scalar>(kappa: &[T]) -> Vec<T> {
    let table = bell_table(kappa);
    (1..=kappa.len())
        .map(|n| T::sum((1..=n).map(|k| table[n][k].clone())))
        .collect()
}

fn to_exact(v: &[f64]) -> Result<Vec<BigRational>> {
    v.iter().map(|&x| rational_from_f64(x)).collect()
}

fn from_exact(v: &[BigRational]) -> Vec<f64> {
    v.iter().map(rational_to_f64).collect()
}

pub fn moments_to_cumulants(m: &MomentVector) -> Result<CumulantVector> {
    check_len(m.max_order())?;
    let values = if m.max_order() <= EXACT_ORDER_LIMIT {
        from_exact(&moments_to_cumulants_generic(&to_exact(m.as_slice())?))
    } else {
        moments_to_cumulants_generic(m.as_slice())
    };
    Ok(CumulantVector::new(values))
}

pub fn cumulants_to_moments(k: &CumulantVector) -> Result<MomentVector> {
    check_len(k.max_order())?;
    let values = if k.max_order() <= EXACT_ORDER_LIMIT {
        from_exact(&cumulants_to_moments_generic(&to_exact(k.as_slice())?))
    } else {
        cumulants_to_moments_generic(k.as_slice())
    };
    Ok(MomentVector::new(values))
}

pub fn moments_to_cumulants_exact(m: &[BigRational]) -> Result<Vec<BigRational>> {
    check_len(m.len())?;
    Ok(moments_to_cumulants_generic(m))
}

pub fn cumulants_to_moments_exact(k: &[BigRational]) -> Result<Vec<BigRational>> {
    check_len(k.len())?;
    Ok(cumulants_to_moments_generic(k))
}

/// κ_ℓ = m_ℓ − Σ_{j<ℓ} C(ℓ−1, j−1) κ_j m_{ℓ−j}, stated for mean-zero inputs.
pub fn cumulant_recurrence(m: &MomentVector) -> Result<CumulantVector> {
    let l = m.max_order();
    check_len(l)?;
    if l == 0 {
        return Ok(CumulantVector::new(vec![]));
    }
    if m.order(1) != 0.0 {
        return Err(Error::Precondition(format!(
            "recurrence requires m₁ = 0, got {}",
            m.order(1)
        )));
    }
    let binom = binomial_table(l);
    let mut kappa = vec![0.0; l + 1];
    for n in 1..=l {
        let mut acc = crate::numeric::Neumaier::new();
        acc.add(m.order(n));
        for j in 1..n {
            acc.add(-binom[n - 1][j - 1] * kappa[j] * m.order(n - j));
        }
        kappa[n] = acc.value();
    }
    kappa.remove(0);
    Ok(CumulantVector::new(kappa))
}

/// m_ℓ · e^ℓ · ℓ!, the magnitude bound on the ℓ-th cumulant for even ℓ.
pub fn cumulant_upper_bound(l: usize, m_l: f64) -> Result<f64> {
    if l == 0 || l % 2 == 1 {
        return Err(Error::Domain(format!("order {l} must be even and positive")));
    }
    let ln = (l as f64) + crate::numeric::ln_factorial(l as u64);
    Ok(m_l * ln.exp())
}

/// Raw moments of X + Y for independent X, Y: m_ℓ = Σ_j C(ℓ,j) m_j(X) m_{ℓ−j}(Y).
pub fn convolve_moments_exact(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let l = a.len().min(b.len());
    let binom = binomial_table_big(l);
    let at = |v: &[BigRational], j: usize| {
        if j == 0 {
            BigRational::one()
        } else {
            v[j - 1].clone()
        }
    };
    (1..=l)
        .map(|n| {
            let mut acc = BigRational::zero();
            for j in 0..=n {
                acc += BigRational::from_integer(binom[n][j].clone()) * at(a, j) * at(b, n - j);
            }
            acc
        })
        .collect()
}

pub fn convolve_moments(a: &MomentVector, b: &MomentVector) -> Result<MomentVector> {
    let r = convolve_moments_exact(&to_exact(a.as_slice())?, &to_exact(b.as_slice())?);
    Ok(MomentVector::new(from_exact(&r)))
}

/// Raw moments of cX.
pub fn scale_moments(m: &MomentVector, c: f64) -> MomentVector {
    MomentVector::new(
        m.as_slice()
            .iter()
            .enumerate()
            .map(|(i, v)| v * c.powi(i as i32 + 1))
            .collect(),
    )
}

/// Exact raw moments of (X − X′)/√2 for X′ an independent copy of X.
/// Odd orders vanish; even orders are rational whenever the input is.
pub fn symmetrized_moments_exact(m: &[BigRational]) -> Vec<BigRational> {
    let neg: Vec<BigRational> = m
        .iter()
        .enumerate()
        .map(|(i, v)| if i % 2 == 0 { -v.clone() } else { v.clone() })
        .collect();
    let diff = convolve_moments_exact(m, &neg);
    diff.into_iter()
        .enumerate()
        .map(|(i, v)| {
            let l = i + 1;
            if l % 2 == 1 {
                BigRational::zero()
            } else {
                v / BigRational::from_integer(num_bigint::BigInt::from(2).pow((l / 2) as u32))
            }
        })
        .collect()
}

/// Cumulants of (X − X′)/√2: 2κ_ℓ/2^{ℓ/2} for even ℓ and 0 for odd ℓ.
pub fn symmetrized_cumulants(k: &CumulantVector) -> CumulantVector {
    CumulantVector::new(
        k.as_slice()
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let l = i + 1;
                if l % 2 == 1 {
                    0.0
                } else {
                    2.0 * v / 2f64.powi((l / 2) as i32)
                }
            })
            .collect(),
    )
}

/// ℓ! as an exact integer (used by tests and the sample-size arithmetic).
pub fn factorial_exact(l: u64) -> num_bigint::BigInt {
    factorial_big(l)
}
