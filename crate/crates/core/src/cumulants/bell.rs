use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::MAX_ORDER;
use crate::error::{Error, Result};
use crate::numeric::Neumaier;

/// Arithmetic needed by the Bell recursions. Implemented for f64 (compensated
/// sums) and exact rationals.
pub trait Scalar:
    Clone + Zero + One + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn from_u64(v: u64) -> Self;
    fn sum<I: Iterator<Item = Self>>(it: I) -> Self;
}

impl Scalar for f64 {
    fn from_u64(v: u64) -> Self {
        v as f64
    }

    fn sum<I: Iterator<Item = Self>>(it: I) -> Self {
        let mut acc = Neumaier::new();
        for v in it {
            acc.add(v);
        }
        acc.value()
    }
}

impl Scalar for BigRational {
    fn from_u64(v: u64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }

    fn sum<I: Iterator<Item = Self>>(it: I) -> Self {
        it.fold(BigRational::zero(), |a, b| a + b)
    }
}

/// Table B[n][k] of incomplete Bell polynomials for 0 ≤ k ≤ n ≤ len(x), via
/// B_{n,k} = Σ_{i=1}^{n−k+1} C(n−1, i−1) x_i B_{n−i,k−1}.
pub fn bell_table<T: Scalar>(x: &[T]) -> Vec<Vec<T>> {
    let l = x.len();
    let mut binom: Vec<Vec<u64>> = Vec::with_capacity(l + 1);
    for n in 0..=l {
        let mut row = vec![1u64; n + 1];
        for k in 1..n {
            row[k] = binom[n - 1][k - 1] + binom[n - 1][k];
        }
        binom.push(row);
    }
    let mut b: Vec<Vec<T>> = (0..=l).map(|n| vec![T::zero(); n + 1]).collect();
    b[0][0] = T::one();
    for n in 1..=l {
        for k in 1..=n {
            let terms = (1..=n - k + 1).map(|i| {
                T::from_u64(binom[n - 1][i - 1]) * x[i - 1].clone() * b[n - i][k - 1].clone()
            });
            b[n][k] = T::sum(terms);
        }
    }
    b
}

fn check(n: usize, k: usize, args: usize) -> Result<()> {
    if k < 1 || k > n {
        return Err(Error::Domain(format!("Bell polynomial needs 1 ≤ k ≤ ℓ, got ℓ={n}, k={k}")));
    }
    if n > MAX_ORDER {
        return Err(Error::Domain(format!("order {n} exceeds {MAX_ORDER}")));
    }
    if args < n - k + 1 {
        return Err(Error::Domain(format!(
            "B_{{{n},{k}}} needs {} arguments, got {args}",
            n - k + 1
        )));
    }
    Ok(())
}

fn padded<T: Scalar>(n: usize, k: usize, args: &[T]) -> Vec<T> {
    // Arguments past x_{n−k+1} never enter B_{n,k}.
    let mut x: Vec<T> = args[..n - k + 1].to_vec();
    x.resize(n, T::zero());
    x
}

pub fn bell_polynomial(n: usize, k: usize, args: &[f64]) -> Result<f64> {
    check(n, k, args.len())?;
    Ok(bell_table(&padded(n, k, args))[n][k])
}

pub fn bell_polynomial_exact(n: usize, k: usize, args: &[BigRational]) -> Result<BigRational> {
    check(n, k, args.len())?;
    Ok(bell_table(&padded(n, k, args))[n][k].clone())
}
