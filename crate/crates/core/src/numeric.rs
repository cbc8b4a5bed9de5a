//! Floating-point helpers: compensated summation, log-space accumulation,
//! adaptive quadrature and conversions between f64 and exact rationals.

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Neumaier (improved Kahan) accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = Neumaier::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Streaming log-sum-exp: accumulates ln Σ exp(aᵢ) without materialising the terms.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    max: f64,
    scaled: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }
}

impl LogSumExp {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, a: f64) {
        if a == f64::NEG_INFINITY {
            return;
        }
        if a <= self.max {
            self.scaled += (a - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - a).exp() + 1.0;
            self.max = a;
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }

    pub fn max_term(&self) -> f64 {
        self.max
    }
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let mut acc = LogSumExp::new();
    for &v in values {
        acc.add(v);
    }
    acc.value()
}

/// Signed sum of terms given as (sign, ln|term|), returned the same way.
/// A zero result is reported as (0, -inf).
pub fn signed_log_sum(terms: &[(f64, f64)]) -> (f64, f64) {
    let max = terms
        .iter()
        .filter(|t| t.0 != 0.0)
        .map(|t| t.1)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return (0.0, f64::NEG_INFINITY);
    }
    let mut acc = Neumaier::new();
    for &(s, l) in terms {
        if s != 0.0 {
            acc.add(s * (l - max).exp());
        }
    }
    let v = acc.value();
    if v == 0.0 {
        (0.0, f64::NEG_INFINITY)
    } else {
        (v.signum(), max + v.abs().ln())
    }
}

pub fn ln_factorial(n: u64) -> f64 {
    statrs::function::factorial::ln_factorial(n)
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const G_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK_WEIGHTS[7] * fc;
    let mut g = G_WEIGHTS[3] * fc;
    for i in 0..7 {
        let dx = h * GK_NODES[i];
        let s = f(c - dx) + f(c + dx);
        k += GK_WEIGHTS[i] * s;
        if i % 2 == 1 {
            g += G_WEIGHTS[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Globally adaptive Gauss–Kronrod (7/15) integration on a finite interval.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<Quadrature> {
    const MAX_INTERVALS: usize = 4000;
    let (v, e) = kronrod15(&f, a, b);
    let mut pieces = vec![(a, b, v, e)];
    let mut evaluations = 15;
    loop {
        let total: f64 = neumaier_sum(pieces.iter().map(|p| p.2));
        let err: f64 = pieces.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(Error::numerical("quadrature (non-finite integrand)", err));
        }
        if err <= abs_tol {
            return Ok(Quadrature {
                value: total,
                error: err,
                evaluations,
            });
        }
        if pieces.len() >= MAX_INTERVALS {
            return Err(Error::numerical("quadrature (interval budget)", err));
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = pieces.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = kronrod15(&f, lo, mid);
        let (v2, e2) = kronrod15(&f, mid, hi);
        evaluations += 30;
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
    }
}

/// Integral over the whole real line via the substitution x = u/(1-u²).
pub fn integrate_real_line<F: Fn(f64) -> f64>(f: F, abs_tol: f64) -> Result<Quadrature> {
    let g = |u: f64| {
        let d = 1.0 - u * u;
        if d <= 0.0 {
            return 0.0;
        }
        let x = u / d;
        let v = f(x) * (1.0 + u * u) / (d * d);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(g, -1.0, 1.0, abs_tol)
}

/// Exact dyadic rational equal to a finite f64.
pub fn rational_from_f64(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::Domain(format!("non-finite value {x}")))
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Outside f64 range: fall back on the logarithm.
        let l = ln_abs_rational(r);
        let s = if r.is_negative() { -1.0 } else { 1.0 };
        s * l.exp()
    })
}

pub fn ln_abs_bigint(n: &BigInt) -> f64 {
    if n.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = n.bits();
    if bits <= 1000 {
        return n.abs().to_f64().expect("fits").ln();
    }
    let shift = bits - 64;
    let top: BigInt = n.abs() >> shift;
    top.to_f64().expect("64 bits").ln() + shift as f64 * std::f64::consts::LN_2
}

pub fn ln_abs_rational(r: &BigRational) -> f64 {
    ln_abs_bigint(r.numer()) - ln_abs_bigint(r.denom())
}

pub fn rational_sign(r: &BigRational) -> f64 {
    match r.numer().sign() {
        Sign::Minus => -1.0,
        Sign::NoSign => 0.0,
        Sign::Plus => 1.0,
    }
}

pub fn factorial_big(n: u64) -> BigInt {
    let mut acc = BigInt::one();
    for i in 2..=n {
        acc *= i;
    }
    acc
}

/// Pascal rows C(n, 0..=n) for n = 0..=max.
pub fn binomial_table(max: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(max + 1);
    for n in 0..=max {
        let mut row = vec![1.0; n + 1];
        for k in 1..n {
            row[k] = rows[n - 1][k - 1] + rows[n - 1][k];
        }
        rows.push(row);
    }
    rows
}

pub fn binomial_table_big(max: usize) -> Vec<Vec<BigInt>> {
    let mut rows: Vec<Vec<BigInt>> = Vec::with_capacity(max + 1);
    for n in 0..=max {
        let mut row = vec![BigInt::one(); n + 1];
        for k in 1..n {
            row[k] = &rows[n - 1][k - 1] + &rows[n - 1][k];
        }
        rows.push(row);
    }
    rows
}

/// ln C(n, k) for large arguments.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    statrs::function::factorial::ln_binomial(n, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn neumaier_recovers_cancelled_terms() {
        let v = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(neumaier_sum(v), 2.0);
    }

    #[test]
    fn lse_streaming_matches_direct() {
        let xs = [-1000.0, -999.0, -1001.5, -998.2];
        let direct = -998.2 + xs.iter().map(|x| (x + 998.2f64).exp()).sum::<f64>().ln();
        assert_relative_eq!(log_sum_exp(&xs), direct, epsilon = 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn signed_log_sum_handles_cancellation() {
        let (s, l) = signed_log_sum(&[(1.0, 3f64.ln()), (-1.0, 5f64.ln())]);
        assert_eq!(s, -1.0);
        assert_relative_eq!(l, 2f64.ln(), epsilon = 1e-14);
        assert_eq!(signed_log_sum(&[(1.0, 0.0), (-1.0, 0.0)]).0, 0.0);
    }

    #[test]
    fn quadrature_of_gaussian_density() {
        let q = integrate_real_line(
            |x| (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            1e-12,
        )
        .unwrap();
        assert_relative_eq!(q.value, 1.0, epsilon = 1e-11);
        let q = integrate(|x| x.powi(3), 0.0, 2.0, 1e-13).unwrap();
        assert_relative_eq!(q.value, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn rational_log_of_huge_values() {
        let big = BigRational::from_integer(BigInt::from(10).pow(400));
        assert_relative_eq!(ln_abs_rational(&big), 400.0 * 10f64.ln(), epsilon = 1e-9);
        assert_eq!(rational_to_f64(&rational_from_f64(0.1).unwrap()), 0.1);
    }

    #[test]
    fn binomials() {
        let t = binomial_table(10);
        assert_eq!(t[10][3], 120.0);
        assert_eq!(binomial_table_big(30)[30][15], BigInt::from(155_117_520u64));
    }
}
