#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;

/// Every set partition of {0..n−1} as restricted growth strings.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![];
    let mut a = vec![0usize; n];
    fn rec(i: usize, max: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == a.len() {
            out.push(a.clone());
            return;
        }
        for v in 0..=max + 1 {
            a[i] = v;
            rec(i + 1, max.max(v), a, out);
        }
    }
    if n == 0 {
        return vec![vec![]];
    }
    rec(1, 0, &mut a, &mut out);
    out
}

/// Block sizes of a set partition given as a restricted growth string.
pub fn block_sizes(rgs: &[usize]) -> Vec<usize> {
    let k = rgs.iter().max().map_or(0, |m| m + 1);
    let mut s = vec![0; k];
    for &b in rgs {
        s[b] += 1;
    }
    s
}

/// B_{n,k}(x) for every k, by summing Π x_{|block|} over all set partitions.
pub struct PartitionOracle {
    /// (k, sorted block sizes, number of set partitions of that shape)
    shapes: Vec<Vec<(usize, Vec<usize>, u64)>>,
}

impl PartitionOracle {
    pub fn new(max_n: usize) -> Self {
        let mut shapes = vec![vec![]];
        for n in 1..=max_n {
            let mut map: std::collections::BTreeMap<Vec<usize>, u64> = Default::default();
            for p in set_partitions(n) {
                let mut s = block_sizes(&p);
                s.sort_unstable();
                *map.entry(s).or_insert(0) += 1;
            }
            shapes.push(map.into_iter().map(|(s, c)| (s.len(), s, c)).collect());
        }
        Self { shapes }
    }

    pub fn eval(&self, n: usize, k: usize, x: &[BigRational]) -> BigRational {
        let mut total = BigRational::from_integer(BigInt::from(0));
        for (kk, sizes, count) in &self.shapes[n] {
            if *kk != k {
                continue;
            }
            let mut term = BigRational::from_integer(BigInt::from(*count));
            for &s in sizes {
                term *= x[s - 1].clone();
            }
            total += term;
        }
        total
    }
}

pub fn random_rational<R: Rng>(rng: &mut R) -> BigRational {
    let num: i64 = rng.random_range(-50..=50);
    let den: i64 = rng.random_range(1..=30);
    BigRational::new(BigInt::from(num), BigInt::from(den))
}
