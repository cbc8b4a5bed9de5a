mod common;

use common::random_rational;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsetest::distributions::{
    random_far, random_k_sparse, sample_dataset, sample_labels, MarginalModel, NoiseModel, WeightVector,
};
use sparsetest::rng::derive_seed;
use sparsetest::testers::{
    build_schedule, dist_to_k_sparse, general_tester, newton_sym_from_power_sums, noiseless_recover,
    sym_poly_tester, top_magnitudes, Decision, GeneralParams, Recovery, ScheduleMode, SymPolyParams,
};

/// Elementary symmetric polynomial e_r(v) by summing over all r-subsets.
fn sym_by_subsets(v: &[f64], r: usize) -> f64 {
    let n = v.len();
    let mut total = 0.0;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize == r {
            total += (0..n).filter(|i| mask >> i & 1 == 1).map(|i| v[i]).product::<f64>();
        }
    }
    total
}

fn sym_by_subsets_exact(v: &[BigRational], r: usize) -> BigRational {
    let n = v.len();
    let mut total = BigRational::zero();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize == r {
            let mut p = BigRational::one();
            for i in (0..n).filter(|i| mask >> i & 1 == 1) {
                p *= &v[i];
            }
            total += p;
        }
    }
    total
}

/// Distance to k-sparse by trying every support of size k.
fn brute_distance(w: &[f64], k: usize) -> f64 {
    let n = w.len();
    let total: f64 = w.iter().map(|v| v * v).sum();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k.min(n) {
            continue;
        }
        let rest: f64 = (0..n).filter(|i| mask >> i & 1 == 0).map(|i| w[i] * w[i]).sum();
        best = best.min(rest);
    }
    (best / total).sqrt()
}

#[test]
fn ground_truth_agreement() {
    let noise: NoiseModel = "rademacher:0.1".parse().unwrap();
    let (c, s, n, m) = (0.1, 0.8, 10, 100_000);
    for (mname, k) in [("rademacher", 1usize), ("rademacher", 2), ("uniform+std", 1)] {
        let model: MarginalModel = mname.parse().unwrap();
        let params = GeneralParams::new(k, c, s, 2.0);
        let orders = if k == 1 { vec![4] } else { vec![6, 4] };
        let schedule = build_schedule(k, params.eps(), 2.0, &model, ScheduleMode::Practical(orders), 1e-12).unwrap();
        for (side, want) in [(0u64, Decision::Sparse), (1, Decision::FarFromSparse)] {
            let mut agree = 0;
            for i in 0..200u64 {
                let seed = derive_seed(derive_seed(k as u64, side), i);
                let w = if side == 0 {
                    random_k_sparse(n, k, 1.0, seed).unwrap()
                } else {
                    random_far(n, k, s, 1.0, seed).unwrap()
                };
                let d = dist_to_k_sparse(&w, k).unwrap();
                assert!(if side == 0 { d <= c } else { d >= s });
                let b = sample_labels(&model, &noise, &w, m, derive_seed(seed, 1)).unwrap();
                let v = general_tester(&b, &params, &model, &noise, &schedule).unwrap();
                agree += (v.decision == want) as usize;
            }
            assert!(agree >= 180, "{mname} k={k} side {want:?}: {agree}/200");
        }
    }
}

#[test]
fn verdicts_are_deterministic() {
    let model = MarginalModel::rademacher();
    let noise: NoiseModel = "gaussian:0.2".parse().unwrap();
    let w = random_k_sparse(8, 2, 1.0, 4).unwrap();
    let b = sample_labels(&model, &noise, &w, 20_000, 5).unwrap();
    let params = GeneralParams::new(2, 0.0, 0.5, 1.5);
    let sch = build_schedule(2, params.eps(), 1.5, &model, ScheduleMode::Practical(vec![6, 4]), 1e-12).unwrap();
    let a = general_tester(&b, &params, &model, &noise, &sch).unwrap();
    let again = general_tester(&b, &params, &model, &noise, &sch).unwrap();
    assert_eq!(a, again);
    let sp = SymPolyParams::new(2, 0.5, 1.5);
    assert_eq!(sym_poly_tester(&b, &sp, &model, &noise).unwrap(), sym_poly_tester(&b, &sp, &model, &noise).unwrap());
}

#[test]
fn all_noise_labels_are_degenerate_sparse() {
    let model = MarginalModel::rademacher();
    let noise: NoiseModel = "rademacher:1".parse().unwrap();
    let w = WeightVector::new(vec![0.0, 0.0, 1e-9]).unwrap();
    let b = sample_labels(&model, &noise, &w, 10_000, 1).unwrap();
    let params = GeneralParams::new(1, 0.0, 0.5, 2.0);
    let sch = build_schedule(1, params.eps(), 2.0, &model, ScheduleMode::Practical(vec![4]), 1e-12).unwrap();
    let v = general_tester(&b, &params, &model, &noise, &sch).unwrap();
    assert_eq!(v.decision, Decision::Sparse);
    assert!(v.flags.degenerate_norm || v.flags.clamped_norm);
}

#[test]
fn gaussian_marginal_has_no_schedule() {
    let g = MarginalModel::standard_gaussian();
    assert!(build_schedule(1, 0.1, 1.0, &g, ScheduleMode::PaperExact, 1e-12).is_err());
    assert!(build_schedule(1, 0.1, 1.0, &MarginalModel::rademacher(), ScheduleMode::Practical(vec![5]), 1e-12).is_err());
}

#[test]
fn sym_poly_soundness_floor() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut checked = 0;
    while checked < 100 {
        let n = rng.random_range(2..=10);
        let k = rng.random_range(1..=3usize.min(n - 1));
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let wv = WeightVector::new(w.clone()).unwrap();
        let eps = dist_to_k_sparse(&wv, k).unwrap();
        if eps < 0.05 {
            continue;
        }
        let sq: Vec<f64> = w.iter().map(|v| v * v).collect();
        let lhs = sym_by_subsets(&sq, k + 1);
        let fact: f64 = (1..=k + 1).map(|i| i as f64).product();
        let rhs = wv.norm2().powi(2 * k as i32 + 2) * eps.powi(2 * k as i32) / fact;
        assert!(lhs >= rhs * (1.0 - 1e-12), "n={n} k={k}: {lhs} < {rhs}");
        checked += 1;
    }
}

#[test]
fn newton_identities_match_subsets() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..30 {
        let n = rng.random_range(1..=7);
        let v: Vec<BigRational> = (0..n).map(|_| random_rational(&mut rng)).collect();
        let p: Vec<BigRational> = (1..=n)
            .map(|j| v.iter().fold(BigRational::zero(), |acc, x| acc + num_traits::pow(x.clone(), j)))
            .collect();
        let e = newton_sym_from_power_sums(&p);
        for r in 1..=n {
            assert_eq!(e[r - 1], sym_by_subsets_exact(&v, r), "n={n} r={r}");
        }
    }
}

fn ln_rational(q: &BigRational) -> f64 {
    fn ln_int(v: &BigInt) -> f64 {
        let bits = v.bits();
        let shift = bits.saturating_sub(60);
        let top = (v >> shift).to_f64().unwrap();
        top.ln() + shift as f64 * std::f64::consts::LN_2
    }
    ln_int(&q.numer().abs()) - ln_int(q.denom())
}

/// |q|^{1/r} to about `bits` relative bits, via an integer r-th root.
fn root_rational(q: &BigRational, r: u32, bits: u64) -> BigRational {
    let (num, den) = (q.numer().abs(), q.denom().clone());
    let e = den.bits() as i64 - num.bits() as i64;
    let per = bits as i64 + e.div_euclid(r as i64) + 1;
    let shift = (r as i64 * per).max(0) as u64;
    let scaled: BigInt = (num << shift) / den;
    BigRational::new(scaled.nth_root(r), BigInt::one() << (shift / r as u64))
}

/// The peeling recursion with exact power sums. Each earlier w̃_i enters the
/// next residual as R_i^{ℓ_j/ℓ_i}, computed to 4000 bits; only the reported
/// roots are rounded to f64. Orders must divide each other.
fn exact_recursion(w: &[BigRational], orders: &[usize]) -> Vec<f64> {
    let mut out: Vec<f64> = vec![];
    let mut residuals: Vec<(usize, BigRational)> = vec![];
    for &l in orders {
        let mut r: BigRational = w.iter().fold(BigRational::zero(), |a, x| a + num_traits::pow(x.abs(), l));
        for (li, ri) in &residuals {
            assert_eq!(li % l, 0);
            if !ri.is_zero() {
                r -= root_rational(ri, (li / l) as u32, 4000);
            }
        }
        let w_j = if r.is_zero() { 0.0 } else { (ln_rational(&r) / l as f64).exp().min(1.0) };
        out.push(w_j);
        // Capped roots feed forward as 1.
        let r_abs = if w_j >= 1.0 { BigRational::one() } else { r.abs() };
        residuals.push((l, r_abs));
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn dist_matches_brute_force(w in prop::collection::vec(-3.0f64..3.0, 1..9), k in 0usize..10) {
        prop_assume!(w.iter().any(|v| *v != 0.0));
        let d = dist_to_k_sparse(&WeightVector::new(w.clone()).unwrap(), k).unwrap();
        let b = if k >= w.len() { 0.0 } else { brute_distance(&w, k) };
        prop_assert!((d - b).abs() <= 1e-12, "{d} vs {b}");
    }

    #[test]
    fn recursion_within_delta(nums in prop::collection::vec(-30i64..=30, 1..=6), den in 1i64..=30, k in 1usize..=2) {
        prop_assume!(nums.iter().any(|v| *v != 0));
        let w: Vec<BigRational> = nums.iter().map(|v| BigRational::new(BigInt::from(*v), BigInt::from(den))).collect();
        prop_assume!(w.iter().all(|v| v.abs() <= BigRational::one()));
        let (orders, deltas) = if k == 1 { (vec![800], vec![0.5]) } else { (vec![6400, 800], vec![0.25, 0.5]) };
        let got = exact_recursion(&w, &orders);
        let mut sorted: Vec<f64> = w.iter().map(|v| v.abs().to_f64().unwrap()).collect();
        sorted.sort_by(|a, b| b.total_cmp(a));
        sorted.resize(sorted.len().max(k), 0.0);
        for j in 0..k {
            prop_assert!((got[j] - sorted[j]).abs() <= deltas[j], "j={j}: {} vs {}", got[j], sorted[j]);
        }
    }

    #[test]
    fn library_recursion_matches_exact(nums in prop::collection::vec(-30i64..=30, 1..=6), den in 30i64..=40) {
        prop_assume!(nums.iter().any(|v| *v != 0));
        let w: Vec<BigRational> = nums.iter().map(|v| BigRational::new(BigInt::from(*v), BigInt::from(den))).collect();
        let orders = [48usize, 12];
        prop_assume!(w.iter().all(|v| v.abs() <= BigRational::one()));
        let sums: Vec<f64> = orders
            .iter()
            .map(|&l| w.iter().fold(BigRational::zero(), |a, x| a + num_traits::pow(x.abs(), l)).to_f64().unwrap())
            .collect();
        let lib = top_magnitudes(&orders, &sums);
        let exact = exact_recursion(&w, &orders);
        prop_assert!((lib[0] - exact[0]).abs() <= 1e-12);
        // Below this the f64 residual cannot resolve the next magnitude.
        let floor = exact[0] * (16.0 * 12.0 * f64::EPSILON).powf(1.0 / 12.0);
        prop_assert!((lib[1] - exact[1]).abs() <= 1e-9 + floor, "{} vs {}", lib[1], exact[1]);
    }
}

#[test]
fn noiseless_recovery() {
    let model = MarginalModel::rademacher();
    let w = WeightVector::new(vec![0.0, 0.7, 0.0, -0.2, 0.0]).unwrap();
    let b = sample_dataset(&model, &NoiseModel::zero(), &w, 12, 3).unwrap();
    match noiseless_recover(&b, 2).unwrap() {
        Recovery::Sparse { support, weights, .. } => {
            assert_eq!(support, vec![1, 3]);
            assert!((weights[0] - 0.7).abs() < 1e-9 && (weights[1] + 0.2).abs() < 1e-9);
        }
        Recovery::NotKSparse => panic!("2-sparse vector rejected"),
    }
    assert!(matches!(noiseless_recover(&b, 1).unwrap(), Recovery::NotKSparse));
}
