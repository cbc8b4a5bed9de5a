use proptest::prelude::*;
use sparsetest::cumulants::{convolve_moments, scale_moments, MomentVector};
use sparsetest::distributions::{
    random_spread, sample_labels, sample_marginal, sample_noise, symmetrize_labels, MarginalModel, NoiseModel,
};
use sparsetest::estimation::{
    calibrate_noise, empirical_abs_moment, empirical_cumulant, empirical_moment, estimate_norm2, estimate_power_sum,
    linf_extract, sample_size_power_sum,
};
use sparsetest::rng::derive_seed;

fn power_sum(w: &[f64], l: usize) -> f64 {
    w.iter().map(|v| v.abs().powi(l as i32)).sum()
}

/// κ_ℓ of (Z − Z′)/√2 given κ_ℓ(Z), ℓ even.
fn sym(kappa: f64, l: usize) -> f64 {
    2.0 * kappa / 2f64.powi(l as i32 / 2)
}

#[test]
fn chebyshev_consistency() {
    let (eps, delta) = (0.1, 0.2);
    let cases: [(&str, &str); 3] = [("rademacher", "zero"), ("uniform+std", "rademacher:0.1"), ("mixture:0.5", "gaussian:0.1")];
    for (ci, (mname, nname)) in cases.iter().enumerate() {
        let model: MarginalModel = mname.parse().unwrap();
        let noise: NoiseModel = nname.parse().unwrap();
        let w = random_spread(5, 1.0, 100 + ci as u64).unwrap();
        for l in [4usize, 6] {
            let kx = model.exact_cumulants(l).unwrap().order(l);
            let kn = noise.cumulant(l).unwrap();
            let m2l_x = model.exact_moments(2 * l).unwrap().order(2 * l);
            let m2l_n = noise.exact_moments(2 * l).unwrap().order(2 * l);
            let calc = sample_size_power_sum(l, eps, delta, kx.abs(), 1.0, m2l_x, m2l_n).unwrap();
            let m = calc.min(1_000_000) as usize;
            let truth = power_sum(w.entries(), l);
            let mut good = 0;
            for s in 0..50u64 {
                let b = sample_labels(&model, &noise, &w, m, derive_seed(ci as u64, s)).unwrap();
                let y = symmetrize_labels(b.y());
                let est = estimate_power_sum(&y, l, sym(kx, l), sym(kn, l)).unwrap();
                good += ((est.value - truth).abs() <= eps) as usize;
            }
            assert!(good as f64 >= (1.0 - delta) * 50.0, "{mname}+{nname} ℓ={l}: {good}/50 (m = {m})");
        }
    }
}

#[test]
fn plug_in_consistency() {
    // Standard error from 20 equal batch splits.
    for name in ["rademacher", "uniform+std", "discrete:-1,0,2+std", "poisson:2+std", "mixture:0.3", "gaussian"] {
        let model: MarginalModel = name.parse().unwrap();
        let x = sample_marginal(&model, 1_000_000, 5).unwrap();
        let exact = model.exact_cumulants(6).unwrap();
        for l in [2usize, 4, 6] {
            let full = empirical_cumulant(&x, l, false).unwrap();
            let parts: Vec<f64> = x.chunks(50_000).map(|c| empirical_cumulant(c, l, false).unwrap()).collect();
            let mean = parts.iter().sum::<f64>() / 20.0;
            let sd = (parts.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / 19.0).sqrt();
            let se = sd / 20f64.sqrt();
            let err = (full - exact.order(l)).abs();
            assert!(err <= 5.0 * se + 1e-12, "{name} ℓ={l}: |{full} − {}| > 5·{se}", exact.order(l));
        }
    }
}

#[test]
fn odd_cumulants_vanish_only_when_flagged() {
    let x = sample_marginal(&"poisson:1".parse().unwrap(), 10_000, 2).unwrap();
    assert!(empirical_cumulant(&x, 3, false).unwrap().abs() > 0.5);
    assert_eq!(empirical_cumulant(&x, 3, true).unwrap(), 0.0);
    assert!((empirical_moment(&[1.0, 2.0, 3.0], 2).unwrap() - 14.0 / 3.0).abs() < 1e-15);
}

/// m_ℓ(w·X) by enumerating the 2ⁿ Rademacher sign patterns.
fn rademacher_sum_moment(w: &[f64], l: usize) -> f64 {
    let n = w.len();
    let mut s = 0.0;
    for mask in 0..(1u32 << n) {
        let v: f64 = w.iter().enumerate().map(|(i, wi)| if mask >> i & 1 == 1 { *wi } else { -wi }).sum();
        s += v.powi(l as i32);
    }
    s / (1u32 << n) as f64
}

fn convolved(w: &[f64], l: usize) -> MomentVector {
    let x = MarginalModel::rademacher().exact_moments(l).unwrap();
    let mut acc = scale_moments(&x, w[0]);
    for wi in &w[1..] {
        acc = convolve_moments(&acc, &scale_moments(&x, *wi)).unwrap();
    }
    acc
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn abs_moment_roots_increase(x in prop::collection::vec(0.0f64..10.0, 1..200), a in 1u32..6, b in 1u32..6) {
        let (k, n) = (a.min(b) as f64, a.max(b) as f64);
        let lo = empirical_abs_moment(&x, k).unwrap().powf(1.0 / k);
        let hi = empirical_abs_moment(&x, n).unwrap().powf(1.0 / n);
        prop_assert!(hi >= lo * (1.0 - 1e-12), "{hi} < {lo}");
    }

    #[test]
    fn moment_sandwich(raw in prop::collection::vec(-1.0f64..1.0, 1..=6)) {
        prop_assume!(raw.iter().any(|v| v.abs() > 1e-3));
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let w: Vec<f64> = raw.iter().map(|v| v / norm).collect();
        let conv = convolved(&w, 8);
        for l in [2usize, 4, 6, 8] {
            let brute = rademacher_sum_moment(&w, l);
            prop_assert!((conv.order(l) - brute).abs() <= 1e-10 * brute.max(1.0));
            let upper = (l as f64).powi(2 * l as i32); // m_ℓ(X) = 1, ‖w‖₂ = 1
            prop_assert!(brute >= 1.0 - 1e-12 && brute <= upper, "ℓ={l}: {brute}");
        }
    }

    #[test]
    fn noisy_moment_sandwich(raw in prop::collection::vec(-1.0f64..1.0, 1..=6), scale in 0.0f64..2.0) {
        prop_assume!(raw.iter().any(|v| v.abs() > 1e-3));
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let w: Vec<f64> = raw.iter().map(|v| v / norm).collect();
        let noise: NoiseModel = format!("rademacher:{scale}").parse().unwrap();
        let mn = noise.exact_moments(8).unwrap();
        let y = convolve_moments(&convolved(&w, 8), &mn).unwrap();
        for l in [2usize, 4, 6, 8] {
            let lf = l as f64;
            let upper = 2f64.powi(l as i32) * (lf.powi(2 * l as i32) + mn.order(l));
            prop_assert!(y.order(l) >= 1.0 - 1e-12 && y.order(l) <= upper, "ℓ={l}: {}", y.order(l));
            // The noise is one more independent sign with weight `scale`.
            let direct = rademacher_sum_moment(&[w.clone(), vec![scale]].concat(), l);
            prop_assert!((y.order(l) - direct).abs() <= 1e-10 * direct.max(1.0));
        }
    }

    #[test]
    fn calculator_monotone(l in 1usize..30, e1 in 0.01f64..1.0, e2 in 0.01f64..1.0, d in 0.01f64..0.5) {
        let a = sample_size_power_sum(l, e1.min(e2), d, 1.0, 1.0, 3.0, 0.0).unwrap();
        let b = sample_size_power_sum(l, e1.max(e2), d, 1.0, 1.0, 3.0, 0.0).unwrap();
        prop_assert!(a >= b);
        let c = sample_size_power_sum(l, e1, d / 2.0, 1.0, 1.0, 3.0, 0.0).unwrap();
        prop_assert!(c >= sample_size_power_sum(l, e1, d, 1.0, 1.0, 3.0, 0.0).unwrap());
    }
}

#[test]
fn calculator_saturates_and_rejects() {
    assert_eq!(sample_size_power_sum(800, 0.1, 0.1, 1e-3, 2.0, 1e10, 0.0).unwrap(), u64::MAX);
    assert!(sample_size_power_sum(4, 0.0, 0.1, 1.0, 1.0, 1.0, 0.0).is_err());
    assert!(sample_size_power_sum(4, 0.1, 0.1, 1.0, 1.0, -1.0, 0.0).is_err());
}

#[test]
fn linf_examples() {
    assert_eq!(linf_extract(-0.3, 4), 0.0);
    assert_eq!(linf_extract(5.0, 2), 1.0);
    assert!((linf_extract(0.0625, 4) - 0.5).abs() < 1e-15);
    // ‖w‖_ℓ → ‖w‖_∞ as ℓ grows.
    let w = [0.6, 0.5, 0.3, 0.2];
    let l = 400;
    let est = linf_extract(power_sum(&w, l), l);
    assert!(est >= 0.6 && est <= 0.6 * 4f64.powf(1.0 / l as f64));
}

#[test]
fn norm2_clamps() {
    let y = [0.1, -0.1, 0.1, -0.1];
    let s = estimate_norm2(&y, 1.0).unwrap();
    assert!(s.clamped && s.value == 0.0);
    let s = estimate_norm2(&y, 0.0).unwrap();
    assert!(!s.clamped && (s.value - 0.01).abs() < 1e-15);
}

#[test]
fn calibration_recovers_noise_cumulants() {
    let noise: NoiseModel = "rademacher:0.5".parse().unwrap();
    let draws = sample_noise(&noise, 400_000, 8).unwrap();
    let cal = calibrate_noise(&draws, 6).unwrap();
    for l in [2usize, 4, 6] {
        assert!((cal.cumulant(l).unwrap() - noise.cumulant(l).unwrap()).abs() < 5e-3, "ℓ={l}");
    }
}
