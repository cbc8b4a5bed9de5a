//! Acceptance battery. Prints one PASS/FAIL line per criterion.
//!
//! `ACCEPTANCE_ONLY=4,5` restricts the run to the listed criteria and
//! `ACCEPTANCE_STRICT=1` turns any FAIL into a test failure.

mod common;

use std::time::Instant;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use rand_distr::StandardNormal;

use sparsetest::cumulants::{
    bell_polynomial_exact, cumulants_to_moments, find_nonzero_cumulant, mgf_root_search, moments_to_cumulants,
    MomentVector,
};
use sparsetest::distributions::{
    random_far, random_k_sparse, sample_dataset, sample_labels, MarginalKind, MarginalModel, NoiseModel,
};
use sparsetest::lowerbounds::{
    distinguisher_advantage, expect1_closed_form, pooled_labels, r_moment_closed_form, Construction, Label,
};
use sparsetest::numeric::{integrate, ln_abs_rational};
use sparsetest::rng::{derive_seed, seeded};
use sparsetest::stats::{chi_square_integer_samples, clopper_pearson};
use sparsetest::testers::{
    build_schedule, dist_to_k_sparse, general_tester, noiseless_recover, recommended_samples_general,
    recommended_samples_sympoly, sym_poly_tester, Decision, GeneralParams, Recovery, ScheduleMode, SymPolyParams,
};

use common::{random_rational, PartitionOracle};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn criterion_1() -> Outcome {
    let oracle = PartitionOracle::new(10);
    let mut rng = seeded(101);
    let mut mismatches = 0;
    for _ in 0..100 {
        let x: Vec<BigRational> = (0..10).map(|_| random_rational(&mut rng)).collect();
        for l in 1..=10 {
            for k in 1..=l {
                if bell_polynomial_exact(l, k, &x).unwrap() != oracle.eval(l, k, &x) {
                    mismatches += 1;
                }
            }
        }
    }
    // Round trip on moment sequences of random discrete distributions.
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let atoms: Vec<(f64, f64)> = (0..6).map(|_| (rng.random_range(-2.0..2.0), rng.random_range(0.1..1.0))).collect();
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        for l in 1..=12 {
            let m: Vec<f64> = (1..=l)
                .map(|j| atoms.iter().map(|(v, p)| p / total * v.powi(j as i32)).sum())
                .collect();
            let mv = MomentVector::new(m.clone());
            let back = cumulants_to_moments(&moments_to_cumulants(&mv).unwrap()).unwrap();
            for (a, b) in m.iter().zip(back.as_slice()) {
                worst = worst.max((a - b).abs() / a.abs().max(1.0));
            }
        }
    }
    outcome(mismatches == 0 && worst <= 1e-9, format!("bell mismatches {mismatches}; round-trip error {worst:.2e}"))
}

fn criterion_2() -> Outcome {
    let g = MarginalModel::standard_gaussian().exact_cumulants(10).unwrap();
    let gmax = (3..=10).map(|l| g.order(l).abs()).fold(0.0, f64::max);
    let r = MarginalModel::rademacher().exact_cumulants(6).unwrap();
    let p = MarginalModel::new(MarginalKind::Poisson { lambda: 1.0 }, false).unwrap();
    let pr = p.exact_moments_rational(4).unwrap().unwrap();
    let pk = sparsetest::cumulants::moments_to_cumulants_exact(&pr).unwrap();
    let poisson_ok = pk.iter().all(|v| v.is_one());
    let mut mix_err = 0.0f64;
    for gamma in [1e-2, 1e-3] {
        let m = MarginalModel::new(MarginalKind::GaussBernoulliMixture { gamma }, false).unwrap();
        mix_err = mix_err.max((m.exact_cumulants(4).unwrap().order(4) + 2.0 * gamma).abs());
    }
    let pass = gmax <= 1e-9 && r.order(4) == -2.0 && r.order(6) == 16.0 && poisson_ok && mix_err <= 1e-12;
    outcome(
        pass,
        format!(
            "gaussian max|κ₃..κ₁₀| {gmax:.1e}; rademacher κ₄ {} κ₆ {}; poisson κ₁..κ₄ = 1 {poisson_ok}; mixture err {mix_err:.1e}",
            r.order(4),
            r.order(6)
        ),
    )
}

fn criterion_3() -> Outcome {
    let l = 800u32;
    let delta = 0.5;
    let mut rng = seeded(303);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(2..=12);
        let raw: Vec<BigRational> = (0..n).map(|_| random_rational(&mut rng)).collect();
        if raw.iter().all(|v| v.is_zero()) {
            continue;
        }
        // Scale by 1/(Σ|wᵢ|) so that ‖w‖₂ ≤ ‖w‖₁ = 1 in exact arithmetic.
        let l1: BigRational = raw.iter().map(|v| v.abs()).fold(BigRational::zero(), |a, b| a + b);
        let w: Vec<BigRational> = raw.iter().map(|v| v / &l1).collect();
        let m: BigRational = w.iter().map(|v| num_traits::pow(v.clone(), l as usize)).fold(BigRational::zero(), |a, b| a + b);
        let root = (ln_abs_rational(&m) / l as f64).exp();
        let linf = w.iter().map(|v| v.abs()).max().unwrap();
        let linf = sparsetest::numeric::rational_to_f64(&linf);
        worst = worst.max((root - linf).abs());
    }
    outcome(worst <= delta, format!("max |M^(1/ℓ) − ‖w‖∞| = {worst:.3e} (δ = {delta})"))
}

const BATTERY_SEEDS: u64 = 50;
const SAMPLE_CAP: u64 = 10_000_000;

struct Group {
    label: String,
    correct: u64,
    trials: u64,
}

impl Group {
    fn ok(&self) -> bool {
        let (_, hi) = clopper_pearson(self.correct, self.trials, 0.95).unwrap();
        self.correct * 10 >= self.trials * 9 || hi >= 0.9
    }
}

/// Runs the sym-poly and general testers on the same yes/no battery.
fn criteria_4_and_5() -> (Outcome, Outcome) {
    let rad = MarginalModel::rademacher();
    let c_bound = 2.0;
    let n = 20;
    let mut sym_groups = vec![];
    let mut gen_groups = vec![];
    for noise_spec in ["zero", "rademacher:0.1"] {
        let noise: NoiseModel = noise_spec.parse().unwrap();
        for k in [1usize, 2] {
            let sp = SymPolyParams::new(k, 0.5, c_bound);
            let gp = GeneralParams::new(k, 0.1, 0.9, c_bound);
            let orders = if k == 1 { vec![4] } else { vec![6, 4] };
            let sch = build_schedule(k, gp.eps(), c_bound, &rad, ScheduleMode::Practical(orders), 1e-12).unwrap();
            let m_sym = recommended_samples_sympoly(&sp, &rad, &noise).unwrap().min(SAMPLE_CAP);
            let m_gen = recommended_samples_general(&sch, &gp, &rad, &noise).unwrap().min(SAMPLE_CAP);
            for yes in [true, false] {
                let side = if yes { "yes" } else { "no" };
                let master = derive_seed(0xacce_0045, (k as u64) << 8 | (noise_spec.len() as u64) << 1 | yes as u64);
                let (mut cs, mut cg) = (0, 0);
                for s in 0..BATTERY_SEEDS {
                    let ws = derive_seed(master, 2 * s);
                    let w = if yes { random_k_sparse(n, k, 1.0, ws) } else { random_far(n, k, 0.9, 1.0, ws) }.unwrap();
                    let d = dist_to_k_sparse(&w, k).unwrap();
                    let bseed = derive_seed(master, 2 * s + 1);
                    let b_sym = sample_labels(&rad, &noise, &w, m_sym as usize, bseed).unwrap();
                    let v = sym_poly_tester(&b_sym, &sp, &rad, &noise).unwrap();
                    let sym_truth = if d == 0.0 { Decision::Sparse } else if d >= 0.5 { Decision::FarFromSparse } else { unreachable!() };
                    cs += (v.decision == sym_truth) as u64;
                    let b_gen = if m_gen == m_sym { b_sym } else { sample_labels(&rad, &noise, &w, m_gen as usize, bseed).unwrap() };
                    let g = general_tester(&b_gen, &gp, &rad, &noise, &sch).unwrap();
                    let gen_truth = if d <= 0.1 { Decision::Sparse } else { Decision::FarFromSparse };
                    cg += (g.decision == gen_truth) as u64;
                }
                let label = format!("noise={noise_spec} k={k} {side}");
                sym_groups.push(Group { label: format!("{label} m={m_sym}"), correct: cs, trials: BATTERY_SEEDS });
                gen_groups.push(Group { label: format!("{label} m={m_gen}"), correct: cg, trials: BATTERY_SEEDS });
            }
        }
    }
    let summarize = |gs: &[Group]| {
        gs.iter().map(|g| format!("{} {}/{}", g.label, g.correct, g.trials)).collect::<Vec<_>>().join("; ")
    };
    let o4 = outcome(sym_groups.iter().all(Group::ok), summarize(&sym_groups));
    let o5 = outcome(gen_groups.iter().all(Group::ok), summarize(&gen_groups));
    (o4, o5)
}

/// Diagnostic only: the sym-poly k = 2 yes side at the smallest promised norm 1/C.
fn criterion_4_small_norm() -> String {
    let rad = MarginalModel::rademacher();
    let c_bound = 2.0;
    let n = 20;
    let mut diag = vec![];
    for noise_spec in ["zero", "rademacher:0.1"] {
        let noise: NoiseModel = noise_spec.parse().unwrap();
        let sp = SymPolyParams::new(2, 0.5, c_bound);
        let mut ok = 0;
        for s in 0..BATTERY_SEEDS {
            let w = random_k_sparse(n, 2, 1.0 / c_bound, derive_seed(0xd1a6, 2 * s)).unwrap();
            let b = sample_labels(&rad, &noise, &w, SAMPLE_CAP as usize, derive_seed(0xd1a6, 2 * s + 1)).unwrap();
            ok += (sym_poly_tester(&b, &sp, &rad, &noise).unwrap().decision == Decision::Sparse) as u64;
        }
        diag.push(format!("noise={noise_spec} {ok}/{BATTERY_SEEDS}"));
    }
    format!("sym-poly k=2 yes side at ‖w‖₂ = 1/C: {}", diag.join("; "))
}

fn criterion_6() -> Outcome {
    let hidden = Construction::GaussianHidden { c: 0.1, k: 1 };
    let big = distinguisher_advantage(hidden, 10_000, 2, 10_000, 0x6a).unwrap();
    let small = distinguisher_advantage(hidden, 16, 40, 1_000, 0x6b).unwrap();
    outcome(
        big.advantage.abs() <= 0.02 && small.advantage >= 0.3,
        format!(
            "n=10⁴ t=2 advantage {:.4} ± {:.4}; n=16 t=40 advantage {:.4} ± {:.4}",
            big.advantage, big.stderr, small.advantage, small.stderr
        ),
    )
}

/// Diagnostic only: criterion 6's first setting at ten times the dimension.
fn criterion_6_wide() -> String {
    let wide = distinguisher_advantage(Construction::GaussianHidden { c: 0.1, k: 1 }, 100_000, 2, 10_000, 0x6c).unwrap();
    format!("n=10⁵ t=2 advantage {:.4} ± {:.4}", wide.advantage, wide.stderr)
}

fn criterion_7() -> Outcome {
    let c = Construction::PoissonNonIid { spread: 2 };
    let adv = distinguisher_advantage(c, 10_000, 2, 10_000, 0x7a).unwrap();
    let yes = pooled_labels(c, 10_000, 10, 10_000, 0x7b, Label::Yes).unwrap();
    let no = pooled_labels(c, 10_000, 10, 10_000, 0x7c, Label::No).unwrap();
    let chi = chi_square_integer_samples(&yes, &no).unwrap();
    outcome(
        adv.advantage <= 0.05 && chi.p_value >= 0.01,
        format!(
            "advantage {:.4} ± {:.4}; ȳ chi-square p = {:.3} on {} + {} labels",
            adv.advantage,
            adv.stderr,
            chi.p_value,
            yes.len(),
            no.len()
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..10 {
        for j in 0..10 {
            let z = -4.0 + 8.0 * i as f64 / 9.0;
            let c = 0.05 + 1.95 * j as f64 / 9.0;
            let f = |x: f64| {
                (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt() * (-(z - x) * (z - x) / (2.0 * c * c)).exp() / c
            };
            // Outside z ± 40c the Gaussian kernel is below e^{−800}.
            let q = integrate(f, z - 40.0 * c, z + 40.0 * c, 1e-12).unwrap().value;
            worst = worst.max((q - expect1_closed_form(z, c)).abs());
        }
    }
    let mut rng = seeded(808);
    let mut worst_z = 0.0f64;
    let c = 1.0;
    let draws = 400_000;
    for t in 1..=3u32 {
        let y: Vec<f64> = (0..t).map(|i| 0.3 * i as f64 - 0.2).collect();
        let y2: f64 = y.iter().map(|v| v * v).sum();
        for j in 1..=4u32 {
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..draws {
                let mut ln_r = 0.0;
                for yi in &y {
                    let w: f64 = rng.sample(StandardNormal);
                    ln_r += -0.5 * (2.0 * std::f64::consts::PI * c * c).ln() - (yi - w) * (yi - w) / (2.0 * c * c);
                }
                let v = (j as f64 * ln_r).exp();
                s += v;
                s2 += v * v;
            }
            let mean = s / draws as f64;
            let se = ((s2 / draws as f64 - mean * mean) / draws as f64).sqrt();
            worst_z = worst_z.max((mean - r_moment_closed_form(j, t, c, y2)).abs() / se);
        }
    }
    outcome(worst <= 1e-6 && worst_z <= 3.0, format!("expect1 max error {worst:.2e}; r-moment max |z| {worst_z:.2}"))
}

fn criterion_9() -> Outcome {
    let g = MarginalModel::standard_gaussian();
    let zero = NoiseModel::zero();
    let (mut exact, mut rejected) = (0, 0);
    for s in 0..50u64 {
        let w = random_k_sparse(10, 2, 1.0, derive_seed(0x9a, s)).unwrap();
        let support: Vec<usize> = (0..10).filter(|&i| w.entries()[i] != 0.0).collect();
        let b = sample_dataset(&g, &zero, &w, 3, derive_seed(0x9b, s)).unwrap();
        if let Recovery::Sparse { support: got, weights, .. } = noiseless_recover(&b, 2).unwrap() {
            let close = got.iter().zip(&weights).all(|(&i, v)| (w.entries()[i] - v).abs() < 1e-8);
            exact += (got == support && close) as u32;
        }
        let w3 = random_k_sparse(10, 3, 1.0, derive_seed(0x9c, s)).unwrap();
        let b3 = sample_dataset(&g, &zero, &w3, 3, derive_seed(0x9d, s)).unwrap();
        rejected += (noiseless_recover(&b3, 2).unwrap() == Recovery::NotKSparse) as u32;
    }
    outcome(exact == 50 && rejected == 50, format!("2-sparse recovered {exact}/50; 3-sparse rejected {rejected}/50"))
}

fn criterion_10() -> Outcome {
    let rad = MarginalModel::rademacher();
    let order = find_nonzero_cumulant(&rad, 2, 20, 1.0).unwrap();
    let root = mgf_root_search(&rad, None).unwrap();
    let err = (root.modulus() - std::f64::consts::FRAC_PI_2).abs();
    outcome(order == Some(4) && err <= 1e-6, format!("first nonzero cumulant {order:?}; |z₀| − π/2 = {err:.2e}"))
}

fn report(id: u32, limit_s: f64, start: Instant, o: Outcome, failures: &mut Vec<u32>) {
    let secs = start.elapsed().as_secs_f64();
    let pass = o.pass && secs <= limit_s;
    if !pass {
        failures.push(id);
    }
    println!(
        "criterion {id:>2}: {} ({secs:.1}s, limit {limit_s}s) {}",
        if pass { "PASS" } else { "FAIL" },
        o.detail
    );
}

#[test]
fn acceptance() {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|v| v.trim().parse().ok()).collect());
    let run = |id: u32| only.as_ref().is_none_or(|o| o.contains(&id));
    let mut failures = vec![];
    let singles: [(u32, f64, fn() -> Outcome); 7] = [
        (1, 10.0, criterion_1),
        (2, 1.0, criterion_2),
        (3, 60.0, criterion_3),
        (7, 300.0, criterion_7),
        (8, 120.0, criterion_8),
        (9, 30.0, criterion_9),
        (10, 30.0, criterion_10),
    ];
    for (id, limit, f) in singles.iter().take(3) {
        if run(*id) {
            let t = Instant::now();
            report(*id, *limit, t, f(), &mut failures);
        }
    }
    if run(4) || run(5) {
        // Both testers read the same batches; the shared run counts against both limits.
        let t = Instant::now();
        let (o4, o5) = criteria_4_and_5();
        report(4, 600.0, t, o4, &mut failures);
        report(5, 900.0, t, o5, &mut failures);
        println!("              note: {}", criterion_4_small_norm());
    }
    if run(6) {
        let t = Instant::now();
        report(6, 300.0, t, criterion_6(), &mut failures);
        println!("              note: {}", criterion_6_wide());
    }
    for (id, limit, f) in singles.iter().skip(3) {
        if run(*id) {
            let t = Instant::now();
            report(*id, *limit, t, f(), &mut failures);
        }
    }
    println!("acceptance: {} failing criteria {failures:?}", failures.len());
    if std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        assert!(failures.is_empty(), "failing criteria {failures:?}");
    }
}
