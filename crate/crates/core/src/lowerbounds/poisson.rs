use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::{Construction, LBInstance, Label};
use crate::distributions::{BatchMeta, SampleBatch};
use crate::error::{Error, Result};
use crate::numeric::ln_factorial;
use crate::rng::stream;

/// Exact likelihoods enumerate column profiles of at most this many rows.
pub const MAX_PROFILE_ROWS: usize = 8;

type Profile = [u32; MAX_PROFILE_ROWS];

fn poisson(lambda: f64) -> Result<Poisson<f64>> {
    Poisson::new(lambda).map_err(|e| Error::Domain(format!("Poisson({lambda}): {e}")))
}

fn finish(
    construction: Construction,
    label: Label,
    n: usize,
    m: usize,
    seed: u64,
    x: Vec<f64>,
    y: Vec<f64>,
    hidden: Vec<usize>,
    marginal: String,
    noise: String,
) -> Result<LBInstance> {
    let meta = BatchMeta { marginal, noise, seed: Some(seed), n, m };
    Ok(LBInstance { construction, label, n, t: m, seed, batch: SampleBatch::new(Some(x), y, meta, false)?, hidden })
}

/// Split-rate Poisson instance without noise. x comes from keystream 0 and the
/// hidden indices from keystream 1.
pub fn gen_poisson_noniid(n: usize, m: usize, spread: u32, seed: u64, label: Label) -> Result<LBInstance> {
    let construction = Construction::PoissonNonIid { spread };
    construction.validate(n)?;
    let half = n / 2;
    let (low, high) = (poisson(1.0)?, poisson(spread as f64)?);
    let mut rx = stream(seed, 0);
    let mut x = vec![0.0; m * n];
    for row in x.chunks_exact_mut(n.max(1)) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if j < half { low.sample(&mut rx) } else { high.sample(&mut rx) };
        }
    }
    let mut rh = stream(seed, 1);
    let hidden: Vec<usize> = match label {
        Label::Yes => vec![rh.random_range(half..n)],
        Label::No => (0..spread).map(|_| rh.random_range(0..half)).collect(),
    };
    let y = (0..m).map(|i| hidden.iter().map(|&j| x[i * n + j]).sum()).collect();
    finish(construction, label, n, m, seed, x, y, hidden, format!("poisson:1|poisson:{spread}"), "zero".into())
}

/// Poisson instance whose labels differ only through the noise rate. x comes
/// from keystream 0, hidden indices from keystream 1 and noise from keystream 2.
pub fn gen_poisson_unknown_noise(n: usize, m: usize, spread: u32, seed: u64, label: Label) -> Result<LBInstance> {
    let construction = Construction::PoissonUnknownNoise { spread };
    construction.validate(n)?;
    let unit = poisson(1.0)?;
    let mut rx = stream(seed, 0);
    let x: Vec<f64> = (0..m * n).map(|_| unit.sample(&mut rx)).collect();
    let mut rh = stream(seed, 1);
    let (hidden, noise_rate): (Vec<usize>, u32) = match label {
        Label::Yes => (vec![rh.random_range(0..n)], spread),
        Label::No => ((0..spread).map(|_| rh.random_range(0..n)).collect(), 1),
    };
    let noise = poisson(noise_rate as f64)?;
    let mut rz = stream(seed, 2);
    let y = (0..m)
        .map(|i| hidden.iter().map(|&j| x[i * n + j]).sum::<f64>() + noise.sample(&mut rz))
        .collect();
    finish(construction, label, n, m, seed, x, y, hidden, "poisson:1".into(), format!("poisson:{noise_rate}"))
}

fn to_count(v: f64) -> Result<u32> {
    if v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f64 {
        Ok(v as u32)
    } else {
        Err(Error::Domain(format!("{v} is not a nonnegative integer count")))
    }
}

/// Counts of the column profiles (x_{1j}, …, x_{mj}) over `cols` that fit
/// under `cap`, sorted by profile so that later sums are deterministic.
fn profile_counts(x: &[f64], n: usize, m: usize, cols: std::ops::Range<usize>, cap: &Profile) -> Result<Vec<(Profile, f64)>> {
    let mut map: HashMap<Profile, u64> = HashMap::new();
    'col: for j in cols {
        let mut p = [0u32; MAX_PROFILE_ROWS];
        for i in 0..m {
            let v = to_count(x[i * n + j])?;
            if v > cap[i] {
                continue 'col;
            }
            p[i] = v;
        }
        *map.entry(p).or_insert(0) += 1;
    }
    let mut out: Vec<(Profile, f64)> = map.into_iter().map(|(p, c)| (p, c as f64)).collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

/// r-fold self-convolution of a (scaled) profile histogram restricted to the box under `cap`.
fn convolve_power(hist: &[(Profile, f64)], r: u32, m: usize, cap: &Profile) -> BTreeMap<Profile, f64> {
    let mut cur: BTreeMap<Profile, f64> = BTreeMap::new();
    cur.insert([0; MAX_PROFILE_ROWS], 1.0);
    for _ in 0..r {
        let mut next: BTreeMap<Profile, f64> = BTreeMap::new();
        for (a, ca) in &cur {
            'inner: for (b, cb) in hist {
                let mut s = [0u32; MAX_PROFILE_ROWS];
                for i in 0..m {
                    s[i] = a[i] + b[i];
                    if s[i] > cap[i] {
                        continue 'inner;
                    }
                }
                *next.entry(s).or_insert(0.0) += ca * cb;
            }
        }
        cur = next;
    }
    cur
}

fn ln_poisson_pmf(v: u32, lambda: f64) -> f64 {
    v as f64 * lambda.ln() - lambda - ln_factorial(v as u64)
}

/// ln-likelihoods (no, yes) of the labels given the column profiles of x,
/// for the Poisson constructions. The x factor, common to both labels, is
/// omitted. Exact up to rounding; at most [`MAX_PROFILE_ROWS`] rows.
pub fn poisson_log_likelihoods(construction: Construction, x: &[f64], y: &[f64], n: usize) -> Result<(f64, f64)> {
    construction.validate(n)?;
    let m = y.len();
    if m == 0 || m > MAX_PROFILE_ROWS {
        return Err(Error::Precondition(format!(
            "exact likelihoods need 1..={MAX_PROFILE_ROWS} rows, got {m}"
        )));
    }
    if x.len() != m * n {
        return Err(Error::Domain(format!("x has {} entries, expected {m}×{n}", x.len())));
    }
    let mut cap = [0u32; MAX_PROFILE_ROWS];
    for (i, v) in y.iter().enumerate() {
        cap[i] = to_count(*v)?;
    }
    match construction {
        Construction::PoissonNonIid { spread } => {
            let half = n / 2;
            let h = half as f64;
            // Keep counts as exact integers while h^r stays below 2^53 so
            // that genuine ties compare equal; otherwise work with frequencies.
            let f = if spread as f64 * h.ln() < 53.0 * std::f64::consts::LN_2 { 1.0 } else { 1.0 / h };
            let mut first = profile_counts(x, n, m, 0..half, &cap)?;
            for e in first.iter_mut() {
                e.1 *= f;
            }
            let second = profile_counts(x, n, m, half..n, &cap)?;
            let hit = second.iter().find(|e| e.0 == cap).map_or(0.0, |e| e.1);
            let tuples = convolve_power(&first, spread, m, &cap).get(&cap).copied().unwrap_or(0.0);
            let hf = h * f;
            let common = spread as f64 * hf.ln();
            let yes = (hit * f * hf.powi(spread as i32 - 1)).ln() - common;
            let no = tuples.ln() - common;
            Ok((no, yes))
        }
        Construction::PoissonUnknownNoise { spread } => {
            let nf = n as f64;
            let hist: Vec<(Profile, f64)> =
                profile_counts(x, n, m, 0..n, &cap)?.into_iter().map(|(p, c)| (p, c / nf)).collect();
            let noise_ln = |a: &Profile, lambda: f64| -> f64 {
                (0..m).map(|i| ln_poisson_pmf(cap[i] - a[i], lambda)).sum()
            };
            let yes: f64 = hist.iter().map(|(a, w)| w * noise_ln(a, spread as f64).exp()).sum();
            let conv = convolve_power(&hist, spread, m, &cap);
            let no: f64 = conv.iter().map(|(a, w)| w * noise_ln(a, 1.0).exp()).sum();
            Ok((no.ln(), yes.ln()))
        }
        Construction::GaussianHidden { .. } => {
            Err(Error::Precondition("Gaussian instances use gaussian_log_pdfs".into()))
        }
    }
}
