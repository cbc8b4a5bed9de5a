use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{instance_seed, Construction, LBInstance, Label};
use crate::distributions::{BatchMeta, SampleBatch};
use crate::error::{Error, Result};
use crate::numeric::{LogSumExp, Neumaier};
use crate::rng::stream;
use crate::stats::binomial_stderr;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Hidden-block Gaussian instance. The x rows come from keystream 0, the
/// hidden block from keystream 1 and the label noise from keystream 2, so both
/// labels see the same x for the same seed.
pub fn gen_gaussian_hidden(n: usize, t: usize, c: f64, k: usize, seed: u64, label: Label) -> Result<LBInstance> {
    let construction = Construction::GaussianHidden { c, k };
    construction.validate(n)?;
    let mut rx = stream(seed, 0);
    let x: Vec<f64> = (0..t * n).map(|_| rx.sample(StandardNormal)).collect();
    let block = stream(seed, 1).random_range(0..n / k);
    let mut rz = stream(seed, 2);
    let hidden: Vec<usize> = match label {
        Label::Yes => (block * k..(block + 1) * k).collect(),
        Label::No => vec![],
    };
    let inv = 1.0 / (k as f64).sqrt();
    let sd_no = (1.0 + c * c).sqrt();
    let y: Vec<f64> = (0..t)
        .map(|i| {
            let z: f64 = rz.sample(StandardNormal);
            match label {
                Label::Yes => hidden.iter().map(|&j| x[i * n + j]).sum::<f64>() * inv + c * z,
                Label::No => sd_no * z,
            }
        })
        .collect();
    let meta = BatchMeta { marginal: "gaussian".into(), noise: format!("gaussian:{c}"), seed: Some(seed), n, m: t };
    Ok(LBInstance { construction, label, n, t, seed, batch: SampleBatch::new(Some(x), y, meta, false)?, hidden })
}

/// ln of the no- and yes-densities at (x, y), x row-major t×n. The yes density
/// averages over the n/k hidden blocks by a streamed log-sum-exp.
pub fn gaussian_log_pdfs(x: &[f64], y: &[f64], n: usize, c: f64, k: usize) -> Result<(f64, f64)> {
    Construction::GaussianHidden { c, k }.validate(n)?;
    let t = y.len();
    if x.len() != t * n {
        return Err(Error::Domain(format!("x has {} entries, expected {t}×{n}", x.len())));
    }
    let mut lx = Neumaier::new();
    for v in x {
        lx.add(-0.5 * v * v);
    }
    let lx = lx.value() - 0.5 * LN_2PI * x.len() as f64;

    let v_no = 1.0 + c * c;
    let mut no = Neumaier::new();
    for yi in y {
        no.add(-0.5 * (LN_2PI + v_no.ln()) - yi * yi / (2.0 * v_no));
    }

    let blocks = n / k;
    let inv = 1.0 / (k as f64).sqrt();
    let c2 = c * c;
    let mut acc = vec![0.0f64; blocks];
    for (i, yi) in y.iter().enumerate() {
        let row = &x[i * n..(i + 1) * n];
        for (b, a) in acc.iter_mut().enumerate() {
            let s: f64 = row[b * k..(b + 1) * k].iter().sum::<f64>() * inv;
            let d = yi - s;
            *a += -d * d / (2.0 * c2);
        }
    }
    let mut lse = LogSumExp::new();
    for a in &acc {
        lse.add(*a);
    }
    let per_row = -0.5 * (LN_2PI + c2.ln());
    let yes = lx + lse.value() - (blocks as f64).ln() + per_row * t as f64;
    Ok((lx + no.value(), yes))
}

/// e^{−z²/(2(1+c²))}/√(1+c²), the mean of (1/c)e^{−(z−x)²/(2c²)} over x ~ N(0,1).
pub fn expect1_closed_form(z: f64, c: f64) -> f64 {
    let v = 1.0 + c * c;
    (-z * z / (2.0 * v)).exp() / v.sqrt()
}

/// j-th moment of R(w, y) = Π_i (2πc²)^{−1/2} e^{−(yᵢ−wᵢ)²/(2c²)} over w ~ N(0,1)ᵗ:
/// (2π)^{−jt/2} (c^{j−1}√(j+c²))^{−t} e^{−‖y‖²/(2+2c²/j)}.
pub fn r_moment_closed_form(j: u32, t: u32, c: f64, y_norm2: f64) -> f64 {
    let (jf, tf) = (j as f64, t as f64);
    let ln = -0.5 * jf * tf * LN_2PI - tf * ((jf - 1.0) * c.ln() + 0.5 * (jf + c * c).ln())
        - y_norm2 / (2.0 + 2.0 * c * c / jf);
    ln.exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingResult {
    pub trials: usize,
    pub disagreements: usize,
    pub rate: f64,
    pub stderr: f64,
    /// 100·γ·t.
    pub bound: f64,
}

/// Runs the Gaussian Bayes rule on a mixture-marginal instance and on the
/// Gaussian instance it was coupled from, where each coordinate of x is
/// independently replaced by a random sign with probability γ. Counts how
/// often the two verdicts differ.
pub fn refinement_coupling(n: usize, t: usize, c: f64, gamma: f64, trials: usize, seed: u64) -> Result<CouplingResult> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Domain(format!("γ = {gamma} outside [0, 1]")));
    }
    if trials == 0 {
        return Err(Error::Domain("trials must be ≥ 1".into()));
    }
    let flips: Vec<Result<bool>> = (0..trials)
        .into_par_iter()
        .map(|j| {
            let label = if j % 2 == 0 { Label::Yes } else { Label::No };
            let s = instance_seed(seed, j / 2, label);
            let inst = gen_gaussian_hidden(n, t, c, 1, s, label)?;
            let x = inst.batch.x().expect("generated with x");
            let mut xr = x.to_vec();
            let mut rr = stream(s, 3);
            for v in xr.iter_mut() {
                if rr.random::<f64>() < gamma {
                    *v = if rr.random::<bool>() { 1.0 } else { -1.0 };
                }
            }
            let y = inst.batch.y().to_vec();
            let mut y_mix = y.clone();
            for &h in &inst.hidden {
                for (i, yi) in y_mix.iter_mut().enumerate() {
                    *yi += xr[i * n + h] - x[i * n + h];
                }
            }
            let a = gaussian_log_pdfs(&xr, &y_mix, n, c, 1)?;
            let b = gaussian_log_pdfs(&xr, &y, n, c, 1)?;
            let verdict = |(no, yes): (f64, f64)| (yes > no) as i8 - (no > yes) as i8;
            Ok(verdict(a) != verdict(b))
        })
        .collect();
    let mut disagreements = 0;
    for f in flips {
        disagreements += f? as usize;
    }
    let rate = disagreements as f64 / trials as f64;
    Ok(CouplingResult {
        trials,
        disagreements,
        rate,
        stderr: binomial_stderr(rate, trials as u64),
        bound: 100.0 * gamma * t as f64,
    })
}
