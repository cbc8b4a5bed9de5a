use std::io::{BufRead, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{MarginalModel, NoiseModel};
use crate::error::{Error, Result};
use crate::rng::{stream, ROW_BLOCK};

/// Unknown weight vector w with its cached ℓ₂ norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    entries: Vec<f64>,
    norm2: f64,
}

impl WeightVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyVector("weight vector has length 0".into()));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("weight entries must be finite".into()));
        }
        let norm2 = l2_norm(&entries);
        Ok(Self { entries, norm2 })
    }

    /// e_i scaled by `value`, length n.
    pub fn basis(n: usize, i: usize, value: f64) -> Result<Self> {
        if i >= n {
            return Err(Error::Domain(format!("index {i} out of range for n = {n}")));
        }
        let mut v = vec![0.0; n];
        v[i] = value;
        Self::new(v)
    }

    /// `entries` rescaled to the given ℓ₂ norm.
    pub fn with_norm(entries: Vec<f64>, norm: f64) -> Result<Self> {
        let w = Self::new(entries)?;
        if w.norm2 == 0.0 {
            return Err(Error::Domain("cannot rescale the zero vector".into()));
        }
        let f = norm / w.norm2;
        Self::new(w.entries.into_iter().map(|v| v * f).collect())
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm2(&self) -> f64 {
        self.norm2
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|v| *v == 0.0)
    }
}

/// Overflow-safe Euclidean norm.
pub fn l2_norm(v: &[f64]) -> f64 {
    let scale = v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let s = crate::numeric::neumaier_sum(v.iter().map(|x| (x / scale) * (x / scale)));
    scale * s.sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchMeta {
    pub marginal: String,
    pub noise: String,
    pub seed: Option<u64>,
    pub n: usize,
    pub m: usize,
}

/// m measurement rows (row-major, optional) and their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    x: Option<Vec<f64>>,
    y: Vec<f64>,
    pub meta: BatchMeta,
    pub symmetrized: bool,
}

impl SampleBatch {
    pub fn new(x: Option<Vec<f64>>, y: Vec<f64>, meta: BatchMeta, symmetrized: bool) -> Result<Self> {
        if meta.m != y.len() {
            return Err(Error::Domain(format!("meta.m = {} but {} labels", meta.m, y.len())));
        }
        if let Some(x) = &x {
            if x.len() != meta.m * meta.n {
                return Err(Error::Domain(format!(
                    "x has {} entries, expected {}×{}",
                    x.len(),
                    meta.m,
                    meta.n
                )));
            }
        }
        Ok(Self { x, y, meta, symmetrized })
    }

    /// A batch holding only labels (no design matrix).
    pub fn from_labels(y: Vec<f64>, n: usize) -> Self {
        let meta = BatchMeta {
            marginal: "unknown".into(),
            noise: "unknown".into(),
            seed: None,
            n,
            m: y.len(),
        };
        Self { x: None, y, meta, symmetrized: false }
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn into_labels(self) -> Vec<f64> {
        self.y
    }

    pub fn x(&self) -> Option<&[f64]> {
        self.x.as_deref()
    }

    pub fn has_x(&self) -> bool {
        self.x.is_some()
    }

    pub fn m(&self) -> usize {
        self.y.len()
    }

    pub fn n(&self) -> usize {
        self.meta.n
    }

    pub fn row(&self, i: usize) -> Option<&[f64]> {
        let n = self.meta.n;
        self.x.as_ref().map(|x| &x[i * n..(i + 1) * n])
    }

    /// CSV with header `x1,...,xn,y` (just `y` for label-only batches).
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let n = self.meta.n;
        let with_x = self.x.is_some();
        let mut header: Vec<String> = if with_x { (1..=n).map(|j| format!("x{j}")).collect() } else { vec![] };
        header.push("y".into());
        writeln!(out, "{}", header.join(","))?;
        let mut line = String::new();
        for i in 0..self.m() {
            line.clear();
            if let Some(row) = self.row(i) {
                for v in row {
                    line.push_str(&v.to_string());
                    line.push(',');
                }
            }
            line.push_str(&self.y[i].to_string());
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Config("empty CSV".into()))?
            .map_err(|e| Error::Config(e.to_string()))?;
        let cols: Vec<&str> = header.trim().split(',').map(|c| c.trim()).collect();
        if cols.last() != Some(&"y") {
            return Err(Error::Config("CSV header must end with column 'y'".into()));
        }
        let n = cols.len() - 1;
        for (j, c) in cols[..n].iter().enumerate() {
            if *c != format!("x{}", j + 1) {
                return Err(Error::Config(format!("unexpected column '{c}'")));
            }
        }
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (ln, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::Config(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let vals = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Config(format!("line {}: {e}", ln + 2)))?;
            if vals.len() != n + 1 {
                return Err(Error::Config(format!("line {}: expected {} fields", ln + 2, n + 1)));
            }
            x.extend_from_slice(&vals[..n]);
            y.push(vals[n]);
        }
        let m = y.len();
        let meta = BatchMeta { marginal: "csv".into(), noise: "csv".into(), seed: None, n, m };
        let x = if n > 0 { Some(x) } else { None };
        SampleBatch::new(x, y, meta, false)
    }
}

/// Per-chunk lookup tables: table[c][b] = Σ_{t<8} w_{8c+t}·(±1 by bit t of b).
fn sign_tables(w: &[f64]) -> Vec<[f64; 256]> {
    let chunks = w.len().div_ceil(8);
    (0..chunks)
        .map(|c| {
            let mut t = [0.0; 256];
            for (b, slot) in t.iter_mut().enumerate() {
                let mut acc = 0.0;
                for bit in 0..8 {
                    let j = 8 * c + bit;
                    if j < w.len() {
                        acc += if b >> bit & 1 == 1 { w[j] } else { -w[j] };
                    }
                }
                *slot = acc;
            }
            t
        })
        .collect()
}

struct RowGen<'a> {
    marginal: &'a MarginalModel,
    noise: &'a NoiseModel,
    w: &'a [f64],
    tables: Option<Vec<[f64; 256]>>,
}

impl<'a> RowGen<'a> {
    fn new(marginal: &'a MarginalModel, noise: &'a NoiseModel, w: &'a [f64]) -> Self {
        let tables = marginal.is_rademacher().then(|| sign_tables(w));
        Self { marginal, noise, w, tables }
    }

    /// Fills one block. Rademacher rows consume ⌈n/64⌉ words; other kinds draw
    /// coordinates in order. Noise is drawn after the row.
    fn fill<R: Rng>(&self, rng: &mut R, mut x: Option<&mut [f64]>, y: &mut [f64]) {
        let n = self.w.len();
        match &self.tables {
            Some(tables) => {
                let words = n.div_ceil(64);
                let mut buf = vec![0u64; words];
                for (i, yi) in y.iter_mut().enumerate() {
                    for b in buf.iter_mut() {
                        *b = rng.next_u64();
                    }
                    if let Some(x) = x.as_deref_mut() {
                        let row = &mut x[i * n..(i + 1) * n];
                        for (j, v) in row.iter_mut().enumerate() {
                            *v = if buf[j / 64] >> (j % 64) & 1 == 1 { 1.0 } else { -1.0 };
                        }
                    }
                    let mut acc = 0.0;
                    for (c, t) in tables.iter().enumerate() {
                        acc += t[(buf[c / 8] >> (8 * (c % 8)) & 0xff) as usize];
                    }
                    *yi = acc + self.noise.draw(rng);
                }
            }
            None => {
                for (i, yi) in y.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for j in 0..n {
                        let v = self.marginal.draw(rng);
                        if let Some(x) = x.as_deref_mut() {
                            x[i * n + j] = v;
                        }
                        acc += self.w[j] * v;
                    }
                    *yi = acc + self.noise.draw(rng);
                }
            }
        }
    }
}

fn meta_for(marginal: &MarginalModel, noise: &NoiseModel, seed: u64, n: usize, m: usize) -> BatchMeta {
    BatchMeta {
        marginal: marginal.to_string(),
        noise: noise.to_string(),
        seed: Some(seed),
        n,
        m,
    }
}

/// `count` iid draws; block b of [`ROW_BLOCK`] values uses keystream b of `seed`.
pub fn sample_marginal(model: &MarginalModel, count: usize, seed: u64) -> Result<Vec<f64>> {
    model.check_sampler()?;
    if count == 0 {
        return Err(Error::Domain("count must be ≥ 1".into()));
    }
    let mut out = vec![0.0; count];
    out.par_chunks_mut(ROW_BLOCK).enumerate().for_each(|(b, chunk)| {
        let mut rng = stream(seed, b as u64);
        for v in chunk.iter_mut() {
            *v = model.draw(&mut rng);
        }
    });
    Ok(out)
}

/// `count` iid noise draws, with the same block layout as [`sample_marginal`].
pub fn sample_noise(noise: &NoiseModel, count: usize, seed: u64) -> Result<Vec<f64>> {
    noise.check_sampler()?;
    let mut out = vec![0.0; count];
    out.par_chunks_mut(ROW_BLOCK).enumerate().for_each(|(b, chunk)| {
        let mut rng = stream(seed, b as u64);
        for v in chunk.iter_mut() {
            *v = noise.draw(&mut rng);
        }
    });
    Ok(out)
}

fn check_inputs(marginal: &MarginalModel, noise: &NoiseModel, w: &WeightVector, m: usize) -> Result<()> {
    marginal.check_sampler()?;
    noise.check_sampler()?;
    if w.is_empty() {
        return Err(Error::EmptyVector("weight vector has length 0".into()));
    }
    if m == 0 {
        return Err(Error::Domain("m must be ≥ 1".into()));
    }
    Ok(())
}

/// Rows x ~ marginal^n and labels y = w·x + η. Row block b is generated from
/// keystream b, so the output does not depend on the thread count.
pub fn sample_dataset(
    marginal: &MarginalModel,
    noise: &NoiseModel,
    w: &WeightVector,
    m: usize,
    seed: u64,
) -> Result<SampleBatch> {
    check_inputs(marginal, noise, w, m)?;
    let n = w.len();
    let gen = RowGen::new(marginal, noise, w.entries());
    let mut x = vec![0.0; m * n];
    let mut y = vec![0.0; m];
    x.par_chunks_mut(ROW_BLOCK * n)
        .zip(y.par_chunks_mut(ROW_BLOCK))
        .enumerate()
        .for_each(|(b, (xc, yc))| {
            let mut rng = stream(seed, b as u64);
            gen.fill(&mut rng, Some(xc), yc);
        });
    SampleBatch::new(Some(x), y, meta_for(marginal, noise, seed, n, m), false)
}

/// Same labels as [`sample_dataset`] with the same arguments, without storing x.
pub fn sample_labels(
    marginal: &MarginalModel,
    noise: &NoiseModel,
    w: &WeightVector,
    m: usize,
    seed: u64,
) -> Result<SampleBatch> {
    check_inputs(marginal, noise, w, m)?;
    let n = w.len();
    let gen = RowGen::new(marginal, noise, w.entries());
    let mut y = vec![0.0; m];
    y.par_chunks_mut(ROW_BLOCK).enumerate().for_each(|(b, yc)| {
        let mut rng = stream(seed, b as u64);
        gen.fill(&mut rng, None, yc);
    });
    SampleBatch::new(None, y, meta_for(marginal, noise, seed, n, m), false)
}

/// Pairs rows (2i, 2i+1) into (r₁ − r₂)/√2; an odd trailing row is dropped.
pub fn symmetrize_batch(batch: &SampleBatch) -> Result<SampleBatch> {
    let m = batch.m();
    if m < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: m });
    }
    let half = m / 2;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let y = symmetrize_labels(batch.y());
    let n = batch.meta.n;
    let x = batch.x().map(|x| {
        let mut out = Vec::with_capacity(half * n);
        for i in 0..half {
            let a = &x[2 * i * n..(2 * i + 1) * n];
            let b = &x[(2 * i + 1) * n..(2 * i + 2) * n];
            out.extend(a.iter().zip(b).map(|(p, q)| (p - q) * h));
        }
        out
    });
    let mut meta = batch.meta.clone();
    meta.m = half;
    SampleBatch::new(x, y, meta, true)
}

/// (y_{2i} − y_{2i+1})/√2 for consecutive pairs.
pub fn symmetrize_labels(y: &[f64]) -> Vec<f64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    y.chunks_exact(2).map(|p| (p[0] - p[1]) * h).collect()
}
