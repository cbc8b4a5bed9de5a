use std::cell::Cell;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::MAX_ORDER;
use crate::distributions::{MarginalKind, MarginalModel};
use crate::error::{Error, Result};

fn require_symmetric_unit(model: &MarginalModel) -> Result<()> {
    if !model.is_symmetric() {
        return Err(Error::Precondition(
            "cumulant gap search needs a symmetric model; symmetrize first".into(),
        ));
    }
    let m2 = model.exact_moments(2)?.order(2);
    if (m2 - 1.0).abs() > 1e-12 {
        return Err(Error::Precondition(format!(
            "cumulant gap search needs unit variance, got {m2}"
        )));
    }
    Ok(())
}

/// Smallest even order j in (ℓ_start, L_max] with |κ_j| ≥ threshold, if any.
pub fn find_nonzero_cumulant(
    model: &MarginalModel,
    l_start: usize,
    l_max: usize,
    threshold: f64,
) -> Result<Option<usize>> {
    if !(threshold > 0.0) {
        return Err(Error::Domain(format!("threshold {threshold} must be positive")));
    }
    if l_max > MAX_ORDER {
        return Err(Error::Truncated { available: MAX_ORDER, requested: l_max });
    }
    require_symmetric_unit(model)?;
    if l_max <= l_start {
        return Ok(None);
    }
    let k = model.exact_cumulants(l_max)?;
    let first = if l_start % 2 == 0 { l_start + 2 } else { l_start + 1 };
    Ok((first.max(2)..=l_max)
        .step_by(2)
        .find(|&j| k.order(j).abs() >= threshold))
}

/// A located zero of the moment generating function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MgfRoot {
    pub re: f64,
    pub im: f64,
    /// |M_X(z₀)| at the returned point.
    pub residual: f64,
    pub evaluations: usize,
}

impl MgfRoot {
    pub fn z(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn modulus(&self) -> f64 {
        self.z().norm()
    }
}

enum Mgf {
    Atoms(Vec<f64>),
    Uniform(f64, f64),
}

impl Mgf {
    fn of(model: &MarginalModel) -> Result<Self> {
        let (shift, scale) = model.affine();
        let t = |v: f64| (v - shift) / scale;
        Ok(match model.kind() {
            MarginalKind::Rademacher => Mgf::Atoms(vec![t(-1.0), t(1.0)]),
            MarginalKind::GaussBernoulliMixture { gamma } if *gamma == 1.0 => {
                Mgf::Atoms(vec![t(-1.0), t(1.0)])
            }
            MarginalKind::DiscreteUniform(s) => Mgf::Atoms(s.iter().map(|&v| t(v)).collect()),
            MarginalKind::ContinuousUniform { a, b } => Mgf::Uniform(t(*a), t(*b)),
            other => {
                return Err(Error::Precondition(format!(
                    "MGF root search needs bounded support; {} is unbounded",
                    other.name()
                )))
            }
        })
    }

    /// (M(z), M′(z)).
    fn eval(&self, z: Complex64) -> (Complex64, Complex64) {
        match self {
            Mgf::Atoms(pts) => {
                let p = 1.0 / pts.len() as f64;
                let mut m = Complex64::new(0.0, 0.0);
                let mut d = Complex64::new(0.0, 0.0);
                for &x in pts {
                    let e = (z * x).exp();
                    m += e * p;
                    d += e * (x * p);
                }
                (m, d)
            }
            Mgf::Uniform(a, b) => {
                let w = b - a;
                if z.norm() < 1e-8 {
                    return (Complex64::new(1.0, 0.0), Complex64::new((a + b) / 2.0, 0.0));
                }
                let ea = (z * *a).exp();
                let eb = (z * *b).exp();
                let m = (eb - ea) / (z * w);
                let d = (eb * *b - ea * *a) / (z * w) - m / z;
                (m, d)
            }
        }
    }
}

const ROOT_TOL: f64 = 1e-8;
const BUDGET: usize = 100_000;

/// Locates z₀ with |z₀| ≤ radius and |E[e^{z₀X}]| ≤ 1e-8 for a bounded symmetric
/// model. `radius` defaults to 200·B³ with B the support bound.
pub fn mgf_root_search(model: &MarginalModel, radius: Option<f64>) -> Result<MgfRoot> {
    let bound = model.support_bound();
    if !bound.is_finite() {
        return Err(Error::Precondition("MGF root search needs a finite support bound".into()));
    }
    if !model.is_symmetric() {
        return Err(Error::Precondition("MGF root search needs a symmetric model".into()));
    }
    if bound == 0.0 {
        return Err(Error::Precondition("point mass at 0 has no MGF zeros".into()));
    }
    let radius = radius.unwrap_or(200.0 * bound.powi(3));
    if !(radius > 0.0) {
        return Err(Error::Domain(format!("radius {radius} must be positive")));
    }
    let mgf = Mgf::of(model)?;
    let evals = Cell::new(0usize);
    let f = |z: Complex64| {
        evals.set(evals.get() + 1);
        mgf.eval(z)
    };

    // On the imaginary axis M(iy) = E[cos(yX)] is real; look for a sign change.
    let step = (0.05 / bound).min(radius / 64.0);
    let axis_budget = BUDGET / 2;
    let mut y0 = 0.0;
    let mut v0: f64 = 1.0;
    let mut steps = 0;
    while y0 < radius && steps < axis_budget {
        let y1 = (y0 + step).min(radius);
        let v1 = f(Complex64::new(0.0, y1)).0.re;
        steps += 1;
        if v1 == 0.0 {
            return Ok(MgfRoot { re: 0.0, im: y1, residual: 0.0, evaluations: steps });
        }
        if v1.signum() != v0.signum() {
            let (mut lo, mut hi, mut flo) = (y0, y1, v0);
            let mut best = (y1, v1.abs());
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let fm = f(Complex64::new(0.0, mid)).0.re;
                if fm.abs() < best.1 {
                    best = (mid, fm.abs());
                }
                if fm == 0.0 {
                    break;
                }
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            let residual = f(Complex64::new(0.0, best.0)).0.norm();
            if residual <= ROOT_TOL {
                return Ok(MgfRoot { re: 0.0, im: best.0, residual, evaluations: evals.get() });
            }
        }
        y0 = y1;
        v0 = v1;
    }

    // Off-axis: watch the winding number of M on growing circles, then polish
    // the smallest-|M| point found with damped Newton steps.
    const POINTS: usize = 1024;
    let circles = 32;
    let mut best_z = Complex64::new(0.0, 0.0);
    let mut best_v = f64::INFINITY;
    for c in 1..=circles {
        if evals.get() + POINTS > BUDGET {
            break;
        }
        let r = radius * c as f64 / circles as f64;
        let mut winding = 0.0;
        let mut prev_arg = f(Complex64::new(r, 0.0)).0.arg();
        for p in 1..=POINTS {
            let theta = 2.0 * std::f64::consts::PI * p as f64 / POINTS as f64;
            let z = Complex64::from_polar(r, theta);
            let (m, _) = f(z);
            if m.norm() < best_v {
                best_v = m.norm();
                best_z = z;
            }
            let a = m.arg();
            let mut d = a - prev_arg;
            if d > std::f64::consts::PI {
                d -= 2.0 * std::f64::consts::PI;
            } else if d < -std::f64::consts::PI {
                d += 2.0 * std::f64::consts::PI;
            }
            winding += d;
            prev_arg = a;
        }
        if winding.abs() > std::f64::consts::PI {
            if let Some(root) = newton(&f, best_z, radius, &evals) {
                return Ok(root);
            }
        }
    }
    if let Some(root) = newton(&f, best_z, radius, &evals) {
        return Ok(root);
    }
    Err(Error::RootNotFound { radius, evaluations: evals.get(), best: best_v })
}

fn newton<F: Fn(Complex64) -> (Complex64, Complex64)>(
    f: &F,
    start: Complex64,
    radius: f64,
    evals: &Cell<usize>,
) -> Option<MgfRoot> {
    let mut z = start;
    let (mut m, mut d) = f(z);
    for _ in 0..200 {
        if m.norm() <= ROOT_TOL {
            return Some(MgfRoot { re: z.re, im: z.im, residual: m.norm(), evaluations: evals.get() });
        }
        if d.norm() == 0.0 {
            return None;
        }
        let full = m / d;
        let mut t = 1.0;
        loop {
            let cand = z - full * t;
            let (mc, dc) = f(cand);
            if mc.norm() < m.norm() && cand.norm() <= radius {
                z = cand;
                m = mc;
                d = dc;
                break;
            }
            t *= 0.5;
            if t < 1e-10 {
                return None;
            }
        }
        if evals.get() > BUDGET {
            return None;
        }
    }
    None
}
