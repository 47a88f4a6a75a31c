//! Lower bounds on the spectral gap: curvature (Bakry-Emery) and Poincare-stability certificates,
//! and the extremes of the covariant Hessian over the sphere.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscape::{catalog_minima, DEFAULT_DEDUPE, DEFAULT_TOL_G};
use crate::model::{tangent_hessian_spectrum, CouplingTensor, LocalTerms, ModelSpec};
use crate::rng;
use crate::scalar::dot;
use crate::spectral::{Direction, GapEstimate};


/// Restarts used when the caller has no preference.
pub const DEFAULT_RESTARTS: usize = 32;
const MAX_ASCENT_STEPS: usize = 5_000;
const CIRCLE_GRID: usize = 4096;
const EXTREMES_STREAM: u64 = 0x4845_5353;
const OPTIMIZER_STREAM: u64 = 0x504f_494e;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HessianExtremes {
    /// Largest tangent-Hessian eigenvalue found over the sphere.
    pub r_max: f64,
    /// Smallest tangent-Hessian eigenvalue found over the sphere.
    pub r_min: f64,
    pub r_range: f64,
    pub restarts: usize,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CertificateKind {
    BakryEmery,
    PoincareStability,
}

/// A gap lower bound. Serializes as a [`GapEstimate`] record with `direction = LowerBound`
/// plus the kind, the inputs it was computed from and a heuristic flag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    #[serde(flatten)]
    pub estimate: GapEstimate,
    pub inputs: BTreeMap<String, f64>,
    /// Set when an input is an optimizer estimate rather than an exhaustive search.
    pub heuristic: bool,
    pub converged: bool,
}

impl Certificate {
    pub fn lower_bound(&self) -> f64 {
        self.estimate.value
    }
}

fn top_eigenvalue(j: &CouplingTensor, sigma: &[f64]) -> Result<(f64, Vec<f64>)> {
    let s = tangent_hessian_spectrum(&j.local(sigma)?, sigma);
    Ok((s.max, s.max_vector))
}

/// The curvature form `F(sigma, v) = v^T Hess H(sigma) v` for a unit tangent `v`, whose maximum
/// over pairs is the largest tangent eigenvalue over the sphere.
struct Pair {
    sigma: Vec<f64>,
    v: Vec<f64>,
    value: f64,
    local: LocalTerms<f64>,
}

impl Pair {
    fn new(j: &CouplingTensor, sigma: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let local = j.local(&sigma)?;
        let hv = local.euclidean_hessian_apply(&v);
        let value = dot(&v, &hv) - local.radial_shift() * dot(&v, &v);
        Ok(Self { sigma, v, value, local })
    }

    /// Riemannian gradient on `{(sigma, v) : |sigma|^2 = N, |v| = 1, sigma . v = 0}`.
    fn gradient(&self, j: &CouplingTensor) -> (Vec<f64>, Vec<f64>) {
        let (sigma, v) = (&self.sigma, &self.v);
        let n = sigma.len();
        let nf = n as f64;
        let p = j.degree();
        let cube = if p == 3 {
            std::borrow::Cow::Borrowed(j.entries())
        } else {
            std::borrow::Cow::Owned(j.contract_to(sigma, 3))
        };
        let m: Vec<f64> = cube.chunks_exact(n).map(|row| dot(row, v)).collect();
        let scale = j.spec().normalization() * (p * (p - 1) * (p - 2)) as f64;
        let shift = self.local.radial_shift();
        let mut a: Vec<f64> = m
            .chunks_exact(n)
            .zip(&self.local.gradient)
            .map(|(row, g)| scale * dot(row, v) - p as f64 / nf * g)
            .collect();
        let hv = self.local.euclidean_hessian_apply(v);
        let mut b: Vec<f64> = hv.iter().zip(v).map(|(h, vi)| 2.0 * (h - shift * vi)).collect();
        let ra = dot(&a, sigma) / nf;
        a.iter_mut().zip(sigma).for_each(|(ai, si)| *ai -= ra * si);
        let rb = dot(&b, v);
        b.iter_mut().zip(v).for_each(|(bi, vi)| *bi -= rb * vi);
        let k = (dot(v, &a) + dot(sigma, &b)) / (1.0 + nf);
        a.iter_mut().zip(v).for_each(|(ai, vi)| *ai -= k * vi);
        b.iter_mut().zip(sigma).for_each(|(bi, si)| *bi -= k * si);
        (a, b)
    }

    fn retract(&self, j: &CouplingTensor, a: &[f64], b: &[f64], t: f64) -> Result<Self> {
        let mut sigma: Vec<f64> = self.sigma.iter().zip(a).map(|(x, d)| x + t * d).collect();
        renormalize(&mut sigma);
        let mut v: Vec<f64> = self.v.iter().zip(b).map(|(x, d)| x + t * d).collect();
        let c = dot(&v, &sigma) / sigma.len() as f64;
        v.iter_mut().zip(&sigma).for_each(|(vi, si)| *vi -= c * si);
        let norm = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|vi| *vi /= norm);
        Self::new(j, sigma, v)
    }
}

fn renormalize(x: &mut [f64]) {
    let n = x.len() as f64;
    let scale = (n / dot(x, x)).sqrt();
    x.iter_mut().for_each(|xi| *xi *= scale);
}

/// Armijo ascent of the curvature form from `start` paired with its top eigenvector, then an
/// exact eigen-solve at the final point. Returns the eigenvalue and whether the ascent settled.
fn ascend(j: &CouplingTensor, start: Vec<f64>) -> Result<(f64, bool)> {
    let n = start.len() as f64;
    let (_, v) = top_eigenvalue(j, &start)?;
    let mut cur = Pair::new(j, start, v)?;
    let mut t = 1.0;
    let mut flat_steps = 0;
    let mut settled = false;
    let (mut a, mut b) = cur.gradient(j);
    for _ in 0..MAX_ASCENT_STEPS {
        let gsq = dot(&a, &a) + dot(&b, &b);
        if gsq.sqrt() < 1e-7 * n.sqrt() {
            settled = true;
            break;
        }
        let mut accepted = None;
        while t > 1e-14 {
            let next = cur.retract(j, &a, &b, t)?;
            if next.value >= cur.value + 1e-4 * t * gsq {
                accepted = Some(next);
                break;
            }
            t *= 0.5;
        }
        let Some(next) = accepted else {
            settled = true;
            break;
        };
        if next.value - cur.value <= 1e-11 * cur.value.abs().max(1.0) {
            flat_steps += 1;
        } else {
            flat_steps = 0;
        }
        let (na, nb) = next.gradient(j);
        // Barzilai-Borwein length from the ambient displacement and gradient change
        let mut ss = 0.0;
        let mut sy = 0.0;
        for (x, (y, g1)) in next.sigma.iter().zip(cur.sigma.iter().zip(&na)) {
            ss += (x - y) * (x - y);
            sy += (x - y) * g1;
        }
        for (x, (y, g1)) in next.v.iter().zip(cur.v.iter().zip(&nb)) {
            ss += (x - y) * (x - y);
            sy += (x - y) * g1;
        }
        for (x, (y, g0)) in next.sigma.iter().zip(cur.sigma.iter().zip(&a)) {
            sy -= (x - y) * g0;
        }
        for (x, (y, g0)) in next.v.iter().zip(cur.v.iter().zip(&b)) {
            sy -= (x - y) * g0;
        }
        t = if sy.abs() > 0.0 { (ss / sy.abs()).clamp(1e-6, 1e6) } else { 2.0 * t };
        cur = next;
        a = na;
        b = nb;
        if flat_steps >= 5 {
            settled = true;
            break;
        }
    }
    let (value, _) = top_eigenvalue(j, &cur.sigma)?;
    Ok((value.max(cur.value), settled))
}

/// Maximizes a periodic function of the angle: dense grid, then golden-section refinement.
fn circle_maximum(f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let h = std::f64::consts::TAU / CIRCLE_GRID as f64;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for k in 0..CIRCLE_GRID {
        let a = k as f64 * h;
        let v = f(a)?;
        if v > best.0 {
            best = (v, a);
        }
    }
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (best.1 - h, best.1 + h);
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while hi - lo > 1e-12 {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = f(c)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = f(d)?;
        }
    }
    Ok(best.0.max(fc).max(fd))
}

fn circle_point(a: f64) -> [f64; 2] {
    let r = std::f64::consts::SQRT_2;
    [r * a.cos(), r * a.sin()]
}

/// Largest top tangent eigenvalue of `j` over the sphere.
fn top_eigen_maximum(j: &CouplingTensor, restarts: usize, seed: u64, tag: u64) -> Result<(f64, bool)> {
    let n = j.dim();
    if n == 2 {
        return Ok((circle_maximum(|a| Ok(top_eigenvalue(j, &circle_point(a))?.0))?, true));
    }
    let runs: Vec<Result<(f64, bool)>> = (0..restarts as u64)
        .into_par_iter()
        .map(|k| {
            let mut r = rng::substream(seed, &[EXTREMES_STREAM, tag, k]);
            let start = crate::model::SpherePoint::<f64>::uniform(n, &mut r);
            ascend(j, start.into_coords())
        })
        .collect();
    let mut best = (f64::NEG_INFINITY, true);
    for run in runs {
        let (v, ok) = run?;
        if v > best.0 {
            best = (v, ok);
        }
    }
    Ok(best)
}

/// Extremes of the covariant Hessian spectrum over the sphere by multistart Riemannian ascent of
/// the curvature form `v^T Hess H(sigma) v` over pairs of a point and a unit tangent (`r_max`), and
/// the same for `-H` (`-r_min`).
///
/// Restart `k` always starts from the same point, so adding restarts can only widen the range.
/// For `N = 2` an exhaustive angular search replaces the ascent.
pub fn hessian_extremes(j: &CouplingTensor, restarts: usize) -> Result<HessianExtremes> {
    if restarts == 0 {
        return Err(Error::Parameter("need at least one restart".into()));
    }
    if j.dim() < 2 {
        return Err(Error::Parameter("the tangent space is trivial for N = 1".into()));
    }
    if j.is_zero() {
        return Ok(HessianExtremes {
            r_max: 0.0,
            r_min: 0.0,
            r_range: 0.0,
            restarts,
            converged: true,
        });
    }
    let (r_max, up) = top_eigen_maximum(j, restarts, j.seed(), 0)?;
    // odd degree: H(-sigma) = -H(sigma), so the lower extreme mirrors the upper one
    let (neg_min, down) = if j.degree() % 2 == 1 {
        (r_max, up)
    } else {
        top_eigen_maximum(&j.negated(), restarts, j.seed(), 1)?
    };
    let r_min = -neg_min;
    Ok(HessianExtremes {
        r_max,
        r_min,
        r_range: r_max - r_min,
        restarts,
        converged: up && down,
    })
}

/// Curvature certificate `c / 2` with `c = (1 - 1/N) + beta r_min`, emitted only when `c > 0`
/// and the extremes converged. The temperature is read from `spec.beta`.
pub fn bakry_emery_certificate(spec: &ModelSpec, extremes: &HessianExtremes) -> Option<Certificate> {
    if !extremes.converged {
        return None;
    }
    let nf = spec.n as f64;
    let c = (1.0 - 1.0 / nf) + spec.beta * extremes.r_min;
    if !(c > 0.0) {
        return None;
    }
    let mut estimate = GapEstimate::new(0.5 * c, Direction::LowerBound, "bakry-emery");
    estimate.spec = Some(*spec);
    let inputs = BTreeMap::from([
        ("beta".to_string(), spec.beta),
        ("curvature".to_string(), c),
        ("r_max".to_string(), extremes.r_max),
        ("r_min".to_string(), extremes.r_min),
    ]);
    Some(Certificate {
        kind: CertificateKind::BakryEmery,
        estimate,
        inputs,
        heuristic: spec.n != 2,
        converged: true,
    })
}

/// Extreme energies over the sphere: `(min H, max H, converged)`.
pub fn energy_extremes(j: &CouplingTensor, restarts: usize) -> Result<(f64, f64, bool)> {
    if restarts == 0 {
        return Err(Error::Parameter("need at least one restart".into()));
    }
    if j.is_zero() {
        return Ok((0.0, 0.0, true));
    }
    if j.dim() == 2 {
        let hi = circle_maximum(|a| j.energy_at(&circle_point(a)))?;
        let lo = -circle_maximum(|a| Ok(-j.energy_at(&circle_point(a))?))?;
        return Ok((lo, hi, true));
    }
    let seed = rng::derive_seed(j.seed(), &[OPTIMIZER_STREAM]);
    let lows = catalog_minima(j, restarts, DEFAULT_TOL_G, DEFAULT_DEDUPE, seed)?;
    let highs = catalog_minima(&j.negated(), restarts, DEFAULT_TOL_G, DEFAULT_DEDUPE, seed)?;
    let (Some(lo), Some(hi)) = (lows.minima.first(), highs.minima.first()) else {
        return Err(Error::NoConvergence {
            what: "energy extremes",
            iterations: restarts,
        });
    };
    let converged = lows.failed_restarts == 0 && highs.failed_restarts == 0;
    Ok((lo.energy, -hi.energy, converged))
}

/// `(1/2)(1 - 1/N) exp(-2 beta (max H - min H))`, with the energy extremes estimated by
/// multistart minimization of `H` and `-H`.
pub fn poincare_stability_certificate(j: &CouplingTensor, beta: f64, restarts: usize) -> Result<Certificate> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Parameter(format!("beta = {beta} must be finite and non-negative")));
    }
    let (lo, hi, converged) = energy_extremes(j, restarts)?;
    Ok(poincare_from_extremes(j.spec().with_beta(beta), j.seed(), lo, hi, converged))
}

/// The Poincare-stability certificate from already computed energy extremes.
pub fn poincare_from_extremes(spec: ModelSpec, seed: u64, h_min: f64, h_max: f64, converged: bool) -> Certificate {
    let nf = spec.n as f64;
    let oscillation = h_max - h_min;
    let value = 0.5 * (1.0 - 1.0 / nf) * (-2.0 * spec.beta * oscillation).exp();
    let estimate = GapEstimate::new(value, Direction::LowerBound, "poincare-stability").with_provenance(spec, seed);
    let inputs = BTreeMap::from([
        ("beta".to_string(), spec.beta),
        ("h_max".to_string(), h_max),
        ("h_min".to_string(), h_min),
    ]);
    Certificate {
        kind: CertificateKind::PoincareStability,
        estimate,
        inputs,
        heuristic: spec.n != 2 && oscillation != 0.0,
        converged,
    }
}
