//! Exact gap on the circle `S^1(sqrt 2)` by a weighted finite-volume discretization.
//!
//! With `phi` the angle, `E(f, f) = (1/4) int f_phi^2 w d phi / int w d phi`, `w = exp(-beta H)`.
//! On `n` nodes the form becomes `sum_j c_j (f_{j+1} - f_j)^2` with edge conductances
//! `c_j = w(phi_{j+1/2}) / (4 h^2)` against the mass `diag(w(phi_j))`; the discrete operator is
//! self-adjoint in the weighted inner product and second-order accurate in `h`.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::model::CouplingTensor;

use super::estimate::{Direction, GapEstimate};

const MAX_ITERATIONS: usize = 20_000;

fn circle_energy(j: &CouplingTensor, phi: f64) -> f64 {
    let r = 2f64.sqrt();
    j.energy_at(&[r * phi.cos(), r * phi.sin()]).expect("dimension 2")
}

fn require_circle(j: &CouplingTensor) -> Result<()> {
    if j.dim() != 2 {
        return Err(Error::Parameter(format!("the circle solver needs N = 2, got N = {}", j.dim())));
    }
    Ok(())
}

/// Discretized generator on a uniform angular grid.
#[derive(Clone, Debug)]
pub struct CircleSpectrum {
    mass: Vec<f64>,
    conductance: Vec<f64>,
    /// Nodes of least and greatest mass.
    start: usize,
    heaviest: usize,
}

impl CircleSpectrum {
    pub fn new(j: &CouplingTensor, beta: f64, n: usize) -> Result<Self> {
        require_circle(j)?;
        if n < 8 {
            return Err(Error::Parameter(format!("grid of {n} points is too coarse")));
        }
        let h = TAU / n as f64;
        let nodes: Vec<f64> = (0..n).map(|k| circle_energy(j, h * k as f64)).collect();
        let mids: Vec<f64> = (0..n).map(|k| circle_energy(j, h * (k as f64 + 0.5))).collect();
        let hmin = nodes.iter().chain(&mids).copied().fold(f64::INFINITY, f64::min);
        let mass = nodes.iter().map(|e| (-beta * (e - hmin)).exp()).collect();
        let conductance = mids.iter().map(|e| (-beta * (e - hmin)).exp() / (4.0 * h * h)).collect();
        let start = nodes.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map_or(0, |(k, _)| k);
        let heaviest = nodes.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map_or(0, |(k, _)| k);
        Ok(Self { mass, conductance, start, heaviest })
    }

    fn len(&self) -> usize {
        self.mass.len()
    }

    fn dirichlet(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = self.len();
        (0..n)
            .map(|k| {
                let k1 = (k + 1) % n;
                self.conductance[k] * (a[k1] - a[k]) * (b[k1] - b[k])
            })
            .sum()
    }

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.mass.iter().zip(a).zip(b).map(|((w, x), y)| w * x * y).sum()
    }

    fn center(&self, a: &mut [f64]) {
        let total: f64 = self.mass.iter().sum();
        let m = self.mass.iter().zip(a.iter()).map(|(w, x)| w * x).sum::<f64>() / total;
        a.iter_mut().for_each(|x| *x -= m);
    }

    /// Solves `K x = M f` for weighted-mean-zero `f` through the edge fluxes.
    fn solve(&self, f: &[f64]) -> Vec<f64> {
        let n = self.len();
        // F_k = c_k (x_{k+1} - x_k) obeys F_{k-1} - F_k = r_k, so F_k = G - S_k. Walking from the
        // lightest node and taking S_k from the nearer end of the cycle up to the heaviest node
        // keeps the tiny fluxes across high barriers free of cancellation.
        let at = |k: usize| (self.start + k) % n;
        let mut prefix = Vec::with_capacity(n);
        let mut s = 0.0;
        for k in 0..n {
            s += self.mass[at(k)] * f[at(k)];
            prefix.push(s);
        }
        let mut suffix = vec![0.0; n];
        let mut s = 0.0;
        for k in (0..n - 1).rev() {
            s += self.mass[at(k + 1)] * f[at(k + 1)];
            suffix[k] = s;
        }
        let heavy = (self.heaviest + n - self.start) % n;
        let partial: Vec<f64> = (0..n).map(|k| if k < heavy { prefix[k] } else { -suffix[k] }).collect();
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..n {
            num += partial[k] / self.conductance[at(k)];
            den += 1.0 / self.conductance[at(k)];
        }
        let g = num / den;
        let mut x = vec![0.0; n];
        for k in 0..n - 1 {
            x[at(k + 1)] = x[at(k)] + (g - partial[k]) / self.conductance[at(k)];
        }
        self.center(&mut x);
        x
    }

    /// Smallest nonzero eigenvalue by two-vector inverse iteration with Rayleigh-Ritz.
    pub fn gap(&self) -> Result<f64> {
        let n = self.len();
        let h = TAU / n as f64;
        let mut x: [Vec<f64>; 2] = [
            (0..n).map(|k| (h * k as f64).cos()).collect(),
            (0..n).map(|k| (h * k as f64).sin()).collect(),
        ];
        for v in x.iter_mut() {
            self.center(v);
        }
        let mut previous = f64::INFINITY;
        for it in 0..MAX_ITERATIONS {
            let mut y = [self.solve(&x[0]), self.solve(&x[1])];
            // mass-orthonormalize
            let n0 = self.inner(&y[0], &y[0]).sqrt();
            y[0].iter_mut().for_each(|v| *v /= n0);
            let proj = self.inner(&y[0], &y[1]);
            let (a, b) = y.split_at_mut(1);
            b[0].iter_mut().zip(&a[0]).for_each(|(v, u)| *v -= proj * u);
            let n1 = self.inner(&y[1], &y[1]).sqrt();
            y[1].iter_mut().for_each(|v| *v /= n1);
            let a00 = self.dirichlet(&y[0], &y[0]);
            let a01 = self.dirichlet(&y[0], &y[1]);
            let a11 = self.dirichlet(&y[1], &y[1]);
            let mean = 0.5 * (a00 + a11);
            let half = (0.25 * (a00 - a11).powi(2) + a01 * a01).sqrt();
            let lambda = mean - half;
            // eigenvector of the 2x2 Ritz matrix for the smaller value
            let (c0, c1) = if a01.abs() > 0.0 {
                let (u, v) = (a01, lambda - a00);
                let r = u.hypot(v);
                (u / r, v / r)
            } else if a00 <= a11 {
                (1.0, 0.0)
            } else {
                (0.0, 1.0)
            };
            x[0] = y[0].iter().zip(&y[1]).map(|(p, q)| c0 * p + c1 * q).collect();
            x[1] = y[0].iter().zip(&y[1]).map(|(p, q)| -c1 * p + c0 * q).collect();
            if it >= 3 && (lambda - previous).abs() <= 1e-14 * lambda.abs() {
                return Ok(lambda);
            }
            previous = lambda;
        }
        Err(Error::NoConvergence { what: "circle inverse iteration", iterations: MAX_ITERATIONS })
    }
}

/// Smallest nonzero eigenvalue of `-L` on the circle, Richardson-extrapolated from `grid_points`
/// and `grid_points / 2` nodes.
pub fn exact_gap_circle(j: &CouplingTensor, beta: f64, grid_points: usize) -> Result<GapEstimate> {
    require_circle(j)?;
    if grid_points < 64 {
        return Err(Error::Parameter(format!("need at least 64 grid points, got {grid_points}")));
    }
    let fine = CircleSpectrum::new(j, beta, grid_points)?.gap()?;
    let coarse = CircleSpectrum::new(j, beta, grid_points / 2)?.gap()?;
    let value = fine + (fine - coarse) / 3.0;
    let mut est = GapEstimate::new(value.max(0.0), Direction::Exact, "circle-finite-volume")
        .with_provenance(crate::model::ModelSpec { beta, ..*j.spec() }, j.seed());
    est.discretization_error = Some((fine - coarse).abs() / 3.0);
    Ok(est)
}

/// Gibbs measure on the circle with exact arc masses by quadrature.
#[derive(Clone, Debug)]
pub struct CircleGibbs<'a> {
    j: &'a CouplingTensor,
    beta: f64,
    shift: f64,
    log_z: f64,
}

impl<'a> CircleGibbs<'a> {
    pub fn new(j: &'a CouplingTensor, beta: f64) -> Result<Self> {
        require_circle(j)?;
        let shift = (0..4096)
            .map(|k| circle_energy(j, TAU * k as f64 / 4096.0))
            .fold(f64::INFINITY, f64::min);
        let mut g = Self { j, beta, shift, log_z: 0.0 };
        g.log_z = g.raw_arc(0.0, TAU).ln();
        Ok(g)
    }

    fn raw_arc(&self, a: f64, b: f64) -> f64 {
        let pieces = 32;
        let w = (b - a) / pieces as f64;
        (0..pieces)
            .map(|k| {
                let lo = a + w * k as f64;
                quadrature::integrate(
                    |phi| (-self.beta * (circle_energy(self.j, phi) - self.shift)).exp(),
                    lo,
                    lo + w,
                    1e-15,
                )
                .integral
            })
            .sum()
    }

    /// `log pi({phi_a <= phi <= phi_b})` for `phi_b - phi_a` in `[0, 2 pi]`.
    pub fn log_arc_mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return f64::NEG_INFINITY;
        }
        self.raw_arc(a, b).ln() - self.log_z
    }

    /// Mass of the angular-distance shells `[edges_k, edges_{k+1}]` around the angle `center`.
    pub fn angular_bins(&self, center: f64, edges: &[f64]) -> Vec<f64> {
        edges
            .windows(2)
            .map(|e| {
                let (lo, hi) = (e[0].max(0.0), e[1].min(PI));
                let both = self.raw_arc(center + lo, center + hi) + self.raw_arc(center - hi, center - lo);
                both.ln() - self.log_z
            })
            .collect()
    }
}
