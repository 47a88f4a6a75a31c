//! Conductance upper bound from a cap `A`, its `eps`-neighbourhood and the shell between them.
//!
//! For `f = pi(A)` outside `A_eps`, `-pi(A^c)` on `A` and `-pi(A^c) + eta(d(sigma, A) / eps)` in the
//! shell, `|grad f| <= 3 / eps` and the variational principle gives
//! `lambda <= 9 eps^{-2} pi(shell) / (pi(A) pi(A_eps^c) - 4 pi(shell))` for `int |grad f|^2`;
//! the value reported here is half of that.

use crate::error::{Error, Result};
use crate::model::{overlap, SpherePoint};
use crate::sets::{RegionKind, RegionSpec};

use super::estimate::{Direction, GapEstimate};
use super::variational::TestFunction;

/// `exp(1 - 1/(1 - (x-1)^2))` on `[0, 1]`, zero at `x = 0`.
pub fn eta(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Parameter(format!("eta is defined on [0, 1], got {x}")));
    }
    Ok(eta_unchecked(x))
}

fn eta_unchecked(x: f64) -> f64 {
    let u = x - 1.0;
    let s = 1.0 - u * u;
    if s <= 0.0 {
        0.0
    } else {
        (1.0 - 1.0 / s).exp()
    }
}

fn eta_derivative(x: f64) -> f64 {
    let u = x - 1.0;
    let s = 1.0 - u * u;
    if s <= 0.0 {
        0.0
    } else {
        eta_unchecked(x) * (-2.0 * u / (s * s))
    }
}

/// Half of `9 eps^{-2} pi_shell / (pi_A pi_Aeps_c - 4 pi_shell)`.
pub fn conductance_upper_bound(pi_a: f64, pi_aeps_c: f64, pi_shell: f64, eps: f64) -> Result<GapEstimate> {
    for (name, v) in [("pi_A", pi_a), ("pi_Aeps_c", pi_aeps_c), ("pi_shell", pi_shell)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Parameter(format!("{name} = {v} is not a probability")));
        }
    }
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("eps = {eps} must be positive")));
    }
    let denominator = pi_a * pi_aeps_c - 4.0 * pi_shell;
    if !(denominator > 0.0) {
        return Err(Error::ConductanceCondition { denominator });
    }
    let value = 0.5 * 9.0 * pi_shell / (eps * eps * denominator);
    Ok(GapEstimate::new(value, Direction::UpperBound, "conductance"))
}

/// The piecewise test function of the conductance argument for a cap.
#[derive(Clone, Debug)]
pub struct ConductanceTestFunction {
    center: SpherePoint,
    cap_angle: f64,
    eps: f64,
    pi_a: f64,
}

impl ConductanceTestFunction {
    /// `region` must be a cap; `pi_a` is its Gibbs mass.
    pub fn new(region: &RegionSpec, eps: f64, pi_a: f64) -> Result<Self> {
        if region.kind != RegionKind::Cap || region.q_high < 1.0 {
            return Err(Error::Parameter("the conductance test function needs a cap".into()));
        }
        if !(eps > 0.0) || !(0.0..=1.0).contains(&pi_a) {
            return Err(Error::Parameter(format!("invalid eps {eps} or pi(A) {pi_a}")));
        }
        let root_n = (region.dim() as f64).sqrt();
        let cap_angle = region.q_low.clamp(-1.0, 1.0).acos();
        if root_n * cap_angle + eps >= std::f64::consts::PI * root_n {
            return Err(Error::Parameter(format!(
                "eps = {eps} reaches past the antipode of a cap of radius {}",
                root_n * cap_angle
            )));
        }
        Ok(Self { center: region.center.clone(), cap_angle, eps, pi_a })
    }

    /// Geodesic distance from `sigma` to the cap.
    pub fn distance(&self, sigma: &SpherePoint) -> Result<f64> {
        let r = overlap(&self.center, sigma)?.clamp(-1.0, 1.0);
        let root_n = (sigma.dim() as f64).sqrt();
        Ok(root_n * (r.acos() - self.cap_angle).max(0.0))
    }

    pub fn evaluate(&self, sigma: &SpherePoint) -> Result<f64> {
        let d = self.distance(sigma)?;
        let inside = -(1.0 - self.pi_a);
        Ok(if d <= 0.0 {
            inside
        } else if d >= self.eps {
            self.pi_a
        } else {
            inside + eta_unchecked(d / self.eps)
        })
    }
}

impl TestFunction for ConductanceTestFunction {
    fn value(&self, sigma: &SpherePoint) -> f64 {
        self.evaluate(sigma).expect("matching dimension")
    }

    fn gradient(&self, sigma: &SpherePoint) -> Vec<f64> {
        let n = sigma.dim() as f64;
        let d = self.distance(sigma).expect("matching dimension");
        if d <= 0.0 || d >= self.eps {
            return vec![0.0; sigma.dim()];
        }
        let r = (crate::scalar::dot(self.center.coords(), sigma.coords()) / n).clamp(-1.0, 1.0);
        let sin = (1.0 - r * r).sqrt().max(1e-300);
        // f = eta(sqrt(N) (arccos R - a) / eps), dR/dsigma = x / N
        let scale = eta_derivative(d / self.eps) * n.sqrt() / self.eps * (-1.0 / sin) / n;
        self.center.coords().iter().map(|x| scale * x).collect()
    }
}

/// Evaluates the test function for the cap `region` with Gibbs mass `pi_a`.
pub fn conductance_test_function(region: &RegionSpec, eps: f64, pi_a: f64, sigma: &SpherePoint) -> Result<f64> {
    ConductanceTestFunction::new(region, eps, pi_a)?.evaluate(sigma)
}

/// Gibbs mass of angular shells `theta in [edges_k, edges_{k+1}]` around a center, where
/// `theta = arccos R`.
#[derive(Clone, Debug, PartialEq)]
pub struct AngularProfile {
    pub n: usize,
    pub edges: Vec<f64>,
    /// Normalized log-masses, one per shell.
    pub log_mass: Vec<f64>,
    /// Standard errors of `log_mass`, when estimated.
    pub log_mass_se: Option<Vec<f64>>,
}

/// The cap and shell selected by [`conductance_scan`].
#[derive(Clone, Debug)]
pub struct ConductanceChoice {
    pub estimate: GapEstimate,
    pub cap_angle: f64,
    pub eps: f64,
    pub pi_a: f64,
    pub pi_shell: f64,
    pub pi_outer: f64,
}

/// Smallest conductance bound over caps ending at a profile edge and shells of up to
/// `max_shell_bins` consecutive bins.
pub fn conductance_scan(profile: &AngularProfile, max_shell_bins: usize) -> Result<ConductanceChoice> {
    let k = profile.log_mass.len();
    if profile.edges.len() != k + 1 || k < 3 {
        return Err(Error::Parameter("profile needs at least three bins and matching edges".into()));
    }
    let shift = profile.log_mass.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = profile.log_mass.iter().map(|l| (l - shift).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mass: Vec<f64> = weights.iter().map(|w| w / total).collect();
    // sums taken directly rather than as differences so that tiny shells keep their precision
    let mut prefix = vec![0.0];
    for m in &mass {
        prefix.push(prefix.last().unwrap() + m);
    }
    let mut suffix = vec![0.0; k + 1];
    for i in (0..k).rev() {
        suffix[i] = suffix[i + 1] + mass[i];
    }
    let root_n = (profile.n as f64).sqrt();
    let mut best: Option<ConductanceChoice> = None;
    let mut best_denominator = f64::NEG_INFINITY;
    for a in 1..k {
        for m in 1..=max_shell_bins.max(1) {
            let b = a + m;
            if b >= k {
                break;
            }
            let pi_a = prefix[a];
            let pi_shell: f64 = mass[a..b].iter().sum();
            let pi_outer = suffix[b];
            let eps = root_n * (profile.edges[b] - profile.edges[a]);
            let denominator = pi_a * pi_outer - 4.0 * pi_shell;
            best_denominator = best_denominator.max(denominator);
            let Ok(mut est) = conductance_upper_bound(pi_a, pi_outer, pi_shell, eps) else {
                continue;
            };
            if best.as_ref().is_some_and(|c| c.estimate.value <= est.value) {
                continue;
            }
            if let Some(se) = &profile.log_mass_se {
                let var: f64 = (a..b).map(|i| (mass[i] * se[i]).powi(2)).sum();
                est.std_error = Some(est.value * var.sqrt() / pi_shell.max(1e-300));
            }
            est.method = "conductance-scan".into();
            best = Some(ConductanceChoice {
                estimate: est,
                cap_angle: profile.edges[a],
                eps,
                pi_a,
                pi_shell,
                pi_outer,
            });
        }
    }
    best.ok_or(Error::ConductanceCondition { denominator: best_denominator })
}
