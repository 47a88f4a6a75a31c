use crate::dynamics::Trajectory;
use crate::error::{ensure_dim, Error, Result};
use crate::model::{CouplingTensor, ModelSpec, SpherePoint};
use crate::stats;

use super::estimate::{Direction, GapEstimate};

/// A smooth function on the sphere with its Euclidean gradient (projected by the caller).
pub trait TestFunction: Sync {
    fn value(&self, sigma: &SpherePoint) -> f64;
    fn gradient(&self, sigma: &SpherePoint) -> Vec<f64>;
}

/// `sigma -> sigma_i`.
#[derive(Clone, Copy, Debug)]
pub struct CoordinateFunction(pub usize);

impl TestFunction for CoordinateFunction {
    fn value(&self, sigma: &SpherePoint) -> f64 {
        sigma.coords()[self.0]
    }

    fn gradient(&self, sigma: &SpherePoint) -> Vec<f64> {
        let mut g = vec![0.0; sigma.dim()];
        g[self.0] = 1.0;
        g
    }
}

/// `sigma -> R(sigma, center)`.
#[derive(Clone, Debug)]
pub struct OverlapFunction(pub SpherePoint);

impl TestFunction for OverlapFunction {
    fn value(&self, sigma: &SpherePoint) -> f64 {
        crate::scalar::dot(sigma.coords(), self.0.coords()) / sigma.dim() as f64
    }

    fn gradient(&self, sigma: &SpherePoint) -> Vec<f64> {
        let nf = sigma.dim() as f64;
        self.0.coords().iter().map(|c| c / nf).collect()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConstantFunction(pub f64);

impl TestFunction for ConstantFunction {
    fn value(&self, _: &SpherePoint) -> f64 {
        self.0
    }

    fn gradient(&self, sigma: &SpherePoint) -> Vec<f64> {
        vec![0.0; sigma.dim()]
    }
}

const BLOCKS: usize = 20;

fn ratio(grad_sq: &[f64], values: &[f64]) -> f64 {
    0.5 * stats::mean(grad_sq) / stats::variance(values)
}

/// `(1/2) E_pi |grad f|^2 / Var_pi f` from chain samples, with a 20-block jackknife error.
pub fn rayleigh_upper_bound(
    j: &CouplingTensor,
    beta: f64,
    test_fn: &dyn TestFunction,
    chain: &Trajectory,
) -> Result<GapEstimate> {
    if chain.len() < 2 * BLOCKS {
        return Err(Error::Parameter(format!("need at least {} samples, got {}", 2 * BLOCKS, chain.len())));
    }
    let mut grad_sq = Vec::with_capacity(chain.len());
    let mut values = Vec::with_capacity(chain.len());
    for s in &chain.samples {
        ensure_dim(j.dim(), s.dim())?;
        let g = s.project(&test_fn.gradient(s));
        grad_sq.push(g.iter().map(|x| x * x).sum::<f64>());
        values.push(test_fn.value(s));
    }
    let var = stats::variance(&values);
    let scale = values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64;
    if !(var > 1e-14 * scale.max(1e-300)) {
        return Err(Error::ZeroVariance(var));
    }
    let value = ratio(&grad_sq, &values);
    let len = chain.len() / BLOCKS;
    let used = len * BLOCKS;
    let replicates: Vec<f64> = (0..BLOCKS)
        .map(|b| {
            let keep = |xs: &[f64]| -> Vec<f64> {
                xs[..used].iter().enumerate().filter(|(i, _)| i / len != b).map(|(_, &x)| x).collect()
            };
            ratio(&keep(&grad_sq), &keep(&values))
        })
        .collect();
    Ok(GapEstimate::new(value, Direction::UpperBound, "rayleigh-quotient")
        .with_std_error(stats::jackknife_spread(&replicates))
        .with_provenance(ModelSpec { beta, ..*j.spec() }, chain.config.rng_seed))
}
