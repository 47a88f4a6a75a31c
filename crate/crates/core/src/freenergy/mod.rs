//! Partition functions and free energies restricted to caps, bands and the whole sphere.
//!
//! `Z(A) = int_A exp(-beta H) dV` with `dV` the normalized uniform measure and
//! `F(A) = (1/N) log Z(A)`.

mod anneal;
mod experiments;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use anneal::AnnealOptions;
pub use experiments::{
    angular_profile, band_profile, concentration_experiment, gibbs_ratio_experiment, write_experiment_csv,
    BandProfile, ConcentrationReport, ExperimentRow, GibbsRatio, RatioOptions,
};

use crate::error::{Error, Result};
use crate::model::CouplingTensor;
use crate::rng;
use crate::sets::Support;
use crate::stats;

/// Estimates with fewer effective samples are flagged.
pub const MIN_EFFECTIVE_SAMPLES: f64 = 50.0;
/// Smallest accepted sample budget.
pub const MIN_BUDGET: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    UniformImportance,
    Annealed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyEstimate {
    /// `(1/N) log Z`.
    pub value: f64,
    pub std_error: f64,
    pub method: Method,
    pub support: Support,
    pub beta: f64,
    pub log_z: f64,
    pub log_z_se: f64,
    pub effective_samples: f64,
    pub reliable: bool,
}

fn check_support(j: &CouplingTensor, support: &Support) -> Result<()> {
    crate::error::ensure_dim(j.dim(), support.dim())?;
    if !support.log_volume().is_finite() {
        return Err(Error::EmptyRegion);
    }
    Ok(())
}

/// `log Z` of the support from `budget` samples (particles, for [`Method::Annealed`]).
pub fn restricted_free_energy(
    j: &CouplingTensor,
    beta: f64,
    support: &Support,
    budget: usize,
    method: Method,
    seed: u64,
) -> Result<FreeEnergyEstimate> {
    if budget < MIN_BUDGET {
        return Err(Error::Parameter(format!("budget {budget} is below {MIN_BUDGET}")));
    }
    estimate(j, beta, support, budget, method, seed, &AnnealOptions::default())
}

/// [`restricted_free_energy`] without the budget floor and with explicit annealing options.
pub fn estimate(
    j: &CouplingTensor,
    beta: f64,
    support: &Support,
    budget: usize,
    method: Method,
    seed: u64,
    opts: &AnnealOptions,
) -> Result<FreeEnergyEstimate> {
    check_support(j, support)?;
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Parameter(format!("beta = {beta} must be finite and non-negative")));
    }
    let log_w = match method {
        Method::UniformImportance => uniform_log_weights(j, beta, support, budget, seed)?,
        Method::Annealed => anneal::anneal(j, beta, support, budget, seed, opts)?.log_weights,
    };
    let n = j.dim() as f64;
    let log_z = support.log_volume() + stats::log_mean_exp(&log_w);
    let log_z_se = stats::jackknife_log_mean_exp(&log_w);
    let ess = stats::effective_sample_size(&log_w);
    Ok(FreeEnergyEstimate {
        value: log_z / n,
        std_error: log_z_se / n,
        method,
        support: support.clone(),
        beta,
        log_z,
        log_z_se,
        effective_samples: ess,
        reliable: ess >= MIN_EFFECTIVE_SAMPLES,
    })
}

const CHUNK: usize = 256;

fn uniform_log_weights(j: &CouplingTensor, beta: f64, support: &Support, budget: usize, seed: u64) -> Result<Vec<f64>> {
    let sampler = support.sampler()?;
    let chunks = budget.div_ceil(CHUNK);
    let parts: Vec<Result<Vec<f64>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut r = rng::substream(seed, &[c as u64]);
            let len = CHUNK.min(budget - c * CHUNK);
            (0..len)
                .map(|_| Ok(-beta * j.energy_at(sampler.sample(&mut r).coords())?))
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(budget);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
