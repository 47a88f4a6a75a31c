use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{estimate, AnnealOptions, FreeEnergyEstimate, Method};
use crate::error::{Error, Result};
use crate::landscape::MinimaCatalog;
use crate::model::{CouplingTensor, ModelSpec, SpherePoint};
use crate::rng::derive_seed;
use crate::sets::{RegionKind, RegionSpec, Support};
use crate::spectral::AngularProfile;
use crate::stats;

/// Restricted free energies of `Band(center, q, eps)` across a grid of `q`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BandProfile {
    pub eps: f64,
    pub points: Vec<(f64, FreeEnergyEstimate)>,
    /// Grid maximizer of the profile.
    pub q_star: f64,
    /// Grid points that beat both neighbours.
    pub interior_maxima: Vec<f64>,
}

/// Profile of band free energies; `eps` defaults to `2 / sqrt N`.
#[allow(clippy::too_many_arguments)]
pub fn band_profile(
    j: &CouplingTensor,
    beta: f64,
    center: &SpherePoint,
    q_grid: &[f64],
    eps: Option<f64>,
    budget: usize,
    method: Method,
    seed: u64,
) -> Result<BandProfile> {
    if q_grid.is_empty() || q_grid.iter().any(|q| !(*q > 0.0 && *q < 1.0)) {
        return Err(Error::Parameter("band grid must be non-empty and inside (0, 1)".into()));
    }
    let eps = eps.unwrap_or(2.0 / (j.dim() as f64).sqrt());
    let opts = AnnealOptions::default();
    let points = q_grid
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            let band = RegionSpec::band(center.clone(), q, eps)?;
            let est = estimate(j, beta, &band.into(), budget, method, derive_seed(seed, &[i as u64]), &opts)?;
            Ok((q, est))
        })
        .collect::<Result<Vec<_>>>()?;
    let f: Vec<f64> = points.iter().map(|(_, e)| e.value).collect();
    let best = (0..f.len()).max_by(|&a, &b| f[a].total_cmp(&f[b])).expect("non-empty");
    let interior_maxima = (1..f.len().saturating_sub(1))
        .filter(|&i| f[i] > f[i - 1] && f[i] > f[i + 1])
        .map(|i| q_grid[i])
        .collect();
    Ok(BandProfile { eps, q_star: q_grid[best], points, interior_maxima })
}

/// Gibbs masses of the angular shells `arccos R(center, .) in [edges_k, edges_{k+1}]`, each
/// estimated by annealing restricted to its shell with `particles` particles.
pub fn angular_profile(
    j: &CouplingTensor,
    beta: f64,
    center: &SpherePoint,
    edges: &[f64],
    particles: usize,
    seed: u64,
    opts: &AnnealOptions,
) -> Result<AngularProfile> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) || edges[0] < 0.0 {
        return Err(Error::Parameter("angular edges must increase from 0".into()));
    }
    let mut log_z = Vec::with_capacity(edges.len() - 1);
    let mut se = Vec::with_capacity(edges.len() - 1);
    for (k, w) in edges.windows(2).enumerate() {
        let shell = RegionSpec::new(RegionKind::Band, center.clone(), w[1].min(std::f64::consts::PI).cos(), w[0].cos())?;
        let est = estimate(j, beta, &shell.into(), particles, Method::Annealed, derive_seed(seed, &[k as u64]), opts)?;
        log_z.push(est.log_z);
        se.push(est.log_z_se);
    }
    let total = stats::log_sum_exp(&log_z);
    Ok(AngularProfile {
        n: j.dim(),
        edges: edges.to_vec(),
        log_mass: log_z.iter().map(|l| l - total).collect(),
        log_mass_se: Some(se),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GibbsRatio {
    /// `log(pi(B) / pi(A))`.
    pub log_ratio: f64,
    pub log_ratio_se: f64,
    pub ratio: f64,
    pub pi_a: f64,
    pub pi_b: f64,
    pub q_star: f64,
    pub q_star_star: f64,
    pub eps: f64,
}

#[derive(Clone, Debug)]
pub struct RatioOptions {
    /// Grid for locating the band maximizer.
    pub q_grid: Vec<f64>,
    /// Band half-width for the profile; `2 / sqrt N` by default.
    pub profile_eps: Option<f64>,
    /// Inner overlap level; half the band maximizer by default.
    pub q_star_star: Option<f64>,
    pub method: Method,
}

impl Default for RatioOptions {
    fn default() -> Self {
        Self {
            q_grid: (1..=19).map(|i| i as f64 * 0.05).collect(),
            profile_eps: None,
            q_star_star: None,
            method: Method::Annealed,
        }
    }
}

/// Compares the thin band `B = {R in [q**, q** + eps/sqrt N]}` around the `k`-th lowest minimum with
/// the cap `A = {R >= q** + eps/sqrt N}` beyond it.
#[allow(clippy::too_many_arguments)]
pub fn gibbs_ratio_experiment(
    j: &CouplingTensor,
    beta: f64,
    catalog: &MinimaCatalog,
    k: usize,
    eps: f64,
    budget: usize,
    seed: u64,
    opts: &RatioOptions,
) -> Result<GibbsRatio> {
    let center = catalog
        .minima
        .get(k.wrapping_sub(1))
        .ok_or_else(|| Error::Config(format!("catalog has {} minima, asked for #{k}", catalog.minima.len())))?
        .location
        .clone();
    let profile = band_profile(j, beta, &center, &opts.q_grid, opts.profile_eps, budget, opts.method, derive_seed(seed, &[0]))?;
    let q_star = profile.q_star;
    let q_ss = opts.q_star_star.unwrap_or(0.5 * q_star);
    if q_ss >= q_star {
        return Err(Error::Config(format!("inner level {q_ss} is not below the band maximizer {q_star}")));
    }
    if 2.0 * eps >= q_star - q_ss {
        return Err(Error::Config(format!("2 eps = {} is not below q* - q** = {}", 2.0 * eps, q_star - q_ss)));
    }
    let width = eps / (j.dim() as f64).sqrt();
    let a = RegionSpec::cap(center.clone(), (q_ss + width).min(1.0))?;
    let b = RegionSpec::new(RegionKind::Band, center, q_ss, (q_ss + width).min(1.0))?;
    let n = j.dim();
    let anneal = AnnealOptions::default();
    let za = estimate(j, beta, &a.into(), budget, opts.method, derive_seed(seed, &[1]), &anneal)?;
    let zb = estimate(j, beta, &b.into(), budget, opts.method, derive_seed(seed, &[2]), &anneal)?;
    let zf = estimate(j, beta, &Support::Full { n }, budget, opts.method, derive_seed(seed, &[3]), &anneal)?;
    let log_ratio = zb.log_z - za.log_z;
    Ok(GibbsRatio {
        log_ratio,
        log_ratio_se: za.log_z_se.hypot(zb.log_z_se),
        ratio: log_ratio.exp(),
        pi_a: (za.log_z - zf.log_z).exp(),
        pi_b: (zb.log_z - zf.log_z).exp(),
        q_star,
        q_star_star: q_ss,
        eps,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub ns: Vec<usize>,
    /// Per-spin free energies, one row of replicas per `N`.
    pub values: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Disorder-to-disorder spread of restricted free energies across `ns`.
#[allow(clippy::too_many_arguments)]
pub fn concentration_experiment<F>(
    p: usize,
    beta: f64,
    ns: &[usize],
    region: F,
    replicas: usize,
    budget: usize,
    method: Method,
    seed: u64,
) -> Result<ConcentrationReport>
where
    F: Fn(&CouplingTensor) -> Result<Support> + Sync,
{
    if replicas < 20 {
        return Err(Error::Parameter(format!("need at least 20 replicas, got {replicas}")));
    }
    let opts = AnnealOptions::default();
    let mut values = Vec::with_capacity(ns.len());
    for &n in ns {
        let spec = ModelSpec::new(p, n, beta)?;
        let row: Vec<Result<f64>> = (0..replicas as u64)
            .into_par_iter()
            .map(|r| {
                let j = CouplingTensor::sample(spec, derive_seed(seed, &[n as u64, r]))?;
                let support = region(&j)?;
                Ok(estimate(&j, beta, &support, budget, method, derive_seed(seed, &[n as u64, r, 1]), &opts)?.value)
            })
            .collect();
        values.push(row.into_iter().collect::<Result<Vec<f64>>>()?);
    }
    Ok(ConcentrationReport {
        ns: ns.to_vec(),
        mean: values.iter().map(|v| stats::mean(v)).collect(),
        std: values.iter().map(|v| stats::std_dev(v)).collect(),
        values,
    })
}

/// One line of `N,beta,seed,region,value,std_error,method`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub n: usize,
    pub beta: f64,
    pub seed: u64,
    pub region: String,
    pub value: f64,
    pub std_error: f64,
    pub method: String,
}

impl ExperimentRow {
    pub fn from_estimate(est: &FreeEnergyEstimate, seed: u64) -> Self {
        Self {
            n: est.support.dim(),
            beta: est.beta,
            seed,
            region: est.support.label(),
            value: est.value,
            std_error: est.std_error,
            method: format!("{:?}", est.method),
        }
    }
}

pub fn write_experiment_csv<W: Write>(rows: &[ExperimentRow], mut w: W) -> Result<()> {
    writeln!(w, "N,beta,seed,region,value,std_error,method")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{},{}", r.n, r.beta, r.seed, r.region, r.value, r.std_error, r.method)?;
    }
    Ok(())
}
