//! Experiment configuration, sweeps over `(p, N, beta, seed)` cells, and result persistence.

mod config;
mod records;
#[cfg(test)]
mod tests;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{Budgets, ExperimentConfig, ExperimentKind, OUT_ENV};
pub use records::{write_outputs, Cell, Report, ResultRecord, RunOutput, CSV_HEADER};

use crate::certificates::{bakry_emery_certificate, hessian_extremes, poincare_stability_certificate};
use crate::dynamics::{run_chain, tune_dt, ChainOptions, IntegratorConfig, Scheme, Start};
use crate::error::{Error, Result};
use crate::freenergy::{angular_profile, band_profile, concentration_experiment, AnnealOptions, ConcentrationReport, Method};
use crate::landscape::{catalog_minima, DEFAULT_DEDUPE, DEFAULT_TOL_G};
use crate::model::{CouplingTensor, ModelSpec, SpherePoint};
use crate::rng::derive_seed;
use crate::sets::Support;
use crate::spectral::{
    autocorrelation_time, conductance_scan, exact_gap_circle, rayleigh_upper_bound, AngularProfile, CircleGibbs,
    ConductanceChoice, OverlapFunction,
};
use crate::stats;

const CENTER_TAG: u64 = 1;
const PROFILE_TAG: u64 = 2;
const CHAIN_TAG: u64 = 3;
const BAND_TAG: u64 = 4;

fn pool(cfg: &ExperimentConfig) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(e.to_string()))
}

/// Seed for the auxiliary randomness of a cell; the disorder itself uses the bare seed.
fn cell_seed(cell: &Cell, tag: u64) -> u64 {
    derive_seed(cell.seed, &[cell.p as u64, cell.n as u64, cell.beta.to_bits(), tag])
}

fn disorder(cfg: &ExperimentConfig, spec: ModelSpec, seed: u64) -> Result<CouplingTensor> {
    if cfg.zero_disorder {
        CouplingTensor::zeros(spec)
    } else {
        CouplingTensor::sample(spec, seed)
    }
}

fn circle_point(a: f64) -> [f64; 2] {
    let r = std::f64::consts::SQRT_2;
    [r * a.cos(), r * a.sin()]
}

fn circle_argmin(j: &CouplingTensor) -> Result<f64> {
    let grid = 4096;
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..grid {
        let a = std::f64::consts::TAU * k as f64 / grid as f64;
        let e = j.energy_at(&circle_point(a))?;
        if e < best.0 {
            best = (e, a);
        }
    }
    Ok(best.1)
}

/// The `k` lowest minima found, lowest first; the circle argmin or the first axis when there is
/// nothing to catalog.
fn well_centers(cfg: &ExperimentConfig, j: &CouplingTensor, k: usize, seed: u64) -> Result<Vec<SpherePoint>> {
    if j.is_zero() {
        return Ok(vec![SpherePoint::axis(j.dim(), 0)]);
    }
    if j.dim() == 2 {
        return Ok(vec![SpherePoint::from_direction(circle_point(circle_argmin(j)?).to_vec())?]);
    }
    let catalog = catalog_minima(j, cfg.budgets.minima_restarts, DEFAULT_TOL_G, DEFAULT_DEDUPE, seed)?;
    if catalog.minima.is_empty() {
        return Err(Error::NoConvergence { what: "minima catalog", iterations: cfg.budgets.minima_restarts });
    }
    Ok(catalog.minima.into_iter().take(k).map(|m| m.location).collect())
}

/// The lowest minimum found, or the first axis for a flat landscape.
fn well_center(cfg: &ExperimentConfig, j: &CouplingTensor, seed: u64) -> Result<SpherePoint> {
    Ok(well_centers(cfg, j, 1, seed)?.swap_remove(0))
}

/// Smallest conductance bound over caps around each center. Every cap gives a valid upper bound,
/// so the minimum is one too.
fn best_conductance_bound(
    cfg: &ExperimentConfig,
    j: &CouplingTensor,
    beta: f64,
    centers: &[SpherePoint],
    seed: u64,
) -> Result<ConductanceChoice> {
    let mut best: Option<ConductanceChoice> = None;
    let mut last_err = None;
    for (k, center) in centers.iter().enumerate() {
        match conductance_bound(cfg, j, beta, center, derive_seed(seed, &[k as u64])) {
            Ok(c) if best.as_ref().map_or(true, |b| c.estimate.value < b.estimate.value) => best = Some(c),
            Ok(_) => {}
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or(Error::Parameter("no cap centers".into())))
}

/// Conductance upper bound for caps around `center`, with exact shell masses on the circle and
/// annealed estimates otherwise.
fn conductance_bound(
    cfg: &ExperimentConfig,
    j: &CouplingTensor,
    beta: f64,
    center: &SpherePoint,
    seed: u64,
) -> Result<ConductanceChoice> {
    let bins = cfg.budgets.profile_bins;
    let edges: Vec<f64> = (0..=bins).map(|i| std::f64::consts::PI * i as f64 / bins as f64).collect();
    let profile = if j.dim() == 2 {
        let c = center.coords();
        let angle = c[1].atan2(c[0]);
        AngularProfile {
            n: 2,
            log_mass: CircleGibbs::new(j, beta)?.angular_bins(angle, &edges),
            edges,
            log_mass_se: None,
        }
    } else {
        angular_profile(j, beta, center, &edges, cfg.budgets.particles, seed, &AnnealOptions::default())?
    };
    conductance_scan(&profile, cfg.budgets.max_shell_bins)
}

fn isolate(rec: &mut ResultRecord, step: &str, f: impl FnOnce(&mut ResultRecord) -> Result<()>) {
    let outcome = catch_unwind(AssertUnwindSafe(|| f(rec)));
    match outcome {
        Ok(Ok(())) => {}
        Ok(Err(e)) => rec.errors.push(format!("{step}: {e}")),
        Err(_) => rec.errors.push(format!("{step}: panicked")),
    }
}

fn run_cells<F>(cfg: &ExperimentConfig, cells: Vec<Cell>, body: F) -> Result<Vec<ResultRecord>>
where
    F: Fn(&mut ResultRecord, &Cell) + Sync,
{
    let hash = cfg.hash();
    let records = pool(cfg)?.install(|| {
        cells
            .into_par_iter()
            .map(|cell| {
                let start = Instant::now();
                let mut rec = ResultRecord::new(cfg.kind, &hash, cell);
                isolate(&mut rec, "cell", |rec| {
                    body(rec, &cell);
                    Ok(())
                });
                rec.wall_clock = start.elapsed();
                rec
            })
            .collect()
    });
    Ok(records)
}

fn grid_cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &p in &cfg.p {
        for &n in &cfg.n {
            for &beta in &cfg.beta {
                for &seed in &cfg.seeds {
                    cells.push(Cell { p, n, beta, seed });
                }
            }
        }
    }
    cells
}

/// Per cell: disorder, lowest well, conductance upper bound, certificates, relaxation time and a
/// Rayleigh bound from a MALA chain; circle cells add the exact gap.
pub fn run_gap_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    run_cells(cfg, grid_cells(cfg), |rec, cell| gap_cell(cfg, rec, cell))
}

fn gap_cell(cfg: &ExperimentConfig, rec: &mut ResultRecord, cell: &Cell) {
    let spec = ModelSpec::new_unchecked(cell.p, cell.n, cell.beta);
    let j = match disorder(cfg, spec, cell.seed) {
        Ok(j) => j,
        Err(e) => return rec.errors.push(format!("disorder: {e}")),
    };
    let centers = match well_centers(cfg, &j, cfg.budgets.cap_centers, cell_seed(cell, CENTER_TAG)) {
        Ok(c) => c,
        Err(e) => return rec.errors.push(format!("center: {e}")),
    };
    let center = &centers[0];
    if cell.n == 2 {
        isolate(rec, "exact", |rec| {
            let g = exact_gap_circle(&j, cell.beta, cfg.budgets.circle_grid)?;
            rec.gaps.push(g.with_provenance(spec, cell.seed));
            Ok(())
        });
    }
    isolate(rec, "conductance", |rec| {
        let choice = best_conductance_bound(cfg, &j, cell.beta, &centers, cell_seed(cell, PROFILE_TAG))?;
        rec.notes.insert("cap_angle".into(), choice.cap_angle);
        rec.notes.insert("shell_eps".into(), choice.eps);
        rec.gaps.push(choice.estimate.with_provenance(spec, cell.seed));
        Ok(())
    });
    isolate(rec, "bakry-emery", |rec| {
        let ext = hessian_extremes(&j, cfg.budgets.hessian_restarts)?;
        rec.hessian = Some(ext);
        if let Some(mut c) = bakry_emery_certificate(&spec, &ext) {
            c.estimate = c.estimate.with_provenance(spec, cell.seed);
            rec.certificates.push(c);
        }
        Ok(())
    });
    isolate(rec, "poincare", |rec| {
        rec.certificates.push(poincare_stability_certificate(&j, cell.beta, cfg.budgets.optimizer_restarts)?);
        Ok(())
    });
    if cfg.budgets.chain_steps > 0 {
        isolate(rec, "chain", |rec| {
            let seed = cell_seed(cell, CHAIN_TAG);
            let dt = tune_dt(&j, cell.beta, center, 0.5, seed)?;
            let icfg = IntegratorConfig {
                dt,
                scheme: Scheme::Mala,
                steps: cfg.budgets.chain_steps,
                thin: cfg.budgets.chain_thin,
                rng_seed: seed,
            };
            let chain = run_chain(&j, cell.beta, &icfg, Start::Point(center.clone()), &ChainOptions::default())?;
            rec.notes.insert("dt".into(), dt);
            if let Some(a) = chain.acceptance_rate {
                rec.notes.insert("acceptance".into(), a);
            }
            let bound = rayleigh_upper_bound(&j, cell.beta, &OverlapFunction(center.clone()), &chain)?;
            rec.gaps.push(bound.with_provenance(spec, cell.seed));
            let (tau, se) = autocorrelation_time(&chain.energy)?;
            rec.tau_int = Some([tau, se]);
            Ok(())
        });
    }
}

/// Decay of the conductance bound with `N` at one temperature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub p: usize,
    pub beta: f64,
    pub ns: Vec<usize>,
    /// Seeds with a converged bound at every `N`.
    pub seeds: Vec<u64>,
    /// `log` of the bound, one row per seed in `seeds`.
    pub log_bounds: Vec<Vec<f64>>,
    /// Per-seed least-squares slope of `log bound` against `N`.
    pub slopes: Vec<f64>,
    pub pooled_slope: f64,
    pub pooled_slope_se: f64,
    pub negative_slopes: usize,
    /// One-sided sign-test p-value for a negative slope.
    pub sign_test_p: f64,
    /// `-(1/N) log bound` at the largest `N`, per seed.
    pub rate_at_largest: Vec<f64>,
}

/// Conductance bound per `(N, seed)` at a single `beta` and `p`, then per-seed trends in `N`.
pub fn run_phase_slope(cfg: &ExperimentConfig) -> Result<(SlopeReport, Vec<ResultRecord>)> {
    cfg.validate()?;
    if cfg.p.len() != 1 || cfg.beta.len() != 1 {
        return Err(Error::Config("phase slope takes a single p and a single beta".into()));
    }
    if cfg.n.len() < 4 {
        return Err(Error::Config(format!("phase slope needs at least 4 values of N, got {}", cfg.n.len())));
    }
    let records = run_cells(cfg, grid_cells(cfg), |rec, cell| {
        let spec = ModelSpec::new_unchecked(cell.p, cell.n, cell.beta);
        isolate(rec, "conductance", |rec| {
            let j = disorder(cfg, spec, cell.seed)?;
            let centers = well_centers(cfg, &j, cfg.budgets.cap_centers, cell_seed(cell, CENTER_TAG))?;
            let choice = best_conductance_bound(cfg, &j, cell.beta, &centers, cell_seed(cell, PROFILE_TAG))?;
            rec.gaps.push(choice.estimate.with_provenance(spec, cell.seed));
            Ok(())
        });
    })?;
    let report = slope_report(cfg, &records)?;
    Ok((report, records))
}

fn slope_report(cfg: &ExperimentConfig, records: &[ResultRecord]) -> Result<SlopeReport> {
    let mut ns = cfg.n.clone();
    ns.sort_unstable();
    let lookup: BTreeMap<(usize, u64), f64> = records
        .iter()
        .filter_map(|r| r.gaps.first().map(|g| ((r.cell.n, r.cell.seed), g.value.ln())))
        .filter(|(_, l)| l.is_finite())
        .collect();
    let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let (mut seeds, mut log_bounds, mut slopes) = (Vec::new(), Vec::new(), Vec::new());
    for &seed in &cfg.seeds {
        let row: Option<Vec<f64>> = ns.iter().map(|&n| lookup.get(&(n, seed)).copied()).collect();
        if let Some(row) = row {
            slopes.push(stats::linear_fit(&x, &row).0);
            seeds.push(seed);
            log_bounds.push(row);
        }
    }
    if seeds.len() < 2 {
        return Err(Error::Config(format!(
            "insufficient converged cells: {} seeds have a bound at every N",
            seeds.len()
        )));
    }
    let px: Vec<f64> = log_bounds.iter().flat_map(|_| x.iter().copied()).collect();
    let py: Vec<f64> = log_bounds.iter().flatten().copied().collect();
    let (pooled_slope, pooled_slope_se) = stats::linear_fit(&px, &py);
    let negative_slopes = slopes.iter().filter(|s| **s < 0.0).count();
    let n_max = *ns.last().expect("non-empty") as f64;
    Ok(SlopeReport {
        p: cfg.p[0],
        beta: cfg.beta[0],
        rate_at_largest: log_bounds.iter().map(|r| -r.last().expect("non-empty") / n_max).collect(),
        sign_test_p: stats::sign_test_p(negative_slopes, seeds.len()),
        ns,
        seeds,
        log_bounds,
        slopes,
        pooled_slope,
        pooled_slope_se,
        negative_slopes,
    })
}

/// Largest certified temperature per `(p, N, seed)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateRow {
    pub p: usize,
    pub n: usize,
    pub seed: u64,
    pub r_max: f64,
    pub r_min: f64,
    /// Largest grid `beta` with a curvature certificate; `None` when even the smallest fails.
    pub beta_h: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub rows: Vec<CertificateRow>,
    /// Mean of `beta_h` over seeds, per `(p, N)` in grid order.
    pub mean_beta_h: Vec<(usize, usize, f64)>,
}

/// Curvature certificates across the `beta` grid; the disorder and Hessian extremes of a
/// `(p, N, seed)` cell are shared by all temperatures.
pub fn run_certificate_sweep(cfg: &ExperimentConfig) -> Result<(CertificateReport, Vec<ResultRecord>)> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for &p in &cfg.p {
        for &n in &cfg.n {
            for &seed in &cfg.seeds {
                cells.push(Cell { p, n, beta: 0.0, seed });
            }
        }
    }
    let mut betas = cfg.beta.clone();
    betas.sort_by(f64::total_cmp);
    let records = run_cells(cfg, cells, |rec, cell| {
        isolate(rec, "bakry-emery", |rec| {
            let spec = ModelSpec::new_unchecked(cell.p, cell.n, 0.0);
            let j = disorder(cfg, spec, cell.seed)?;
            let ext = hessian_extremes(&j, cfg.budgets.hessian_restarts)?;
            rec.hessian = Some(ext);
            for &beta in &betas {
                if let Some(mut c) = bakry_emery_certificate(&spec.with_beta(beta), &ext) {
                    c.estimate = c.estimate.with_provenance(spec.with_beta(beta), cell.seed);
                    rec.certificates.push(c);
                }
            }
            Ok(())
        });
    })?;
    let rows: Vec<CertificateRow> = records
        .iter()
        .filter_map(|r| {
            let ext = r.hessian?;
            Some(CertificateRow {
                p: r.cell.p,
                n: r.cell.n,
                seed: r.cell.seed,
                r_max: ext.r_max,
                r_min: ext.r_min,
                beta_h: r.certificates.iter().filter_map(|c| c.estimate.spec.map(|s| s.beta)).reduce(f64::max),
            })
        })
        .collect();
    let mut mean_beta_h = Vec::new();
    for &p in &cfg.p {
        for &n in &cfg.n {
            let v: Vec<f64> = rows.iter().filter(|r| r.p == p && r.n == n).filter_map(|r| r.beta_h).collect();
            if !v.is_empty() {
                mean_beta_h.push((p, n, stats::mean(&v)));
            }
        }
    }
    Ok((CertificateReport { rows, mean_beta_h }, records))
}

/// Band free-energy profiles around the lowest well of each cell.
pub fn run_band_profiles(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    run_cells(cfg, grid_cells(cfg), |rec, cell| {
        isolate(rec, "band", |rec| {
            let spec = ModelSpec::new_unchecked(cell.p, cell.n, cell.beta);
            let j = disorder(cfg, spec, cell.seed)?;
            let center = well_center(cfg, &j, cell_seed(cell, CENTER_TAG))?;
            let prof = band_profile(
                &j,
                cell.beta,
                &center,
                &cfg.budgets.band_grid,
                None,
                cfg.budgets.particles,
                Method::Annealed,
                cell_seed(cell, BAND_TAG),
            )?;
            rec.notes.insert("q_star".into(), prof.q_star);
            rec.notes.insert("interior_maxima".into(), prof.interior_maxima.len() as f64);
            rec.free_energies.extend(prof.points.into_iter().map(|(_, e)| e));
            Ok(())
        });
    })
}

/// Full-sphere free-energy spread per `(p, beta)`; the number of seeds sets the replica count and
/// the first seed is the master seed of the replicas.
pub fn run_concentration(cfg: &ExperimentConfig) -> Result<(Vec<ConcentrationReport>, Vec<ResultRecord>)> {
    cfg.validate()?;
    let hash = cfg.hash();
    let mut reports = Vec::new();
    let mut records = Vec::new();
    for &p in &cfg.p {
        for &beta in &cfg.beta {
            let report = pool(cfg)?.install(|| {
                concentration_experiment(
                    p,
                    beta,
                    &cfg.n,
                    |j| Ok(Support::Full { n: j.dim() }),
                    cfg.seeds.len(),
                    cfg.budgets.particles,
                    Method::Annealed,
                    cfg.seeds[0],
                )
            })?;
            for (i, &n) in report.ns.iter().enumerate() {
                let mut rec = ResultRecord::new(cfg.kind, &hash, Cell { p, n, beta, seed: cfg.seeds[0] });
                rec.notes.insert("mean".into(), report.mean[i]);
                rec.notes.insert("std".into(), report.std[i]);
                rec.notes.insert("replicas".into(), cfg.seeds.len() as f64);
                records.push(rec);
            }
            reports.push(report);
        }
    }
    Ok((reports, records))
}

/// Runs the experiment named by `cfg.kind`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let (records, report) = match cfg.kind {
        ExperimentKind::GapSweep => (run_gap_sweep(cfg)?, Report::None),
        ExperimentKind::PhaseSlope => {
            let (r, recs) = run_phase_slope(cfg)?;
            (recs, Report::Slope(r))
        }
        ExperimentKind::CertificateSweep => {
            let (r, recs) = run_certificate_sweep(cfg)?;
            (recs, Report::Certificates(r))
        }
        ExperimentKind::BandProfile => (run_band_profiles(cfg)?, Report::None),
        ExperimentKind::Concentration => {
            let (r, recs) = run_concentration(cfg)?;
            (recs, Report::Concentration(r))
        }
    };
    Ok(RunOutput { config_hash: cfg.hash(), records, report })
}
