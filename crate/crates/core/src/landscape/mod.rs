//! Local minima of the Hamiltonian on the sphere and the complexity scales.

mod complexity;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use complexity::{ground_state_scale, m_n, theta, theta_derivative};

use crate::error::{Error, Result};
use crate::model::{overlap, tangent_hessian_spectrum, CouplingTensor, ModelSpec, SpherePoint};
use crate::rng;
use crate::scalar::dot;

const MAX_ITERATIONS: usize = 50_000;
const MAX_ESCAPES: usize = 20;
/// Default dedupe threshold on `|R|`.
pub const DEFAULT_DEDUPE: f64 = 0.98;
/// Default stationarity tolerance (per `sqrt N`).
pub const DEFAULT_TOL_G: f64 = 1e-7;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Minimum {
    pub location: SpherePoint,
    pub energy: f64,
    pub gradient_norm: f64,
    pub hessian_min_eigenvalue: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MinimaCatalog {
    pub spec: ModelSpec,
    pub minima: Vec<Minimum>,
    pub dedupe_overlap: f64,
    pub restarts_used: usize,
    pub failed_restarts: usize,
}

/// Second-order tolerance used to call a critical point a minimum.
fn hessian_tolerance(j: &CouplingTensor) -> f64 {
    // scale of the Hessian spectrum is order 1 in N
    1e-6 * (j.degree() as f64)
}

/// Riemannian gradient descent with Barzilai-Borwein steps, Armijo backtracking along renormalized
/// rays, and escape along negative curvature when it stalls at a saddle.
pub fn find_local_minimum(j: &CouplingTensor, start: &SpherePoint, tol_g: f64) -> Result<Minimum> {
    if !(tol_g > 0.0) {
        return Err(Error::Parameter(format!("gradient tolerance {tol_g} must be positive")));
    }
    crate::error::ensure_dim(j.dim(), start.dim())?;
    let n = start.dim() as f64;
    let target = tol_g * n.sqrt();
    let mut x = start.coords().to_vec();
    let mut escapes = 0;
    let mut iterations = 0;
    loop {
        let (point, local, g) = descend(j, x, target, &mut iterations)?;
        let spectrum = tangent_hessian_spectrum(&local, point.coords());
        let gnorm = dot(&g, &g).sqrt();
        if spectrum.min >= -hessian_tolerance(j) || escapes >= MAX_ESCAPES {
            return Ok(Minimum {
                location: point,
                energy: local.energy,
                gradient_norm: gnorm,
                hessian_min_eigenvalue: spectrum.min,
            });
        }
        escapes += 1;
        let step = 0.1 * n.sqrt();
        x = point
            .coords()
            .iter()
            .zip(&spectrum.min_vector)
            .map(|(s, v)| s + step * v)
            .collect();
    }
}

fn descend(
    j: &CouplingTensor,
    x0: Vec<f64>,
    target: f64,
    iterations: &mut usize,
) -> Result<(SpherePoint, crate::model::LocalTerms<f64>, Vec<f64>)> {
    let mut point = SpherePoint::from_direction(x0)?;
    let mut local = j.local_at(&point)?;
    let mut g = local.spherical_gradient(point.coords());
    let mut step = 0.1;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    loop {
        let gsq = dot(&g, &g);
        if gsq.sqrt() <= target {
            return Ok((point, local, g));
        }
        *iterations += 1;
        if *iterations > MAX_ITERATIONS {
            return Err(Error::NoConvergence { what: "local minimization", iterations: MAX_ITERATIONS });
        }
        if let Some((px, pg)) = &prev {
            let s: Vec<f64> = point.coords().iter().zip(px).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g.iter().zip(pg).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 0.0 {
                step = (dot(&s, &s) / sy).clamp(1e-6, 1e3);
            }
        }
        let mut t = step;
        let accepted = loop {
            let trial: Vec<f64> = point.coords().iter().zip(&g).map(|(s, gi)| s - t * gi).collect();
            let cand = SpherePoint::from_direction(trial)?;
            let cand_local = j.local_at(&cand)?;
            if cand_local.energy <= local.energy - 1e-4 * t * gsq {
                break Some((cand, cand_local));
            }
            // below energy resolution, settle for a smaller gradient
            if t * gsq < 1e-10 * local.energy.abs().max(1.0) {
                let cg = cand_local.spherical_gradient(cand.coords());
                if dot(&cg, &cg) < gsq {
                    break Some((cand, cand_local));
                }
            }
            t *= 0.5;
            if t < 1e-14 {
                break None;
            }
        };
        let Some((cand, cand_local)) = accepted else {
            return Err(Error::NoConvergence { what: "local minimization line search", iterations: *iterations });
        };
        prev = Some((point.coords().to_vec(), g));
        point = cand;
        local = cand_local;
        g = local.spherical_gradient(point.coords());
    }
}

/// Minimizes from `restarts` uniform starts drawn from substreams of `seed` and keeps one
/// representative per `|R| > dedupe_overlap` cluster, sorted by energy.
pub fn catalog_minima(
    j: &CouplingTensor,
    restarts: usize,
    tol_g: f64,
    dedupe_overlap: f64,
    seed: u64,
) -> Result<MinimaCatalog> {
    if restarts == 0 {
        return Err(Error::Parameter("need at least one restart".into()));
    }
    if j.is_zero() {
        return Err(Error::FlatLandscape);
    }
    let n = j.dim();
    let results: Vec<Result<Minimum>> = (0..restarts as u64)
        .into_par_iter()
        .map(|k| {
            let mut r = rng::substream(seed, &[k]);
            find_local_minimum(j, &SpherePoint::uniform(n, &mut r), tol_g)
        })
        .collect();
    let failed = results.iter().filter(|r| r.is_err()).count();
    let mut found: Vec<Minimum> = results
        .into_iter()
        .filter_map(|r| r.ok())
        .filter(|m| m.hessian_min_eigenvalue >= -hessian_tolerance(j))
        .collect();
    found.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    let mut minima: Vec<Minimum> = Vec::new();
    for m in found {
        let dup = minima
            .iter()
            .any(|k| overlap(&k.location, &m.location).map(|r| r.abs() > dedupe_overlap).unwrap_or(false));
        if !dup {
            minima.push(m);
        }
    }
    Ok(MinimaCatalog {
        spec: *j.spec(),
        minima,
        dedupe_overlap,
        restarts_used: restarts,
        failed_restarts: failed,
    })
}

#[derive(Serialize, Deserialize)]
struct CatalogEntry {
    energy: f64,
    gradient_norm: f64,
    min_eigenvalue: f64,
    #[serde(rename = "coords-file")]
    coords_file: String,
}

impl MinimaCatalog {
    /// Writes `catalog.json` and one `minimum_NNN.json` coordinate file per entry into `dir`.
    pub fn export(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let mut entries = Vec::with_capacity(self.minima.len());
        for (k, m) in self.minima.iter().enumerate() {
            let name = format!("minimum_{k:03}.json");
            fs::write(dir.join(&name), serde_json::to_string(m.location.coords())?)?;
            entries.push(CatalogEntry {
                energy: m.energy,
                gradient_norm: m.gradient_norm,
                min_eigenvalue: m.hessian_min_eigenvalue,
                coords_file: name,
            });
        }
        let path = dir.join("catalog.json");
        fs::write(&path, serde_json::to_string_pretty(&entries)?)?;
        Ok(path)
    }
}

/// Reads a coordinate file written by [`MinimaCatalog::export`].
pub fn load_point(path: &Path) -> Result<SpherePoint> {
    let coords: Vec<f64> = serde_json::from_str(&fs::read_to_string(path)?)?;
    SpherePoint::from_direction(coords)
}
