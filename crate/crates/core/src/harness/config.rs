use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Environment variable that overrides the configured output directory.
pub const OUT_ENV: &str = "PSPIN_OUT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    GapSweep,
    PhaseSlope,
    CertificateSweep,
    BandProfile,
    Concentration,
}

/// Work limits for the estimators a sweep runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    /// Multistart count for the minima catalog.
    pub minima_restarts: usize,
    /// Multistart count for the Hessian extremes.
    pub hessian_restarts: usize,
    /// Multistart count for the energy extremes of the stability certificate.
    pub optimizer_restarts: usize,
    /// Angular bins of the conductance profile.
    pub profile_bins: usize,
    /// Widest shell, in bins, tried by the conductance scan.
    pub max_shell_bins: usize,
    /// Lowest minima used as cap centers; the smallest conductance bound wins.
    pub cap_centers: usize,
    /// Particles per annealed free-energy estimate.
    pub particles: usize,
    /// MALA steps for the relaxation-time and Rayleigh estimates; 0 skips the chain.
    pub chain_steps: usize,
    pub chain_thin: usize,
    /// Grid points of the exact circle solver.
    pub circle_grid: usize,
    /// Overlap grid of band profiles.
    pub band_grid: Vec<f64>,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            minima_restarts: 64,
            hessian_restarts: 32,
            optimizer_restarts: 32,
            profile_bins: 32,
            max_shell_bins: 8,
            cap_centers: 4,
            particles: 1000,
            chain_steps: 20_000,
            chain_thin: 10,
            circle_grid: 2048,
            band_grid: (1..=19).map(|i| i as f64 * 0.05).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub p: Vec<usize>,
    pub n: Vec<usize>,
    pub beta: Vec<f64>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Worker count; results do not depend on it.
    #[serde(default)]
    pub threads: Option<usize>,
    /// Replaces every disorder sample with the zero tensor.
    #[serde(default)]
    pub zero_disorder: bool,
}

fn default_out() -> PathBuf {
    PathBuf::from("results")
}

/// The part of the config that determines the results.
#[derive(Serialize)]
struct HashedView<'a> {
    kind: ExperimentKind,
    p: &'a [usize],
    n: &'a [usize],
    beta: &'a [f64],
    seeds: &'a [u64],
    budgets: &'a Budgets,
    zero_disorder: bool,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, p: Vec<usize>, n: Vec<usize>, beta: Vec<f64>, seeds: Vec<u64>) -> Self {
        Self {
            kind,
            p,
            n,
            beta,
            seeds,
            budgets: Budgets::default(),
            out: default_out(),
            threads: None,
            zero_disorder: false,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and applies the output-directory override from [`OUT_ENV`].
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&fs::read_to_string(path)?)?;
        if let Some(dir) = std::env::var_os(OUT_ENV) {
            cfg.out = PathBuf::from(dir);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, empty) in [
            ("p", self.p.is_empty()),
            ("n", self.n.is_empty()),
            ("beta", self.beta.is_empty()),
            ("seeds", self.seeds.is_empty()),
        ] {
            if empty {
                return Err(Error::Config(format!("`{name}` grid is empty")));
            }
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return Err(Error::Config("seeds are not unique".into()));
        }
        if let Some(&p) = self.p.iter().find(|&&p| p < 3) {
            return Err(Error::Config(format!("degree {p} is below 3")));
        }
        if let Some(&n) = self.n.iter().find(|&&n| n < 2) {
            return Err(Error::Config(format!("dimension {n} is below 2")));
        }
        if let Some(b) = self.beta.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
            return Err(Error::Config(format!("beta {b} must be finite and non-negative")));
        }
        let b = &self.budgets;
        if b.minima_restarts == 0 || b.hessian_restarts == 0 || b.optimizer_restarts == 0 {
            return Err(Error::Config("restart budgets must be positive".into()));
        }
        if b.profile_bins < 3 || b.max_shell_bins == 0 || b.cap_centers == 0 {
            return Err(Error::Config("conductance profile needs at least 3 bins and a shell".into()));
        }
        if b.chain_thin == 0 {
            return Err(Error::Config("chain_thin must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 of the result-determining fields, hex encoded.
    pub fn hash(&self) -> String {
        let view = HashedView {
            kind: self.kind,
            p: &self.p,
            n: &self.n,
            beta: &self.beta,
            seeds: &self.seeds,
            budgets: &self.budgets,
            zero_disorder: self.zero_disorder,
        };
        let bytes = serde_json::to_vec(&view).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}
