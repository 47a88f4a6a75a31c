use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{CertificateReport, ExperimentKind, SlopeReport};
use crate::certificates::{Certificate, HessianExtremes};
use crate::error::Result;
use crate::freenergy::{ConcentrationReport, FreeEnergyEstimate};
use crate::spectral::GapEstimate;

pub const CSV_HEADER: &str = "kind,p,N,beta,seed,quantity,direction,method,value,std_error";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub p: usize,
    pub n: usize,
    pub beta: f64,
    pub seed: u64,
}

/// Everything one sweep cell produced. Wall-clock time is kept in memory only, so that records of
/// identical runs serialize identically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub kind: ExperimentKind,
    pub config_hash: String,
    pub version: String,
    pub cell: Cell,
    pub gaps: Vec<GapEstimate>,
    pub certificates: Vec<Certificate>,
    pub free_energies: Vec<FreeEnergyEstimate>,
    pub hessian: Option<HessianExtremes>,
    /// Integrated autocorrelation time of the energy and its standard error.
    pub tau_int: Option<[f64; 2]>,
    pub notes: BTreeMap<String, f64>,
    pub errors: Vec<String>,
    #[serde(skip)]
    pub wall_clock: Duration,
}

impl ResultRecord {
    pub fn new(kind: ExperimentKind, config_hash: &str, cell: Cell) -> Self {
        Self {
            kind,
            config_hash: config_hash.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            cell,
            gaps: Vec::new(),
            certificates: Vec::new(),
            free_energies: Vec::new(),
            hessian: None,
            tau_int: None,
            notes: BTreeMap::new(),
            errors: Vec::new(),
            wall_clock: Duration::ZERO,
        }
    }

    /// The record's lines of the results CSV (without header).
    pub fn csv_lines(&self) -> String {
        let c = &self.cell;
        let prefix = format!("{:?},{},{},{},{}", self.kind, c.p, c.n, c.beta, c.seed);
        let se = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let mut out = String::new();
        for g in &self.gaps {
            let _ = writeln!(out, "{prefix},gap,{:?},{},{},{}", g.direction, g.method, g.value, se(g.std_error));
        }
        for cert in &self.certificates {
            let g = &cert.estimate;
            let _ = writeln!(out, "{prefix},certificate,{:?},{},{},", g.direction, g.method, g.value);
        }
        for f in &self.free_energies {
            let _ = writeln!(
                out,
                "{prefix},free_energy[{}],PointEstimate,{:?},{},{}",
                f.support.label(),
                f.method,
                f.value,
                f.std_error
            );
        }
        if let Some(h) = &self.hessian {
            let _ = writeln!(out, "{prefix},r_max,PointEstimate,ascent,{},", h.r_max);
            let _ = writeln!(out, "{prefix},r_min,PointEstimate,ascent,{},", h.r_min);
        }
        if let Some([tau, s]) = self.tau_int {
            let _ = writeln!(out, "{prefix},tau_int,PointEstimate,windowed,{tau},{s}");
        }
        for (k, v) in &self.notes {
            let _ = writeln!(out, "{prefix},{k},PointEstimate,,{v},");
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Report {
    None,
    Slope(SlopeReport),
    Certificates(CertificateReport),
    Concentration(Vec<ConcentrationReport>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub config_hash: String,
    pub records: Vec<ResultRecord>,
    pub report: Report,
}

/// Writes `records.json`, `results.csv` and, when present, `report.json` into `dir`.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let records = dir.join("records.json");
    fs::write(&records, serde_json::to_string_pretty(&out.records)?)?;
    written.push(records);
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for r in &out.records {
        csv.push_str(&r.csv_lines());
    }
    let results = dir.join("results.csv");
    fs::write(&results, csv)?;
    written.push(results);
    if out.report != Report::None {
        let report = dir.join("report.json");
        fs::write(&report, serde_json::to_string_pretty(&out.report)?)?;
        written.push(report);
    }
    Ok(written)
}
