use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pspin_core::certificates::{bakry_emery_certificate, hessian_extremes, poincare_stability_certificate};
use pspin_core::freenergy::{restricted_free_energy, write_experiment_csv, ExperimentRow, Method};
use pspin_core::harness::{run_experiment, run_phase_slope, write_outputs, ExperimentConfig, ExperimentKind, Report};
use pspin_core::landscape::{catalog_minima, DEFAULT_DEDUPE, DEFAULT_TOL_G};
use pspin_core::model::{load_tensor, save_tensor};
use pspin_core::sets::{RegionKind, RegionSpec, Support};
use pspin_core::spectral::{conductance_scan, exact_gap_circle, CircleGibbs, GapEstimate};
use pspin_core::{Coupling, CouplingTensor, Error, ModelSpec, Result, SpherePoint};

#[derive(Parser)]
#[command(name = "pspin", version, about = "Spectral-gap experiments for spherical p-spin glasses")]
struct Cli {
    /// Master seed (disorder seed for single-instance commands).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Experiment config file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a coupling tensor and write it to a file.
    Sample {
        #[arg(long, default_value_t = 3)]
        p: usize,
        #[arg(long)]
        n: usize,
    },
    /// Catalog local minima of one instance.
    Minima {
        #[command(flatten)]
        disorder: Disorder,
        #[arg(long, default_value_t = 64)]
        restarts: usize,
        #[arg(long, default_value_t = DEFAULT_TOL_G)]
        tol: f64,
    },
    /// Gap estimates for one instance: exact on the circle, conductance bound otherwise.
    Gap {
        #[command(flatten)]
        disorder: Disorder,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 2048)]
        grid: usize,
        #[arg(long, default_value_t = 32)]
        bins: usize,
        #[arg(long, default_value_t = 8)]
        max_shell_bins: usize,
        #[arg(long, default_value_t = 1000)]
        particles: usize,
        #[arg(long, default_value_t = 64)]
        restarts: usize,
    },
    /// Curvature and stability certificates for one instance.
    Certify {
        #[command(flatten)]
        disorder: Disorder,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 32)]
        restarts: usize,
    },
    /// Restricted free energy of one instance.
    Fe {
        #[command(flatten)]
        disorder: Disorder,
        #[arg(long)]
        beta: f64,
        /// `full`, `cap:Q` or `band:LOW:HIGH`, centered on the first axis.
        #[arg(long, default_value = "full")]
        region: String,
        #[arg(long, default_value_t = 1000)]
        budget: usize,
        #[arg(long, value_enum, default_value_t = MethodArg::Annealed)]
        method: MethodArg,
    },
    /// Run the experiment described by `--config`.
    Sweep,
    /// Run a phase-slope experiment from `--config`.
    Slope,
}

#[derive(Args)]
struct Disorder {
    /// Tensor file written by `sample`; otherwise sampled from `--p`, `--n` and `--seed`.
    #[arg(long, conflicts_with_all = ["p", "n"])]
    tensor: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    p: usize,
    #[arg(long, required_unless_present = "tensor")]
    n: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Uniform,
    Annealed,
}

impl Disorder {
    fn load(&self, seed: u64, beta: f64) -> Result<Coupling> {
        match &self.tensor {
            Some(path) => load_tensor(path, beta),
            None => {
                let n = self.n.ok_or_else(|| Error::Parameter("need --n or --tensor".into()))?;
                CouplingTensor::sample(ModelSpec::new(self.p, n, beta)?, seed)
            }
        }
    }
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("results"))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value)?)?;
    Ok(path)
}

fn parse_region(text: &str, n: usize) -> Result<Support> {
    let center = SpherePoint::axis(n, 0);
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parameter(format!("bad number `{s}`: {e}")));
    match parts.as_slice() {
        ["full"] => Ok(Support::Full { n }),
        ["cap", q] => Ok(RegionSpec::cap(center, num(q)?)?.into()),
        ["band", lo, hi] => Ok(RegionSpec::new(RegionKind::Band, center, num(lo)?, num(hi)?)?.into()),
        _ => Err(Error::Parameter(format!("unknown region `{text}`"))),
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("this command needs --config".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let seed = cli.seed;
    match &cli.command {
        Command::Sample { p, n } => {
            let j: Coupling = CouplingTensor::sample(ModelSpec::new(*p, *n, 1.0)?, seed)?;
            let dir = out_dir(cli);
            fs::create_dir_all(&dir)?;
            let path = dir.join(format!("tensor_p{p}_n{n}_s{seed}.pspn"));
            save_tensor(&j, &path)?;
            println!("{}", path.display());
        }
        Command::Minima { disorder, restarts, tol } => {
            let j = disorder.load(seed, 1.0)?;
            let catalog = catalog_minima(&j, *restarts, *tol, DEFAULT_DEDUPE, seed)?;
            let path = catalog.export(&out_dir(cli))?;
            println!("{} minima (lowest energy {}) -> {}", catalog.minima.len(), catalog.minima[0].energy, path.display());
        }
        Command::Gap { disorder, beta, grid, bins, max_shell_bins, particles, restarts } => {
            let j = disorder.load(seed, *beta)?;
            let mut estimates: Vec<GapEstimate> = Vec::new();
            let edges: Vec<f64> = (0..=*bins).map(|i| std::f64::consts::PI * i as f64 / *bins as f64).collect();
            let profile = if j.dim() == 2 {
                estimates.push(exact_gap_circle(&j, *beta, *grid)?);
                let gibbs = CircleGibbs::new(&j, *beta)?;
                let center = circle_minimum(&j)?;
                pspin_core::spectral::AngularProfile { n: 2, log_mass: gibbs.angular_bins(center, &edges), edges, log_mass_se: None }
            } else {
                let catalog = catalog_minima(&j, *restarts, DEFAULT_TOL_G, DEFAULT_DEDUPE, seed)?;
                let center = &catalog.minima[0].location;
                pspin_core::freenergy::angular_profile(&j, *beta, center, &edges, *particles, seed, &Default::default())?
            };
            estimates.push(conductance_scan(&profile, *max_shell_bins)?.estimate);
            let estimates: Vec<GapEstimate> = estimates.into_iter().map(|e| e.with_provenance(*j.spec(), seed)).collect();
            for e in &estimates {
                println!("{:?} {} = {}", e.direction, e.method, e.value);
            }
            write_json(&out_dir(cli), "gap.json", &estimates)?;
        }
        Command::Certify { disorder, beta, restarts } => {
            let j = disorder.load(seed, *beta)?;
            let ext = hessian_extremes(&j, *restarts)?;
            let mut certs = Vec::new();
            match bakry_emery_certificate(&j.spec().with_beta(*beta), &ext) {
                Some(c) => certs.push(c),
                None => println!("no curvature certificate at beta = {beta} (r_min = {})", ext.r_min),
            }
            certs.push(poincare_stability_certificate(&j, *beta, *restarts)?);
            for c in &certs {
                println!("{:?} lower bound = {}", c.kind, c.lower_bound());
            }
            write_json(&out_dir(cli), "certificates.json", &certs)?;
        }
        Command::Fe { disorder, beta, region, budget, method } => {
            let j = disorder.load(seed, *beta)?;
            let support = parse_region(region, j.dim())?;
            let method = match method {
                MethodArg::Uniform => Method::UniformImportance,
                MethodArg::Annealed => Method::Annealed,
            };
            let est = restricted_free_energy(&j, *beta, &support, *budget, method, seed)?;
            if !est.reliable {
                eprintln!("warning: effective sample size {:.1} is below the reliability floor", est.effective_samples);
            }
            let dir = out_dir(cli);
            fs::create_dir_all(&dir)?;
            write_experiment_csv(&[ExperimentRow::from_estimate(&est, seed)], fs::File::create(dir.join("fe.csv"))?)?;
            println!("F = {} +- {}", est.value, est.std_error);
        }
        Command::Sweep => {
            let cfg = load_config(cli)?;
            let out = run_experiment(&cfg)?;
            let failed = out.records.iter().filter(|r| !r.errors.is_empty()).count();
            let secs: f64 = out.records.iter().map(|r| r.wall_clock.as_secs_f64()).sum();
            for path in write_outputs(&out, &cfg.out)? {
                println!("{}", path.display());
            }
            eprintln!("{} cells, {failed} with errors, {secs:.1} s of cell time", out.records.len());
        }
        Command::Slope => {
            let cfg = load_config(cli)?;
            if cfg.kind != ExperimentKind::PhaseSlope {
                return Err(Error::Config(format!("config kind is {:?}, expected PhaseSlope", cfg.kind)));
            }
            let (report, records) = run_phase_slope(&cfg)?;
            println!(
                "slope {:.4} +- {:.4}; {}/{} seeds negative (sign test p = {:.4})",
                report.pooled_slope,
                report.pooled_slope_se,
                report.negative_slopes,
                report.seeds.len(),
                report.sign_test_p
            );
            let out = pspin_core::harness::RunOutput { config_hash: cfg.hash(), records, report: Report::Slope(report) };
            write_outputs(&out, &cfg.out)?;
        }
    }
    Ok(())
}

fn circle_minimum(j: &Coupling) -> Result<f64> {
    let r = std::f64::consts::SQRT_2;
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..4096 {
        let a = std::f64::consts::TAU * k as f64 / 4096.0;
        let e = j.energy_at(&[r * a.cos(), r * a.sin()])?;
        if e < best.0 {
            best = (e, a);
        }
    }
    Ok(best.1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
