use super::*;
use crate::spectral::Direction;

fn small(kind: ExperimentKind, n: Vec<usize>, beta: Vec<f64>, seeds: Vec<u64>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(kind, vec![3], n, beta, seeds);
    cfg.budgets.minima_restarts = 16;
    cfg.budgets.hessian_restarts = 4;
    cfg.budgets.optimizer_restarts = 8;
    cfg.budgets.profile_bins = 16;
    cfg.budgets.chain_steps = 4000;
    cfg.budgets.chain_thin = 4;
    cfg.budgets.circle_grid = 512;
    cfg
}

#[test]
fn config_round_trips_through_toml() {
    let text = r#"
kind = "GapSweep"
p = [3]
n = [2, 8]
beta = [0.0, 1.0]
seeds = [1, 2]
out = "elsewhere"

[budgets]
particles = 2000
"#;
    let cfg = ExperimentConfig::from_toml(text).unwrap();
    assert_eq!(cfg.budgets.particles, 2000);
    assert_eq!(cfg.budgets.hessian_restarts, Budgets::default().hessian_restarts);
    let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(again, cfg);
    assert!(ExperimentConfig::from_toml(&text.replace("particles", "partcles")).is_err());
}

#[test]
fn invalid_grids_are_rejected() {
    let ok = small(ExperimentKind::GapSweep, vec![2], vec![1.0], vec![1]);
    assert!(ok.validate().is_ok());
    let cases = [
        ExperimentConfig { beta: vec![], ..ok.clone() },
        ExperimentConfig { seeds: vec![1, 1], ..ok.clone() },
        ExperimentConfig { n: vec![1], ..ok.clone() },
        ExperimentConfig { beta: vec![-1.0], ..ok.clone() },
        ExperimentConfig { threads: Some(0), ..ok.clone() },
    ];
    for cfg in cases {
        assert!(matches!(run_gap_sweep(&cfg), Err(Error::Config(_))), "{cfg:?}");
    }
}

#[test]
fn hash_tracks_result_determining_fields() {
    let a = small(ExperimentKind::GapSweep, vec![2], vec![1.0], vec![1]);
    let b = ExperimentConfig { threads: Some(3), out: "x".into(), ..a.clone() };
    assert_eq!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 64);
    let mut c = a.clone();
    c.budgets.particles += 1;
    assert_ne!(a.hash(), c.hash());
}

#[test]
fn circle_cell_is_sandwiched() {
    let cfg = small(ExperimentKind::GapSweep, vec![2], vec![4.0], vec![3]);
    let recs = run_gap_sweep(&cfg).unwrap();
    assert_eq!(recs.len(), 1);
    let r = &recs[0];
    assert!(r.errors.is_empty(), "{:?}", r.errors);
    assert_eq!(r.config_hash, cfg.hash());
    let exact = r.gaps.iter().find(|g| g.direction == Direction::Exact).unwrap().value;
    let uppers: Vec<_> = r.gaps.iter().filter(|g| g.direction == Direction::UpperBound).collect();
    assert_eq!(uppers.len(), 2);
    for u in uppers {
        assert!(u.value + 3.0 * u.std_error.unwrap_or(0.0) >= exact, "{u:?} vs {exact}");
        assert_eq!(u.seed, Some(3));
    }
    assert!(!r.certificates.is_empty());
    for c in &r.certificates {
        assert!(c.lower_bound() <= exact);
    }
    assert!(r.tau_int.is_some() && r.hessian.is_some());
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let mut cfg = small(ExperimentKind::GapSweep, vec![2, 5], vec![0.5, 2.0], vec![1, 2]);
    cfg.budgets.particles = 1000;
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for (k, threads) in [1, 3].into_iter().enumerate() {
        let out = run_experiment(&ExperimentConfig { threads: Some(threads), ..cfg.clone() }).unwrap();
        let d = dir.path().join(k.to_string());
        write_outputs(&out, &d).unwrap();
        bytes.push((fs_read(&d.join("results.csv")), fs_read(&d.join("records.json"))));
    }
    assert_eq!(bytes[0], bytes[1]);
    assert!(bytes[0].0.starts_with(CSV_HEADER.as_bytes()));
}

fn fs_read(p: &std::path::Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn failing_steps_are_recorded_without_aborting() {
    // constant energy: the relaxation-time estimate fails, everything else completes
    let mut cfg = small(ExperimentKind::GapSweep, vec![4], vec![1.0], vec![1, 2]);
    cfg.zero_disorder = true;
    // the flat measure only has a bottleneck at a fine angular resolution
    cfg.budgets.profile_bins = 64;
    let recs = run_gap_sweep(&cfg).unwrap();
    assert_eq!(recs.len(), 2);
    for r in &recs {
        assert_eq!(r.errors.len(), 1, "{:?}", r.errors);
        assert!(r.errors[0].starts_with("chain:"));
        assert!(r.gaps.iter().any(|g| g.method == "conductance-scan"));
        assert_eq!(r.certificates.len(), 2);
        for c in &r.certificates {
            assert!((c.lower_bound() - 0.5 * (1.0 - 0.25)).abs() < 1e-15);
        }
    }
}

#[test]
fn free_slope_is_flat_and_disorder_free() {
    let mut cfg = small(ExperimentKind::PhaseSlope, vec![6, 8, 10, 12], vec![0.0], vec![1, 2, 3]);
    cfg.budgets.minima_restarts = 8;
    cfg.budgets.profile_bins = 128;
    let (rep, recs) = run_phase_slope(&cfg).unwrap();
    assert_eq!(recs.len(), 12);
    assert_eq!(rep.seeds.len(), 3);
    for row in &rep.log_bounds[1..] {
        assert_eq!(row, &rep.log_bounds[0]);
    }
    // only the shell geometry varies with N
    assert!(rep.pooled_slope.abs() < 0.05, "{rep:?}");
    let short = ExperimentConfig { n: vec![6, 8, 10], ..cfg.clone() };
    assert!(matches!(run_phase_slope(&short), Err(Error::Config(_))));
    let two = ExperimentConfig { beta: vec![0.0, 1.0], ..cfg };
    assert!(matches!(run_phase_slope(&two), Err(Error::Config(_))));
}

#[test]
fn cold_slope_is_negative() {
    let mut cfg = small(ExperimentKind::PhaseSlope, vec![8, 10, 12, 14], vec![8.0], vec![1, 2, 3]);
    cfg.budgets.minima_restarts = 16;
    let (rep, _) = run_phase_slope(&cfg).unwrap();
    assert!(rep.pooled_slope < 0.0, "{rep:?}");
}

#[test]
fn zero_disorder_certifies_every_temperature() {
    let mut cfg = small(ExperimentKind::CertificateSweep, vec![6, 8], vec![0.1, 1.0, 10.0, 100.0], vec![1, 2]);
    cfg.zero_disorder = true;
    let (rep, recs) = run_certificate_sweep(&cfg).unwrap();
    assert_eq!(recs.len(), 4);
    for row in &rep.rows {
        assert_eq!(row.beta_h, Some(100.0));
    }
    for r in &recs {
        assert_eq!(r.certificates.len(), 4);
    }
}

#[test]
fn certificate_sweep_ignores_worker_count() {
    let cfg = small(ExperimentKind::CertificateSweep, vec![6, 8], vec![0.01, 0.03, 0.05, 0.1, 0.3], vec![1, 2]);
    let (a, _) = run_certificate_sweep(&ExperimentConfig { threads: Some(1), ..cfg.clone() }).unwrap();
    let (b, _) = run_certificate_sweep(&ExperimentConfig { threads: Some(4), ..cfg }).unwrap();
    assert_eq!(a, b);
    assert!(a.rows.iter().all(|r| r.beta_h.is_some() && r.beta_h < Some(0.3)));
    assert_eq!(a.mean_beta_h.len(), 2);
}

#[test]
fn band_and_concentration_runs() {
    let mut cfg = small(ExperimentKind::BandProfile, vec![6], vec![2.0], vec![1]);
    cfg.budgets.band_grid = vec![0.2, 0.5, 0.8];
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.records[0].free_energies.len(), 3);
    assert!(out.records[0].notes.contains_key("q_star"));

    let conc = small(ExperimentKind::Concentration, vec![5, 6], vec![0.0], (0..20).collect());
    let out = run_experiment(&conc).unwrap();
    let Report::Concentration(reps) = &out.report else { panic!() };
    assert_eq!(reps[0].std, vec![0.0, 0.0]);
    assert_eq!(out.records.len(), 2);
}

#[test]
fn outputs_round_trip() {
    let cfg = small(ExperimentKind::CertificateSweep, vec![5], vec![0.01], vec![1]);
    let out = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = write_outputs(&out, dir.path()).unwrap();
    assert_eq!(files.len(), 3);
    let text = std::fs::read_to_string(dir.path().join("records.json")).unwrap();
    assert!(!text.contains("wall_clock"));
    let back: Vec<ResultRecord> = serde_json::from_str(&text).unwrap();
    let mut expected = out.records.clone();
    expected.iter_mut().for_each(|r| r.wall_clock = Default::default());
    assert_eq!(back, expected);
}

#[test]
fn more_cap_centers_never_loosen_the_bound() {
    let mut cfg = small(ExperimentKind::PhaseSlope, vec![8], vec![4.0], vec![3]);
    cfg.budgets.particles = 200;
    let j = CouplingTensor::sample(ModelSpec::new(3, 8, 4.0).unwrap(), 3).unwrap();
    let centers = well_centers(&cfg, &j, 3, 11).unwrap();
    assert!(!centers.is_empty() && centers.len() <= 3);
    let one = best_conductance_bound(&cfg, &j, 4.0, &centers[..1], 5).unwrap();
    let all = best_conductance_bound(&cfg, &j, 4.0, &centers, 5).unwrap();
    assert!(all.estimate.value <= one.estimate.value);
}
