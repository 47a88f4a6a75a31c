use super::*;
use crate::landscape::{catalog_minima, find_local_minimum};
use crate::model::{ModelSpec, SpherePoint};
use crate::sets::RegionSpec;

fn instance(p: usize, n: usize, seed: u64) -> CouplingTensor {
    CouplingTensor::sample(ModelSpec::new(p, n, 1.0).unwrap(), seed).unwrap()
}

fn cap(n: usize, q: f64) -> Support {
    RegionSpec::cap(SpherePoint::axis(n, 0), q).unwrap().into()
}

#[test]
fn zero_tensor_gives_log_volume() {
    let zero = CouplingTensor::zeros(ModelSpec::new(3, 7, 1.0).unwrap()).unwrap();
    for support in [Support::Full { n: 7 }, cap(7, 0.4)] {
        for method in [Method::UniformImportance, Method::Annealed] {
            let e = restricted_free_energy(&zero, 3.0, &support, 1000, method, 1).unwrap();
            assert!((e.value - support.log_volume() / 7.0).abs() < 1e-14);
            assert_eq!(e.std_error, 0.0);
        }
    }
    let full = restricted_free_energy(&zero, 2.0, &Support::Full { n: 7 }, 1000, Method::UniformImportance, 1).unwrap();
    assert_eq!(full.value, 0.0);
}

#[test]
fn zero_beta_ignores_disorder() {
    let j = instance(3, 6, 3);
    let support = cap(6, 0.2);
    for method in [Method::UniformImportance, Method::Annealed] {
        let e = restricted_free_energy(&j, 0.0, &support, 1000, method, 4).unwrap();
        assert!((e.value - support.log_volume() / 6.0).abs() < 1e-14);
    }
}

#[test]
fn invalid_inputs() {
    let j = instance(3, 6, 3);
    assert!(restricted_free_energy(&j, 1.0, &Support::Full { n: 6 }, 999, Method::UniformImportance, 1).is_err());
    let empty: Support = RegionSpec::band(SpherePoint::axis(6, 0), 0.2, 0.0).unwrap().into();
    assert!(matches!(
        restricted_free_energy(&j, 1.0, &empty, 1000, Method::UniformImportance, 1),
        Err(Error::EmptyRegion)
    ));
    assert!(restricted_free_energy(&j, 1.0, &Support::Full { n: 5 }, 1000, Method::Annealed, 1).is_err());
}

#[test]
fn estimators_agree_on_the_full_sphere() {
    let j = instance(3, 10, 21);
    let full = Support::Full { n: 10 };
    let ui = restricted_free_energy(&j, 1.0, &full, 200_000, Method::UniformImportance, 5).unwrap();
    let an = restricted_free_energy(&j, 1.0, &full, 2000, Method::Annealed, 6).unwrap();
    let se = ui.std_error.hypot(an.std_error);
    assert!((ui.value - an.value).abs() < 3.0 * se, "{} +- {} vs {} +- {}", ui.value, ui.std_error, an.value, an.std_error);
    assert!(ui.reliable && an.reliable);
}

#[test]
fn low_effective_sample_size_is_flagged() {
    let j = instance(3, 12, 2);
    let e = restricted_free_energy(&j, 20.0, &Support::Full { n: 12 }, 1000, Method::UniformImportance, 1).unwrap();
    assert!(!e.reliable && e.effective_samples < MIN_EFFECTIVE_SAMPLES);
}

#[test]
fn nested_supports_and_decomposition() {
    let n = 8;
    let j = instance(3, n, 14);
    let x = SpherePoint::axis(n, 0);
    let est = |s: &Support, seed| restricted_free_energy(&j, 1.5, s, 4000, Method::Annealed, seed).unwrap();
    let inner = est(&RegionSpec::cap(x.clone(), 0.5).unwrap().into(), 1);
    let outer = est(&RegionSpec::cap(x.clone(), 0.0).unwrap().into(), 2);
    let other = est(&RegionSpec::cap(x.negated(), 0.0).unwrap().into(), 3);
    let full = est(&Support::Full { n }, 4);
    assert!(inner.value <= outer.value + 3.0 * inner.std_error.hypot(outer.std_error));
    // Z(A) + Z(A^c) = Z
    let sum = outer.log_z.exp() + other.log_z.exp();
    let se = (outer.log_z_se * outer.log_z.exp()).hypot(other.log_z_se * other.log_z.exp());
    let zf = full.log_z.exp();
    assert!((sum - zf).abs() < 3.0 * se.hypot(full.log_z_se * zf), "{sum} vs {zf}");
}

#[test]
fn free_energy_lies_between_extreme_energies() {
    let n = 8;
    let beta = 2.0;
    let j = instance(3, n, 6);
    let cat = catalog_minima(&j, 32, 1e-8, 0.98, 1).unwrap();
    let hmin = cat.minima[0].energy;
    let hmax = -catalog_minima(&j.negated(), 32, 1e-8, 0.98, 1).unwrap().minima[0].energy;
    let f = restricted_free_energy(&j, beta, &Support::Full { n }, 2000, Method::Annealed, 2).unwrap();
    let nf = n as f64;
    assert!(f.value <= -beta * hmin / nf + 3.0 * f.std_error);
    assert!(f.value >= -beta * hmax / nf - 3.0 * f.std_error);
    let _ = find_local_minimum;
}

#[test]
fn annealing_is_independent_of_worker_count() {
    let j = instance(3, 8, 8);
    let support = cap(8, 0.3);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| restricted_free_energy(&j, 3.0, &support, 1000, Method::Annealed, 9).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.log_z.to_bits(), b.log_z.to_bits());
    assert_eq!(a.log_z_se.to_bits(), b.log_z_se.to_bits());
}

#[test]
fn zero_tensor_band_profile_is_pure_entropy() {
    let n = 10;
    let zero = CouplingTensor::zeros(ModelSpec::new(3, n, 1.0).unwrap()).unwrap();
    let grid = [0.1, 0.3, 0.5, 0.7, 0.9];
    let prof = band_profile(&zero, 4.0, &SpherePoint::axis(n, 0), &grid, None, 1000, Method::UniformImportance, 1).unwrap();
    assert_eq!(prof.q_star, 0.1);
    assert!(prof.interior_maxima.is_empty());
    for (q, e) in &prof.points {
        let v = RegionSpec::band(SpherePoint::axis(n, 0), *q, 2.0 / (n as f64).sqrt()).unwrap().log_volume();
        assert!((e.value - v / n as f64).abs() < 1e-14);
    }
    assert!(band_profile(&zero, 1.0, &SpherePoint::axis(n, 0), &[0.0, 0.5], None, 1000, Method::Annealed, 1).is_err());
}

#[test]
fn even_degree_profile_is_reflection_symmetric() {
    let n = 8;
    let j = instance(4, n, 4);
    let x = SpherePoint::axis(n, 3);
    let grid = [0.3, 0.6];
    let a = band_profile(&j, 1.0, &x, &grid, Some(0.1), 2000, Method::Annealed, 1).unwrap();
    let b = band_profile(&j, 1.0, &x.negated(), &grid, Some(0.1), 2000, Method::Annealed, 2).unwrap();
    for ((_, ea), (_, eb)) in a.points.iter().zip(&b.points) {
        assert!((ea.value - eb.value).abs() < 3.0 * ea.std_error.hypot(eb.std_error));
    }
}

#[test]
fn zero_tensor_ratio_is_a_volume_ratio() {
    let n = 10;
    let zero = CouplingTensor::zeros(ModelSpec::new(3, n, 1.0).unwrap()).unwrap();
    let x = SpherePoint::axis(n, 0);
    let catalog = crate::landscape::MinimaCatalog {
        spec: *zero.spec(),
        minima: vec![crate::landscape::Minimum { location: x.clone(), energy: 0.0, gradient_norm: 0.0, hessian_min_eigenvalue: 0.0 }],
        dedupe_overlap: 0.98,
        restarts_used: 1,
        failed_restarts: 0,
    };
    let opts = RatioOptions { q_grid: vec![0.5, 0.6, 0.7], q_star_star: Some(0.1), method: Method::UniformImportance, ..Default::default() };
    let r = gibbs_ratio_experiment(&zero, 8.0, &catalog, 1, 0.1, 1000, 3, &opts).unwrap();
    let w = 0.1 / (n as f64).sqrt();
    let va = RegionSpec::cap(x.clone(), 0.1 + w).unwrap().log_volume();
    let vb = RegionSpec::new(crate::sets::RegionKind::Band, x, 0.1, 0.1 + w).unwrap().log_volume();
    assert!((r.log_ratio - (vb - va)).abs() < 1e-12);
    assert!(gibbs_ratio_experiment(&zero, 8.0, &catalog, 2, 0.1, 1000, 3, &opts).is_err());
    let bad = RatioOptions { q_star_star: Some(0.6), ..opts.clone() };
    assert!(matches!(gibbs_ratio_experiment(&zero, 8.0, &catalog, 1, 0.1, 1000, 3, &bad), Err(Error::Config(_))));
    let wide = RatioOptions { q_star_star: Some(0.3), ..opts };
    assert!(matches!(gibbs_ratio_experiment(&zero, 8.0, &catalog, 1, 0.15, 1000, 3, &wide), Err(Error::Config(_))));
}

#[test]
fn zero_temperature_concentration_is_exact() {
    let rep = concentration_experiment(3, 0.0, &[6, 8], |j| Ok(Support::Full { n: j.dim() }), 20, 1000, Method::Annealed, 1).unwrap();
    assert_eq!(rep.std, vec![0.0, 0.0]);
    assert!(concentration_experiment(3, 0.0, &[6], |j| Ok(Support::Full { n: j.dim() }), 10, 1000, Method::Annealed, 1).is_err());
}

#[test]
fn csv_rows() {
    let j = instance(3, 5, 1);
    let e = restricted_free_energy(&j, 1.0, &cap(5, 0.2), 1000, Method::UniformImportance, 1).unwrap();
    let mut buf = Vec::new();
    write_experiment_csv(&[ExperimentRow::from_estimate(&e, 1)], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("N,beta,seed,region,value,std_error,method\n5,1,1,cap[0.200000],"));
    assert!(text.trim_end().ends_with("UniformImportance"));
}
