//! Disorder, Hamiltonian and its derivatives on the sphere `S^{N-1}(sqrt N)`.
//!
//! The Hamiltonian is `H(sigma) = N^{-(p-1)/2} sum J_{i_1..i_p} sigma_{i_1}..sigma_{i_p}`, extended
//! verbatim to all of `R^N`. Derivatives come from cached partial contractions of the symmetric
//! tensor (see [`LocalTerms`]): one order-2 contraction yields the energy, the Euclidean gradient
//! and the Euclidean Hessian.

mod io;
mod sphere;
mod tensor;

use nalgebra::{DMatrix, SymmetricEigen};

pub use io::{load_tensor, read_tensor, save_tensor, write_tensor, MAGIC};
pub use sphere::{geodesic, overlap, SpherePoint, TangentVector};
pub use tensor::{CouplingTensor, LocalTerms, ModelSpec, MAX_DENSE_ENTRIES};

use crate::error::{ensure_dim, Result};
use crate::scalar::Scalar;

/// Tangency tolerance accepted by [`spherical_hessian_apply`], relative to `N`.
pub const HESSIAN_TANGENCY_TOL: f64 = 1e-8;

/// Draws the symmetrized Gaussian disorder for `spec`, deterministically in `seed`.
pub fn sample_disorder<S: Scalar>(spec: ModelSpec, seed: u64) -> Result<CouplingTensor<S>> {
    CouplingTensor::sample(spec, seed)
}

pub fn energy<S: Scalar>(j: &CouplingTensor<S>, sigma: &SpherePoint<S>) -> Result<S> {
    j.energy_at(sigma.coords())
}

/// Gradient of the Hamiltonian extended to `R^N`.
pub fn euclidean_gradient<S: Scalar>(j: &CouplingTensor<S>, sigma: &SpherePoint<S>) -> Result<Vec<S>> {
    Ok(j.local(sigma.coords())?.gradient)
}

/// Riemannian gradient: the Euclidean gradient minus its radial component.
pub fn spherical_gradient<S: Scalar>(
    j: &CouplingTensor<S>,
    sigma: &SpherePoint<S>,
) -> Result<TangentVector<S>> {
    let local = j.local(sigma.coords())?;
    let g = local.spherical_gradient(sigma.coords());
    Ok(TangentVector::from_raw(sigma.clone(), g))
}

/// Covariant Hessian of `H` at `sigma` applied to the tangent vector `v`.
pub fn spherical_hessian_apply<S: Scalar>(
    j: &CouplingTensor<S>,
    sigma: &SpherePoint<S>,
    v: &TangentVector<S>,
) -> Result<TangentVector<S>> {
    ensure_dim(sigma.dim(), v.components().len())?;
    sphere::check_tangent(sigma, v.components(), S::lit(HESSIAN_TANGENCY_TOL))?;
    let local = j.local(sigma.coords())?;
    let w = local.spherical_hessian_apply(sigma.coords(), v.components());
    Ok(TangentVector::from_raw(sigma.clone(), w))
}

/// Extreme eigenpairs of the covariant Hessian restricted to the tangent space.
#[derive(Clone, Debug)]
pub struct TangentSpectrum {
    pub min: f64,
    pub max: f64,
    /// Unit eigenvector of `min`.
    pub min_vector: Vec<f64>,
    /// Unit eigenvector of `max`.
    pub max_vector: Vec<f64>,
}

/// Dense eigen-decomposition of `P (Hess_E - (p/N) H) P`, dropping the radial direction.
pub fn tangent_hessian_spectrum(local: &LocalTerms<f64>, sigma: &[f64]) -> TangentSpectrum {
    let n = sigma.len();
    let shift = local.radial_shift();
    let mut a = local.euclidean_hessian();
    for i in 0..n {
        a[i * n + i] -= shift;
    }
    // P A P with P = I - s s^T / N
    let nf = n as f64;
    let a_s: Vec<f64> = a.chunks_exact(n).map(|row| crate::scalar::dot(row, sigma)).collect();
    let s_a_s = crate::scalar::dot(&a_s, sigma);
    let m = DMatrix::from_fn(n, n, |i, k| {
        a[i * n + k] - (a_s[i] * sigma[k] + sigma[i] * a_s[k]) / nf + s_a_s * sigma[i] * sigma[k] / (nf * nf)
    });
    let eig = SymmetricEigen::new(m);
    let radial = (0..n)
        .max_by(|&x, &y| {
            let rx = crate::scalar::dot(eig.eigenvectors.column(x).as_slice(), sigma).abs();
            let ry = crate::scalar::dot(eig.eigenvectors.column(y).as_slice(), sigma).abs();
            rx.total_cmp(&ry)
        })
        .expect("n >= 1");
    let mut lo = (f64::INFINITY, 0);
    let mut hi = (f64::NEG_INFINITY, 0);
    for k in (0..n).filter(|&k| k != radial) {
        let ev = eig.eigenvalues[k];
        if ev < lo.0 {
            lo = (ev, k);
        }
        if ev > hi.0 {
            hi = (ev, k);
        }
    }
    TangentSpectrum {
        min: lo.0,
        max: hi.0,
        min_vector: eig.eigenvectors.column(lo.1).iter().copied().collect(),
        max_vector: eig.eigenvectors.column(hi.1).iter().copied().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn instance(p: usize, n: usize, seed: u64) -> CouplingTensor {
        sample_disorder(ModelSpec::new(p, n, 1.0).unwrap(), seed).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn disorder_is_deterministic_in_seed() {
        let spec = ModelSpec::new(3, 2, 1.0).unwrap();
        let a: CouplingTensor = sample_disorder(spec, 42).unwrap();
        let b: CouplingTensor = sample_disorder(spec, 42).unwrap();
        let bits = |t: &CouplingTensor| t.entries().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let c: CouplingTensor = sample_disorder(spec, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn index_count() {
        let t = instance(3, 4, 1);
        assert_eq!(t.entries().len(), 64);
    }

    #[test]
    fn zero_tensor_is_inert() {
        let spec = ModelSpec::new(3, 5, 1.0).unwrap();
        let j: CouplingTensor = CouplingTensor::zeros(spec).unwrap();
        let mut r = rng::stream(1);
        let s = SpherePoint::uniform(5, &mut r);
        let v = TangentVector::random_unit(s.clone(), &mut r);
        assert_eq!(energy(&j, &s).unwrap(), 0.0);
        assert!(euclidean_gradient(&j, &s).unwrap().iter().all(|&x| x == 0.0));
        assert!(spherical_gradient(&j, &s).unwrap().components().iter().all(|&x| x == 0.0));
        assert!(spherical_hessian_apply(&j, &s, &v).unwrap().components().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn one_dimensional_normalization() {
        let spec = ModelSpec::new_unchecked(3, 1, 1.0);
        let j: CouplingTensor = CouplingTensor::from_entries(spec, vec![-0.75], 0).unwrap();
        let s = SpherePoint::new(vec![1.0]).unwrap();
        assert_eq!(energy(&j, &s).unwrap(), -0.75);
    }

    #[test]
    fn euclidean_gradient_matches_central_differences() {
        let j = instance(3, 6, 9);
        let mut r = rng::stream(2);
        for _ in 0..5 {
            let s: SpherePoint = SpherePoint::uniform(6, &mut r);
            let g = euclidean_gradient(&j, &s).unwrap();
            let h = 1e-5;
            for i in 0..6 {
                let mut plus = s.coords().to_vec();
                let mut minus = s.coords().to_vec();
                plus[i] += h;
                minus[i] -= h;
                let fd = (j.energy_at(&plus).unwrap() - j.energy_at(&minus).unwrap()) / (2.0 * h);
                assert!((fd - g[i]).abs() <= 1e-5 * g[i].abs().max(1.0), "{fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn spherical_gradient_matches_geodesic_derivative() {
        for (p, n) in [(3, 4), (4, 5)] {
            let j = instance(p, n, 17);
            let mut r = rng::stream(3);
            for _ in 0..10 {
                let s: SpherePoint = SpherePoint::uniform(n, &mut r);
                let v = TangentVector::random_unit(s.clone(), &mut r);
                let g = spherical_gradient(&j, &s).unwrap();
                let exact = g.inner(&v).unwrap();
                let t = 1e-4;
                let e = |t: f64| energy(&j, &geodesic(&s, &v, t).unwrap()).unwrap();
                let fd = (e(t) - e(-t)) / (2.0 * t);
                assert!((fd - exact).abs() <= 1e-4 * exact.abs().max(1.0), "{fd} vs {exact}");
            }
        }
    }

    #[test]
    fn hessian_quadratic_form_matches_second_geodesic_difference() {
        let j = instance(3, 5, 23);
        let mut r = rng::stream(4);
        for _ in 0..10 {
            let s: SpherePoint = SpherePoint::uniform(5, &mut r);
            let v = TangentVector::random_unit(s.clone(), &mut r);
            let hv = spherical_hessian_apply(&j, &s, &v).unwrap();
            let exact = hv.inner(&v).unwrap();
            let t = 1e-3;
            let e = |t: f64| energy(&j, &geodesic(&s, &v, t).unwrap()).unwrap();
            let fd = (e(t) - 2.0 * e(0.0) + e(-t)) / (t * t);
            assert!((fd - exact).abs() <= 1e-3 * exact.abs().max(1.0), "{fd} vs {exact}");
        }
    }

    #[test]
    fn hessian_rejects_non_tangent_input() {
        let j = instance(3, 4, 1);
        let s: SpherePoint = SpherePoint::axis(4, 0);
        let v = TangentVector::from_raw(s.clone(), vec![1.0, 0.0, 0.0, 0.0]);
        assert!(spherical_hessian_apply(&j, &s, &v).is_err());
    }

    #[test]
    fn tangent_spectrum_matches_hessian_action() {
        let j = instance(3, 7, 5);
        let mut r = rng::stream(8);
        let s: SpherePoint = SpherePoint::uniform(7, &mut r);
        let local = j.local_at(&s).unwrap();
        let spec = tangent_hessian_spectrum(&local, s.coords());
        for (val, vec) in [(spec.min, &spec.min_vector), (spec.max, &spec.max_vector)] {
            assert!(crate::scalar::dot(vec, s.coords()).abs() < 1e-10);
            let hv = local.spherical_hessian_apply(s.coords(), vec);
            for (a, b) in hv.iter().zip(vec.iter()) {
                assert!((a - val * b).abs() < 1e-9);
            }
        }
        // random unit tangent directions lie between the extremes
        for _ in 0..20 {
            let v = TangentVector::random_unit(s.clone(), &mut r);
            let q = crate::scalar::dot(&local.spherical_hessian_apply(s.coords(), v.components()), v.components());
            assert!(q >= spec.min - 1e-10 && q <= spec.max + 1e-10);
        }
    }

    #[test]
    fn single_precision_agrees_with_double() {
        let j = instance(3, 6, 31);
        let j32: CouplingTensor<f32> = CouplingTensor::from_entries(
            *j.spec(),
            j.entries().iter().map(|&x| x as f32).collect(),
            j.seed(),
        )
        .unwrap();
        let mut r = rng::stream(6);
        let s: SpherePoint = SpherePoint::uniform(6, &mut r);
        let e64 = energy(&j, &s).unwrap();
        let e32 = energy(&j32, &s.cast::<f32>()).unwrap();
        assert!((e64 - e32 as f64).abs() < 1e-4 * e64.abs().max(1.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn euler_identity(seed in 0u64..1000, p in 3usize..6, n in 2usize..7) {
            let j = instance(p, n, seed);
            let mut r = rng::stream(seed ^ 0x55);
            let s: SpherePoint = SpherePoint::uniform(n, &mut r);
            let local = j.local_at(&s).unwrap();
            let lhs = crate::scalar::dot(s.coords(), &local.gradient);
            prop_assert!(rel(lhs, p as f64 * local.energy) <= 1e-10 || lhs.abs() < 1e-12);
        }

        #[test]
        fn reflection_symmetry(seed in 0u64..1000, p in 3usize..6, n in 2usize..7) {
            let j = instance(p, n, seed);
            let mut r = rng::stream(seed ^ 0xaa);
            let s: SpherePoint = SpherePoint::uniform(n, &mut r);
            let a = energy(&j, &s).unwrap();
            let b = energy(&j, &s.negated()).unwrap();
            let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
            prop_assert_eq!(b, sign * a);
        }

        #[test]
        fn outputs_are_tangent_and_hessian_is_symmetric_linear(seed in 0u64..1000, n in 3usize..8) {
            let j = instance(3, n, seed);
            let mut r = rng::stream(seed ^ 0x33);
            let s: SpherePoint = SpherePoint::uniform(n, &mut r);
            let g = spherical_gradient(&j, &s).unwrap();
            prop_assert!(TangentVector::new(s.clone(), g.components().to_vec()).is_ok());
            let u = TangentVector::random_unit(s.clone(), &mut r);
            let v = TangentVector::random_unit(s.clone(), &mut r);
            let hu = spherical_hessian_apply(&j, &s, &u).unwrap();
            let hv = spherical_hessian_apply(&j, &s, &v).unwrap();
            prop_assert!(TangentVector::new(s.clone(), hu.components().to_vec()).is_ok());
            let a = hu.inner(&v).unwrap();
            let b = u.inner(&hv).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1.0));
            // linearity
            let comb: Vec<f64> = u.components().iter().zip(v.components()).map(|(x, y)| 2.0 * x - 0.5 * y).collect();
            let w = TangentVector::new(s.clone(), comb).unwrap();
            let hw = spherical_hessian_apply(&j, &s, &w).unwrap();
            for ((a, b), c) in hw.components().iter().zip(hu.components()).zip(hv.components()) {
                prop_assert!((a - (2.0 * b - 0.5 * c)).abs() < 1e-10 * (1.0 + a.abs()));
            }
        }
    }
}
