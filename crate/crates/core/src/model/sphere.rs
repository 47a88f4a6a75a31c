use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::rng::Stream;
use crate::scalar::{dot, norm, Scalar};

/// A configuration on the sphere of radius `sqrt(N)` in `R^N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpherePoint<S = f64> {
    coords: Vec<S>,
}

impl<S: Scalar> SpherePoint<S> {
    /// Wraps coordinates that already satisfy `sum sigma_i^2 = N`.
    pub fn new(coords: Vec<S>) -> Result<Self> {
        let n = coords.len();
        if n == 0 {
            return Err(Error::Parameter("empty coordinate vector".into()));
        }
        let nsq = dot(&coords, &coords);
        let target = S::lit(n as f64);
        if !nsq.is_finite() || ((nsq - target) / target).abs() > S::invariant_tolerance() {
            return Err(Error::OffSphere {
                norm_sq: nsq.as_f64(),
                n,
            });
        }
        Ok(Self { coords })
    }

    /// Rescales an arbitrary nonzero vector onto the sphere.
    pub fn from_direction(mut v: Vec<S>) -> Result<Self> {
        let len = norm(&v);
        if !(len.is_finite() && len > S::zero()) {
            return Err(Error::Parameter("cannot normalize a zero or non-finite vector".into()));
        }
        let scale = S::lit(v.len() as f64).sqrt() / len;
        v.iter_mut().for_each(|x| *x *= scale);
        Ok(Self { coords: v })
    }

    /// `sqrt(N) e_i`.
    pub fn axis(n: usize, i: usize) -> Self {
        let mut coords = vec![S::zero(); n];
        coords[i] = S::lit(n as f64).sqrt();
        Self { coords }
    }

    /// Uniform point on the sphere.
    pub fn uniform(n: usize, rng: &mut Stream) -> Self {
        loop {
            let v: Vec<S> = (0..n)
                .map(|_| S::lit(StandardNormal.sample(rng)))
                .collect();
            if let Ok(p) = Self::from_direction(v) {
                return p;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[S] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<S> {
        self.coords
    }

    pub fn negated(&self) -> Self {
        Self {
            coords: self.coords.iter().map(|&x| -x).collect(),
        }
    }

    /// Converts the scalar type, renormalizing to absorb rounding.
    pub fn cast<T: Scalar>(&self) -> SpherePoint<T> {
        let v: Vec<T> = self.coords.iter().map(|x| T::lit(x.as_f64())).collect();
        SpherePoint::from_direction(v).expect("cast of a valid point")
    }

    /// Orthogonal projection of `v` onto the tangent space at this point.
    pub fn project(&self, v: &[S]) -> Vec<S> {
        let n = S::lit(self.dim() as f64);
        let c = dot(v, &self.coords) / n;
        v.iter().zip(&self.coords).map(|(&vi, &si)| vi - c * si).collect()
    }
}

/// `R(a, b) = (1/N) sum a_i b_i`.
pub fn overlap<S: Scalar>(a: &SpherePoint<S>, b: &SpherePoint<S>) -> Result<S> {
    ensure_dim(a.dim(), b.dim())?;
    Ok(dot(a.coords(), b.coords()) / S::lit(a.dim() as f64))
}

/// A vector in the tangent space `{x : (x, sigma) = 0}` of a sphere point.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector<S = f64> {
    base: SpherePoint<S>,
    components: Vec<S>,
}

impl<S: Scalar> TangentVector<S> {
    /// Checks tangency to relative precision `invariant_tolerance * N`.
    pub fn new(base: SpherePoint<S>, components: Vec<S>) -> Result<Self> {
        check_tangent(&base, &components, S::invariant_tolerance())?;
        Ok(Self { base, components })
    }

    /// Tangent part of an arbitrary vector.
    pub fn projected(base: SpherePoint<S>, v: &[S]) -> Result<Self> {
        ensure_dim(base.dim(), v.len())?;
        let components = base.project(v);
        Ok(Self { base, components })
    }

    pub fn zero(base: SpherePoint<S>) -> Self {
        let components = vec![S::zero(); base.dim()];
        Self { base, components }
    }

    pub(crate) fn from_raw(base: SpherePoint<S>, components: Vec<S>) -> Self {
        Self { base, components }
    }

    pub fn base(&self) -> &SpherePoint<S> {
        &self.base
    }

    pub fn components(&self) -> &[S] {
        &self.components
    }

    pub fn into_components(self) -> Vec<S> {
        self.components
    }

    pub fn norm(&self) -> S {
        norm(&self.components)
    }

    /// The metric `g(u, v)`, i.e. the Euclidean inner product of the components.
    pub fn inner(&self, other: &Self) -> Result<S> {
        ensure_dim(self.components.len(), other.components.len())?;
        Ok(dot(&self.components, &other.components))
    }

    /// Random unit tangent vector.
    pub fn random_unit(base: SpherePoint<S>, rng: &mut Stream) -> Self {
        loop {
            let g: Vec<S> = (0..base.dim())
                .map(|_| S::lit(StandardNormal.sample(rng)))
                .collect();
            let mut t = base.project(&g);
            let len = norm(&t);
            if len > S::lit(1e-6) {
                t.iter_mut().for_each(|x| *x /= len);
                return Self { base, components: t };
            }
        }
    }
}

pub(crate) fn check_tangent<S: Scalar>(base: &SpherePoint<S>, v: &[S], tol: S) -> Result<()> {
    ensure_dim(base.dim(), v.len())?;
    let n = S::lit(base.dim() as f64);
    let inner = dot(v, base.coords());
    let scale = n * S::one().max(norm(v) / n.sqrt());
    if !inner.is_finite() || inner.abs() > tol * scale {
        return Err(Error::NotTangent {
            inner: inner.as_f64(),
        });
    }
    Ok(())
}

/// Point reached at time `t` along the great circle through `sigma` with initial velocity `v`.
pub fn geodesic<S: Scalar>(sigma: &SpherePoint<S>, v: &TangentVector<S>, t: S) -> Result<SpherePoint<S>> {
    ensure_dim(sigma.dim(), v.components().len())?;
    let speed = v.norm();
    if speed == S::zero() {
        return Ok(sigma.clone());
    }
    let root_n = S::lit(sigma.dim() as f64).sqrt();
    let angle = speed * t / root_n;
    let (s, c) = angle.sin_cos();
    let coords = sigma
        .coords()
        .iter()
        .zip(v.components())
        .map(|(&x, &u)| c * x + s * root_n * u / speed)
        .collect();
    // renormalize to absorb rounding
    SpherePoint::from_direction(coords)
}
