use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::rng;
use crate::scalar::{dot, Scalar};

use super::sphere::SpherePoint;

/// Largest dense tensor the crate will allocate.
pub const MAX_DENSE_ENTRIES: u128 = 100_000_000;

/// Degree, dimension and inverse temperature of a model instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub p: usize,
    pub n: usize,
    pub beta: f64,
}

impl ModelSpec {
    pub fn new(p: usize, n: usize, beta: f64) -> Result<Self> {
        let spec = Self { p, n, beta };
        spec.validate()?;
        Ok(spec)
    }

    /// Skips the `p >= 3`, `N >= 2` checks. Only meant for degenerate test fixtures.
    #[doc(hidden)]
    pub fn new_unchecked(p: usize, n: usize, beta: f64) -> Self {
        Self { p, n, beta }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 3 {
            return Err(Error::Parameter(format!("degree p = {} must be at least 3", self.p)));
        }
        if self.n < 2 {
            return Err(Error::Parameter(format!("dimension N = {} must be at least 2", self.n)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Parameter(format!("beta = {} must be finite and >= 0", self.beta)));
        }
        Ok(())
    }

    pub fn with_beta(self, beta: f64) -> Self {
        Self { beta, ..self }
    }

    /// `N^p`.
    pub fn entry_count(&self) -> u128 {
        (self.n as u128).pow(self.p as u32)
    }

    /// `N^{-(p-1)/2}`.
    pub fn normalization(&self) -> f64 {
        (self.n as f64).powf(-((self.p - 1) as f64) / 2.0)
    }
}

/// Symmetrized Gaussian couplings of one disorder realization, stored densely in row-major order.
///
/// Each multiset of indices `{i_1..i_p}` with `m` distinct orderings carries one `N(0, 1/m)`
/// entry replicated over all its orderings. This is the permutation average of i.i.d. standard
/// Gaussian couplings, so the induced Hamiltonian has exactly the law of the unsymmetrized sum.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingTensor<S = f64> {
    spec: ModelSpec,
    entries: Vec<S>,
    seed: u64,
}

impl<S: Scalar> CouplingTensor<S> {
    pub fn sample(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        check_size(&spec)?;
        let (n, p) = (spec.n, spec.p);
        let total = spec.entry_count() as usize;
        let mut entries = vec![S::zero(); total];
        let mut rng = rng::stream(seed);
        let mut digits = vec![0usize; p];
        let mut sorted = vec![0usize; p];
        let mut fact = vec![1.0f64; p + 1];
        for k in 1..=p {
            fact[k] = fact[k - 1] * k as f64;
        }
        for flat in 0..total {
            if flat > 0 {
                increment(&mut digits, n);
            }
            sorted.copy_from_slice(&digits);
            sorted.sort_unstable();
            if sorted == digits {
                let orderings = fact[p] / multiplicity_factorials(&sorted, &fact);
                entries[flat] = S::lit(rng::gaussian(&mut rng) / orderings.sqrt());
            } else {
                // canonical (sorted) index is lexicographically smaller, hence already filled
                entries[flat] = entries[flat_index(&sorted, n)];
            }
        }
        Ok(Self { spec, entries, seed })
    }

    /// Builds a tensor from arbitrary row-major entries, symmetrizing them.
    pub fn from_entries(spec: ModelSpec, entries: Vec<S>, seed: u64) -> Result<Self> {
        check_size(&spec)?;
        let total = spec.entry_count() as usize;
        ensure_dim(total, entries.len())?;
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parameter("non-finite coupling".into()));
        }
        let mut t = Self { spec, entries, seed };
        t.symmetrize();
        Ok(t)
    }

    pub fn zeros(spec: ModelSpec) -> Result<Self> {
        check_size(&spec)?;
        Ok(Self {
            spec,
            entries: vec![S::zero(); spec.entry_count() as usize],
            seed: 0,
        })
    }

    fn symmetrize(&mut self) {
        let (n, p) = (self.spec.n, self.spec.p);
        let total = self.entries.len();
        // (sum, count, first entry, all entries equal so far)
        let mut sums: std::collections::HashMap<usize, (S, usize, S, bool)> = Default::default();
        let mut digits = vec![0usize; p];
        let mut sorted = vec![0usize; p];
        for flat in 0..total {
            if flat > 0 {
                increment(&mut digits, n);
            }
            sorted.copy_from_slice(&digits);
            sorted.sort_unstable();
            let x = self.entries[flat];
            let e = sums.entry(flat_index(&sorted, n)).or_insert((S::zero(), 0, x, true));
            e.0 += x;
            e.1 += 1;
            e.3 &= x == e.2;
        }
        digits.iter_mut().for_each(|d| *d = 0);
        for flat in 0..total {
            if flat > 0 {
                increment(&mut digits, n);
            }
            sorted.copy_from_slice(&digits);
            sorted.sort_unstable();
            let (s, c, first, equal) = sums[&flat_index(&sorted, n)];
            self.entries[flat] = if equal { first } else { s / S::lit(c as f64) };
        }
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn entries(&self) -> &[S] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.spec.n
    }

    pub fn degree(&self) -> usize {
        self.spec.p
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|x| *x == S::zero())
    }

    /// The tensor of `-H`.
    pub fn negated(&self) -> Self {
        Self {
            spec: self.spec,
            entries: self.entries.iter().map(|&x| -x).collect(),
            seed: self.seed,
        }
    }

    /// Entry at a multi-index.
    pub fn get(&self, index: &[usize]) -> S {
        self.entries[flat_index(index, self.spec.n)]
    }

    /// Contracts the trailing indices with `sigma` until `order` indices remain.
    pub fn contract_to(&self, sigma: &[S], order: usize) -> Vec<S> {
        let n = self.spec.n;
        assert!(order <= self.spec.p);
        if order == self.spec.p {
            return self.entries.clone();
        }
        let mut cur: Vec<S> = self.entries.chunks_exact(n).map(|row| dot(row, sigma)).collect();
        for _ in order..self.spec.p - 1 {
            cur = cur.chunks_exact(n).map(|row| dot(row, sigma)).collect();
        }
        cur
    }

    /// Energy, Euclidean gradient and Hessian data at `sigma`, from one pass over the tensor.
    pub fn local(&self, sigma: &[S]) -> Result<LocalTerms<S>> {
        ensure_dim(self.spec.n, sigma.len())?;
        let n = self.spec.n;
        let p = self.spec.p;
        let matrix = self.contract_to(sigma, 2);
        let vector: Vec<S> = matrix.chunks_exact(n).map(|row| dot(row, sigma)).collect();
        let value = dot(&vector, sigma);
        let c = S::lit(self.spec.normalization());
        let pf = S::lit(p as f64);
        Ok(LocalTerms {
            energy: c * value,
            gradient: vector.iter().map(|&v| pf * c * v).collect(),
            hessian_scale: pf * S::lit((p - 1) as f64) * c,
            matrix,
            n,
            p,
        })
    }

    /// `H(sigma)` on the natural extension of the Hamiltonian to `R^N`.
    pub fn energy_at(&self, sigma: &[S]) -> Result<S> {
        ensure_dim(self.spec.n, sigma.len())?;
        let v = self.contract_to(sigma, 1);
        Ok(S::lit(self.spec.normalization()) * dot(&v, sigma))
    }
}

/// Cached partial contractions at one point.
#[derive(Clone, Debug)]
pub struct LocalTerms<S> {
    pub energy: S,
    /// Euclidean gradient of the extended Hamiltonian.
    pub gradient: Vec<S>,
    /// `J` contracted `p - 2` times with `sigma`, row-major `N x N`.
    matrix: Vec<S>,
    hessian_scale: S,
    n: usize,
    p: usize,
}

impl<S: Scalar> LocalTerms<S> {
    /// Euclidean Hessian applied to `v`.
    pub fn euclidean_hessian_apply(&self, v: &[S]) -> Vec<S> {
        self.matrix
            .chunks_exact(self.n)
            .map(|row| self.hessian_scale * dot(row, v))
            .collect()
    }

    /// Euclidean Hessian as a dense row-major matrix.
    pub fn euclidean_hessian(&self) -> Vec<S> {
        self.matrix.iter().map(|&m| self.hessian_scale * m).collect()
    }

    /// Gradient minus its radial part.
    pub fn spherical_gradient(&self, sigma: &[S]) -> Vec<S> {
        let nf = S::lit(self.n as f64);
        let radial = dot(&self.gradient, sigma) / nf;
        self.gradient
            .iter()
            .zip(sigma)
            .map(|(&g, &s)| g - radial * s)
            .collect()
    }

    /// Covariant Hessian applied to a tangent vector:
    /// `P (Hess_E v - (p/N) H v)`.
    pub fn spherical_hessian_apply(&self, sigma: &[S], v: &[S]) -> Vec<S> {
        let nf = S::lit(self.n as f64);
        let shift = S::lit(self.p as f64) / nf * self.energy;
        let mut w = self.euclidean_hessian_apply(v);
        w.iter_mut().zip(v).for_each(|(wi, &vi)| *wi -= shift * vi);
        let c = dot(&w, sigma) / nf;
        w.iter_mut().zip(sigma).for_each(|(wi, &si)| *wi -= c * si);
        w
    }

    /// `(p/N) H(sigma)`, the curvature correction of the covariant Hessian.
    pub fn radial_shift(&self) -> S {
        S::lit(self.p as f64) / S::lit(self.n as f64) * self.energy
    }
}

fn check_size(spec: &ModelSpec) -> Result<()> {
    let entries = spec.entry_count();
    if entries > MAX_DENSE_ENTRIES {
        return Err(Error::TooLarge {
            entries,
            limit: MAX_DENSE_ENTRIES,
        });
    }
    Ok(())
}

fn increment(digits: &mut [usize], n: usize) {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < n {
            return;
        }
        *d = 0;
    }
}

fn flat_index(index: &[usize], n: usize) -> usize {
    index.iter().fold(0, |acc, &i| acc * n + i)
}

fn multiplicity_factorials(sorted: &[usize], fact: &[f64]) -> f64 {
    let mut prod = 1.0;
    let mut run = 1;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            prod *= fact[run];
            run = 1;
        }
    }
    prod * fact[run]
}

/// Convenience for callers holding a [`SpherePoint`].
impl<S: Scalar> CouplingTensor<S> {
    pub fn local_at(&self, sigma: &SpherePoint<S>) -> Result<LocalTerms<S>> {
        self.local(sigma.coords())
    }
}
