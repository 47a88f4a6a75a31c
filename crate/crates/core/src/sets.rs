//! Caps and bands around a center point, their normalized volumes and uniform samplers.
//!
//! Everything is parametrized by the angle `theta = arccos R(center, sigma)`, whose law under the
//! uniform measure on `S^{N-1}` has density proportional to `sin^{N-2} theta` on `[0, pi]`. This
//! is the overlap density `(1 - q^2)^{(N-3)/2}` after the substitution `q = cos theta`, and it is
//! integrated in log space so that tiny caps at large `N` do not underflow.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{ensure_dim, Error, Result};
use crate::model::{overlap, SpherePoint};
use crate::rng::{gaussian, Stream};
use crate::scalar::{dot, norm};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionKind {
    Cap,
    Band,
}

/// `{sigma : R(center, sigma) in [q_low, q_high]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub kind: RegionKind,
    pub center: SpherePoint,
    pub q_low: f64,
    pub q_high: f64,
}

impl RegionSpec {
    pub fn new(kind: RegionKind, center: SpherePoint, q_low: f64, q_high: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&q_low) || !(-1.0..=1.0).contains(&q_high) || q_low > q_high {
            return Err(Error::Parameter(format!(
                "overlap interval [{q_low}, {q_high}] is not inside [-1, 1]"
            )));
        }
        Ok(Self { kind, center, q_low, q_high })
    }

    /// `Cap(center, q)`.
    pub fn cap(center: SpherePoint, q: f64) -> Result<Self> {
        Self::new(RegionKind::Cap, center, q, 1.0)
    }

    /// `Band(center, q, eps)`, clipped to `[-1, 1]`.
    pub fn band(center: SpherePoint, q: f64, eps: f64) -> Result<Self> {
        if !(eps >= 0.0) {
            return Err(Error::Parameter(format!("band half-width {eps} must be non-negative")));
        }
        Self::new(RegionKind::Band, center, (q - eps).max(-1.0), (q + eps).min(1.0))
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    /// Closed-interval membership; the overlap is clipped to `[-1, 1]` first to absorb rounding.
    pub fn contains(&self, sigma: &SpherePoint) -> Result<bool> {
        let r = overlap(&self.center, sigma)?.clamp(-1.0, 1.0);
        Ok(r >= self.q_low && r <= self.q_high)
    }

    pub fn volume(&self) -> f64 {
        self.log_volume().exp()
    }

    pub fn log_volume(&self) -> f64 {
        log_overlap_mass(self.dim(), self.q_low, self.q_high)
    }

    pub fn sampler(&self) -> Result<RegionSampler> {
        let angles = AngleSampler::new(self.dim(), self.q_low, self.q_high)?;
        Ok(RegionSampler { center: Some(self.center.clone()), n: self.dim(), angles: Some(angles) })
    }

    /// Same region around `-center`, with the overlap interval reflected.
    pub fn reflected(&self) -> Self {
        Self {
            kind: self.kind,
            center: self.center.negated(),
            q_low: -self.q_high,
            q_high: -self.q_low,
        }
    }
}

/// `contains` as a free function.
pub fn contains(region: &RegionSpec, sigma: &SpherePoint) -> Result<bool> {
    region.contains(sigma)
}

/// Normalized volume of `region` on `S^{n-1}`.
pub fn region_volume(region: &RegionSpec, n: usize) -> Result<f64> {
    ensure_dim(n, region.dim())?;
    Ok(region.volume())
}

/// One uniform draw from `region`.
pub fn sample_uniform_region(region: &RegionSpec, rng: &mut Stream) -> Result<SpherePoint> {
    Ok(region.sampler()?.sample(rng))
}

/// The integration domain of a free energy: the whole sphere or an overlap region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Support {
    Full { n: usize },
    Region(RegionSpec),
}

impl Support {
    pub fn dim(&self) -> usize {
        match self {
            Support::Full { n } => *n,
            Support::Region(r) => r.dim(),
        }
    }

    pub fn contains(&self, sigma: &SpherePoint) -> Result<bool> {
        match self {
            Support::Full { n } => {
                ensure_dim(*n, sigma.dim())?;
                Ok(true)
            }
            Support::Region(r) => r.contains(sigma),
        }
    }

    pub fn log_volume(&self) -> f64 {
        match self {
            Support::Full { .. } => 0.0,
            Support::Region(r) => r.log_volume(),
        }
    }

    pub fn sampler(&self) -> Result<RegionSampler> {
        match self {
            Support::Full { n } => Ok(RegionSampler { center: None, n: *n, angles: None }),
            Support::Region(r) => r.sampler(),
        }
    }

    /// Short tag used in CSV output.
    pub fn label(&self) -> String {
        match self {
            Support::Full { .. } => "full".into(),
            Support::Region(r) => match r.kind {
                RegionKind::Cap => format!("cap[{:.6}]", r.q_low),
                RegionKind::Band => format!("band[{:.6};{:.6}]", r.q_low, r.q_high),
            },
        }
    }
}

impl From<RegionSpec> for Support {
    fn from(r: RegionSpec) -> Self {
        Support::Region(r)
    }
}

/// Log of `int_0^pi sin^{n-2} theta d theta = sqrt(pi) Gamma((n-1)/2) / Gamma(n/2)`.
pub fn log_angle_normalizer(n: usize) -> f64 {
    let n = n as f64;
    0.5 * PI.ln() + ln_gamma((n - 1.0) / 2.0) - ln_gamma(n / 2.0)
}

/// Log of the uniform-measure mass of `{theta_a <= theta <= theta_b}` on `S^{n-1}`.
pub fn log_angle_mass(n: usize, theta_a: f64, theta_b: f64) -> f64 {
    let (a, b) = (theta_a.max(0.0), theta_b.min(PI));
    if !(b > a) {
        return f64::NEG_INFINITY;
    }
    if n == 2 {
        return ((b - a) / PI).ln();
    }
    let k = (n - 2) as f64;
    let peak = FRAC_PI_2.clamp(a, b);
    let log_peak = k * peak.sin().ln();
    if !log_peak.is_finite() {
        return f64::NEG_INFINITY;
    }
    let integrand = |t: f64| (k * t.sin().ln() - log_peak).exp();
    let mut total = 0.0;
    // split at the mode so each piece is monotone
    for (lo, hi) in [(a, peak), (peak, b)] {
        if hi > lo {
            total += quadrature::integrate(integrand, lo, hi, 1e-14).integral;
        }
    }
    log_peak + total.ln() - log_angle_normalizer(n)
}

/// Log-volume of `{R in [q_low, q_high]}` on `S^{n-1}`.
pub fn log_overlap_mass(n: usize, q_low: f64, q_high: f64) -> f64 {
    if q_low > q_high {
        return f64::NEG_INFINITY;
    }
    if q_low <= -1.0 && q_high >= 1.0 {
        return 0.0;
    }
    log_angle_mass(n, q_high.clamp(-1.0, 1.0).acos(), q_low.clamp(-1.0, 1.0).acos())
}

/// Exact sampler for the angle to the center restricted to an interval.
///
/// Rejection from a piecewise-constant envelope; `sin^{n-2}` is unimodal so each cell's maximum sits
/// at the cell point nearest `pi/2`.
#[derive(Clone, Debug)]
pub struct AngleSampler {
    edges: Vec<f64>,
    log_env: Vec<f64>,
    cumulative: Vec<f64>,
    k: f64,
    shift: f64,
}

impl AngleSampler {
    pub fn new(n: usize, q_low: f64, q_high: f64) -> Result<Self> {
        let a = q_high.clamp(-1.0, 1.0).acos();
        let b = q_low.clamp(-1.0, 1.0).acos();
        if !(b > a) || !log_angle_mass(n, a, b).is_finite() {
            return Err(Error::EmptyRegion);
        }
        let k = n.saturating_sub(2) as f64;
        let cells = 64 + 16 * n;
        let width = (b - a) / cells as f64;
        let edges: Vec<f64> = (0..=cells).map(|i| a + width * i as f64).collect();
        let raw: Vec<f64> = edges
            .windows(2)
            .map(|w| log_sin_pow(k, FRAC_PI_2.clamp(w[0], w[1])))
            .collect();
        let shift = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_env: Vec<f64> = raw.iter().map(|x| x - shift).collect();
        let mut acc = 0.0;
        let cumulative = log_env
            .iter()
            .map(|l| {
                acc += l.exp() * width;
                acc
            })
            .collect();
        Ok(Self { edges, log_env, cumulative, k, shift })
    }

    pub fn sample(&self, rng: &mut Stream) -> f64 {
        use rand::Rng;
        let total = *self.cumulative.last().expect("non-empty");
        loop {
            let u: f64 = rng.random::<f64>() * total;
            let cell = self.cumulative.partition_point(|&c| c <= u).min(self.log_env.len() - 1);
            let (lo, hi) = (self.edges[cell], self.edges[cell + 1]);
            let t = lo + (hi - lo) * rng.random::<f64>();
            let log_accept = log_sin_pow(self.k, t) - self.shift - self.log_env[cell];
            if rng.random::<f64>().ln() <= log_accept {
                return t;
            }
        }
    }
}

fn log_sin_pow(k: f64, t: f64) -> f64 {
    if k == 0.0 {
        0.0
    } else {
        k * t.sin().ln()
    }
}

/// Uniform sampler on a [`Support`].
#[derive(Clone, Debug)]
pub struct RegionSampler {
    center: Option<SpherePoint>,
    n: usize,
    angles: Option<AngleSampler>,
}

impl RegionSampler {
    pub fn sample(&self, rng: &mut Stream) -> SpherePoint {
        let (center, angles) = match (&self.center, &self.angles) {
            (Some(c), Some(a)) => (c, a),
            _ => return SpherePoint::uniform(self.n, rng),
        };
        let n = self.n as f64;
        let c = center.coords();
        let theta = angles.sample(rng);
        let dir = loop {
            let g: Vec<f64> = (0..self.n).map(|_| gaussian(rng)).collect();
            let along = dot(&g, c) / n;
            let w: Vec<f64> = g.iter().zip(c).map(|(gi, ci)| gi - along * ci).collect();
            let len = norm(&w);
            if len > 1e-8 {
                break w.into_iter().map(|x| x / len).collect::<Vec<_>>();
            }
        };
        let (s, co) = theta.sin_cos();
        let root_n = n.sqrt();
        let coords: Vec<f64> = c.iter().zip(&dir).map(|(ci, wi)| co * ci + s * root_n * wi).collect();
        SpherePoint::from_direction(coords).expect("nonzero by construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::stats;
    use proptest::prelude::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn membership_examples() {
        let x: SpherePoint = SpherePoint::axis(5, 0);
        assert!(RegionSpec::cap(x.clone(), 0.5).unwrap().contains(&x).unwrap());
        assert!(!RegionSpec::band(x.clone(), 0.3, 0.1).unwrap().contains(&x).unwrap());
        let all = RegionSpec::cap(x.clone(), -1.0).unwrap();
        let mut r = rng::stream(1);
        for _ in 0..100 {
            assert!(all.contains(&SpherePoint::uniform(5, &mut r)).unwrap());
        }
        assert!(RegionSpec::cap(x, 1.5).is_err());
    }

    #[test]
    fn normalizer_matches_quadrature() {
        for n in [2, 3, 4, 7, 30, 100] {
            let k = (n - 2) as f64;
            let direct = quadrature::integrate(|t: f64| t.sin().powf(k), 0.0, PI, 1e-14).integral;
            assert!((log_angle_normalizer(n) - direct.ln()).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn volume_examples() {
        for n in [2, 3, 4, 10, 50, 100, 300] {
            let x = SpherePoint::axis(n, 0);
            assert!((RegionSpec::cap(x.clone(), -1.0).unwrap().volume() - 1.0).abs() < 1e-12);
            assert!((RegionSpec::cap(x, 0.0).unwrap().volume() - 0.5).abs() < 1e-10, "n = {n}");
        }
        // on S^2 the overlap is uniform on [-1, 1]
        let x = SpherePoint::axis(3, 0);
        for q in [-0.7, 0.1, 0.95] {
            let v = RegionSpec::cap(x.clone(), q).unwrap().volume();
            assert!((v - (1.0 - q) / 2.0).abs() < 1e-12);
        }
        // on the circle the angle is uniform on [0, pi]
        let x = SpherePoint::axis(2, 0);
        let v = RegionSpec::cap(x, 0.5).unwrap().volume();
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn band_volume_matches_rejection_frequency() {
        let n = 4;
        let x: SpherePoint = SpherePoint::axis(n, 0);
        let band = RegionSpec::band(x, 0.0, 0.2).unwrap();
        let mut r = rng::stream(2);
        let draws = 200_000;
        let hits = (0..draws)
            .filter(|_| band.contains(&SpherePoint::uniform(n, &mut r)).unwrap())
            .count() as f64;
        let freq = hits / draws as f64;
        let se = (freq * (1.0 - freq) / draws as f64).sqrt();
        assert!((band.volume() - freq).abs() < 3.0 * se, "{} vs {freq}", band.volume());
    }

    #[test]
    fn tiny_caps_stay_finite_in_log_space() {
        let x = SpherePoint::axis(400, 0);
        let l = RegionSpec::cap(x, 0.99).unwrap().log_volume();
        // (1 - q^2)^{(N-1)/2} scale
        assert!(l.is_finite() && l < -700.0);
    }

    #[test]
    fn empty_regions() {
        let x: SpherePoint = SpherePoint::axis(6, 0);
        let r = RegionSpec::band(x, 0.5, 0.0).unwrap();
        assert_eq!(r.volume(), 0.0);
        assert!(matches!(r.sampler(), Err(Error::EmptyRegion)));
    }

    #[test]
    fn sampler_overlap_histogram_matches_density() {
        let n = 12;
        let mut r = rng::stream(3);
        let x = SpherePoint::uniform(n, &mut r);
        let region = RegionSpec::new(RegionKind::Band, x.clone(), -0.2, 0.6).unwrap();
        let sampler = region.sampler().unwrap();
        let draws = 100_000;
        let bins = 20;
        let mut counts = vec![0usize; bins];
        for _ in 0..draws {
            let s = sampler.sample(&mut r);
            assert!(region.contains(&s).unwrap());
            let q = overlap(&x, &s).unwrap();
            let b = (((q + 0.2) / 0.8) * bins as f64).floor() as usize;
            counts[b.min(bins - 1)] += 1;
        }
        // expected bin masses from an independent density quadrature in q
        let dens = |q: f64| (1.0 - q * q).powf((n as f64 - 3.0) / 2.0);
        let total = quadrature::integrate(dens, -0.2, 0.6, 1e-13).integral;
        let mut chi2 = 0.0;
        for (i, &c) in counts.iter().enumerate() {
            let lo = -0.2 + 0.8 * i as f64 / bins as f64;
            let hi = lo + 0.8 / bins as f64;
            let e = draws as f64 * quadrature::integrate(dens, lo, hi, 1e-13).integral / total;
            chi2 += (c as f64 - e).powi(2) / e;
        }
        let p = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(chi2);
        assert!(p > 0.01, "chi2 = {chi2}, p = {p}");
    }

    #[test]
    fn full_cap_sampler_has_uniform_coordinate_marginal() {
        // a fixed coordinate of a uniform point on S^2 (radius sqrt 3) is uniform on [-sqrt 3, sqrt 3]
        let n = 3;
        let mut r = rng::stream(4);
        let x = SpherePoint::uniform(n, &mut r);
        let sampler = RegionSpec::cap(x, -1.0).unwrap().sampler().unwrap();
        let xs: Vec<f64> = (0..20_000).map(|_| sampler.sample(&mut r).coords()[1] / 3f64.sqrt()).collect();
        let d = stats::ks_statistic(&xs, |t| ((t + 1.0) / 2.0).clamp(0.0, 1.0));
        assert!(stats::ks_p_value(d, xs.len()) > 0.01);
    }

    #[test]
    fn sampler_reaches_high_dimensional_caps() {
        let n = 100;
        let mut r = rng::stream(5);
        let x = SpherePoint::uniform(n, &mut r);
        let cap = RegionSpec::cap(x, 0.95).unwrap();
        let s = cap.sampler().unwrap();
        for _ in 0..200 {
            let p = s.sample(&mut r);
            assert!(cap.contains(&p).unwrap());
            let nsq: f64 = p.coords().iter().map(|v| v * v).sum();
            assert!((nsq / n as f64 - 1.0).abs() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn complementary_caps_sum_to_one(n in 2usize..80, q in -0.99f64..0.99) {
            let x = SpherePoint::axis(n, 0);
            let a = RegionSpec::cap(x.clone(), q).unwrap().volume();
            let b = RegionSpec::cap(x.negated(), -q).unwrap().volume();
            prop_assert!((a + b - 1.0).abs() < 1e-10);
        }

        #[test]
        fn volume_is_monotone(n in 2usize..80, lo in -1.0f64..1.0, w in 0.0f64..1.0, grow in 0.0f64..0.5) {
            let x = SpherePoint::axis(n, 0);
            let hi = (lo + w).min(1.0);
            let inner = RegionSpec::new(RegionKind::Band, x.clone(), lo, hi).unwrap().volume();
            let outer = RegionSpec::new(RegionKind::Band, x, (lo - grow).max(-1.0), (hi + grow).min(1.0)).unwrap().volume();
            prop_assert!(outer >= inner - 1e-12);
        }

        #[test]
        fn samples_never_leave_the_region(seed in 0u64..500, n in 2usize..20, lo in -1.0f64..0.9, w in 0.01f64..1.0) {
            let mut r = rng::stream(seed);
            let x = SpherePoint::uniform(n, &mut r);
            let region = RegionSpec::new(RegionKind::Band, x, lo, (lo + w).min(1.0)).unwrap();
            if let Ok(s) = region.sampler() {
                for _ in 0..20 {
                    prop_assert!(region.contains(&s.sample(&mut r)).unwrap());
                }
            }
        }
    }
}
