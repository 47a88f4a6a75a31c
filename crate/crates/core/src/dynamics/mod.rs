//! Langevin dynamics for `L = (1/2)(Delta - beta g(grad H, grad .))` on `S^{N-1}(sqrt N)`.
//!
//! A step moves in the tangent plane at the current point and renormalizes:
//!
//! ```text
//! y' = sigma - (beta/2) dt grad_S H(sigma) + sqrt(dt) P xi,    y = sqrt(N) y' / |y'|
//! ```
//!
//! with `xi` standard Gaussian (ziggurat, via `rand_distr::StandardNormal`) and `P` the tangent
//! projector. The Metropolis-adjusted variant treats this as a proposal. Because `y'` lies in the
//! affine tangent plane `{z : (z, sigma) = N}`, it is recovered from `y` as `y' = N y / (y, sigma)`,
//! and the density of `y` on the sphere is the tangent Gaussian density times the gnomonic area
//! factor `R(sigma, y)^{-N}`:
//!
//! ```text
//! log q(sigma -> y) = -|y' - sigma - mu(sigma)|^2 / (2 dt) - ((N-1)/2) log(2 pi dt) - N log R(sigma, y)
//! ```
//!
//! where `mu(sigma) = -(beta/2) dt grad_S H(sigma)`. Proposals with `R(sigma, y) <= 0` have zero
//! density in both directions and are rejected.

mod trajectory;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use trajectory::Trajectory;

use crate::error::{Error, Result};
use crate::model::{CouplingTensor, ModelSpec, SpherePoint};
use crate::rng::{self, Stream};
use crate::scalar::{dot, Scalar};
use crate::sets::Support;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    ProjectedEulerMaruyama,
    Mala,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub steps: usize,
    pub thin: usize,
    pub rng_seed: u64,
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Parameter(format!("time step {} must be positive", self.dt)));
        }
        if self.steps == 0 || self.thin == 0 {
            return Err(Error::Parameter("steps and thin must be at least 1".into()));
        }
        Ok(())
    }
}

/// Current point with its cached energy and Riemannian gradient.
#[derive(Clone, Debug)]
pub struct ChainState<S = f64> {
    pub point: SpherePoint<S>,
    pub energy: S,
    pub gradient: Vec<S>,
}

impl<S: Scalar> ChainState<S> {
    pub fn new(j: &CouplingTensor<S>, point: SpherePoint<S>) -> Result<Self> {
        let local = j.local(point.coords())?;
        let gradient = local.spherical_gradient(point.coords());
        Ok(Self { point, energy: local.energy, gradient })
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("time step {dt} must be positive")))
    }
}

fn draw_noise<S: Scalar>(n: usize, rng: &mut Stream) -> Vec<S> {
    (0..n).map(|_| S::lit(rng::gaussian(rng))).collect()
}

/// Pre-renormalization point `sigma + mu + sqrt(dt) P xi`.
fn tangent_move<S: Scalar>(state: &ChainState<S>, beta: f64, dt: f64, noise: &[S]) -> Vec<S> {
    let sigma = state.point.coords();
    let xi = state.point.project(noise);
    let drift = S::lit(-0.5 * beta * dt);
    let scale = S::lit(dt.sqrt());
    sigma
        .iter()
        .zip(&state.gradient)
        .zip(&xi)
        .map(|((&s, &g), &x)| s + drift * g + scale * x)
        .collect()
}

fn renormalize<S: Scalar>(y: Vec<S>, step: usize) -> Result<SpherePoint<S>> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Integration { step, reason: "non-finite state".into() });
    }
    SpherePoint::from_direction(y).map_err(|e| Error::Integration { step, reason: e.to_string() })
}

/// One projected Euler-Maruyama step.
pub fn langevin_step<S: Scalar>(
    j: &CouplingTensor<S>,
    beta: f64,
    state: &SpherePoint<S>,
    dt: f64,
    rng: &mut Stream,
) -> Result<SpherePoint<S>> {
    let noise = draw_noise(state.dim(), rng);
    langevin_step_with_noise(j, beta, state, dt, &noise)
}

/// [`langevin_step`] with the Gaussian increment supplied by the caller (pass zeros for pure drift).
pub fn langevin_step_with_noise<S: Scalar>(
    j: &CouplingTensor<S>,
    beta: f64,
    state: &SpherePoint<S>,
    dt: f64,
    noise: &[S],
) -> Result<SpherePoint<S>> {
    check_dt(dt)?;
    crate::error::ensure_dim(state.dim(), noise.len())?;
    let cs = ChainState::new(j, state.clone())?;
    renormalize(tangent_move(&cs, beta, dt, noise), 0)
}

/// `log q(from -> to)` for the renormalized Langevin proposal, `-inf` when unreachable.
pub fn proposal_log_density<S: Scalar>(from: &ChainState<S>, to: &SpherePoint<S>, beta: f64, dt: f64) -> f64 {
    let n = from.point.dim() as f64;
    let sigma = from.point.coords();
    let inner = dot(to.coords(), sigma).as_f64();
    if !(inner > 0.0) {
        return f64::NEG_INFINITY;
    }
    let r = inner / n;
    let scale = n / inner;
    let drift = -0.5 * beta * dt;
    let mut sq = 0.0;
    for ((&y, &s), &g) in to.coords().iter().zip(sigma).zip(&from.gradient) {
        let z = scale * y.as_f64() - s.as_f64() - drift * g.as_f64();
        sq += z * z;
    }
    -sq / (2.0 * dt) - 0.5 * (n - 1.0) * (2.0 * std::f64::consts::PI * dt).ln() - n * r.ln()
}

/// Log Metropolis-Hastings ratio for moving `from -> to` (before truncation at 0).
pub fn mala_log_ratio<S: Scalar>(from: &ChainState<S>, to: &ChainState<S>, beta: f64, dt: f64) -> f64 {
    let forward = proposal_log_density(from, &to.point, beta, dt);
    let backward = proposal_log_density(to, &from.point, beta, dt);
    if !backward.is_finite() {
        return f64::NEG_INFINITY;
    }
    -beta * (to.energy - from.energy).as_f64() + backward - forward
}

/// Log transition density of the MALA kernel off the diagonal, `log q(x -> y) + min(0, log alpha)`.
pub fn mala_transition_log_density<S: Scalar>(
    j: &CouplingTensor<S>,
    beta: f64,
    x: &SpherePoint<S>,
    y: &SpherePoint<S>,
    dt: f64,
) -> Result<f64> {
    let a = ChainState::new(j, x.clone())?;
    let b = ChainState::new(j, y.clone())?;
    let q = proposal_log_density(&a, y, beta, dt);
    Ok(q + mala_log_ratio(&a, &b, beta, dt).min(0.0))
}

/// One Metropolis-adjusted step; returns the new point and whether the proposal was accepted.
pub fn mala_step<S: Scalar>(
    j: &CouplingTensor<S>,
    beta: f64,
    state: &SpherePoint<S>,
    dt: f64,
    rng: &mut Stream,
) -> Result<(SpherePoint<S>, bool)> {
    check_dt(dt)?;
    let mut cs = ChainState::new(j, state.clone())?;
    let accepted = mala_move(j, beta, &mut cs, dt, None, rng)?;
    Ok((cs.point, accepted))
}

/// [`mala_step`] with caller-supplied noise and uniform variate.
pub fn mala_step_with_noise<S: Scalar>(
    j: &CouplingTensor<S>,
    beta: f64,
    state: &SpherePoint<S>,
    dt: f64,
    noise: &[S],
    uniform: f64,
) -> Result<(SpherePoint<S>, bool)> {
    check_dt(dt)?;
    crate::error::ensure_dim(state.dim(), noise.len())?;
    let mut cs = ChainState::new(j, state.clone())?;
    let accepted = mala_move_with(j, beta, &mut cs, dt, None, noise, uniform)?;
    Ok((cs.point, accepted))
}

/// Advances `state` in place by one MALA step, rejecting proposals outside `constraint`.
pub fn mala_move<S: Scalar>(
    j: &CouplingTensor<S>,
    beta: f64,
    state: &mut ChainState<S>,
    dt: f64,
    constraint: Option<&Support>,
    rng: &mut Stream,
) -> Result<bool> {
    let noise = draw_noise(state.point.dim(), rng);
    let u: f64 = rng.random();
    mala_move_with(j, beta, state, dt, constraint, &noise, u)
}

fn mala_move_with<S: Scalar>(
    j: &CouplingTensor<S>,
    beta: f64,
    state: &mut ChainState<S>,
    dt: f64,
    constraint: Option<&Support>,
    noise: &[S],
    uniform: f64,
) -> Result<bool> {
    let proposal = renormalize(tangent_move(state, beta, dt, noise), 0)?;
    if let Some(c) = constraint {
        if !c.contains(&to_f64(&proposal)?)? {
            return Ok(false);
        }
    }
    let next = ChainState::new(j, proposal)?;
    if !next.energy.is_finite() {
        return Err(Error::Integration { step: 0, reason: "non-finite proposal energy".into() });
    }
    let log_alpha = mala_log_ratio(state, &next, beta, dt);
    if uniform.ln() < log_alpha {
        *state = next;
        Ok(true)
    } else {
        Ok(false)
    }
}

fn to_f64<S: Scalar>(p: &SpherePoint<S>) -> Result<SpherePoint> {
    SpherePoint::from_direction(p.coords().iter().map(|v| v.as_f64()).collect())
}

/// Where a chain begins.
#[derive(Clone, Debug)]
pub enum Start<S = f64> {
    Point(SpherePoint<S>),
    /// Uniform draw from the support using the chain's own stream.
    Uniform(Support),
}

/// Optional extras for [`run_chain`].
#[derive(Clone, Debug, Default)]
pub struct ChainOptions<S = f64> {
    /// Point against which `overlap_ref` is recorded; defaults to the starting point.
    pub reference: Option<SpherePoint<S>>,
    /// MALA proposals leaving this set are rejected.
    pub constraint: Option<Support>,
}

/// Runs `config.steps` steps, recording after every `thin`-th step.
pub fn run_chain<S: Scalar>(
    j: &CouplingTensor<S>,
    beta: f64,
    config: &IntegratorConfig,
    start: Start<S>,
    options: &ChainOptions<S>,
) -> Result<Trajectory<S>> {
    config.validate()?;
    let mut rng = rng::stream(config.rng_seed);
    let first = match start {
        Start::Point(p) => p,
        Start::Uniform(support) => {
            let p = support.sampler()?.sample(&mut rng);
            SpherePoint::from_direction(p.coords().iter().map(|&v| S::lit(v)).collect())?
        }
    };
    crate::error::ensure_dim(j.dim(), first.dim())?;
    if let Some(c) = &options.constraint {
        if !c.contains(&to_f64(&first)?)? {
            return Err(Error::Parameter("chain starts outside its constraint region".into()));
        }
    }
    let reference = options.reference.clone().unwrap_or_else(|| first.clone());
    let n = S::lit(first.dim() as f64);
    let mut state = ChainState::new(j, first)?;
    let mut traj = Trajectory::new(ModelSpec { beta, ..*j.spec() }, *config);
    let mut accepted = 0usize;
    let ctx = |step: usize| move |e: Error| match e {
        Error::Integration { reason, .. } => Error::Integration { step, reason },
        other => other,
    };
    for step in 1..=config.steps {
        match config.scheme {
            Scheme::ProjectedEulerMaruyama => {
                let noise = draw_noise(state.point.dim(), &mut rng);
                let next = renormalize(tangent_move(&state, beta, config.dt, &noise), step)?;
                state = ChainState::new(j, next)?;
            }
            Scheme::Mala => {
                if mala_move(j, beta, &mut state, config.dt, options.constraint.as_ref(), &mut rng)
                    .map_err(ctx(step))?
                {
                    accepted += 1;
                }
            }
        }
        if step % config.thin == 0 {
            let r = dot(state.point.coords(), reference.coords()) / n;
            traj.push(step, state.point.clone(), state.energy.as_f64(), r.as_f64());
        }
    }
    if config.scheme == Scheme::Mala {
        traj.acceptance_rate = Some(accepted as f64 / config.steps as f64);
    }
    Ok(traj)
}

/// Halves or doubles `initial` until a 200-step MALA pilot accepts between 50% and 70%.
pub fn tune_dt<S: Scalar>(
    j: &CouplingTensor<S>,
    beta: f64,
    start: &SpherePoint<S>,
    initial: f64,
    seed: u64,
) -> Result<f64> {
    check_dt(initial)?;
    let mut dt = initial;
    let mut state = ChainState::new(j, start.clone())?;
    for round in 0..40u64 {
        let mut rng = rng::substream(seed, &[round]);
        let mut acc = 0;
        let pilot = 200;
        for _ in 0..pilot {
            if mala_move(j, beta, &mut state, dt, None, &mut rng)? {
                acc += 1;
            }
        }
        let rate = acc as f64 / pilot as f64;
        if rate < 0.5 {
            dt *= 0.5;
        } else if rate > 0.7 && dt < 4.0 {
            dt *= 2.0;
        } else {
            return Ok(dt);
        }
    }
    Ok(dt)
}
