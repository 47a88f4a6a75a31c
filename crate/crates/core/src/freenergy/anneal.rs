//! Annealed importance sampling over an inverse-temperature ladder, restricted to a support.
//!
//! Particles start uniform on the support (exact at `beta = 0`), pick up the weight increment
//! `-(b_k - b_{k-1}) H` at each rung and then take MALA moves at `b_k` that reject any proposal
//! leaving the support. The ladder is geometric and is refined by bisection wherever the weighted
//! variance of the next increment exceeds a threshold. Each particle owns a substream, so the
//! outcome does not depend on how particles are scheduled.

use rayon::prelude::*;

use crate::dynamics::{mala_move, ChainState};
use crate::error::{Error, Result};
use crate::model::CouplingTensor;
use crate::rng::{self, Stream};
use crate::sets::Support;

#[derive(Clone, Copy, Debug)]
pub struct AnnealOptions {
    /// Rungs of the initial geometric ladder above `beta = 0`.
    pub min_rungs: usize,
    pub moves_per_rung: usize,
    /// A rung is split while the weighted variance of its increment exceeds this.
    pub max_increment_variance: f64,
    /// Lowest nonzero rung as a fraction of the target.
    pub floor_ratio: f64,
    pub initial_dt: f64,
}

impl Default for AnnealOptions {
    fn default() -> Self {
        Self {
            min_rungs: 20,
            moves_per_rung: 3,
            max_increment_variance: 0.5,
            floor_ratio: 1e-3,
            initial_dt: 0.5,
        }
    }
}

pub(crate) struct AnnealOutcome {
    pub log_weights: Vec<f64>,
    #[cfg_attr(not(test), allow(dead_code))]
    pub rungs: usize,
}

struct Particle {
    state: ChainState,
    rng: Stream,
    log_w: f64,
}

fn weighted_increment_variance(particles: &[Particle], delta: f64) -> f64 {
    let shift = particles.iter().map(|p| p.log_w).fold(f64::NEG_INFINITY, f64::max);
    let (mut sw, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for p in particles {
        let w = (p.log_w - shift).exp();
        let inc = -delta * p.state.energy;
        sw += w;
        m1 += w * inc;
        m2 += w * inc * inc;
    }
    let m = m1 / sw;
    (m2 / sw - m * m).max(0.0)
}

pub(crate) fn anneal(
    j: &CouplingTensor,
    beta: f64,
    support: &Support,
    particles: usize,
    seed: u64,
    opts: &AnnealOptions,
) -> Result<AnnealOutcome> {
    if particles < 2 || opts.min_rungs == 0 {
        return Err(Error::Parameter("annealing needs at least two particles and one rung".into()));
    }
    let sampler = support.sampler()?;
    let mut pop: Vec<Particle> = (0..particles as u64)
        .into_par_iter()
        .map(|k| {
            let mut r = rng::substream(seed, &[k]);
            let point = sampler.sample(&mut r);
            Ok(Particle { state: ChainState::new(j, point)?, rng: r, log_w: 0.0 })
        })
        .collect::<Result<_>>()?;
    if beta == 0.0 {
        return Ok(AnnealOutcome { log_weights: vec![0.0; particles], rungs: 0 });
    }
    let k = opts.min_rungs;
    let ladder: Vec<f64> = (0..k)
        .map(|i| beta * opts.floor_ratio.powf((k - 1 - i) as f64 / (k - 1).max(1) as f64))
        .collect();
    let constraint = match support {
        Support::Full { .. } => None,
        Support::Region(_) => Some(support),
    };
    let mut dt = opts.initial_dt;
    let mut current = 0.0;
    let mut rungs = 0;
    for &target in &ladder {
        while current < target {
            let mut next = target;
            while next - current > 1e-12 * beta
                && weighted_increment_variance(&pop, next - current) > opts.max_increment_variance
            {
                next = 0.5 * (current + next);
            }
            let delta = next - current;
            let moves = opts.moves_per_rung;
            let accepted: Vec<Result<usize>> = pop
                .par_iter_mut()
                .map(|p| {
                    p.log_w -= delta * p.state.energy;
                    let mut acc = 0;
                    for _ in 0..moves {
                        if mala_move(j, next, &mut p.state, dt, constraint, &mut p.rng)? {
                            acc += 1;
                        }
                    }
                    Ok(acc)
                })
                .collect();
            let mut total = 0;
            for a in accepted {
                total += a?;
            }
            let rate = total as f64 / (moves * particles).max(1) as f64;
            if rate < 0.4 {
                dt *= 0.6;
            } else if rate > 0.8 {
                dt = (dt * 1.5).min(4.0);
            }
            current = next;
            rungs += 1;
        }
    }
    Ok(AnnealOutcome { log_weights: pop.into_iter().map(|p| p.log_w).collect(), rungs })
}
