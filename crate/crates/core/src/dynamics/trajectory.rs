use std::io::Write;

use serde::{Deserialize, Serialize};

use super::IntegratorConfig;
use crate::error::Result;
use crate::model::{ModelSpec, SpherePoint};
use crate::scalar::Scalar;

/// Thinned record of a chain.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory<S = f64> {
    pub spec: ModelSpec,
    pub config: IntegratorConfig,
    pub steps: Vec<usize>,
    pub samples: Vec<SpherePoint<S>>,
    pub energy: Vec<f64>,
    pub overlap_ref: Vec<f64>,
    pub acceptance_rate: Option<f64>,
}

impl<S: Scalar> Trajectory<S> {
    pub(crate) fn new(spec: ModelSpec, config: IntegratorConfig) -> Self {
        Self {
            spec,
            config,
            steps: Vec::new(),
            samples: Vec::new(),
            energy: Vec::new(),
            overlap_ref: Vec::new(),
            acceptance_rate: None,
        }
    }

    pub(crate) fn push(&mut self, step: usize, point: SpherePoint<S>, energy: f64, overlap: f64) {
        self.steps.push(step);
        self.samples.push(point);
        self.energy.push(energy);
        self.overlap_ref.push(overlap);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `step,energy,overlap_ref[,coord_0..coord_{N-1}]`.
    pub fn write_csv<W: Write>(&self, mut w: W, with_coords: bool) -> Result<()> {
        write!(w, "step,energy,overlap_ref")?;
        if with_coords {
            for i in 0..self.spec.n {
                write!(w, ",coord_{i}")?;
            }
        }
        writeln!(w)?;
        for k in 0..self.len() {
            write!(w, "{},{},{}", self.steps[k], self.energy[k], self.overlap_ref[k])?;
            if with_coords {
                for c in self.samples[k].coords() {
                    write!(w, ",{}", c)?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }
}
