use serde::{Deserialize, Serialize};

use crate::model::ModelSpec;

/// Tag carried by every gap value and certificate.
pub const CONVENTION: &str = "gap of -L with L = (1/2)(Laplacian - beta g(grad H, grad .))";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Exact,
    UpperBound,
    LowerBound,
    PointEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    pub value: f64,
    pub direction: Direction,
    pub method: String,
    pub std_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discretization_error: Option<f64>,
    pub convention: String,
    pub seed: Option<u64>,
    pub spec: Option<ModelSpec>,
}

impl GapEstimate {
    pub fn new(value: f64, direction: Direction, method: impl Into<String>) -> Self {
        Self {
            value,
            direction,
            method: method.into(),
            std_error: None,
            discretization_error: None,
            convention: CONVENTION.to_string(),
            seed: None,
            spec: None,
        }
    }

    pub fn with_std_error(mut self, se: f64) -> Self {
        self.std_error = Some(se);
        self
    }

    pub fn with_provenance(mut self, spec: ModelSpec, seed: u64) -> Self {
        self.spec = Some(spec);
        self.seed = Some(seed);
        self
    }
}
