//! Langevin dynamics, energy landscape and spectral-gap analysis for the spherical p-spin glass.
//!
//! The core numerics are generic over [`Scalar`] (`f32` or `f64`); the aliases below fix the
//! double-precision types used by the statistical estimators and the experiment harness.

pub mod certificates;
pub mod dynamics;
pub mod error;
pub mod freenergy;
pub mod harness;
pub mod landscape;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod sets;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use model::{CouplingTensor, ModelSpec, SpherePoint, TangentVector};
pub use scalar::Scalar;

pub type Coupling = CouplingTensor<f64>;
pub type Point = SpherePoint<f64>;
pub type Tangent = TangentVector<f64>;
pub type Coupling32 = CouplingTensor<f32>;
pub type Point32 = SpherePoint<f32>;
