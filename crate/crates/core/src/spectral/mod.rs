//! Spectral gap of `-L`: exact solver on the circle, chain-based estimators and upper bounds.
//!
//! Every value here is the gap of `-L` with `L = (1/2)(Delta - beta g(grad H, grad .))`, so the
//! Dirichlet form is `E(f, f) = (1/2) int |grad f|^2 d pi` and the gap at `beta = 0` is
//! `(1/2)(1 - 1/N)`.

mod autocorr;
mod circle;
mod conductance;
mod estimate;
mod variational;

pub use autocorr::autocorrelation_time;
pub use circle::{exact_gap_circle, CircleGibbs, CircleSpectrum};
pub use conductance::{
    conductance_scan, conductance_test_function, conductance_upper_bound, eta, AngularProfile,
    ConductanceChoice, ConductanceTestFunction,
};
pub use estimate::{Direction, GapEstimate, CONVENTION};
pub use variational::{rayleigh_upper_bound, ConstantFunction, CoordinateFunction, OverlapFunction, TestFunction};
