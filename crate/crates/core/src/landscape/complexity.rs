//! Complexity function of the critical points and the scales derived from it.
//!
//! For `E < 0`, `Theta_p(E) = 1/2 + (1/2) log(p-1) - E^2/2 + int_{-2}^{2} (1/(2 pi)) sqrt(4 - x^2) log|x - E| dx`,
//! and `Theta_p(E) = (1/2) log(p-1)` for `E >= 0`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

fn semicircle_log_potential(e: f64) -> f64 {
    let f = |x: f64| (4.0 - x * x).max(0.0).sqrt() * (x - e).abs().ln() / (2.0 * PI);
    let tol = 1e-13;
    if e.abs() < 2.0 {
        quadrature::integrate(f, -2.0, e, tol).integral + quadrature::integrate(f, e, 2.0, tol).integral
    } else {
        quadrature::integrate(f, -2.0, 2.0, tol).integral
    }
}

fn check_degree(p: usize) -> Result<()> {
    if p < 3 {
        return Err(Error::Parameter(format!("degree p = {p} must be at least 3")));
    }
    Ok(())
}

/// `Theta_p(E)`.
pub fn theta(p: usize, e: f64) -> Result<f64> {
    check_degree(p)?;
    let base = 0.5 * ((p - 1) as f64).ln();
    if e >= 0.0 {
        return Ok(base);
    }
    Ok(0.5 + base - 0.5 * e * e + semicircle_log_potential(e))
}

/// `E_0 > 0` with `Theta_p(-E_0) = 0`, by bisection on `(0, 10]`.
pub fn ground_state_scale(p: usize) -> Result<f64> {
    check_degree(p)?;
    let f = |e: f64| theta(p, -e);
    let (mut lo, mut hi) = (1e-9, 10.0);
    let (flo, fhi) = (f(lo)?, f(hi)?);
    if flo.signum() == fhi.signum() {
        return Err(Error::NoConvergence { what: "ground-state bisection (no sign change)", iterations: 0 });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Central difference of `Theta_p` with step `1e-5`.
pub fn theta_derivative(p: usize, e: f64) -> Result<f64> {
    let h = 1e-5;
    Ok((theta(p, e + h)? - theta(p, e - h)?) / (2.0 * h))
}

/// `m_N = -E_0 N + log(N) / (2 Theta_p'(-E_0)) - K_0`.
pub fn m_n(p: usize, n: usize, k0: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::Parameter(format!("N = {n} must be at least 2")));
    }
    let e0 = ground_state_scale(p)?;
    let slope = theta_derivative(p, -e0)?;
    Ok(-e0 * n as f64 + (n as f64).ln() / (2.0 * slope) - k0)
}
