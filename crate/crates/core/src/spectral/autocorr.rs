use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};

const WINDOW_FACTOR: f64 = 6.0;

/// Integrated autocorrelation time `1 + 2 sum_t rho(t)` with the self-consistent window
/// `M >= 6 tau(M)`, and its standard error `tau sqrt(2 (2M + 1) / n)`.
pub fn autocorrelation_time(series: &[f64]) -> Result<(f64, f64)> {
    let n = series.len();
    if n < 100 {
        return Err(Error::Parameter(format!("series of length {n} is shorter than 100")));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .map(|x| Complex::new(x - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    buf.iter_mut().for_each(|z| *z = Complex::new(z.norm_sqr(), 0.0));
    planner.plan_fft_inverse(size).process(&mut buf);
    let c0 = buf[0].re;
    if !(c0 > 1e-300 * n as f64) {
        return Err(Error::ZeroVariance(c0 / n as f64));
    }
    let mut tau = 1.0;
    let mut window = n - 1;
    for t in 1..n {
        tau += 2.0 * buf[t].re / c0;
        if t as f64 >= WINDOW_FACTOR * tau {
            window = t;
            break;
        }
    }
    let se = tau * (2.0 * (2 * window + 1) as f64 / n as f64).sqrt();
    Ok((tau, se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn white_noise_has_unit_time() {
        let mut r = rng::stream(1);
        let xs: Vec<f64> = (0..100_000).map(|_| rng::gaussian(&mut r)).collect();
        let (tau, _) = autocorrelation_time(&xs).unwrap();
        assert!((tau - 1.0).abs() < 0.1, "{tau}");
    }

    #[test]
    fn ar1_matches_analytic_time() {
        let rho: f64 = 0.9;
        let mut r = rng::stream(2);
        let mut x = 0.0;
        let xs: Vec<f64> = (0..200_000)
            .map(|_| {
                x = rho * x + (1.0 - rho * rho).sqrt() * rng::gaussian(&mut r);
                x
            })
            .collect();
        let (tau, se) = autocorrelation_time(&xs).unwrap();
        let exact = (1.0 + rho) / (1.0 - rho);
        assert!((tau - exact).abs() < 0.15 * exact, "{tau} +- {se}");
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(autocorrelation_time(&[2.0; 500]), Err(Error::ZeroVariance(_))));
        assert!(autocorrelation_time(&[1.0; 50]).is_err());
    }
}
