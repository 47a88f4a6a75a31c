//! Small statistics helpers shared by the estimators.

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

pub fn std_error(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// `log(mean(exp(xs)))` without overflow.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|x| (x - m).exp()).sum();
    m + (s / xs.len() as f64).ln()
}

/// `log(sum(exp(xs)))`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    log_mean_exp(xs) + (xs.len() as f64).ln()
}

/// Delete-one jackknife standard error of `log(mean(exp(xs)))`.
pub fn jackknife_log_mean_exp(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::INFINITY;
    }
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    let total: f64 = w.iter().sum();
    let leave_out: Vec<f64> = w
        .iter()
        .map(|wi| ((total - wi).max(f64::MIN_POSITIVE) / (n - 1) as f64).ln())
        .collect();
    jackknife_spread(&leave_out)
}

/// Jackknife standard error from leave-one-out (or leave-one-block-out) replicates.
pub fn jackknife_spread(replicates: &[f64]) -> f64 {
    let k = replicates.len() as f64;
    let m = mean(replicates);
    let ss: f64 = replicates.iter().map(|r| (r - m) * (r - m)).sum();
    ((k - 1.0) / k * ss).sqrt()
}

/// Kish effective sample size of log-weights.
pub fn effective_sample_size(log_w: &[f64]) -> f64 {
    let m = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return 0.0;
    }
    let (s1, s2) = log_w.iter().fold((0.0, 0.0), |(a, b), lw| {
        let w = (lw - m).exp();
        (a + w, b + w * w)
    });
    s1 * s1 / s2
}

/// Least-squares slope and its standard error for `y ~ a + b x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (yi - intercept - slope * xi).powi(2))
        .sum();
    let se = if n > 2.0 {
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    (slope, se)
}

/// One-sided sign-test p-value: probability of at least `successes` heads in `trials` fair flips.
pub fn sign_test_p(successes: usize, trials: usize) -> f64 {
    let mut p = 0.0;
    let mut binom = 1.0f64;
    for k in 0..=trials {
        if k > 0 {
            binom *= (trials - k + 1) as f64 / k as f64;
        }
        if k >= successes {
            p += binom;
        }
    }
    p / 2f64.powi(trials as i32)
}

/// Standard error of the mean of a correlated series from `batches` contiguous batch means.
pub fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let len = xs.len() / batches;
    let means: Vec<f64> = (0..batches).map(|b| mean(&xs[b * len..(b + 1) * len])).collect();
    std_error(&means)
}

/// Kolmogorov-Smirnov statistic of `samples` against the continuous distribution function `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// Asymptotic p-value of a one-sample KS statistic `d` on `n` samples (Stephens' correction).
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let rn = (n as f64).sqrt();
    let lambda = (rn + 0.12 + 0.11 / rn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        p += if k % 2 == 1 { 2.0 * term } else { -2.0 * term };
        if term < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_test_values() {
        assert!((sign_test_p(10, 10) - 1.0 / 1024.0).abs() < 1e-15);
        assert!((sign_test_p(0, 10) - 1.0).abs() < 1e-15);
        assert!((sign_test_p(9, 10) - 11.0 / 1024.0).abs() < 1e-15);
    }

    #[test]
    fn log_mean_exp_is_stable() {
        let xs = [1000.0, 1000.0 + 2f64.ln()];
        assert!((log_mean_exp(&xs) - (1000.0 + 1.5f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn linear_fit_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let (b, se) = linear_fit(&x, &y);
        assert!((b + 0.5).abs() < 1e-12);
        assert!(se < 1e-12);
    }

    #[test]
    fn ks_detects_shift() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0));
        assert!(ks_p_value(d, xs.len()) > 0.99);
        let shifted: Vec<f64> = xs.iter().map(|x| x * 0.9).collect();
        let d = ks_statistic(&shifted, |x| x.clamp(0.0, 1.0));
        assert!(ks_p_value(d, xs.len()) < 1e-6);
    }
}
