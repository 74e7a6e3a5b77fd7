//! Poisson tail probabilities.

use super::lgamma;

fn log_pmf(mean: f64, n: f64) -> f64 {
    n * mean.ln() - mean - lgamma(n + 1.0)
}

/// Sums pmf terms starting at `n` and walking away from the mode until they
/// stop contributing. `down` walks toward zero.
fn tail_from(mean: f64, n: u64, down: bool) -> f64 {
    let mut term = log_pmf(mean, n as f64).exp();
    let mut sum = 0.0;
    let mut i = n;
    while term > 0.0 {
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
        if down {
            if i == 0 {
                break;
            }
            term *= i as f64 / mean;
            i -= 1;
        } else {
            i += 1;
            term *= mean / i as f64;
        }
    }
    sum
}

/// `Pr(N < xi)` for `N ~ Poisson(mean)`.
///
/// Terms are summed in log-safe form from the boundary term `xi − 1`
/// outward, so large means (thousands and beyond) neither underflow nor
/// cancel. `xi = 0` gives 0.
pub fn poisson_cdf(mean: f64, xi: u64) -> f64 {
    debug_assert!(mean >= 0.0);
    if xi == 0 {
        return 0.0;
    }
    if mean == 0.0 {
        return 1.0;
    }
    let last = xi - 1;
    if (last as f64) <= mean {
        tail_from(mean, last, true).min(1.0)
    } else {
        (1.0 - tail_from(mean, xi, false)).max(0.0)
    }
}

/// `Pr(N >= xi)` for `N ~ Poisson(mean)`.
pub fn poisson_sf(mean: f64, xi: u64) -> f64 {
    if xi == 0 {
        return 1.0;
    }
    if mean == 0.0 {
        return 0.0;
    }
    if ((xi - 1) as f64) <= mean {
        (1.0 - tail_from(mean, xi - 1, true)).max(0.0)
    } else {
        tail_from(mean, xi, false).min(1.0)
    }
}
