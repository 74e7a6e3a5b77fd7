//! Noncentral chi-square distribution `χ²_k(γ)`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{lgamma, marcum_q_half_odd, marcum_q_3_2};
use crate::quad::integrate_pieces;

/// `Pr(U > u)` for `U ~ χ²_k(γ)`, odd `k`.
pub fn ncx2_sf(k: u32, gamma: f64, u: f64) -> f64 {
    assert!(k % 2 == 1, "ncx2_sf requires odd k, got {k}");
    if u <= 0.0 {
        return 1.0;
    }
    let (a, b) = (gamma.max(0.0).sqrt(), u.sqrt());
    if k == 3 {
        marcum_q_3_2(a, b)
    } else {
        marcum_q_half_odd(k, a, b).expect("validated arguments")
    }
}

/// `Pr(U <= u)` for `U ~ χ²_k(γ)`, odd `k`; equals `1 − Q_{k/2}(√γ, √u)`.
pub fn ncx2_cdf(k: u32, gamma: f64, u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    (1.0 - ncx2_sf(k, gamma, u)).max(0.0)
}

/// Density of `χ²_k(γ)` at `u`, any `k >= 1`.
///
/// `k = 3` has the closed form `e^{−(√u−√γ)²/2} (1 − e^{−2√(γu)}) / (2√(2πγ))`.
/// Other orders sum the Poisson mixture of central densities outward from
/// its largest term.
pub fn ncx2_pdf(k: u32, gamma: f64, u: f64) -> f64 {
    assert!(k >= 1);
    if u < 0.0 || (u == 0.0 && k > 2) {
        return 0.0;
    }
    let gamma = gamma.max(0.0);
    if k == 3 {
        if gamma == 0.0 {
            return u.sqrt() * (-0.5 * u).exp() / (2.0 * PI).sqrt();
        }
        let d = u.sqrt() - gamma.sqrt();
        let root = (gamma * u).sqrt();
        return (-0.5 * d * d).exp() * -(-2.0 * root).exp_m1() / (2.0 * (2.0 * PI * gamma).sqrt());
    }
    let lam = 0.5 * gamma;
    let log_term = |j: u64| -> f64 {
        let jf = j as f64;
        let log_pois = if lam == 0.0 {
            if j == 0 {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        } else {
            jf * lam.ln() - lam - lgamma(jf + 1.0)
        };
        let nu = 0.5 * (f64::from(k) + 2.0 * jf);
        let log_chi = (nu - 1.0) * u.ln() - 0.5 * u - nu * 2f64.ln() - lgamma(nu);
        log_pois + log_chi
    };
    let peak = lam.floor() as u64;
    let mut sum = 0.0;
    let mut j = peak;
    loop {
        let t = log_term(j).exp();
        sum += t;
        if j == 0 || (t < sum * 1e-17 && j + 10 < peak) {
            break;
        }
        j -= 1;
    }
    let mut j = peak + 1;
    loop {
        let t = log_term(j).exp();
        sum += t;
        if t < sum * 1e-17 && j > peak + 10 {
            break;
        }
        j += 1;
    }
    sum
}

/// One draw of `χ²_k(γ)` as a sum of `k` squared unit-variance normals, the
/// first with mean `√γ`.
pub fn ncx2_sample<R: Rng + ?Sized>(k: u32, gamma: f64, rng: &mut R) -> f64 {
    let mu = gamma.max(0.0).sqrt();
    (0..k)
        .map(|i| {
            let z: f64 = rng.sample(StandardNormal);
            let x = if i == 0 { z + mu } else { z };
            x * x
        })
        .sum()
}

/// Normalized squared L² distance between the `χ²_k(γ)` density and the
/// normal density with matching mean `k + γ` and variance `2k + 4γ`:
/// `∫(f − g)² / ∫f²`, with `f = 0` on the negative half-line.
pub fn chi2_gaussian_nmse(k: u32, gamma: f64) -> f64 {
    weighted_chi2_gaussian_nmse(k, gamma, 0.0)
}

/// [`chi2_gaussian_nmse`] with both integrals weighted by `e^{c u}`.
///
/// Under `h = φ e^{−c U}` a density in `h` equals the density in `U` times
/// `e^{c u} / (c φ)`, so the NMSE of two densities of `h` is this weighted
/// NMSE of the corresponding densities of `U`.
pub(crate) fn weighted_chi2_gaussian_nmse(k: u32, gamma: f64, c: f64) -> f64 {
    let mean = f64::from(k) + gamma;
    let sd = (2.0 * f64::from(k) + 4.0 * gamma).sqrt();
    // Shift the weight's exponent so it is 1 at the mean; the ratio is unchanged.
    let w = |u: f64| (c * (u - mean)).exp();
    let g = |u: f64| {
        let z = (u - mean) / sd;
        (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
    };
    let lo = mean - 40.0 * sd;
    let hi = mean + 40.0 * sd;

    let mut pts: Vec<f64> = (0..=16)
        .map(|i| (mean - 8.0 * sd + f64::from(i) * sd).max(0.0))
        .collect();
    pts.insert(0, 0.0);
    pts.push(hi);
    pts.dedup();

    let num_pos = integrate_pieces(
        |u| {
            let d = ncx2_pdf(k, gamma, u) - g(u);
            d * d * w(u)
        },
        &pts,
        0.0,
        1e-11,
    );
    let den = integrate_pieces(
        |u| {
            let f = ncx2_pdf(k, gamma, u);
            f * f * w(u)
        },
        &pts,
        0.0,
        1e-11,
    );
    let num_neg = if lo < 0.0 {
        integrate_pieces(|u| g(u) * g(u) * w(u), &[lo, 0.0], 0.0, 1e-11).value
    } else {
        0.0
    };
    (num_pos.value + num_neg) / den.value
}
