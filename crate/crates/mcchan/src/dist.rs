//! Distribution of the time-variant CIR.
//!
//! Writing `h(t, τ) = φ exp(−2 D2 t α U)` with `U ~ χ²₃(γ(t))` turns every
//! question about `h` into one about a noncentral chi-square variable. The
//! CDF is `Q_{3/2}(r_eq/√(2D2t), √(ln(φ/h)/(2D2tα)))`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::channel::{Channel, Vec3};
use crate::error::{invalid_arg, Error, Result};
use crate::specfun::{erfc, marcum_q_3_2, ncx2_cdf, ncx2_pdf, normal_cdf, weighted_chi2_gaussian_nmse};

/// Noncentrality threshold above which the Log-normal approximation is used.
pub const LOGNORMAL_MIN_GAMMA: f64 = 100.0;

/// Quantities shared by the CDF and PDF at one `(t, τ)`.
struct Shape {
    phi: f64,
    alpha: f64,
    /// `2 D2 t α`, the scale between `U` and `ln(φ/h)`.
    c: f64,
    r_eq: f64,
    d2t: f64,
}

fn shape(ch: &Channel, t: f64, tau: f64) -> Result<Shape> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid_arg("t", "must be finite and non-negative"));
    }
    let k = ch.kernel(tau)?;
    let d2t = ch.params().d2 * t;
    Ok(Shape {
        phi: k.phi,
        alpha: k.alpha,
        c: 2.0 * d2t * k.alpha,
        r_eq: ch.r_eq(t, tau),
        d2t,
    })
}

/// `Pr(h(t, τ) <= h)`.
///
/// A deterministic channel (`D2 = 0` or `t = 0`) yields the unit step at the
/// deterministic CIR value.
pub fn cdf(ch: &Channel, h: f64, t: f64, tau: f64) -> Result<f64> {
    let s = shape(ch, t, tau)?;
    if ch.is_deterministic(t) {
        let h_det = ch.deterministic_cir(t, tau)?;
        return Ok(if h >= h_det { 1.0 } else { 0.0 });
    }
    if h <= 0.0 {
        return Ok(0.0);
    }
    if h >= s.phi {
        return Ok(1.0);
    }
    let a = s.r_eq / (2.0 * s.d2t).sqrt();
    let b = ((s.phi.ln() - h.ln()) / s.c).sqrt();
    Ok(marcum_q_3_2(a, b))
}

/// The CDF in its expanded erfc form, term by term as usually printed.
///
/// Kept as an independent route for cross-checking [`cdf`]; it loses
/// accuracy when `r_eq √α` is tiny against `√(4 D2 t α)`.
pub fn cdf_closed_form(ch: &Channel, h: f64, t: f64, tau: f64) -> Result<f64> {
    let s = shape(ch, t, tau)?;
    if ch.is_deterministic(t) || s.r_eq == 0.0 {
        return cdf(ch, h, t, tau);
    }
    if h <= 0.0 {
        return Ok(0.0);
    }
    if h >= s.phi {
        return Ok(1.0);
    }
    let l = (s.phi.ln() - h.ln()).sqrt();
    let r = s.r_eq * s.alpha.sqrt();
    let den = 4.0 * s.d2t * s.alpha;
    let bumps = (s.d2t.sqrt() / (s.r_eq * PI.sqrt()))
        * ((-(l - r).powi(2) / den).exp() - (-(l + r).powi(2) / den).exp());
    let tails = 0.5 * erfc((l + r) / den.sqrt()) + 0.5 * erfc((l - r) / den.sqrt());
    Ok((bumps + tails).clamp(0.0, 1.0))
}

/// Density of `h(t, τ)` per unit `h`; zero outside `(0, φ)`.
///
/// Evaluated in log space:
/// `ln f = −ln(4α r_eq h √(π D2 t)) − A + ln(1 − e^{−(B−A)})` with
/// `A = (L − R)²/(4D2tα)`, `B = (L + R)²/(4D2tα)`, `L = √ln(φ/h)`, `R = r_eq√α`.
pub fn pdf(ch: &Channel, h: f64, t: f64, tau: f64) -> Result<f64> {
    let s = shape(ch, t, tau)?;
    if ch.is_deterministic(t) {
        return Err(Error::Deterministic("the CIR has no density"));
    }
    if h <= 0.0 || h >= s.phi {
        return Ok(0.0);
    }
    let ln_ratio = s.phi.ln() - h.ln();
    if s.r_eq == 0.0 {
        // Central case: change variables from U ~ χ²₃(0).
        let u = ln_ratio / s.c;
        return Ok(ncx2_pdf(3, 0.0, u) / (s.c * h));
    }
    let l = ln_ratio.sqrt();
    let r = s.r_eq * s.alpha.sqrt();
    let den = 4.0 * s.d2t * s.alpha;
    let a = (l - r).powi(2) / den;
    let gap = 4.0 * l * r / den;
    let ln_f = -(4.0 * s.alpha * s.r_eq * (PI * s.d2t).sqrt()).ln() - h.ln() - a
        + (-(-gap).exp_m1()).ln();
    Ok(ln_f.exp())
}

/// The `p`-quantile of `h(t, τ)`, `p ∈ (0, 1)`.
///
/// Since `h = φ e^{−cU}` with `U ~ χ²₃(γ)`, this is `φ e^{−c u}` for the
/// `(1 − p)`-quantile `u` of `U`, found by bisection.
pub fn quantile(ch: &Channel, p: f64, t: f64, tau: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid_arg("p", "must lie in (0, 1)"));
    }
    let s = shape(ch, t, tau)?;
    if ch.is_deterministic(t) {
        return ch.deterministic_cir(t, tau);
    }
    let gamma = s.r_eq * s.r_eq / (2.0 * s.d2t);
    let target = 1.0 - p;
    let (mut lo, mut hi) = (0.0, 3.0 + gamma);
    while ncx2_cdf(3, gamma, hi) < target {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ncx2_cdf(3, gamma, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(s.phi * (-s.c * 0.5 * (lo + hi)).exp())
}

/// Parameters of the Log-normal approximation `ln h ~ N(μ*, σ*²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LognormalParams {
    pub mu_star: f64,
    pub sigma_star_sq: f64,
    /// Noncentrality `γ(t)` the parameters were built from.
    pub gamma: f64,
}

impl LognormalParams {
    pub fn sigma_star(&self) -> f64 {
        self.sigma_star_sq.sqrt()
    }

    pub fn median(&self) -> f64 {
        self.mu_star.exp()
    }

    pub fn cdf(&self, h: f64) -> f64 {
        if h <= 0.0 {
            return 0.0;
        }
        normal_cdf((h.ln() - self.mu_star) / self.sigma_star())
    }

    pub fn pdf(&self, h: f64) -> f64 {
        if h <= 0.0 {
            return 0.0;
        }
        let z = (h.ln() - self.mu_star) / self.sigma_star();
        (-0.5 * z * z).exp() / (h * self.sigma_star() * (2.0 * PI).sqrt())
    }
}

/// `μ* = ln φ − 2D2tα(3 + γ)` and `σ*² = (2D2tα)²(6 + 4γ)`.
pub fn lognormal_params(ch: &Channel, t: f64, tau: f64) -> Result<LognormalParams> {
    let s = shape(ch, t, tau)?;
    if ch.is_deterministic(t) {
        return Err(Error::Deterministic("no Log-normal approximation"));
    }
    let gamma = s.r_eq * s.r_eq / (2.0 * s.d2t);
    Ok(LognormalParams {
        mu_star: s.phi.ln() - s.c * (3.0 + gamma),
        sigma_star_sq: s.c * s.c * (6.0 + 4.0 * gamma),
        gamma,
    })
}

/// Whether the Log-normal approximation applies at `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Validity {
    pub valid: bool,
    pub gamma: f64,
}

/// `γ(t) >= 100`, equivalently `D2 t <= r_eq² / 200`. A deterministic
/// channel reports `γ = ∞`.
pub fn lognormal_valid(ch: &Channel, t: f64, tau: f64) -> Result<Validity> {
    shape(ch, t, tau)?;
    let gamma = ch.noncentrality(t, tau).unwrap_or(f64::INFINITY);
    Ok(Validity {
        valid: gamma >= LOGNORMAL_MIN_GAMMA,
        gamma,
    })
}

/// A perfect CIR estimate taken at time `t_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutdatedCsiState {
    /// Displacement `r(t_s)` known to the receiver.
    pub r_hat: Vec3,
    pub t_s: f64,
    pub tau: f64,
    /// `cir(r_hat, tau)`.
    pub h_hat: f64,
}

impl OutdatedCsiState {
    pub fn new(ch: &Channel, r_hat: Vec3, t_s: f64, tau: f64) -> Result<Self> {
        Ok(OutdatedCsiState {
            r_hat,
            t_s,
            tau,
            h_hat: ch.cir(r_hat, tau)?,
        })
    }
}

/// Factors of `h(t′) = C ĥ M^Θ` with `M ~ Lognormal(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CsiFactors {
    pub c: f64,
    pub theta: f64,
    /// `γ′ = |r̂ − v* t′ − v′ τ|² / (2 D2 t′)`.
    pub gamma: f64,
}

fn elapsed(ch: &Channel, state: &OutdatedCsiState, t: f64) -> Result<f64> {
    let tp = t - state.t_s;
    if !(tp > 0.0) {
        return Err(invalid_arg("t", "must be later than the estimation time"));
    }
    if ch.params().d2 == 0.0 {
        return Err(Error::Deterministic("the CIR does not decorrelate"));
    }
    Ok(tp)
}

fn csi_gamma(ch: &Channel, state: &OutdatedCsiState, tp: f64) -> f64 {
    let ep = ch.params();
    let r = state.r_hat - ep.v_star * tp - ep.v_prime * state.tau;
    r.norm_sq() / (2.0 * ep.d2 * tp)
}

/// `C = exp(−6D2t′α + 2α v*t′·(r̂ − v′τ) − α|v*t′|²)` and
/// `Θ = −2D2t′α √(6 + 4γ′)`.
pub fn outdated_csi_factors(ch: &Channel, state: &OutdatedCsiState, t: f64) -> Result<CsiFactors> {
    let tp = elapsed(ch, state, t)?;
    let ep = ch.params();
    let alpha = ch.kernel(state.tau)?.alpha;
    let drift = ep.v_star * tp;
    let gamma = csi_gamma(ch, state, tp);
    let c = (-6.0 * ep.d2 * tp * alpha
        + 2.0 * alpha * drift.dot(state.r_hat - ep.v_prime * state.tau)
        - alpha * drift.norm_sq())
    .exp();
    Ok(CsiFactors {
        c,
        theta: -2.0 * ep.d2 * tp * alpha * (6.0 + 4.0 * gamma).sqrt(),
        gamma,
    })
}

/// The current CIR for a given standard normal draw `eps`:
/// `φ exp(−2D2t′α(3 + γ′ + √(6 + 4γ′) ε))`.
pub fn outdated_csi_quantile(ch: &Channel, state: &OutdatedCsiState, t: f64, eps: f64) -> Result<f64> {
    let tp = elapsed(ch, state, t)?;
    let k = ch.kernel(state.tau)?;
    let g = csi_gamma(ch, state, tp);
    let c = 2.0 * ch.params().d2 * tp * k.alpha;
    Ok(k.phi * (-c * (3.0 + g + (6.0 + 4.0 * g).sqrt() * eps)).exp())
}

/// One draw of the current CIR given the stale estimate in `state`.
pub fn outdated_csi_sample<R: Rng + ?Sized>(
    ch: &Channel,
    state: &OutdatedCsiState,
    t: f64,
    rng: &mut R,
) -> Result<f64> {
    let eps: f64 = rng.sample(StandardNormal);
    outdated_csi_quantile(ch, state, t, eps)
}

/// `Pr(h(t, τ) < h_min)`.
pub fn outage_probability(ch: &Channel, h_min: f64, t: f64, tau: f64) -> Result<f64> {
    cdf(ch, h_min, t, tau)
}

/// Average number of bits before an outage, `t_max / T`.
///
/// `t_max` is the largest point of the grid `{i t_span / points}` at which
/// the outage probability is at most `p_target`; 0 if there is none.
pub fn avg_bits_before_outage(
    ch: &Channel,
    h_min: f64,
    p_target: f64,
    tau: f64,
    t_span: f64,
    points: usize,
) -> Result<f64> {
    if !(p_target > 0.0 && p_target <= 1.0) {
        return Err(invalid_arg("p_target", "must lie in (0, 1]"));
    }
    if !(t_span > 0.0 && t_span.is_finite()) || points == 0 {
        return Err(invalid_arg("t_span", "needs a positive span and grid"));
    }
    let step = t_span / points as f64;
    let mut t_max = 0.0;
    for i in 1..=points {
        let t = step * i as f64;
        if outage_probability(ch, h_min, t, tau)? <= p_target {
            t_max = t;
        }
    }
    Ok(t_max / ch.config().bit_interval)
}

/// `Pr(N(t, τ) <= n)` for `N = N_A h`.
pub fn received_count_cdf(ch: &Channel, n: f64, t: f64, tau: f64) -> Result<f64> {
    let na = ch.config().n_a;
    if na == 0 {
        return Err(invalid_arg("N_A", "must be positive for a count distribution"));
    }
    cdf(ch, n / na as f64, t, tau)
}

/// NMSE between the exact density of the received count `N = N_A h` and its
/// Log-normal approximation, `∫|f − f*|² dn / ∫|f|² dn`.
///
/// The `1/N_A` scaling cancels, and the integral is carried out in the
/// chi-square variable `U` where both densities are smooth.
pub fn pdf_nmse(ch: &Channel, t: f64, tau: f64) -> Result<f64> {
    let s = shape(ch, t, tau)?;
    if ch.is_deterministic(t) {
        return Err(Error::Deterministic("no density to compare"));
    }
    let gamma = s.r_eq * s.r_eq / (2.0 * s.d2t);
    Ok(weighted_chi2_gaussian_nmse(3, gamma, s.c))
}
