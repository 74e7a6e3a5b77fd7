//! First- and second-order statistics of the time-variant CIR over the
//! randomness of the transmitter/receiver positions.

use std::f64::consts::PI;

use serde::Serialize;

use crate::channel::Channel;
use crate::error::{invalid_arg, Result};

/// Default coherence search span, in bit intervals.
pub const COHERENCE_SPAN_INTERVALS: f64 = 200.0;
/// Default number of grid points in the coherence forward scan.
pub const COHERENCE_GRID: usize = 400;

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(invalid_arg("tau", "must be positive"));
    }
    Ok(())
}

fn check_time(name: &'static str, t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid_arg(name, "must be finite and non-negative"));
    }
    Ok(())
}

/// Mean CIR
/// `m(t) = V_obs / (4π(D1τ + D2t))^{3/2} · exp(−r_eq² / (4(D1τ + D2t)))`.
///
/// For `D2 = 0` this is the CIR at the deterministic displacement.
pub fn mean_cir(ch: &Channel, t: f64, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    check_time("t", t)?;
    let ep = ch.params();
    let s = ep.d1 * tau + ep.d2 * t;
    let r = ch.r_eq(t, tau);
    Ok(ch.config().v_obs() / (4.0 * PI * s).powf(1.5) * (-r * r / (4.0 * s)).exp())
}

/// Per-axis constants of the ACF integral at times `t1 < t2`.
///
/// The joint density of `(r(t1), r(t2))` times `h(t1) h(t2)` is a Gaussian in
/// six variables with inverse covariance built from `vartheta`, `eps_a` and
/// `psi`; `kappa` holds the leftover exponent per axis and `w` the common
/// denominator `αβ1 + 2αβ21 + β1β21 + α²` with `β1 = β(t1)`,
/// `β21 = β(t2 − t1)` and `β(t) = 1/(4 D2 t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcfKernel {
    pub vartheta: f64,
    pub eps_a: f64,
    pub psi: f64,
    pub w: f64,
    pub kappa: [f64; 3],
}

impl AcfKernel {
    /// Requires `0 < t1 < t2` and `D2 > 0`.
    pub fn new(ch: &Channel, t1: f64, t2: f64, tau: f64) -> Result<Self> {
        check_tau(tau)?;
        if !(t1 > 0.0 && t2 > t1 && t2.is_finite()) {
            return Err(invalid_arg("t1, t2", "requires 0 < t1 < t2"));
        }
        let d2 = ch.params().d2;
        if d2 == 0.0 {
            return Err(crate::Error::Deterministic("the ACF kernel needs D2 > 0"));
        }
        let alpha = ch.kernel(tau)?.alpha;
        let b1 = 1.0 / (4.0 * d2 * t1);
        let b21 = 1.0 / (4.0 * d2 * (t2 - t1));
        Ok(AcfKernel {
            vartheta: 2.0 * (alpha + b21 + b1),
            eps_a: 2.0 * (alpha + b21),
            psi: -2.0 * b21,
            w: alpha * b1 + 2.0 * alpha * b21 + b1 * b21 + alpha * alpha,
            kappa: axis_kappas(ch, t1, t2, tau, alpha),
        })
    }

    /// Inverse covariance of `(x1, y1, z1, x2, y2, z2)`.
    pub fn inverse_covariance(&self) -> [[f64; 6]; 6] {
        let mut m = [[0.0; 6]; 6];
        for i in 0..3 {
            m[i][i] = self.vartheta;
            m[i + 3][i + 3] = self.eps_a;
            m[i][i + 3] = self.psi;
            m[i + 3][i] = self.psi;
        }
        m
    }

    /// `ϑ ε − ψ²`; the covariance determinant is its inverse cubed.
    pub fn precision_det_root(&self) -> f64 {
        self.vartheta * self.eps_a - self.psi * self.psi
    }
}

// Exponent left after integrating out r(t2) and then r(t1), one axis at a
// time. Written with s = 4 D2 t instead of β = 1/s so that t1 = 0 and
// t2 = t1 are regular; every term is non-negative, so nothing cancels.
fn axis_kappas(ch: &Channel, t1: f64, t2: f64, tau: f64, alpha: f64) -> [f64; 3] {
    let ep = ch.params();
    let s1 = 4.0 * ep.d2 * t1;
    let s21 = 4.0 * ep.d2 * (t2 - t1);
    let g21 = alpha / (1.0 + alpha * s21);
    let b = ch.mean_displacement(t1).to_array();
    let c = (ep.v_star * (t2 - t1)).to_array();
    let p = (ep.v_prime * tau).to_array();
    let denom = 1.0 + (alpha + g21) * s1;
    std::array::from_fn(|i| {
        let pb = p[i] - b[i];
        let cpb = c[i] + pb;
        -(alpha * g21 * c[i] * c[i] * s1 + alpha * pb * pb + g21 * cpb * cpb) / denom
    })
}

fn log_acf(ch: &Channel, t1: f64, t2: f64, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    check_time("t1", t1)?;
    check_time("t2", t2)?;
    if t2 < t1 {
        return Err(invalid_arg("t2", "must not precede t1"));
    }
    let k = ch.kernel(tau)?;
    let d2 = ch.params().d2;
    let s1 = 4.0 * d2 * t1;
    let s21 = 4.0 * d2 * (t2 - t1);
    let a = k.alpha;
    let x = 1.0 + a * (s21 + 2.0 * s1) + a * a * s1 * s21;
    let kappa: f64 = axis_kappas(ch, t1, t2, tau, a).iter().sum();
    Ok(2.0 * k.phi.ln() + kappa - 1.5 * x.ln())
}

/// Autocorrelation `φ(t1, t2) = E[h(t1, τ) h(t2, τ)]` for `0 <= t1 <= t2`.
///
/// Valid on the closed range: `t1 = 0` gives `h(0, τ) m(t2)` and `t2 = t1`
/// gives the equal-time value. With `D2 = 0` it is the product of the two
/// deterministic CIRs.
pub fn acf(ch: &Channel, t1: f64, t2: f64, tau: f64) -> Result<f64> {
    Ok(log_acf(ch, t1, t2, tau)?.exp())
}

/// Equal-time autocorrelation `φ(t, t) = E[h(t, τ)²]`.
pub fn acf_equal(ch: &Channel, t: f64, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    check_time("t", t)?;
    let ep = ch.params();
    let v = ch.config().v_obs();
    let s = ep.d1 * tau + 2.0 * ep.d2 * t;
    let r = ch.r_eq(t, tau);
    Ok(v * v * (-r * r / (2.0 * s)).exp()
        / ((4.0 * PI * ep.d1 * tau).powf(1.5) * (4.0 * PI * s).powf(1.5)))
}

/// `σ²(t) = φ(t, t) − m(t)²`, exactly zero for a deterministic channel and
/// clamped at zero against rounding otherwise.
pub fn variance(ch: &Channel, t: f64, tau: f64) -> Result<f64> {
    if ch.is_deterministic(t) {
        check_tau(tau)?;
        return Ok(0.0);
    }
    let m = mean_cir(ch, t, tau)?;
    Ok((acf_equal(ch, t, tau)? - m * m).max(0.0))
}

/// `ρ(t1, t2) = φ(t1, t2) / √(φ(t1, t1) φ(t2, t2))`, evaluated in log space.
pub fn normalized_acf(ch: &Channel, t1: f64, t2: f64, tau: f64) -> Result<f64> {
    let (t1, t2) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
    if t1 == t2 {
        log_acf(ch, t1, t1, tau)?;
        return Ok(1.0);
    }
    let cross = log_acf(ch, t1, t2, tau)?;
    let d1 = log_acf(ch, t1, t1, tau)?;
    let d2 = log_acf(ch, t2, t2, tau)?;
    Ok((cross - 0.5 * (d1 + d2)).exp().min(1.0))
}

/// Outcome of a coherence-time search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Coherence {
    /// `ρ(0, t)` first drops below `η` at `t`.
    Reached { t: f64 },
    /// `ρ(0, t) >= η` over the whole search span.
    NotReached { t_max: f64, rho_at_t_max: f64 },
}

impl Coherence {
    pub fn time(&self) -> Option<f64> {
        match *self {
            Coherence::Reached { t } => Some(t),
            Coherence::NotReached { .. } => None,
        }
    }
}

/// Coherence time: the earliest `t` with `ρ(0, t) < η`.
///
/// Scans `grid` equally spaced points on `(0, t_max]` in order, then bisects
/// the first bracketing cell to a relative width of 1e-9. No monotonicity is
/// assumed beyond the bracketing cell.
pub fn coherence_time(
    ch: &Channel,
    eta: f64,
    tau: f64,
    t_max: f64,
    grid: usize,
) -> Result<Coherence> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(invalid_arg("eta", "must lie in (0, 1)"));
    }
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(invalid_arg("t_max", "must be positive"));
    }
    if grid == 0 {
        return Err(invalid_arg("grid", "must be at least 1"));
    }
    let rho = |t: f64| normalized_acf(ch, 0.0, t, tau);
    let step = t_max / grid as f64;
    let mut prev = 0.0;
    for i in 1..=grid {
        let t = step * i as f64;
        if rho(t)? < eta {
            let (mut lo, mut hi) = (prev, t);
            while hi - lo > 1e-9 * hi {
                let mid = 0.5 * (lo + hi);
                if rho(mid)? < eta {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(Coherence::Reached { t: hi });
        }
        prev = t;
    }
    Ok(Coherence::NotReached {
        t_max,
        rho_at_t_max: rho(t_max)?,
    })
}

/// [`coherence_time`] with the default span (200 bit intervals) and grid.
pub fn coherence_time_default(ch: &Channel, eta: f64, tau: f64) -> Result<Coherence> {
    let t_max = COHERENCE_SPAN_INTERVALS * ch.config().bit_interval;
    coherence_time(ch, eta, tau, t_max, COHERENCE_GRID)
}
