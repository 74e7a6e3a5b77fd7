//! Physical configuration, mobility scenarios and the time-variant channel
//! impulse response (CIR).
//!
//! The relative displacement `r(t) = r_rx(t) - r_tx(t)` is Gaussian with mean
//! `r0 - v* t` and per-axis variance `2 D2 t`. A molecule released at `t` is
//! observed inside the receiver after a further delay `tau` with probability
//!
//! ```text
//! h(t, tau) = phi * exp(-alpha * |r(t) - v' tau|^2),
//! phi = V_obs / (4 pi D1 tau)^(3/2),   alpha = 1 / (4 D1 tau)
//! ```
//!
//! where `(v*, v', D1, D2)` depend on which nodes move and whether a bulk flow
//! is present; see [`MobilityScenario`].

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};

/// Boltzmann constant in J/K (exact SI value).
pub const BOLTZMANN: f64 = 1.380649e-23;

/// A Cartesian vector in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    /// Vector with all three components equal to `c`.
    pub const fn splat(c: f64) -> Self {
        Vec3 { x: c, y: c, z: c }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn is_zero(self) -> bool {
        self.x == 0.0 && self.y == 0.0 && self.z == 0.0
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        self.x += o.x;
        self.y += o.y;
        self.z += o.z;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Physical and protocol parameters. Field names in serialized form follow
/// the usual notation (`D_A`, `N_A`, `T`, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// Diffusion coefficient of the signaling molecules, m²/s.
    #[serde(rename = "D_A")]
    pub d_a: f64,
    /// Transmitter diffusion coefficient, m²/s.
    #[serde(rename = "D_tx")]
    pub d_tx: f64,
    /// Receiver diffusion coefficient, m²/s.
    #[serde(rename = "D_rx")]
    pub d_rx: f64,
    /// Receiver radius, m.
    pub a_rx: f64,
    /// Initial transmitter-to-receiver displacement, m.
    pub r0: Vec3,
    /// Uniform bulk flow, m/s.
    pub v: Vec3,
    /// Molecules released per bit "1".
    #[serde(rename = "N_A")]
    pub n_a: u64,
    /// Mean number of noise molecules inside the receiver.
    pub n_noise: f64,
    /// Bit interval, s.
    #[serde(rename = "T")]
    pub bit_interval: f64,
    /// Sampling offset after the start of a bit interval, s.
    pub tau_s: f64,
    /// Sequence length in bits.
    #[serde(rename = "L")]
    pub seq_len: usize,
    /// Prior probability of bit 1.
    #[serde(rename = "P1")]
    pub p1: f64,
    /// Simulation time step, s.
    pub dt: f64,
    /// Temperature for the Stokes-Einstein relation, K.
    pub temperature: f64,
    /// Dynamic viscosity for the Stokes-Einstein relation, Pa·s.
    pub viscosity: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            d_a: 5e-9,
            d_tx: 20e-13,
            d_rx: 1e-13,
            a_rx: 1.5e-7,
            r0: Vec3::new(1e-6, 0.0, 0.0),
            v: Vec3::ZERO,
            n_a: 30_000,
            n_noise: 10.0,
            bit_interval: 5e-4,
            tau_s: 3.5e-5,
            seq_len: 50,
            p1: 0.5,
            dt: 5e-6,
            temperature: 298.15,
            viscosity: 8.9e-4,
        }
    }
}

fn field_err(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig {
        field,
        reason: reason.into(),
    }
}

impl SystemConfig {
    /// Prior probability of bit 0.
    pub fn p0(&self) -> f64 {
        1.0 - self.p1
    }

    /// Receiver volume `4/3 π a_rx³`.
    pub fn v_obs(&self) -> f64 {
        4.0 / 3.0 * PI * self.a_rx.powi(3)
    }

    /// Checks every field invariant, reporting the first violation.
    pub fn validate(&self) -> Result<()> {
        let finite: [(&'static str, f64); 10] = [
            ("D_A", self.d_a),
            ("D_tx", self.d_tx),
            ("D_rx", self.d_rx),
            ("a_rx", self.a_rx),
            ("n_noise", self.n_noise),
            ("T", self.bit_interval),
            ("tau_s", self.tau_s),
            ("P1", self.p1),
            ("dt", self.dt),
            ("temperature", self.temperature),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                return Err(field_err(name, "must be finite"));
            }
        }
        if !self.r0.is_finite() {
            return Err(field_err("r0", "components must be finite"));
        }
        if !self.v.is_finite() {
            return Err(field_err("v", "components must be finite"));
        }
        if self.d_a <= 0.0 {
            return Err(field_err("D_A", "must be positive"));
        }
        if self.d_tx < 0.0 {
            return Err(field_err("D_tx", "must be non-negative"));
        }
        if self.d_rx < 0.0 {
            return Err(field_err("D_rx", "must be non-negative"));
        }
        if self.a_rx <= 0.0 {
            return Err(field_err("a_rx", "must be positive"));
        }
        if self.r0.norm() <= self.a_rx {
            return Err(field_err(
                "r0",
                "transmitter must start outside the receiver (|r0| > a_rx)",
            ));
        }
        if self.n_noise < 0.0 {
            return Err(field_err("n_noise", "must be non-negative"));
        }
        if self.bit_interval <= 0.0 {
            return Err(field_err("T", "must be positive"));
        }
        if self.tau_s <= 0.0 || self.tau_s > self.bit_interval {
            return Err(field_err("tau_s", "must satisfy 0 < tau_s <= T"));
        }
        if self.seq_len == 0 {
            return Err(field_err("L", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.p1) {
            return Err(field_err("P1", "must lie in [0, 1]"));
        }
        if self.dt <= 0.0 {
            return Err(field_err("dt", "must be positive"));
        }
        if self.dt > self.tau_s {
            return Err(field_err("dt", "must not exceed tau_s"));
        }
        if self.temperature <= 0.0 {
            return Err(field_err("temperature", "must be positive"));
        }
        if !(self.viscosity.is_finite() && self.viscosity > 0.0) {
            return Err(field_err("viscosity", "must be positive"));
        }
        Ok(())
    }
}

/// Which nodes move and whether a uniform flow is present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MobilityScenario {
    NoFlowFixedTxFixedRx,
    NoFlowMobileTxFixedRx,
    NoFlowFixedTxMobileRx,
    NoFlowMobileTxMobileRx,
    FlowFixedTxFixedRx,
    FlowMobileTxFixedRx,
    FlowFixedTxMobileRx,
    FlowMobileTxMobileRx,
}

impl MobilityScenario {
    pub const ALL: [MobilityScenario; 8] = [
        MobilityScenario::NoFlowFixedTxFixedRx,
        MobilityScenario::NoFlowMobileTxFixedRx,
        MobilityScenario::NoFlowFixedTxMobileRx,
        MobilityScenario::NoFlowMobileTxMobileRx,
        MobilityScenario::FlowFixedTxFixedRx,
        MobilityScenario::FlowMobileTxFixedRx,
        MobilityScenario::FlowFixedTxMobileRx,
        MobilityScenario::FlowMobileTxMobileRx,
    ];

    pub fn has_flow(self) -> bool {
        use MobilityScenario::*;
        matches!(
            self,
            FlowFixedTxFixedRx | FlowMobileTxFixedRx | FlowFixedTxMobileRx | FlowMobileTxMobileRx
        )
    }

    pub fn tx_mobile(self) -> bool {
        use MobilityScenario::*;
        matches!(
            self,
            NoFlowMobileTxFixedRx
                | NoFlowMobileTxMobileRx
                | FlowMobileTxFixedRx
                | FlowMobileTxMobileRx
        )
    }

    pub fn rx_mobile(self) -> bool {
        use MobilityScenario::*;
        matches!(
            self,
            NoFlowFixedTxMobileRx
                | NoFlowMobileTxMobileRx
                | FlowFixedTxMobileRx
                | FlowMobileTxMobileRx
        )
    }

    /// Scenario from its three defining properties.
    pub fn from_parts(flow: bool, tx_mobile: bool, rx_mobile: bool) -> Self {
        use MobilityScenario::*;
        match (flow, tx_mobile, rx_mobile) {
            (false, false, false) => NoFlowFixedTxFixedRx,
            (false, true, false) => NoFlowMobileTxFixedRx,
            (false, false, true) => NoFlowFixedTxMobileRx,
            (false, true, true) => NoFlowMobileTxMobileRx,
            (true, false, false) => FlowFixedTxFixedRx,
            (true, true, false) => FlowMobileTxFixedRx,
            (true, false, true) => FlowFixedTxMobileRx,
            (true, true, true) => FlowMobileTxMobileRx,
        }
    }

    pub fn name(self) -> &'static str {
        use MobilityScenario::*;
        match self {
            NoFlowFixedTxFixedRx => "no-flow-fixed-tx-fixed-rx",
            NoFlowMobileTxFixedRx => "no-flow-mobile-tx-fixed-rx",
            NoFlowFixedTxMobileRx => "no-flow-fixed-tx-mobile-rx",
            NoFlowMobileTxMobileRx => "no-flow-mobile-tx-mobile-rx",
            FlowFixedTxFixedRx => "flow-fixed-tx-fixed-rx",
            FlowMobileTxFixedRx => "flow-mobile-tx-fixed-rx",
            FlowFixedTxMobileRx => "flow-fixed-tx-mobile-rx",
            FlowMobileTxMobileRx => "flow-mobile-tx-mobile-rx",
        }
    }
}

impl fmt::Display for MobilityScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MobilityScenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MobilityScenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| {
                invalid_arg(
                    "scenario",
                    format!(
                        "unknown scenario `{s}`; expected one of: {}",
                        MobilityScenario::ALL.map(|s| s.name()).join(", ")
                    ),
                )
            })
    }
}

/// Effective drifts and diffusion coefficients of one mobility scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveParams {
    /// Drift entering the displacement PDF, `r(t) ~ N(r0 - v* t, 2 D2 t)`.
    pub v_star: Vec3,
    /// Drift entering the CIR, `h ∝ exp(-alpha |r - v' tau|²)`.
    pub v_prime: Vec3,
    /// Relative diffusion of molecules and receiver.
    pub d1: f64,
    /// Relative diffusion of transmitter and receiver.
    pub d2: f64,
}

/// Maps a mobility scenario onto `(v*, v', D1, D2)`.
///
/// Rejects flow-free scenarios with a nonzero flow and mobile nodes with a
/// zero diffusion coefficient.
pub fn effective_params(scenario: MobilityScenario, cfg: &SystemConfig) -> Result<EffectiveParams> {
    use MobilityScenario::*;

    let mismatch = |reason: &str| Error::ScenarioMismatch {
        scenario: scenario.to_string(),
        reason: reason.to_string(),
    };
    if !scenario.has_flow() && !cfg.v.is_zero() {
        return Err(mismatch("flow-free scenario requires v = 0"));
    }
    if scenario.tx_mobile() && cfg.d_tx <= 0.0 {
        return Err(mismatch("mobile transmitter requires D_tx > 0"));
    }
    if scenario.rx_mobile() && cfg.d_rx <= 0.0 {
        return Err(mismatch("mobile receiver requires D_rx > 0"));
    }

    let v = cfg.v;
    let (d_a, d_tx, d_rx) = (cfg.d_a, cfg.d_tx, cfg.d_rx);
    let zero = Vec3::ZERO;
    let (v_star, v_prime, d1, d2) = match scenario {
        NoFlowFixedTxFixedRx => (zero, zero, d_a, 0.0),
        NoFlowMobileTxFixedRx => (zero, zero, d_a, d_tx),
        NoFlowFixedTxMobileRx => (zero, zero, d_a + d_rx, d_rx),
        NoFlowMobileTxMobileRx => (zero, zero, d_a + d_rx, d_rx + d_tx),
        FlowFixedTxFixedRx => (zero, v, d_a, 0.0),
        FlowMobileTxFixedRx => (v, v, d_a, d_tx),
        FlowFixedTxMobileRx => (-v, zero, d_a + d_rx, d_rx),
        FlowMobileTxMobileRx => (zero, zero, d_a + d_rx, d_rx + d_tx),
    };
    Ok(EffectiveParams {
        v_star,
        v_prime,
        d1,
        d2,
    })
}

/// Delay-dependent constants of the CIR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirKernel {
    /// Peak value `V_obs / (4π D1 τ)^{3/2}`.
    pub phi: f64,
    /// Decay constant `1 / (4 D1 τ)`, 1/m².
    pub alpha: f64,
    /// Receiver volume, m³.
    pub v_obs: f64,
}

impl CirKernel {
    pub fn new(d1: f64, v_obs: f64, tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(invalid_arg("tau", "must be positive"));
        }
        Ok(CirKernel {
            phi: v_obs / (4.0 * PI * d1 * tau).powf(1.5),
            alpha: 1.0 / (4.0 * d1 * tau),
            v_obs,
        })
    }

    /// `phi * exp(-alpha * dist_sq)`.
    pub fn eval(&self, dist_sq: f64) -> f64 {
        self.phi * (-self.alpha * dist_sq).exp()
    }
}

/// A validated configuration bound to a mobility scenario.
///
/// All closed-form statistics in this crate take a `&Channel`.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    cfg: SystemConfig,
    scenario: MobilityScenario,
    params: EffectiveParams,
}

impl Channel {
    pub fn new(cfg: SystemConfig, scenario: MobilityScenario) -> Result<Self> {
        cfg.validate()?;
        let params = effective_params(scenario, &cfg)?;
        Ok(Channel {
            cfg,
            scenario,
            params,
        })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn scenario(&self) -> MobilityScenario {
        self.scenario
    }

    pub fn params(&self) -> &EffectiveParams {
        &self.params
    }

    pub fn kernel(&self, tau: f64) -> Result<CirKernel> {
        CirKernel::new(self.params.d1, self.cfg.v_obs(), tau)
    }

    /// CIR for a known displacement `r` at delay `tau`.
    pub fn cir(&self, r: Vec3, tau: f64) -> Result<f64> {
        let k = self.kernel(tau)?;
        Ok(k.eval((r - self.params.v_prime * tau).norm_sq()))
    }

    /// Mean displacement `r0 - v* t`.
    pub fn mean_displacement(&self, t: f64) -> Vec3 {
        self.cfg.r0 - self.params.v_star * t
    }

    /// Equivalent distance `|r0 - v* t - v' tau|`.
    pub fn r_eq(&self, t: f64, tau: f64) -> f64 {
        (self.mean_displacement(t) - self.params.v_prime * tau).norm()
    }

    /// True when the displacement at `t` is known exactly (`D2 = 0` or `t = 0`).
    pub fn is_deterministic(&self, t: f64) -> bool {
        self.params.d2 == 0.0 || t == 0.0
    }

    /// Per-axis displacement variance `2 D2 t`.
    pub fn displacement_variance(&self, t: f64) -> f64 {
        2.0 * self.params.d2 * t
    }

    /// Noncentrality `γ(t) = r_eq² / (2 D2 t)` of the scaled squared distance;
    /// `None` when the channel is deterministic.
    pub fn noncentrality(&self, t: f64, tau: f64) -> Option<f64> {
        if self.is_deterministic(t) {
            return None;
        }
        Some(self.r_eq(t, tau).powi(2) / self.displacement_variance(t))
    }

    /// CIR of the deterministic channel evaluated at the mean displacement.
    pub fn deterministic_cir(&self, t: f64, tau: f64) -> Result<f64> {
        self.cir(self.mean_displacement(t), tau)
    }
}

/// Stokes-Einstein diffusion coefficient `k_B T / (6 π η a)` of a sphere.
pub fn stokes_einstein(radius: f64, temperature: f64, viscosity: f64) -> Result<f64> {
    for (name, value) in [
        ("radius", radius),
        ("temperature", temperature),
        ("viscosity", viscosity),
    ] {
        if !(value.is_finite() && value > 0.0) {
            return Err(invalid_arg(name, "must be positive and finite"));
        }
    }
    Ok(BOLTZMANN * temperature / (6.0 * PI * viscosity * radius))
}
