//! Single-sample threshold detection over a time-variant channel.
//!
//! Bit `i` (1-based) is released at `(i − 1)T` and the receiver samples once
//! per interval, at `(j − 1)T + τ_s`. Under the Poisson model the count in
//! interval `j` has mean
//! `N_A Σ_{i<=j} b_i h(r_i, (j − i)T + τ_s) + n̄_A`, and the detector compares
//! it against an adaptive threshold built from its own earlier decisions.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::channel::{Channel, CirKernel, Vec3};
use crate::error::{invalid_arg, Result};
use crate::mc::{chunked, Estimate, VecAcc};
use crate::specfun::{poisson_cdf, poisson_sf, RngStream};

/// Threshold meaning "never decide 1".
pub const NEVER: u64 = u64::MAX;

/// Which channel knowledge the detector uses to place thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorMode {
    /// The current TX-RX displacement is known at every release.
    PerfectCsi,
    /// Only the initial displacement `r0` is known.
    OutdatedCsi,
}

impl DetectorMode {
    pub const ALL: [DetectorMode; 2] = [DetectorMode::PerfectCsi, DetectorMode::OutdatedCsi];

    pub fn name(self) -> &'static str {
        match self {
            DetectorMode::PerfectCsi => "perfect",
            DetectorMode::OutdatedCsi => "outdated",
        }
    }
}

impl fmt::Display for DetectorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "perfect" | "perfect-csi" => Ok(DetectorMode::PerfectCsi),
            "outdated" | "outdated-csi" => Ok(DetectorMode::OutdatedCsi),
            _ => Err(invalid_arg("mode", format!("unknown detector mode `{s}`"))),
        }
    }
}

/// Which displacement stands for the channel seen by bit `i`.
///
/// Molecules of bit `i` leave the transmitter at `(i − 1)T`, so
/// `ReleaseInstant` uses `r((i − 1)T)`. `IntervalEnd` uses `r(iT)`, the
/// other reading of the BER integral; it is kept for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateConvention {
    #[default]
    ReleaseInstant,
    IntervalEnd,
}

/// TX-RX displacements `r(kT)` for `k = 0..=L`.
///
/// Entry `L` is only read under [`StateConvention::IntervalEnd`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    positions: Vec<Vec3>,
}

impl Trajectory {
    pub fn new(positions: Vec<Vec3>) -> Result<Self> {
        if positions.len() < 2 {
            return Err(invalid_arg("positions", "need at least r(0) and r(T)"));
        }
        Ok(Trajectory { positions })
    }

    /// The mean path `r0 − v* kT`, exact when `D2 = 0`.
    pub fn mean_path(ch: &Channel) -> Self {
        let t = ch.config().bit_interval;
        let positions = (0..=ch.config().seq_len)
            .map(|k| ch.mean_displacement(k as f64 * t))
            .collect();
        Trajectory { positions }
    }

    /// Gaussian increments with mean `−v* T` and per-axis variance `2 D2 T`.
    pub fn sample<R: Rng + ?Sized>(ch: &Channel, rng: &mut R) -> Self {
        let cfg = ch.config();
        let ep = ch.params();
        let sd = (2.0 * ep.d2 * cfg.bit_interval).sqrt();
        let drift = ep.v_star * (-cfg.bit_interval);
        let mut positions = Vec::with_capacity(cfg.seq_len + 1);
        let mut r = cfg.r0;
        positions.push(r);
        for _ in 0..cfg.seq_len {
            if sd > 0.0 {
                let n = Normal::new(0.0, sd).expect("finite sd");
                r += drift + Vec3::new(n.sample(rng), n.sample(rng), n.sample(rng));
            } else {
                r += drift;
            }
            positions.push(r);
        }
        Trajectory { positions }
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    /// Displacement that shapes the CIR of bit `i` (1-based).
    pub fn state_for_bit(&self, i: usize, convention: StateConvention) -> Vec3 {
        let k = match convention {
            StateConvention::ReleaseInstant => i - 1,
            StateConvention::IntervalEnd => i,
        };
        self.positions[k.min(self.positions.len() - 1)]
    }
}

/// A transmitted frame and the detector's decisions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BitFrame {
    pub bits: Vec<bool>,
    pub estimates: Vec<bool>,
}

impl BitFrame {
    /// `len` independent bits with `Pr(1) = p1`; no decisions yet.
    pub fn sample<R: Rng + ?Sized>(len: usize, p1: f64, rng: &mut R) -> Self {
        BitFrame {
            bits: (0..len).map(|_| rng.random::<f64>() < p1).collect(),
            estimates: Vec::with_capacity(len),
        }
    }

    pub fn errors(&self) -> usize {
        self.bits.iter().zip(&self.estimates).filter(|(b, e)| b != e).count()
    }
}

/// CIR kernels at the lags `kT + τ_s`, shared by every interval.
#[derive(Debug, Clone)]
pub struct Detector<'a> {
    ch: &'a Channel,
    convention: StateConvention,
    kernels: Vec<CirKernel>,
    shifts: Vec<Vec3>,
    /// `h` at `r0` for each lag, used by the outdated-CSI detector.
    stale: Vec<f64>,
}

impl<'a> Detector<'a> {
    pub fn new(ch: &'a Channel, tau_s: f64, convention: StateConvention) -> Result<Self> {
        let cfg = ch.config();
        let mut kernels = Vec::with_capacity(cfg.seq_len);
        let mut shifts = Vec::with_capacity(cfg.seq_len);
        let mut stale = Vec::with_capacity(cfg.seq_len);
        for k in 0..cfg.seq_len {
            let lag = k as f64 * cfg.bit_interval + tau_s;
            let kern = ch.kernel(lag)?;
            let shift = ch.params().v_prime * lag;
            stale.push(kern.eval((cfg.r0 - shift).norm_sq()));
            kernels.push(kern);
            shifts.push(shift);
        }
        Ok(Detector {
            ch,
            convention,
            kernels,
            shifts,
            stale,
        })
    }

    pub fn channel(&self) -> &Channel {
        self.ch
    }

    /// `h` of bit `i` seen at the sample of interval `j` (both 1-based, `i <= j`).
    fn gain(&self, i: usize, j: usize, traj: &Trajectory, mode: DetectorMode) -> f64 {
        let k = j - i;
        match mode {
            DetectorMode::PerfectCsi => {
                let r = traj.state_for_bit(i, self.convention);
                self.kernels[k].eval((r - self.shifts[k]).norm_sq())
            }
            DetectorMode::OutdatedCsi => self.stale[k],
        }
    }

    /// Poisson mean of the count in interval `j` (1-based) given `bits`.
    ///
    /// `bits` may be shorter than `j`; missing entries count as zeros.
    pub fn mean_received(&self, j: usize, bits: &[bool], traj: &Trajectory, mode: DetectorMode) -> Result<f64> {
        let len = self.kernels.len();
        if j == 0 || j > len {
            return Err(invalid_arg("j", format!("must lie in 1..={len}")));
        }
        let cfg = self.ch.config();
        let isi: f64 = (1..=j.min(bits.len()))
            .filter(|&i| bits[i - 1])
            .map(|i| self.gain(i, j, traj, mode))
            .sum();
        Ok(cfg.n_a as f64 * isi + cfg.n_noise)
    }

    /// Threshold for interval `j` given the earlier decisions `history`.
    pub fn threshold(&self, j: usize, history: &[bool], traj: &Trajectory, mode: DetectorMode) -> Result<u64> {
        let cfg = self.ch.config();
        let lambda0 = self.mean_received(j, &history[..j - 1], traj, mode)?;
        let lambda1 = lambda0 + cfg.n_a as f64 * self.gain(j, j, traj, mode);
        Ok(optimal_threshold(lambda1, lambda0, cfg.p0(), cfg.p1))
    }

    /// Runs the adaptive detector over one frame.
    ///
    /// `counts[j − 1]` is the observed count of interval `j`. With `genie`
    /// set, thresholds use the true earlier bits instead of the decisions.
    /// Returns the thresholds used.
    pub fn detect(
        &self,
        frame: &mut BitFrame,
        counts: &[u64],
        traj: &Trajectory,
        mode: DetectorMode,
        genie: bool,
    ) -> Result<Vec<u64>> {
        frame.estimates.clear();
        let mut xis = Vec::with_capacity(counts.len());
        for (idx, &count) in counts.iter().enumerate() {
            let history = if genie { &frame.bits[..] } else { &frame.estimates[..] };
            let xi = self.threshold(idx + 1, &history[..idx], traj, mode)?;
            frame.estimates.push(decide(count, xi));
            xis.push(xi);
        }
        Ok(xis)
    }
}

/// `ξ = ⌈(ln(P0/P1) + λ1 − λ0) / ln(λ1/λ0)⌉`, clamped at 0.
///
/// Minimizes `P0 Pr(N >= ξ | λ0) + P1 Pr(N < ξ | λ1)` for `λ1 > λ0`. When
/// `λ1 = λ0` the count carries no information and the prior decides: 0 if
/// `P1 >= P0`, otherwise [`NEVER`]. For `λ1 < λ0` no threshold rule of the
/// form "count >= ξ" is optimal; the same prior rule is returned.
pub fn optimal_threshold(lambda1: f64, lambda0: f64, p0: f64, p1: f64) -> u64 {
    if !(lambda1 > lambda0) {
        return if p1 >= p0 { 0 } else { NEVER };
    }
    let x = ((p0 / p1).ln() + lambda1 - lambda0) / (lambda1 / lambda0).ln();
    if x.is_nan() || x >= u64::MAX as f64 {
        return NEVER;
    }
    x.ceil().max(0.0) as u64
}

/// Decides 1 iff `count >= xi`.
pub fn decide(count: u64, xi: u64) -> bool {
    count >= xi
}

/// Error probability of one decision when the count is `Poisson(mean)`.
pub fn conditional_pe(bit: bool, mean: f64, xi: u64) -> f64 {
    if bit {
        poisson_cdf(mean, xi)
    } else {
        poisson_sf(mean, xi)
    }
}

/// Draws a `Poisson(mean)` count; 0 for a zero mean.
pub(crate) fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
}

/// Monte Carlo settings for [`expected_pe`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BerOptions {
    pub n_traj: usize,
    pub frames_per_traj: usize,
    pub seed: u64,
    pub tau_s: f64,
    pub convention: StateConvention,
    /// Thresholds from the true earlier bits rather than the decisions.
    pub genie: bool,
}

impl BerOptions {
    pub fn new(ch: &Channel, n_traj: usize, seed: u64) -> Self {
        BerOptions {
            n_traj,
            frames_per_traj: 1,
            seed,
            tau_s: ch.config().tau_s,
            convention: StateConvention::default(),
            genie: false,
        }
    }
}

/// Per-bit expected error probabilities for both detectors, evaluated on the
/// same trajectories, frames and counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BerEstimate {
    pub perfect: Estimate,
    pub outdated: Estimate,
    /// Paired difference outdated − perfect.
    pub gap: Estimate,
    /// Error rate averaged over the frame, per realization: entries are
    /// perfect, outdated and their difference. Its standard errors account
    /// for the correlation between bits of one realization.
    pub frame: Estimate,
}

/// Accumulates paired per-bit error rates of both detectors.
#[derive(Debug, Clone)]
pub(crate) struct BerAcc {
    bits: [VecAcc; 3],
    frame: VecAcc,
}

impl BerAcc {
    pub fn new(len: usize) -> Self {
        BerAcc {
            bits: [VecAcc::new(len), VecAcc::new(len), VecAcc::new(len)],
            frame: VecAcc::new(3),
        }
    }

    pub fn push(&mut self, perfect: &[f64], outdated: &[f64]) {
        let gap: Vec<f64> = outdated.iter().zip(perfect).map(|(o, p)| o - p).collect();
        let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        self.frame.push(&[avg(perfect), avg(outdated), avg(&gap)]);
        self.bits[0].push(perfect);
        self.bits[1].push(outdated);
        self.bits[2].push(&gap);
    }

    pub fn merge(len: usize, parts: &[BerAcc]) -> BerEstimate {
        let pick = |i: usize| {
            let v: Vec<VecAcc> = parts.iter().map(|p| p.bits[i].clone()).collect();
            VecAcc::merge_all(len, &v).finish()
        };
        let frames: Vec<VecAcc> = parts.iter().map(|p| p.frame.clone()).collect();
        BerEstimate {
            perfect: pick(0),
            outdated: pick(1),
            gap: pick(2),
            frame: VecAcc::merge_all(3, &frames).finish(),
        }
    }
}

impl BerEstimate {
    pub fn mode(&self, mode: DetectorMode) -> &Estimate {
        match mode {
            DetectorMode::PerfectCsi => &self.perfect,
            DetectorMode::OutdatedCsi => &self.outdated,
        }
    }
}

/// Expected error probability `P̄_e(b_j)` of every bit, averaged over the
/// trajectory distribution by Monte Carlo.
///
/// Per trajectory, frames are drawn with `Pr(1) = P1`, a count is drawn for
/// each interval from the true Poisson mean, both detectors decide on that
/// count, and the exact conditional error probability given the threshold
/// is accumulated. Trajectory `k` uses stream `k` of `seed`; the result does
/// not depend on the worker count.
pub fn expected_pe(ch: &Channel, opts: &BerOptions) -> Result<BerEstimate> {
    if opts.n_traj == 0 || opts.frames_per_traj == 0 {
        return Err(invalid_arg("n_traj", "need at least one trajectory and frame"));
    }
    let det = Detector::new(ch, opts.tau_s, opts.convention)?;
    let len = ch.config().seq_len;
    let parts = chunked(opts.n_traj, |range| -> Result<BerAcc> {
        let mut acc = BerAcc::new(len);
        let mut pe = [vec![0.0; len], vec![0.0; len]];
        for k in range {
            let mut rng = RngStream::new(opts.seed, k as u64);
            let traj = Trajectory::sample(ch, &mut rng);
            pe.iter_mut().for_each(|p| p.fill(0.0));
            for _ in 0..opts.frames_per_traj {
                let (frame, means, counts) = draw_frame(&det, &traj, &mut rng)?;
                for (m, mode) in DetectorMode::ALL.into_iter().enumerate() {
                    let mut f = frame.clone();
                    let xis = det.detect(&mut f, &counts, &traj, mode, opts.genie)?;
                    for j in 0..len {
                        pe[m][j] += conditional_pe(frame.bits[j], means[j], xis[j]);
                    }
                }
            }
            let scale = 1.0 / opts.frames_per_traj as f64;
            pe.iter_mut().flatten().for_each(|p| *p *= scale);
            acc.push(&pe[0], &pe[1]);
        }
        Ok(acc)
    });
    let parts = parts.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(BerAcc::merge(len, &parts))
}

/// One frame with its true per-interval means and observed counts.
fn draw_frame(det: &Detector<'_>, traj: &Trajectory, rng: &mut RngStream) -> Result<(BitFrame, Vec<f64>, Vec<u64>)> {
    let cfg = det.channel().config();
    let frame = BitFrame::sample(cfg.seq_len, cfg.p1, rng);
    let mut means = Vec::with_capacity(cfg.seq_len);
    let mut counts = Vec::with_capacity(cfg.seq_len);
    for j in 1..=cfg.seq_len {
        let m = det.mean_received(j, &frame.bits, traj, DetectorMode::PerfectCsi)?;
        counts.push(poisson_count(m, rng));
        means.push(m);
    }
    Ok((frame, means, counts))
}

/// Peclet number `L_ref |v| / D2`.
pub fn peclet(ch: &Channel, l_ref: f64) -> Result<f64> {
    let d2 = ch.params().d2;
    if d2 == 0.0 {
        return Err(invalid_arg("D2", "Peclet number needs a diffusive TX-RX motion"));
    }
    if !(l_ref > 0.0) {
        return Err(invalid_arg("l_ref", "must be positive"));
    }
    Ok(l_ref * ch.config().v.norm() / d2)
}

/// Peclet number with the reference length `|r0| / 2`.
pub fn peclet_default(ch: &Channel) -> Result<f64> {
    peclet(ch, 0.5 * ch.config().r0.norm())
}
