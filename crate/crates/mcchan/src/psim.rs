//! Particle-based Brownian motion simulator.
//!
//! Time advances in steps of `dt`. Mobile transmitters and receivers take a
//! Gaussian step with mean `v dt` and per-axis variance `2 D dt`; fixed ones
//! stay anchored even under flow. Molecules always drift with the flow and
//! diffuse with `D_A`.
//!
//! Molecules are propagated lazily: a released group remembers the step at
//! which its positions are current and is brought forward only when it is
//! observed. A sum of `n` independent Gaussian steps is one Gaussian step
//! with `n` times the mean and variance, so this is exact, not an
//! approximation.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::{Channel, Vec3};
use crate::detect::{poisson_count, BerAcc, BerEstimate, BitFrame, Detector, DetectorMode, StateConvention, Trajectory};
use crate::error::{invalid_arg, Result};
use crate::mc::{chunked, VecAcc};
use crate::specfun::{ncx2_cdf, RngStream};

/// Beyond this many standard deviations outside the sphere a molecule's
/// chance of entering within one step is below 1e-20 and is taken as zero.
const PRUNE_SIGMAS: f64 = 10.0;

/// How a single realization estimates `h(t, τ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HEstimator {
    /// Fraction of released molecules inside the receiver.
    #[default]
    Count,
    /// Molecules and entities are simulated up to one step before the
    /// sampling instant; the receiver then takes its last step and each
    /// molecule contributes its exact probability of landing inside.
    /// Unbiased for the same quantity as `Count`, with most of the
    /// binomial counting noise removed.
    Conditional,
}

impl fmt::Display for HEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HEstimator::Count => "count",
            HEstimator::Conditional => "conditional",
        })
    }
}

impl FromStr for HEstimator {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "count" => Ok(HEstimator::Count),
            "conditional" => Ok(HEstimator::Conditional),
            _ => Err(invalid_arg("estimator", format!("unknown estimator `{s}`"))),
        }
    }
}

/// Molecules released together; positions are current at `known_step`.
#[derive(Debug, Clone, PartialEq)]
struct Group {
    release_step: u64,
    known_step: u64,
    positions: Vec<Vec3>,
}

/// Sum of per-molecule contributions for one ensemble at one sampling
/// instant, enough to form unbiased estimates of `h` and `h²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HSample {
    /// Molecules released.
    pub n: u64,
    /// `Σ q_i`; the count for [`HEstimator::Count`].
    pub sum: f64,
    /// `Σ q_i²`; equal to `sum` for counts.
    pub sum_sq: f64,
}

impl HSample {
    pub fn h(&self) -> f64 {
        self.sum / self.n as f64
    }

    /// Unbiased estimate of `h²`: `(S² − Σq²) / (n (n − 1))`.
    pub fn h_sq(&self) -> f64 {
        let n = self.n as f64;
        (self.sum * self.sum - self.sum_sq) / (n * (n - 1.0))
    }
}

/// State of one simulated realization.
#[derive(Debug, Clone)]
pub struct SimRealization {
    rng: RngStream,
    step: u64,
    pub tx_pos: Vec3,
    pub rx_pos: Vec3,
    groups: Vec<Option<Group>>,
    /// `(sample time, observed count)` from [`SimRealization::observe`].
    pub counts: Vec<(f64, u64)>,
}

/// Step sizes derived from a channel, cached per realization loop.
#[derive(Debug, Clone, Copy)]
struct Law {
    dt: f64,
    flow: Vec3,
    d_a: f64,
    tx: Option<f64>,
    rx: Option<f64>,
    a_sq: f64,
}

impl Law {
    fn new(ch: &Channel) -> Self {
        let cfg = ch.config();
        let sc = ch.scenario();
        Law {
            dt: cfg.dt,
            flow: cfg.v,
            d_a: cfg.d_a,
            tx: sc.tx_mobile().then_some(cfg.d_tx),
            rx: sc.rx_mobile().then_some(cfg.d_rx),
            a_sq: cfg.a_rx * cfg.a_rx,
        }
    }
}

fn gaussian3<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Number of `dt` steps nearest to `t`.
pub fn steps_for(ch: &Channel, t: f64) -> u64 {
    (t / ch.config().dt).round().max(0.0) as u64
}

impl SimRealization {
    /// Transmitter at the origin, receiver at `r0`, time 0.
    pub fn new(ch: &Channel, rng: RngStream) -> Self {
        SimRealization {
            rng,
            step: 0,
            tx_pos: Vec3::ZERO,
            rx_pos: ch.config().r0,
            groups: Vec::new(),
            counts: Vec::new(),
        }
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    /// Receiver minus transmitter position.
    pub fn displacement(&self) -> Vec3 {
        self.rx_pos - self.tx_pos
    }

    /// One `dt` step of the transmitter and receiver.
    pub fn step(&mut self, ch: &Channel) {
        self.advance(ch, 1);
    }

    /// `n` steps of the transmitter and receiver in one exact draw.
    pub fn advance(&mut self, ch: &Channel, n: u64) {
        if n == 0 {
            return;
        }
        let law = Law::new(ch);
        let span = n as f64 * law.dt;
        if let Some(d) = law.tx {
            self.tx_pos += law.flow * span + gaussian3(&mut self.rng) * (2.0 * d * span).sqrt();
        }
        if let Some(d) = law.rx {
            self.rx_pos += law.flow * span + gaussian3(&mut self.rng) * (2.0 * d * span).sqrt();
        }
        self.step += n;
    }

    /// Advances the transmitter and receiver to step `target`.
    pub fn advance_to(&mut self, ch: &Channel, target: u64) {
        debug_assert!(target >= self.step);
        self.advance(ch, target.saturating_sub(self.step));
    }

    /// Releases `n` molecules at the transmitter; returns the group id.
    pub fn release(&mut self, n: u64) -> usize {
        self.groups.push(Some(Group {
            release_step: self.step,
            known_step: self.step,
            positions: vec![self.tx_pos; n as usize],
        }));
        self.groups.len() - 1
    }

    /// Drops a group that will not be observed again.
    pub fn forget(&mut self, group: usize) {
        self.groups[group] = None;
    }

    fn sync(&mut self, ch: &Channel, group: usize) {
        let law = Law::new(ch);
        let now = self.step;
        let g = self.groups[group].as_mut().expect("live group");
        if g.known_step == now {
            return;
        }
        let span = (now - g.known_step) as f64 * law.dt;
        let drift = law.flow * span;
        let sd = (2.0 * law.d_a * span).sqrt();
        for p in &mut g.positions {
            *p += drift + gaussian3(&mut self.rng) * sd;
        }
        g.known_step = now;
    }

    /// Positions of a group brought to the current step.
    pub fn group_positions(&mut self, ch: &Channel, group: usize) -> &[Vec3] {
        self.sync(ch, group);
        &self.groups[group].as_ref().expect("live group").positions
    }

    /// Molecules of one group with `|pos − rx| <= a_rx` at the current step.
    pub fn count_group(&mut self, ch: &Channel, group: usize) -> u64 {
        let a_sq = ch.config().a_rx.powi(2);
        let rx = self.rx_pos;
        self.group_positions(ch, group)
            .iter()
            .filter(|p| (**p - rx).norm_sq() <= a_sq)
            .count() as u64
    }

    /// Counts every live molecule inside the receiver and records the count.
    pub fn observe(&mut self, ch: &Channel) -> u64 {
        let mut total = 0;
        for g in 0..self.groups.len() {
            if self.groups[g].is_some() {
                total += self.count_group(ch, g);
            }
        }
        self.counts.push((self.step as f64 * ch.config().dt, total));
        total
    }

    /// Takes the last step before a sampling instant and returns, for each
    /// group, the molecules' exact probabilities of being inside the receiver
    /// after it.
    ///
    /// The groups are synced to the current step `s`; the entities then move
    /// to `s + 1`. Molecule positions stay recorded at `s`.
    pub fn conditional_groups(&mut self, ch: &Channel, groups: &[usize]) -> Vec<HSample> {
        for &g in groups {
            self.sync(ch, g);
        }
        self.step(ch);
        let law = Law::new(ch);
        let var = 2.0 * law.d_a * law.dt;
        let sd = var.sqrt();
        let u = law.a_sq / var;
        let a = law.a_sq.sqrt();
        let shift = law.flow * law.dt - self.rx_pos;
        groups
            .iter()
            .map(|&g| {
                let g = self.groups[g].as_ref().expect("live group");
                let (mut sum, mut sum_sq) = (0.0, 0.0);
                for p in &g.positions {
                    let d_sq = (*p + shift).norm_sq();
                    if d_sq.sqrt() - a > PRUNE_SIGMAS * sd {
                        continue;
                    }
                    let q = ncx2_cdf(3, d_sq / var, u);
                    sum += q;
                    sum_sq += q * q;
                }
                HSample {
                    n: g.positions.len() as u64,
                    sum,
                    sum_sq,
                }
            })
            .collect()
    }

    /// Estimates of `h` for `groups`, all sampled at step `obs_step`.
    pub fn sample_h(&mut self, ch: &Channel, groups: &[usize], obs_step: u64, how: HEstimator) -> Vec<HSample> {
        match how {
            HEstimator::Count => {
                self.advance_to(ch, obs_step);
                groups
                    .iter()
                    .map(|&g| {
                        let n = self.groups[g].as_ref().expect("live group").positions.len() as u64;
                        let c = self.count_group(ch, g) as f64;
                        HSample { n, sum: c, sum_sq: c }
                    })
                    .collect()
            }
            HEstimator::Conditional => {
                self.advance_to(ch, obs_step - 1);
                self.conditional_groups(ch, groups)
            }
        }
    }
}

fn check_sim(ch: &Channel, n_real: usize, tau_s: f64) -> Result<u64> {
    if n_real == 0 {
        return Err(invalid_arg("n_real", "must be positive"));
    }
    if ch.config().n_a < 2 {
        return Err(invalid_arg("N_A", "estimators need at least two molecules"));
    }
    let k = steps_for(ch, tau_s);
    if k == 0 {
        return Err(invalid_arg("tau_s", "must span at least one step"));
    }
    Ok(k)
}

/// A scheduled action in one realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    // Observations sort before releases at the same step.
    Observe { step: u64, slot: usize },
    Release { step: u64, slot: usize },
}

impl Event {
    fn key(&self) -> (u64, u8, usize) {
        match *self {
            Event::Observe { step, slot } => (step, 0, slot),
            Event::Release { step, slot } => (step, 1, slot),
        }
    }
}

/// One realization: a release at each of `times` and a sample `tau` later,
/// all sharing the same transmitter and receiver paths.
fn run_ensembles(ch: &Channel, rng: RngStream, times: &[u64], tau: u64, how: HEstimator) -> Vec<HSample> {
    let mut events: Vec<Event> = Vec::with_capacity(2 * times.len());
    for (slot, &s) in times.iter().enumerate() {
        events.push(Event::Release { step: s, slot });
        events.push(Event::Observe { step: s + tau, slot });
    }
    events.sort_by_key(Event::key);
    let mut sim = SimRealization::new(ch, rng);
    let mut group = vec![usize::MAX; times.len()];
    let mut out = vec![
        HSample {
            n: 0,
            sum: 0.0,
            sum_sq: 0.0
        };
        times.len()
    ];
    let n_a = ch.config().n_a;
    let mut idx = 0;
    while idx < events.len() {
        match events[idx] {
            Event::Release { step, slot } => {
                sim.advance_to(ch, step);
                group[slot] = sim.release(n_a);
                idx += 1;
            }
            Event::Observe { step, .. } => {
                // Every ensemble sampled at this step is evaluated together.
                let mut slots = Vec::new();
                while let Some(&Event::Observe { step: s, slot }) = events.get(idx) {
                    if s != step {
                        break;
                    }
                    slots.push(slot);
                    idx += 1;
                }
                let gs: Vec<usize> = slots.iter().map(|&k| group[k]).collect();
                for (k, h) in slots.iter().zip(sim.sample_h(ch, &gs, step, how)) {
                    out[*k] = h;
                }
                for g in gs {
                    sim.forget(g);
                }
            }
        }
    }
    out
}

/// One point of a simulated mean-CIR curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanPoint {
    pub t: f64,
    pub m: f64,
    pub stderr: f64,
}

/// Simulated `m(t) = E[h(t, τ_s)]` on a time grid.
///
/// Each realization releases one ensemble at every grid time (rounded to
/// `dt`) along a single transmitter and receiver path. Realization `k` uses
/// stream `k` of `seed`.
pub fn estimate_mean(
    ch: &Channel,
    t_grid: &[f64],
    tau_s: f64,
    n_real: usize,
    seed: u64,
    how: HEstimator,
) -> Result<Vec<MeanPoint>> {
    let tau = check_sim(ch, n_real, tau_s)?;
    let times: Vec<u64> = t_grid.iter().map(|&t| steps_for(ch, t)).collect();
    let parts = chunked(n_real, |range| {
        let mut acc = VecAcc::new(times.len());
        for k in range {
            let hs = run_ensembles(ch, RngStream::new(seed, k as u64), &times, tau, how);
            let v: Vec<f64> = hs.iter().map(HSample::h).collect();
            acc.push(&v);
        }
        acc
    });
    let est = VecAcc::merge_all(times.len(), &parts).finish();
    Ok(t_grid
        .iter()
        .zip(est.mean.iter().zip(&est.stderr))
        .map(|(&t, (&m, &stderr))| MeanPoint { t, m, stderr })
        .collect())
}

/// One point of a simulated ACF curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AcfPoint {
    pub t1: f64,
    pub t2: f64,
    /// Estimate of `E[h(t1) h(t2)]`.
    pub phi: f64,
    pub rho: f64,
    /// Delta-method standard error of `rho`.
    pub stderr: f64,
}

/// Simulated `ρ(t1, t2)` for each `t2` in `t2_grid`.
///
/// Every sampling time gets its own molecule ensemble; only the transmitter
/// and receiver paths are shared. Cross moments use independent ensembles,
/// and the second moments use the unbiased pair estimator of [`HSample::h_sq`],
/// so neither is inflated by counting noise.
pub fn estimate_acf(
    ch: &Channel,
    t1: f64,
    t2_grid: &[f64],
    tau_s: f64,
    n_real: usize,
    seed: u64,
    how: HEstimator,
) -> Result<Vec<AcfPoint>> {
    let tau = check_sim(ch, n_real, tau_s)?;
    let mut times = vec![steps_for(ch, t1)];
    times.extend(t2_grid.iter().map(|&t| steps_for(ch, t)));
    let m = t2_grid.len();
    // Per realization and t2: (h1 h2, h1², h2²).
    let parts = chunked(n_real, |range| {
        let mut rows = Vec::with_capacity(range.len());
        for k in range {
            let hs = run_ensembles(ch, RngStream::new(seed, k as u64), &times, tau, how);
            let h1 = hs[0].h();
            let h1_sq = hs[0].h_sq();
            let row: Vec<[f64; 3]> = hs[1..].iter().map(|s| [h1 * s.h(), h1_sq, s.h_sq()]).collect();
            rows.push(row);
        }
        rows
    });
    let rows: Vec<Vec<[f64; 3]>> = parts.into_iter().flatten().collect();
    let n = rows.len() as f64;
    let mut out = Vec::with_capacity(m);
    for (i, &t2) in t2_grid.iter().enumerate() {
        let mut mean = [0.0; 3];
        for r in &rows {
            for c in 0..3 {
                mean[c] += r[i][c] / n;
            }
        }
        let rho = mean[0] / (mean[1] * mean[2]).sqrt();
        // Influence of one realization on log ρ.
        let var = rows
            .iter()
            .map(|r| {
                let psi = r[i][0] / mean[0] - 0.5 * r[i][1] / mean[1] - 0.5 * r[i][2] / mean[2];
                psi * psi
            })
            .sum::<f64>()
            / (n - 1.0).max(1.0);
        out.push(AcfPoint {
            t1,
            t2,
            phi: mean[0],
            rho,
            stderr: rho * (var / n).sqrt(),
        });
    }
    Ok(out)
}

/// Empirical distribution of simulated `h` estimates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalDistribution {
    /// Sorted per-realization estimates.
    pub samples: Vec<f64>,
    /// Histogram bin edges, `bins + 1` values.
    pub edges: Vec<f64>,
    /// Density per unit `h` in each bin.
    pub density: Vec<f64>,
}

impl EmpiricalDistribution {
    fn new(mut samples: Vec<f64>, bins: usize) -> Self {
        samples.sort_by(f64::total_cmp);
        let lo = samples[0];
        let hi = samples[samples.len() - 1];
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0usize; bins];
        for &s in &samples {
            let b = (((s - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        let n = samples.len() as f64;
        let density = counts.iter().map(|&c| c as f64 / (n * width)).collect();
        EmpiricalDistribution { samples, edges, density }
    }

    /// Empirical CDF `Pr(ĥ <= h)`.
    pub fn cdf(&self, h: f64) -> f64 {
        self.samples.partition_point(|&s| s <= h) as f64 / self.samples.len() as f64
    }

    /// Kolmogorov-Smirnov distance to a continuous CDF.
    pub fn ks_distance<F: Fn(f64) -> f64>(&self, cdf: F) -> f64 {
        let n = self.samples.len() as f64;
        self.samples
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let f = cdf(s);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Simulated distribution of `h(t, τ_s)` over `n_real` realizations.
pub fn estimate_distribution(
    ch: &Channel,
    t: f64,
    tau_s: f64,
    n_real: usize,
    bins: usize,
    seed: u64,
    how: HEstimator,
) -> Result<EmpiricalDistribution> {
    let tau = check_sim(ch, n_real, tau_s)?;
    if bins == 0 {
        return Err(invalid_arg("bins", "must be positive"));
    }
    let times = [steps_for(ch, t)];
    let parts = chunked(n_real, |range| {
        range
            .map(|k| run_ensembles(ch, RngStream::new(seed, k as u64), &times, tau, how)[0].h())
            .collect::<Vec<f64>>()
    });
    Ok(EmpiricalDistribution::new(parts.into_iter().flatten().collect(), bins))
}

/// Options for [`simulate_ber`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SimBerOptions {
    pub convention: StateConvention,
    pub genie: bool,
}

/// Bit errors of both detectors on particle-level counts.
///
/// Each realization sends one frame of `L` bits: `N_A` molecules at the
/// start of every 1-interval, a count at each `(j − 1)T + τ_s` plus
/// `Poisson(n̄_A)` noise. Both detectors decide on the same counts; the
/// perfect-CSI detector sees the simulated displacements at multiples of
/// `T`. Per-bit error indicators are averaged.
pub fn simulate_ber(ch: &Channel, n_real: usize, seed: u64, opts: SimBerOptions) -> Result<BerEstimate> {
    let cfg = ch.config();
    if n_real == 0 {
        return Err(invalid_arg("n_real", "must be positive"));
    }
    let per_bit = steps_for(ch, cfg.bit_interval);
    let tau = steps_for(ch, cfg.tau_s);
    if tau == 0 || tau >= per_bit {
        return Err(invalid_arg("tau_s", "must fall strictly inside the bit interval"));
    }
    let det = Detector::new(ch, cfg.tau_s, opts.convention)?;
    let len = cfg.seq_len;
    let parts = chunked(n_real, |range| -> Result<BerAcc> {
        let mut acc = BerAcc::new(len);
        for k in range {
            let mut sim = SimRealization::new(ch, RngStream::new(seed, k as u64));
            let mut noise_rng = RngStream::new(seed, k as u64).derive(0x6e6f697365, k as u64);
            let mut frame = BitFrame::sample(len, cfg.p1, &mut noise_rng);
            let mut positions = Vec::with_capacity(len + 1);
            let mut counts = Vec::with_capacity(len);
            for j in 0..len {
                sim.advance_to(ch, j as u64 * per_bit);
                positions.push(sim.displacement());
                if frame.bits[j] {
                    sim.release(cfg.n_a);
                }
                sim.advance_to(ch, j as u64 * per_bit + tau);
                let c = sim.observe(ch) + poisson_count(cfg.n_noise, &mut noise_rng);
                counts.push(c);
            }
            sim.advance_to(ch, len as u64 * per_bit);
            positions.push(sim.displacement());
            let traj = Trajectory::new(positions)?;
            let mut err = [vec![0.0; len], vec![0.0; len]];
            for (m, mode) in DetectorMode::ALL.into_iter().enumerate() {
                det.detect(&mut frame, &counts, &traj, mode, opts.genie)?;
                for j in 0..len {
                    err[m][j] = f64::from(u8::from(frame.bits[j] != frame.estimates[j]));
                }
            }
            acc.push(&err[0], &err[1]);
        }
        Ok(acc)
    });
    let parts = parts.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(BerAcc::merge(len, &parts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{MobilityScenario, SystemConfig};

    fn mobile_tx(d_tx: f64, vx: f64) -> Channel {
        let cfg = SystemConfig {
            d_tx,
            v: Vec3::new(vx, 0.0, 0.0),
            ..SystemConfig::default()
        };
        let sc = MobilityScenario::from_parts(vx != 0.0, true, false);
        Channel::new(cfg, sc).unwrap()
    }

    #[test]
    fn fixed_entities_stay_put() {
        let cfg = SystemConfig {
            v: Vec3::new(1e-5, 0.0, 0.0),
            ..SystemConfig::default()
        };
        let ch = Channel::new(cfg, MobilityScenario::FlowFixedTxFixedRx).unwrap();
        let mut sim = SimRealization::new(&ch, RngStream::new(1, 0));
        sim.step(&ch);
        sim.advance(&ch, 100);
        assert_eq!(sim.tx_pos, Vec3::ZERO);
        assert_eq!(sim.rx_pos, ch.config().r0);
        assert_eq!(sim.step_index(), 101);
    }

    #[test]
    fn molecule_step_moments() {
        let cfg = SystemConfig {
            v: Vec3::new(1e-5, 0.0, 0.0),
            ..SystemConfig::default()
        };
        let ch = Channel::new(cfg, MobilityScenario::FlowFixedTxFixedRx).unwrap();
        let mut sim = SimRealization::new(&ch, RngStream::new(2, 0));
        let n = 1_000_000;
        let g = sim.release(n);
        sim.step(&ch);
        let dt = ch.config().dt;
        let ps = sim.group_positions(&ch, g);
        let var_want = 2.0 * ch.config().d_a * dt;
        for axis in 0..3 {
            let xs: Vec<f64> = ps.iter().map(|p| p.to_array()[axis]).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let want = if axis == 0 { 1e-5 * dt } else { 0.0 };
            assert!((mean - want).abs() < 3.0 * (var_want / n as f64).sqrt(), "axis {axis}: {mean}");
            assert!((var / var_want - 1.0).abs() < 0.01, "axis {axis}: {var}");
        }
    }

    #[test]
    fn entity_step_moments() {
        let ch = mobile_tx(20e-13, 1e-5);
        let n = 200_000;
        let dt = ch.config().dt;
        let (mut s, mut q) = (0.0, 0.0);
        for k in 0..n {
            let mut sim = SimRealization::new(&ch, RngStream::new(3, k));
            sim.step(&ch);
            let x = sim.tx_pos.x;
            s += x;
            q += x * x;
        }
        let mean = s / n as f64;
        let var = q / n as f64 - mean * mean;
        let want = 2.0 * 20e-13 * dt;
        assert!((mean - 1e-5 * dt).abs() < 4.0 * (want / n as f64).sqrt());
        assert!((var / want - 1.0).abs() < 0.02, "{var} vs {want}");
    }

    #[test]
    fn same_seed_same_path() {
        let ch = mobile_tx(20e-13, 0.0);
        let run = || {
            let mut sim = SimRealization::new(&ch, RngStream::new(4, 7));
            let g = sim.release(100);
            sim.advance(&ch, 30);
            let c = sim.observe(&ch);
            (sim.tx_pos, sim.group_positions(&ch, g).to_vec(), c)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn observe_edge_cases() {
        let ch = mobile_tx(20e-13, 0.0);
        let mut sim = SimRealization::new(&ch, RngStream::new(5, 0));
        assert_eq!(sim.observe(&ch), 0);
        // A molecule released on top of the receiver is counted.
        sim.tx_pos = sim.rx_pos;
        sim.release(1);
        assert_eq!(sim.observe(&ch), 1);
        assert_eq!(sim.counts.len(), 2);
    }

    #[test]
    fn displacement_is_gaussian_after_many_steps() {
        // r(t) per axis ~ N(r0 − v* t, 2 D2 t); compare binned x against the
        // normal law with a χ² statistic.
        let ch = mobile_tx(20e-13, 1e-5);
        let t = 5e-3;
        let n = 20_000;
        let steps = steps_for(&ch, t);
        let xs: Vec<f64> = (0..n)
            .map(|k| {
                let mut sim = SimRealization::new(&ch, RngStream::new(6, k));
                for _ in 0..steps {
                    sim.step(&ch);
                }
                sim.displacement().x
            })
            .collect();
        let mu = ch.mean_displacement(t).x;
        let sd = ch.displacement_variance(t).sqrt();
        let edges: Vec<f64> = (-5..=5).map(|i| mu + 0.5 * i as f64 * sd).collect();
        let mut chi2 = 0.0;
        let cdf = |x: f64| crate::specfun::normal_cdf((x - mu) / sd);
        let mut bins = vec![(f64::NEG_INFINITY, edges[0])];
        bins.extend(edges.windows(2).map(|w| (w[0], w[1])));
        bins.push((edges[10], f64::INFINITY));
        for (lo, hi) in &bins {
            let obs = xs.iter().filter(|&&x| x > *lo && x <= *hi).count() as f64;
            let exp = n as f64 * (cdf(*hi) - cdf(*lo));
            chi2 += (obs - exp).powi(2) / exp;
        }
        // 12 bins, 11 degrees of freedom: p = 0.01 at 24.7.
        assert!(chi2 < 24.7, "chi2 {chi2}");
    }

    #[test]
    fn mean_matches_closed_form() {
        let ch = mobile_tx(20e-13, 0.0);
        let grid = [0.0, 5e-3, 2e-2];
        let pts = estimate_mean(&ch, &grid, ch.config().tau_s, 2000, 1, HEstimator::Count).unwrap();
        for p in &pts {
            let m = crate::stats::mean_cir(&ch, p.t, ch.config().tau_s).unwrap();
            assert!((p.m - m).abs() < 3.5 * p.stderr, "t={}: {} vs {m} ± {}", p.t, p.m, p.stderr);
        }
        // t = 0 is the static channel value.
        let h0 = ch.cir(ch.config().r0, ch.config().tau_s).unwrap();
        assert!((pts[0].m - h0).abs() < 3.5 * pts[0].stderr);
    }

    #[test]
    fn conditional_estimator_is_unbiased_and_quieter() {
        let ch = mobile_tx(20e-13, 0.0);
        let grid = [5e-3];
        let tau = ch.config().tau_s;
        let a = estimate_mean(&ch, &grid, tau, 1000, 2, HEstimator::Count).unwrap()[0];
        let b = estimate_mean(&ch, &grid, tau, 1000, 2, HEstimator::Conditional).unwrap()[0];
        let m = crate::stats::mean_cir(&ch, 5e-3, tau).unwrap();
        assert!((b.m - m).abs() < 3.5 * b.stderr, "{} vs {m}", b.m);
        assert!(b.stderr < a.stderr);
    }

    #[test]
    fn stderr_shrinks_with_realizations() {
        let ch = mobile_tx(20e-13, 0.0);
        let tau = ch.config().tau_s;
        let a = estimate_mean(&ch, &[1e-2], tau, 400, 3, HEstimator::Conditional).unwrap()[0];
        let b = estimate_mean(&ch, &[1e-2], tau, 1600, 3, HEstimator::Conditional).unwrap()[0];
        let ratio = a.stderr / b.stderr;
        assert!(ratio > 1.6 && ratio < 2.5, "{ratio}");
    }

    #[test]
    fn acf_tracks_closed_form() {
        let ch = mobile_tx(20e-13, 0.0);
        let tau = ch.config().tau_s;
        let grid = [0.0, 2e-3, 1e-2];
        let pts = estimate_acf(&ch, 0.0, &grid, tau, 1500, 4, HEstimator::Conditional).unwrap();
        assert!((pts[0].rho - 1.0).abs() < 0.05, "{:?}", pts[0]);
        for p in &pts[1..] {
            let want = crate::stats::normalized_acf(&ch, 0.0, p.t2, tau).unwrap();
            assert!((p.rho - want).abs() < 3.5 * p.stderr.max(1e-3), "{p:?} vs {want}");
        }
    }

    #[test]
    fn distribution_shifts_with_flow() {
        let tau = 3.5e-5;
        let med = |vx: f64| {
            let d = estimate_distribution(&mobile_tx(10e-13, vx), 5e-3, tau, 600, 20, 5, HEstimator::Conditional)
                .unwrap();
            d.samples[d.samples.len() / 2]
        };
        assert!(med(1e-5) > med(0.0));
        assert!(med(0.0) > med(-1e-5));
    }

    #[test]
    fn histogram_is_a_density() {
        let ch = mobile_tx(10e-13, 0.0);
        let d = estimate_distribution(&ch, 5e-3, 3.5e-5, 300, 15, 6, HEstimator::Count).unwrap();
        let mass: f64 = d.density.iter().zip(d.edges.windows(2)).map(|(p, w)| p * (w[1] - w[0])).sum();
        assert!((mass - 1.0).abs() < 1e-12);
        assert!(d.samples.iter().all(|&h| (0.0..=1.0).contains(&h)));
        assert_eq!(d.cdf(f64::INFINITY), 1.0);
    }

    #[test]
    fn particles_see_the_channel_at_release() {
        // A release at t = 0 sampled τ_s later depends on r(0), not on r(T):
        // the simulated mean must match the exact sphere probability from
        // r0 and not E[h(r(T), τ_s)]. A fast transmitter separates the two.
        let ch = mobile_tx(1e-10, 0.0);
        let tau = ch.config().tau_s;
        let p = estimate_mean(&ch, &[0.0], tau, 4000, 9, HEstimator::Conditional).unwrap()[0];
        let var = 2.0 * ch.params().d1 * tau;
        let at_release = ncx2_cdf(3, ch.config().r0.norm_sq() / var, ch.config().a_rx.powi(2) / var);
        let at_end = crate::stats::mean_cir(&ch, ch.config().bit_interval, tau).unwrap();
        assert!((p.m - at_release).abs() < 3.0 * p.stderr, "{} vs {at_release} ± {}", p.m, p.stderr);
        assert!((p.m - at_end).abs() > 6.0 * p.stderr, "{} vs {at_end} ± {}", p.m, p.stderr);
    }

    #[test]
    fn ber_fixed_link_is_mode_independent() {
        let cfg = SystemConfig {
            d_tx: 0.0,
            d_rx: 0.0,
            n_a: 2000,
            seq_len: 12,
            ..SystemConfig::default()
        };
        let ch = Channel::new(cfg, MobilityScenario::NoFlowFixedTxFixedRx).unwrap();
        let est = simulate_ber(&ch, 40, 7, SimBerOptions::default()).unwrap();
        assert_eq!(est.perfect, est.outdated);
    }

    #[test]
    fn ber_without_signal_equals_prior() {
        let cfg = SystemConfig {
            n_a: 0,
            n_noise: 0.0,
            p1: 0.3,
            seq_len: 10,
            ..SystemConfig::default()
        };
        let ch = Channel::new(cfg, MobilityScenario::NoFlowMobileTxFixedRx).unwrap();
        let est = simulate_ber(&ch, 3000, 8, SimBerOptions::default()).unwrap();
        let p = est.perfect.overall();
        assert!((p - 0.3).abs() < 3.0 * (0.21f64 / 30_000.0).sqrt(), "{p}");
    }
}
