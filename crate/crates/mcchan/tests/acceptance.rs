//! Acceptance checks, one line per criterion.
//!
//! Prints `PASS` or `FAIL` with the measured value and tolerance. Failures
//! are reported but do not fail the run unless `MCCHAN_ACCEPTANCE_STRICT=1`,
//! so the rest of the workspace suite still executes.

use std::time::{Duration, Instant};

use mcchan::detect::{self, BerOptions, DetectorMode, Trajectory};
use mcchan::dist;
use mcchan::psim::{self, HEstimator, SimBerOptions};
use mcchan::specfun::{chi2_gaussian_nmse, poisson_cdf, poisson_sf, RngStream};
use mcchan::stats::{self, AcfKernel, Coherence};
use mcchan::{Channel, MobilityScenario, SystemConfig, Vec3};
use rand::Rng;
use rand_distr::StandardNormal;

const TAU: f64 = 3.5e-5;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_scenarios() -> Vec<Channel> {
    MobilityScenario::ALL
        .into_iter()
        .filter(|sc| sc.tx_mobile() || sc.rx_mobile())
        .map(|sc| {
            let v = if sc.has_flow() { Vec3::new(1e-5, 2e-6, 0.0) } else { Vec3::ZERO };
            let cfg = SystemConfig {
                v,
                ..SystemConfig::default()
            };
            Channel::new(cfg, sc).unwrap()
        })
        .collect()
}

fn gauss3(rng: &mut RngStream, sd: f64) -> Vec3 {
    Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)) * sd
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn c1_cdf_forms() -> Outcome {
    let mut worst: f64 = 0.0;
    for ch in random_scenarios() {
        let phi = ch.kernel(TAU).unwrap().phi;
        for i in 1..=20 {
            let t = i as f64 * 2.5e-3;
            for j in 1..=20 {
                let h = phi * j as f64 / 21.0;
                let a = dist::cdf(&ch, h, t, TAU).unwrap();
                let b = dist::cdf_closed_form(&ch, h, t, TAU).unwrap();
                worst = worst.max((a - b).abs());
            }
        }
    }
    outcome(worst <= 1e-10, format!("max |erfc form - Marcum form| = {worst:.2e} (tol 1e-10)"))
}

fn c2_mean_oracle() -> Outcome {
    let n = 1_000_000;
    let mut worst: f64 = 0.0;
    for (s, ch) in random_scenarios().iter().enumerate() {
        for (i, t) in [1e-3, 5e-3, 1e-2, 2.5e-2, 5e-2].into_iter().enumerate() {
            let mut rng = RngStream::new(200 + s as u64, i as u64);
            let sd = ch.displacement_variance(t).sqrt();
            let hs: Vec<f64> = (0..n)
                .map(|_| ch.cir(ch.mean_displacement(t) + gauss3(&mut rng, sd), TAU).unwrap())
                .collect();
            let (m, se) = mean_se(&hs);
            let exact = stats::mean_cir(ch, t, TAU).unwrap();
            worst = worst.max((m - exact).abs() / se);
        }
    }
    outcome(worst <= 3.0, format!("max |MC - m(t)| = {worst:.2} stderr over 6 scenarios x 5 times (tol 3)"))
}

fn c3_acf_oracle() -> Outcome {
    let n = 1_000_000;
    let no_flow = Channel::new(SystemConfig::default(), MobilityScenario::NoFlowMobileTxMobileRx).unwrap();
    let flow = Channel::new(
        SystemConfig {
            v: Vec3::new(1e-5, 0.0, 0.0),
            ..SystemConfig::default()
        },
        MobilityScenario::FlowMobileTxFixedRx,
    )
    .unwrap();
    let rx_flow = Channel::new(
        SystemConfig {
            v: Vec3::new(-1e-5, 3e-6, 0.0),
            ..SystemConfig::default()
        },
        MobilityScenario::FlowFixedTxMobileRx,
    )
    .unwrap();
    let cases = [
        (&no_flow, 1e-3, 4e-3),
        (&no_flow, 5e-3, 2e-2),
        (&flow, 2e-3, 6e-3),
        (&flow, 1e-2, 3e-2),
        (&rx_flow, 4e-3, 1.2e-2),
    ];
    let mut worst: f64 = 0.0;
    for (i, (ch, t1, t2)) in cases.into_iter().enumerate() {
        let mut rng = RngStream::new(300, i as u64);
        let sd1 = ch.displacement_variance(t1).sqrt();
        let sd21 = ch.displacement_variance(t2 - t1).sqrt();
        let drift = ch.params().v_star * (t2 - t1);
        let prods: Vec<f64> = (0..n)
            .map(|_| {
                let r1 = ch.mean_displacement(t1) + gauss3(&mut rng, sd1);
                let r2 = r1 - drift + gauss3(&mut rng, sd21);
                ch.cir(r1, TAU).unwrap() * ch.cir(r2, TAU).unwrap()
            })
            .collect();
        let (m, se) = mean_se(&prods);
        let exact = stats::acf(ch, t1, t2, TAU).unwrap();
        worst = worst.max((m - exact).abs() / se);
    }
    outcome(worst <= 3.0, format!("max |MC - phi(t1,t2)| = {worst:.2} stderr over 5 pairs incl. flow (tol 3)"))
}

fn c4_coherence() -> Outcome {
    let step = 0.5e-3;
    let mut parts = Vec::new();
    let mut pass = true;
    for (d_tx, want) in [(20e-13, 7e-3), (5e-13, 23e-3)] {
        let cfg = SystemConfig {
            d_tx,
            ..SystemConfig::default()
        };
        let ch = Channel::new(cfg, MobilityScenario::NoFlowMobileTxMobileRx).unwrap();
        let c = stats::coherence_time(&ch, 0.9, TAU, 0.1, 200).unwrap();
        match c {
            Coherence::Reached { t } => {
                pass &= (t - want).abs() <= step;
                parts.push(format!("D_tx={d_tx:.0e}: {:.2} ms (target {:.0} ms)", t * 1e3, want * 1e3));
            }
            Coherence::NotReached { .. } => {
                pass = false;
                parts.push(format!("D_tx={d_tx:.0e}: not reached"));
            }
        }
    }
    outcome(pass, format!("{} (tol ±0.5 ms)", parts.join(", ")))
}

fn c5_nmse() -> Outcome {
    let v = chi2_gaussian_nmse(3, 100.0);
    outcome(v <= 1e-9, format!("chi2_gaussian_nmse(3, 100) = {v:.3e} (tol 1e-9)"))
}

fn c6_particle_distribution() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for (k, vx) in [0.0, 1e-5, -1e-5].into_iter().enumerate() {
        let cfg = SystemConfig {
            d_tx: 1e-12,
            v: Vec3::new(vx, 0.0, 0.0),
            ..SystemConfig::default()
        };
        let sc = MobilityScenario::from_parts(vx != 0.0, true, false);
        let ch = Channel::new(cfg, sc).unwrap();
        let emp = psim::estimate_distribution(&ch, 5e-3, TAU, 10_000, 50, 600 + k as u64, HEstimator::Conditional)
            .unwrap();
        let ks = emp.ks_distance(|h| dist::cdf(&ch, h, 5e-3, TAU).unwrap());
        pass &= ks <= 0.02;
        parts.push(format!("v={vx:+.0e}: {ks:.4}"));
    }
    outcome(pass, format!("KS {} (tol 0.02, 1e4 realizations)", parts.join(", ")))
}

fn c7_threshold() -> Outcome {
    let mut rng = RngStream::new(700, 0);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let l0: f64 = rng.random_range(0.5..80.0);
        let l1 = l0 * rng.random_range(1.05..10.0);
        let p1: f64 = rng.random_range(0.05..0.95);
        let p0 = 1.0 - p1;
        let xi = detect::optimal_threshold(l1, l0, p0, p1);
        let cost = |x: u64| p0 * poisson_sf(l0, x) + p1 * poisson_cdf(l1, x);
        let best = (0..=1000u64).map(cost).fold(f64::INFINITY, f64::min);
        if cost(xi) > best * (1.0 + 1e-12) {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} mismatches in 1000 instances"))
}

fn c8_ber_gap() -> Outcome {
    let targets = [(0.1e-13, 0.0013), (5e-13, 0.0212), (20e-13, 0.0624), (100e-13, 0.08)];
    let mut parts = Vec::new();
    let mut pass = true;
    for (k, (d_tx, want)) in targets.into_iter().enumerate() {
        let cfg = SystemConfig {
            d_tx,
            ..SystemConfig::default()
        };
        let ch = Channel::new(cfg, MobilityScenario::NoFlowMobileTxMobileRx).unwrap();
        let est = detect::expected_pe(&ch, &BerOptions::new(&ch, 10_000, 800 + k as u64)).unwrap();
        let gap = est.gap.mean[36].abs();
        pass &= (gap - want).abs() <= 0.3 * want;
        parts.push(format!("{gap:.4}±{:.4} (target {want})", est.gap.stderr[36]));
    }
    outcome(pass, format!("j=37 gaps {} (tol ±30%)", parts.join(", ")))
}

fn c9_fixed_equivalence() -> Outcome {
    let cfg = SystemConfig {
        d_tx: 0.0,
        d_rx: 0.0,
        ..SystemConfig::default()
    };
    let ch = Channel::new(cfg, MobilityScenario::NoFlowFixedTxFixedRx).unwrap();
    // Semi-analytic detector on sampled counts, decision by decision.
    let det = detect::Detector::new(&ch, TAU, Default::default()).unwrap();
    let traj = Trajectory::mean_path(&ch);
    let mut differ = 0;
    let frames = 2000;
    let mut rng = RngStream::new(900, 0);
    for _ in 0..frames {
        let mut f = detect::BitFrame::sample(50, 0.5, &mut rng);
        let counts: Vec<u64> = (1..=50)
            .map(|j| {
                let m = det.mean_received(j, &f.bits, &traj, DetectorMode::PerfectCsi).unwrap();
                rand_distr::Distribution::sample(&rand_distr::Poisson::new(m).unwrap(), &mut rng) as u64
            })
            .collect();
        det.detect(&mut f, &counts, &traj, DetectorMode::PerfectCsi, false).unwrap();
        let perfect = f.estimates.clone();
        det.detect(&mut f, &counts, &traj, DetectorMode::OutdatedCsi, false).unwrap();
        differ += perfect.iter().zip(&f.estimates).filter(|(a, b)| a != b).count();
    }
    // Particle-level frames: every per-bit paired difference must vanish.
    let sim = psim::simulate_ber(&ch, 20, 901, SimBerOptions::default()).unwrap();
    let sim_differ = sim.gap.mean.iter().chain(&sim.gap.stderr).filter(|&&x| x != 0.0).count();
    outcome(
        differ == 0 && sim_differ == 0,
        format!("{differ} differing decisions in {frames} frames, {sim_differ} nonzero particle-level gaps"),
    )
}

fn c10_peclet() -> Outcome {
    let cases = [
        (21e-13, 1e-5, 2.38),
        (1.1e-13, 1e-5, 45.45),
        (5.1e-13, 1e-5, 9.8),
        (5.1e-13, 0.4e-5, 3.92),
        (5.1e-13, 2.5e-5, 24.5),
    ];
    let mut got = Vec::new();
    let mut pass = true;
    for (d_tx, vx, want) in cases {
        let cfg = SystemConfig {
            d_tx,
            d_rx: 0.0,
            v: Vec3::new(vx, 0.0, 0.0),
            ..SystemConfig::default()
        };
        let ch = Channel::new(cfg, MobilityScenario::FlowMobileTxFixedRx).unwrap();
        let pe = detect::peclet_default(&ch).unwrap();
        let three = |x: f64| {
            let mag = 10f64.powf(x.abs().log10().floor() - 2.0);
            (x / mag).round() * mag
        };
        pass &= (three(pe) - three(want)).abs() <= 1e-9 * want;
        got.push(format!("{pe:.3}"));
    }
    outcome(pass, format!("Pe = {} (targets 2.38, 45.45, 9.8, 3.92, 24.5 to 3 s.f.)", got.join(", ")))
}

fn c11_properties() -> Outcome {
    let mut fails = Vec::new();
    let ch = Channel::new(
        SystemConfig {
            d_tx: 1e-12,
            ..SystemConfig::default()
        },
        MobilityScenario::NoFlowMobileTxFixedRx,
    )
    .unwrap();
    let t = 5e-3;

    // pdf normalization: integrate in ln h around the Log-normal bulk.
    let ln = dist::lognormal_params(&ch, t, TAU).unwrap();
    let phi = ch.kernel(TAU).unwrap().phi;
    let mut pts: Vec<f64> = (-40..=40)
        .map(|i| (ln.mu_star + 0.5 * f64::from(i) * ln.sigma_star()).exp())
        .filter(|&h| h < phi)
        .collect();
    pts.insert(0, 0.0);
    pts.push(phi);
    let mass = mcchan::quad::integrate_pieces(|h| dist::pdf(&ch, h, t, TAU).unwrap(), &pts, 1e-13, 1e-11).value;
    if (mass - 1.0).abs() > 1e-6 {
        fails.push(format!("pdf mass {mass}"));
    }

    // cdf monotone in h.
    let mut last = 0.0;
    for i in 1..2000 {
        let f = dist::cdf(&ch, phi * f64::from(i) / 2000.0, t, TAU).unwrap();
        if f < last - 1e-15 {
            fails.push("cdf decreasing".into());
            break;
        }
        last = f;
    }

    // rho in (0, 1] and variance >= 0.
    for d_tx in [0.1e-13, 5e-13, 20e-13, 100e-13] {
        let c = Channel::new(
            SystemConfig {
                d_tx,
                ..SystemConfig::default()
            },
            MobilityScenario::NoFlowMobileTxMobileRx,
        )
        .unwrap();
        for i in 0..=50 {
            let t2 = f64::from(i) * 2e-3;
            let rho = stats::normalized_acf(&c, 0.0, t2, TAU).unwrap();
            if !(rho > 0.0 && rho <= 1.0) {
                fails.push(format!("rho {rho}"));
            }
            if stats::variance(&c, t2, TAU).unwrap() < 0.0 {
                fails.push("negative variance".into());
            }
        }
    }

    // Determinant identity of the six-dimensional Gaussian.
    let mut worst_det: f64 = 0.0;
    for (t1, t2) in [(1e-4, 2e-4), (1e-3, 5e-3), (5e-3, 5e-2), (2e-2, 2.1e-2)] {
        let k = AcfKernel::new(&ch, t1, t2, TAU).unwrap();
        let m = nalgebra::SMatrix::<f64, 6, 6>::from_fn(|i, j| k.inverse_covariance()[i][j]);
        let det = m.try_inverse().unwrap().determinant() * k.precision_det_root().powi(3);
        worst_det = worst_det.max((det - 1.0).abs());
    }
    if worst_det > 1e-9 {
        fails.push(format!("determinant identity off by {worst_det:e}"));
    }

    // Outdated CSI as t' -> 0.
    let st = dist::OutdatedCsiState::new(&ch, Vec3::new(8e-7, 1e-7, 0.0), 1e-2, TAU).unwrap();
    let mut rng = RngStream::new(1100, 0);
    let h = dist::outdated_csi_sample(&ch, &st, st.t_s + 1e-15, &mut rng).unwrap();
    if ((h - st.h_hat) / st.h_hat).abs() > 1e-6 {
        fails.push(format!("outdated CSI limit {h} vs {}", st.h_hat));
    }

    // Simulator step moments.
    let mut sim = psim::SimRealization::new(&ch, RngStream::new(1101, 0));
    let n = 1_000_000;
    let g = sim.release(n);
    sim.step(&ch);
    let xs: Vec<f64> = sim.group_positions(&ch, g).iter().map(|p| p.x).collect();
    let (m, _) = mean_se(&xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    let want = 2.0 * ch.config().d_a * ch.config().dt;
    if (var / want - 1.0).abs() > 0.01 || m.abs() > 3.0 * (want / n as f64).sqrt() {
        fails.push(format!("step moments mean {m:e} var ratio {}", var / want));
    }

    let pass = fails.is_empty();
    let detail = if pass {
        format!("pdf mass {mass:.9}, det identity {worst_det:.1e}, cdf/rho/variance/limit/step checks ok")
    } else {
        fails.join("; ")
    };
    outcome(pass, detail)
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 11] = [
        ("closed-form CDF cross-consistency", c1_cdf_forms, Duration::from_secs(1)),
        ("mean vs Gaussian-position Monte Carlo", c2_mean_oracle, Duration::from_secs(10)),
        ("ACF vs two-stage Monte Carlo", c3_acf_oracle, Duration::from_secs(30)),
        ("coherence times 7 ms / 23 ms", c4_coherence, Duration::MAX),
        ("Log-normal regime NMSE", c5_nmse, Duration::MAX),
        ("distribution vs particle simulator", c6_particle_distribution, Duration::from_secs(300)),
        ("threshold optimality", c7_threshold, Duration::MAX),
        ("BER gap at j = 37", c8_ber_gap, Duration::MAX),
        ("fixed TX/RX detector equivalence", c9_fixed_equivalence, Duration::MAX),
        ("Peclet numbers", c10_peclet, Duration::MAX),
        ("property suite", c11_properties, Duration::from_secs(120)),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let took = start.elapsed();
        let in_time = took <= budget;
        let pass = o.pass && in_time;
        if !pass {
            failed += 1;
        }
        let budget_note = if budget == Duration::MAX {
            String::new()
        } else {
            format!(", budget {}s", budget.as_secs())
        };
        println!(
            "{} {:>2}. {name}: {} [{:.2}s{budget_note}]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            took.as_secs_f64()
        );
    }
    println!("acceptance: {} of 11 criteria pass", 11 - failed);
    if failed > 0 && std::env::var("MCCHAN_ACCEPTANCE_STRICT").as_deref() == Ok("1") {
        std::process::exit(1);
    }
}
