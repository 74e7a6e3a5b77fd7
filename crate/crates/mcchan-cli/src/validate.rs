//! A fast self-consistency suite: closed forms against each other and
//! against small Monte Carlo runs with fixed seeds. Runs in about a second.

use mcchan::detect::{conditional_pe, expected_pe, optimal_threshold, peclet_default, BerOptions};
use mcchan::psim::SimRealization;
use mcchan::quad::integrate_pieces;
use mcchan::specfun::RngStream;
use mcchan::{dist, stats, Channel, MobilityScenario, SystemConfig, Vec3};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::commands::Outcome;
use crate::output::Table;

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

pub fn run() -> Outcome {
    let checks = [
        cdf_forms(),
        pdf_mass(),
        acf_bounds(),
        mean_vs_sampling(),
        thresholds(),
        fixed_link_pairing(),
        outdated_csi_limit(),
        peclet_values(),
        step_moments(),
    ];
    let mut table = Table::new(&["check", "status", "detail"]);
    let mut notes = Vec::new();
    for c in &checks {
        let status = if c.pass { "PASS" } else { "FAIL" };
        notes.push(format!("{status} {}: {}", c.name, c.detail));
        table.push(vec![c.name.into(), status.into(), c.detail.as_str().into()]);
    }
    Outcome {
        table,
        notes,
        failed: checks.iter().any(|c| !c.pass),
    }
}

const TAU: f64 = 3.5e-5;

fn scenarios() -> Vec<Channel> {
    MobilityScenario::ALL
        .into_iter()
        .filter(|s| s.tx_mobile() || s.rx_mobile())
        .map(|sc| {
            let v = if sc.has_flow() { Vec3::splat(1e-5) } else { Vec3::ZERO };
            let cfg = SystemConfig {
                v,
                ..SystemConfig::default()
            };
            Channel::new(cfg, sc).expect("defaults fit every mobile scenario")
        })
        .collect()
}

fn cdf_forms() -> Check {
    let mut worst: f64 = 0.0;
    for ch in scenarios() {
        for i in 1..=10 {
            let t = 5e-3 * i as f64;
            let lo = dist::quantile(&ch, 1e-6, t, TAU).unwrap();
            let hi = dist::quantile(&ch, 1.0 - 1e-6, t, TAU).unwrap();
            for k in 0..10 {
                let h = lo + (hi - lo) * k as f64 / 9.0;
                let a = dist::cdf(&ch, h, t, TAU).unwrap();
                let b = dist::cdf_closed_form(&ch, h, t, TAU).unwrap();
                worst = worst.max((a - b).abs());
            }
        }
    }
    check("cdf-forms-agree", worst <= 1e-10, format!("max |diff| {worst:.1e}"))
}

fn pdf_mass() -> Check {
    let mut worst: f64 = 0.0;
    for ch in scenarios() {
        let t = 5e-3;
        let ps = [1e-13, 1e-6, 0.01, 0.1, 0.5, 0.9, 0.99, 1.0 - 1e-6, 1.0 - 1e-13];
        let pts: Vec<f64> = ps.iter().map(|&p| dist::quantile(&ch, p, t, TAU).unwrap()).collect();
        let q = integrate_pieces(|h| dist::pdf(&ch, h, t, TAU).unwrap(), &pts, 1e-14, 1e-10);
        worst = worst.max((q.value - (1.0 - 2e-13)).abs());
    }
    check("pdf-normalized", worst <= 1e-6, format!("max |mass - 1| {worst:.1e}"))
}

fn acf_bounds() -> Check {
    let mut ok = true;
    for ch in scenarios() {
        for i in 0..8 {
            let t1 = 2e-3 * i as f64;
            for k in 1..8 {
                let t2 = t1 + 3e-3 * k as f64;
                let rho = stats::normalized_acf(&ch, t1, t2, TAU).unwrap();
                let var = stats::variance(&ch, t2, TAU).unwrap();
                ok &= rho > 0.0 && rho <= 1.0 && var >= 0.0;
            }
        }
    }
    check("acf-bounds", ok, "rho in (0, 1], variance >= 0".into())
}

/// `m(t)` against direct sampling of `r(t)`.
fn mean_vs_sampling() -> Check {
    let mut worst: f64 = 0.0;
    for (s, ch) in scenarios().iter().enumerate() {
        let t = 10e-3;
        let mut rng = RngStream::new(7, s as u64);
        let n = 100_000;
        let sd = ch.displacement_variance(t).sqrt();
        let mean = ch.config().r0 - ch.params().v_star * t;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let mut g = || rng.sample::<f64, _>(StandardNormal) * sd;
            let r = mean + Vec3::new(g(), g(), g());
            let h = ch.cir(r, TAU).unwrap();
            sum += h;
            sq += h * h;
        }
        let m = sum / n as f64;
        let se = ((sq / n as f64 - m * m) / n as f64).sqrt();
        let exact = stats::mean_cir(ch, t, TAU).unwrap();
        worst = worst.max((m - exact).abs() / se);
    }
    check("mean-vs-sampling", worst < 4.0, format!("worst deviation {worst:.2} stderr"))
}

/// The closed-form threshold against a brute-force search.
fn thresholds() -> Check {
    let mut rng = RngStream::new(11, 0);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let l0 = rng.random_range(0.1..60.0);
        let l1 = l0 + rng.random_range(0.01..60.0);
        let p1: f64 = rng.random_range(0.05..0.95);
        let err = |xi: u64| p1 * conditional_pe(true, l1, xi) + (1.0 - p1) * conditional_pe(false, l0, xi);
        let top = (l1 + 20.0 * l1.sqrt() + 20.0) as u64;
        let best = (0..=top).map(err).fold(f64::INFINITY, f64::min);
        let xi = optimal_threshold(l1, l0, 1.0 - p1, p1);
        if err(xi) > best + 1e-12 {
            mismatches += 1;
        }
    }
    check("threshold-optimal", mismatches == 0, format!("{mismatches} of 1000 mismatched"))
}

fn fixed_link_pairing() -> Check {
    let cfg = SystemConfig {
        d_tx: 0.0,
        d_rx: 0.0,
        ..SystemConfig::default()
    };
    let ch = Channel::new(cfg, MobilityScenario::NoFlowFixedTxFixedRx).unwrap();
    let est = expected_pe(&ch, &BerOptions::new(&ch, 64, 3)).unwrap();
    let same = est.perfect.mean == est.outdated.mean;
    check("fixed-link-identical", same, "perfect and outdated CSI on a fixed link".into())
}

fn outdated_csi_limit() -> Check {
    let ch = &scenarios()[0];
    let r_hat = Vec3::new(1.1e-6, 2e-7, 0.0);
    let st = dist::OutdatedCsiState::new(ch, r_hat, 1e-3, TAU).unwrap();
    let f = dist::outdated_csi_factors(ch, &st, 1e-3 + 1e-15).unwrap();
    let h = dist::outdated_csi_quantile(ch, &st, 1e-3 + 1e-15, 1.0).unwrap();
    let rel = (h / st.h_hat - 1.0).abs();
    let ok = (f.c - 1.0).abs() < 1e-6 && f.theta.abs() < 1e-6 && rel < 1e-6;
    check("outdated-csi-limit", ok, format!("|h/h_hat - 1| = {rel:.1e} as t' -> 0"))
}

fn peclet_values() -> Check {
    let cases = [
        (21e-13, 1e-5, "2.38"),
        (1.1e-13, 1e-5, "45.5"),
        (5.1e-13, 1e-5, "9.80"),
        (5.1e-13, 0.4e-5, "3.92"),
        (5.1e-13, 2.5e-5, "24.5"),
    ];
    let mut got = Vec::new();
    let mut ok = true;
    for (d_tx, vx, want) in cases {
        let cfg = SystemConfig {
            d_tx,
            d_rx: 0.0,
            v: Vec3::new(vx, 0.0, 0.0),
            ..SystemConfig::default()
        };
        let ch = Channel::new(cfg, MobilityScenario::FlowMobileTxFixedRx).unwrap();
        let pe = sig3(peclet_default(&ch).unwrap());
        ok &= pe == want;
        got.push(pe);
    }
    check("peclet-values", ok, got.join(" "))
}

/// Three significant figures.
pub fn sig3(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let decimals = (2 - x.abs().log10().floor() as i32).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Entity steps: zero mean and per-axis variance `2 D dt`.
fn step_moments() -> Check {
    let ch = &scenarios()[2];
    let n = 200_000;
    let (mut sum, mut sq) = (0.0, 0.0);
    for k in 0..n {
        let mut sim = SimRealization::new(ch, RngStream::new(5, k));
        sim.step(ch);
        let d = sim.displacement() - ch.config().r0;
        for x in d.to_array() {
            sum += x;
            sq += x * x;
        }
    }
    let m = 3.0 * n as f64;
    let var = sq / m;
    let want = 2.0 * ch.params().d2 * ch.config().dt;
    let rel = (var / want - 1.0).abs();
    let z = (sum / m) / (want / m).sqrt();
    check(
        "step-moments",
        rel < 0.01 && z.abs() < 4.0,
        format!("variance off by {:.2}%, mean {z:.2} stderr", 100.0 * rel),
    )
}
