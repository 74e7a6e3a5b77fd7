//! One function per subcommand. Each fills in the parameters it uses, so
//! the manifest records exactly what was run.

use mcchan::detect::{expected_pe, peclet_default, BerEstimate, BerOptions, DetectorMode};
use mcchan::psim::{estimate_acf, estimate_distribution, estimate_mean, simulate_ber, SimBerOptions};
use mcchan::stats::{self, Coherence, COHERENCE_GRID, COHERENCE_SPAN_INTERVALS};
use mcchan::{dist, Channel};

use crate::args::{Command, Estimator, Params, Quantity};
use crate::output::{Cell, Table};
use crate::validate;

pub const DEFAULT_REALIZATIONS: usize = 10_000;

/// Result of one command: the table, human-readable notes for stderr, and
/// whether a check failed.
pub struct Outcome {
    pub table: Table,
    pub notes: Vec<String>,
    pub failed: bool,
}

impl Outcome {
    fn table(table: Table) -> Self {
        Outcome {
            table,
            notes: Vec::new(),
            failed: false,
        }
    }

    fn note(mut self, s: String) -> Self {
        self.notes.push(s);
        self
    }
}

pub struct Job<'a> {
    pub ch: &'a Channel,
    pub seed: u64,
    /// Merged parameters; commands replace `None` by their defaults here.
    pub params: Params,
}

impl Job<'_> {
    fn cfg(&self) -> &mcchan::SystemConfig {
        self.ch.config()
    }

    fn tau(&self) -> f64 {
        self.cfg().tau_s
    }

    fn realizations(&mut self) -> usize {
        *self.params.realizations.get_or_insert(DEFAULT_REALIZATIONS)
    }

    fn points(&mut self, default: usize) -> mcchan::Result<usize> {
        let p = *self.params.points.get_or_insert(default);
        if p < 2 {
            return Err(bad("points", "need at least 2"));
        }
        Ok(p)
    }

    /// End of a time grid starting at 0: the frame duration by default.
    fn t_end(&mut self) -> f64 {
        let frame = self.cfg().seq_len as f64 * self.cfg().bit_interval;
        *self.params.t.get_or_insert(frame)
    }

    /// Evaluation time of a distribution: ten bit intervals by default.
    fn t_eval(&mut self) -> f64 {
        let ten = 10.0 * self.cfg().bit_interval;
        *self.params.t.get_or_insert(ten)
    }

    fn acf_grid(&mut self) -> mcchan::Result<(f64, Vec<f64>)> {
        let t1 = *self.params.t1.get_or_insert(0.0);
        let span = 100.0 * self.cfg().bit_interval;
        let t2_max = *self.params.t2_max.get_or_insert(t1 + span);
        if !(t2_max > t1) {
            return Err(bad("t2_max", "must exceed t1"));
        }
        let points = self.points(101)?;
        Ok((t1, linspace(t1, t2_max, points)))
    }

    fn estimator(&mut self) -> Estimator {
        *self.params.estimator.get_or_insert(Estimator::Count)
    }
}

fn bad(name: &'static str, reason: &str) -> mcchan::Error {
    mcchan::Error::InvalidArgument {
        name,
        reason: reason.to_string(),
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let step = (b - a) / (n - 1) as f64;
    (0..n).map(|i| if i + 1 == n { b } else { a + step * i as f64 }).collect()
}

pub fn run(cmd: &Command, job: &mut Job<'_>) -> mcchan::Result<Outcome> {
    match cmd {
        Command::Mean => mean(job),
        Command::Acf => acf(job),
        Command::Coherence => coherence(job),
        Command::Cdf | Command::Pdf => distribution(job),
        Command::Lognormal => lognormal(job),
        Command::Outage => outage(job),
        Command::Ber => ber(job),
        Command::Simulate { what } => simulate(*what, job),
        Command::Peclet => peclet(job),
        Command::Validate => Ok(validate::run()),
        Command::Rerun { .. } => unreachable!("rerun is resolved before dispatch"),
    }
}

const MEAN_HEADER: [&str; 4] = ["t_s", "m", "Na_m", "stderr"];
const ACF_HEADER: [&str; 4] = ["t1_s", "t2_s", "phi", "rho"];
const DIST_HEADER: [&str; 3] = ["h", "cdf", "pdf"];
const BER_HEADER: [&str; 4] = ["j", "pe", "stderr", "mode"];

fn mean(job: &mut Job<'_>) -> mcchan::Result<Outcome> {
    let t_end = job.t_end();
    let points = job.points(51)?;
    let na = job.cfg().n_a as f64;
    let mut table = Table::new(&MEAN_HEADER);
    for t in linspace(0.0, t_end, points) {
        let m = stats::mean_cir(job.ch, t, job.tau())?;
        table.push(vec![t.into(), m.into(), (na * m).into(), 0.0.into()]);
    }
    Ok(Outcome::table(table))
}

fn acf(job: &mut Job<'_>) -> mcchan::Result<Outcome> {
    let (t1, grid) = job.acf_grid()?;
    let mut table = Table::new(&ACF_HEADER);
    for t2 in grid {
        let phi = stats::acf(job.ch, t1, t2, job.tau())?;
        let rho = stats::normalized_acf(job.ch, t1, t2, job.tau())?;
        table.push(vec![t1.into(), t2.into(), phi.into(), rho.into()]);
    }
    Ok(Outcome::table(table))
}

fn coherence(job: &mut Job<'_>) -> mcchan::Result<Outcome> {
    let eta = *job.params.eta.get_or_insert(0.9);
    let span = COHERENCE_SPAN_INTERVALS * job.cfg().bit_interval;
    let t_max = *job.params.t2_max.get_or_insert(span);
    let grid = *job.params.points.get_or_insert(COHERENCE_GRID);
    let c = stats::coherence_time(job.ch, eta, job.tau(), t_max, grid)?;
    let mut table = Table::new(&["eta", "status", "t_s", "rho"]);
    let note = match c {
        Coherence::Reached { t } => {
            let rho = stats::normalized_acf(job.ch, 0.0, t, job.tau())?;
            table.push(vec![eta.into(), "reached".into(), t.into(), rho.into()]);
            format!("coherence time {t:.4e} s (grid step {:.1e} s)", t_max / grid as f64)
        }
        Coherence::NotReached { t_max, rho_at_t_max } => {
            table.push(vec![eta.into(), "not-reached".into(), t_max.into(), rho_at_t_max.into()]);
            format!("rho stays above {eta} up to {t_max:.4e} s (rho = {rho_at_t_max:.4})")
        }
    };
    Ok(Outcome::table(table).note(note))
}

/// Grid over the central `1 − 2e-4` of the distribution at `t`.
fn h_grid(job: &mut Job<'_>, t: f64) -> mcchan::Result<Vec<f64>> {
    let points = job.points(201)?;
    let lo = dist::quantile(job.ch, 1e-4, t, job.tau())?;
    let hi = dist::quantile(job.ch, 1.0 - 1e-4, t, job.tau())?;
    Ok(linspace(lo, hi, points))
}

fn distribution(job: &mut Job<'_>) -> mcchan::Result<Outcome> {
    let t = job.t_eval();
    if job.ch.is_deterministic(t) {
        return Err(mcchan::Error::Deterministic("no distribution to tabulate"));
    }
    let mut table = Table::new(&DIST_HEADER);
    for h in h_grid(job, t)? {
        let f = dist::cdf(job.ch, h, t, job.tau())?;
        let p = dist::pdf(job.ch, h, t, job.tau())?;
        table.push(vec![h.into(), f.into(), p.into()]);
    }
    Ok(Outcome::table(table))
}

fn lognormal(job: &mut Job<'_>) -> mcchan::Result<Outcome> {
    let t = job.t_eval();
    let ln = dist::lognormal_params(job.ch, t, job.tau())?;
    let valid = dist::lognormal_valid(job.ch, t, job.tau())?;
    let mut table = Table::new(&DIST_HEADER);
    for h in h_grid(job, t)? {
        table.push(vec![h.into(), ln.cdf(h).into(), ln.pdf(h).into()]);
    }
    let nmse = dist::pdf_nmse(job.ch, t, job.tau())?;
    let note = format!(
        "mu* = {:.6}, sigma*^2 = {:.6e}, gamma = {:.2}, NMSE = {nmse:.3e} ({})",
        ln.mu_star,
        ln.sigma_star_sq,
        valid.gamma,
        if valid.valid { "approximation valid" } else { "gamma < 100, approximation not valid" }
    );
    Ok(Outcome::table(table).note(note))
}

fn outage(job: &mut Job<'_>) -> mcchan::Result<Outcome> {
    let h_min = *job.params.h_min.get_or_insert(1e-3);
    let p_target = *job.params.p_target.get_or_insert(0.5);
    let t_end = job.t_end();
    let points = job.points(51)?;
    let mut table = Table::new(&["t_s", "p_out"]);
    for t in linspace(0.0, t_end, points) {
        let p = dist::outage_probability(job.ch, h_min, t, job.tau())?;
        table.push(vec![t.into(), p.into()]);
    }
    let bits = dist::avg_bits_before_outage(job.ch, h_min, p_target, job.tau(), t_end, points - 1)?;
    Ok(Outcome::table(table).note(format!("average bits before outage at p_target = {p_target}: {bits}")))
}

fn ber_table(est: &BerEstimate, only: Option<DetectorMode>) -> Table {
    let mut table = Table::new(&BER_HEADER);
    for mode in DetectorMode::ALL {
        if only.is_some_and(|m| m != mode) {
            continue;
        }
        let e = est.mode(mode);
        for (j, (pe, se)) in e.mean.iter().zip(&e.stderr).enumerate() {
            table.push(vec![(j as u64 + 1).into(), (*pe).into(), (*se).into(), mode.name().into()]);
        }
    }
    table
}

fn ber_note(est: &BerEstimate) -> String {
    let f = &est.frame;
    format!(
        "frame-average error rate: perfect {:.5} ± {:.1e}, outdated {:.5} ± {:.1e} ({} realizations)",
        f.mean[0], f.stderr[0], f.mean[1], f.stderr[1], f.n
    )
}

fn ber(job: &mut Job<'_>) -> mcchan::Result<Outcome> {
    let n = job.realizations();
    let est = expected_pe(job.ch, &BerOptions::new(job.ch, n, job.seed))?;
    let only = job.params.mode.map(DetectorMode::from);
    Ok(Outcome::table(ber_table(&est, only)).note(ber_note(&est)))
}

fn simulate(what: Quantity, job: &mut Job<'_>) -> mcchan::Result<Outcome> {
    let n = job.realizations();
    let (seed, tau) = (job.seed, job.tau());
    match what {
        Quantity::Mean => {
            let t_end = job.t_end();
            let points = job.points(51)?;
            let how = job.estimator().into();
            let na = job.cfg().n_a as f64;
            let pts = estimate_mean(job.ch, &linspace(0.0, t_end, points), tau, n, seed, how)?;
            let mut table = Table::new(&MEAN_HEADER);
            for p in pts {
                table.push(vec![p.t.into(), p.m.into(), (na * p.m).into(), p.stderr.into()]);
            }
            Ok(Outcome::table(table))
        }
        Quantity::Acf => {
            let (t1, grid) = job.acf_grid()?;
            let how = job.estimator().into();
            let pts = estimate_acf(job.ch, t1, &grid, tau, n, seed, how)?;
            let mut table = Table::new(&["t1_s", "t2_s", "phi", "rho", "stderr"]);
            for p in pts {
                table.push(vec![p.t1.into(), p.t2.into(), p.phi.into(), p.rho.into(), p.stderr.into()]);
            }
            Ok(Outcome::table(table))
        }
        Quantity::Cdf => {
            let t = job.t_eval();
            let bins = job.points(50)?;
            let how = job.estimator().into();
            let d = estimate_distribution(job.ch, t, tau, n, bins, seed, how)?;
            let mut table = Table::new(&DIST_HEADER);
            for (w, &p) in d.edges.windows(2).zip(&d.density) {
                let h = 0.5 * (w[0] + w[1]);
                table.push(vec![h.into(), d.cdf(h).into(), p.into()]);
            }
            Ok(Outcome::table(table))
        }
        Quantity::Ber => {
            let est = simulate_ber(job.ch, n, seed, SimBerOptions::default())?;
            let only = job.params.mode.map(DetectorMode::from);
            Ok(Outcome::table(ber_table(&est, only)).note(ber_note(&est)))
        }
    }
}

fn peclet(job: &mut Job<'_>) -> mcchan::Result<Outcome> {
    let pe = peclet_default(job.ch)?;
    let mut table = Table::new(&["pe_l"]);
    table.push(vec![Cell::Float(pe)]);
    Ok(Outcome::table(table).note(format!("Pe_L = {}", validate::sig3(pe))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_hits_both_ends() {
        let g = linspace(0.0, 0.3, 4);
        assert_eq!(g.len(), 4);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[3], 0.3);
        assert!((g[1] - 0.1).abs() < 1e-16);
    }
}
