use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mcchan::detect::DetectorMode;
use mcchan::psim::HEstimator;
use mcchan::MobilityScenario;
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "mcchan",
    version,
    about = "Statistics, detection and particle simulation of time-variant diffusive molecular channels"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// JSON configuration file. Missing keys keep their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// CSV destination. A manifest `<PATH>.manifest.json` is written next to
    /// it. Without this flag the CSV goes to standard output.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,

    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true, env = "MCCHAN_THREADS", value_name = "N")]
    pub threads: Option<usize>,

    /// Override the transmitter diffusion coefficient D_tx (m²/s).
    #[arg(long, global = true, value_name = "M2_PER_S", allow_negative_numbers = true)]
    pub dtx: Option<f64>,

    #[command(flatten)]
    pub params: Params,
}

/// Run parameters. Each can also be given in the configuration file under
/// the same name with underscores; flags win.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Mobility scenario, e.g. no-flow-mobile-tx-fixed-rx. Inferred from
    /// D_tx, D_rx and v when absent.
    #[arg(long, global = true, value_name = "NAME")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<MobilityScenario>,

    /// Monte Carlo realizations (trajectories for `ber`).
    #[arg(long, global = true, value_name = "N")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub realizations: Option<usize>,

    /// Evaluation time for distributions; end of the time grid for `mean`
    /// and `outage` (s).
    #[arg(long, global = true, value_name = "S", allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,

    /// First ACF time (s).
    #[arg(long, global = true, value_name = "S", allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t1: Option<f64>,

    /// End of the ACF grid, or of the coherence search (s).
    #[arg(long, global = true, value_name = "S", allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t2_max: Option<f64>,

    /// Grid points (histogram bins for `simulate cdf`).
    #[arg(long, global = true, value_name = "N")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,

    /// Coherence threshold on the normalized ACF.
    #[arg(long, global = true, value_name = "F", allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,

    /// Outage threshold on the CIR.
    #[arg(long, global = true, value_name = "H", allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_min: Option<f64>,

    /// Outage probability target for the bits-before-outage figure.
    #[arg(long, global = true, value_name = "P", allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_target: Option<f64>,

    /// Restrict BER output to one detector.
    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,

    /// Per-realization CIR estimator of the particle simulator.
    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimator: Option<Estimator>,
}

impl Params {
    /// Field-wise `self`, falling back to `other`.
    pub fn or(self, other: Params) -> Params {
        Params {
            scenario: self.scenario.or(other.scenario),
            realizations: self.realizations.or(other.realizations),
            t: self.t.or(other.t),
            t1: self.t1.or(other.t1),
            t2_max: self.t2_max.or(other.t2_max),
            points: self.points.or(other.points),
            eta: self.eta.or(other.eta),
            h_min: self.h_min.or(other.h_min),
            p_target: self.p_target.or(other.p_target),
            mode: self.mode.or(other.mode),
            estimator: self.estimator.or(other.estimator),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Perfect,
    Outdated,
}

impl From<Mode> for DetectorMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Perfect => DetectorMode::PerfectCsi,
            Mode::Outdated => DetectorMode::OutdatedCsi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Count,
    Conditional,
}

impl From<Estimator> for HEstimator {
    fn from(e: Estimator) -> Self {
        match e {
            Estimator::Count => HEstimator::Count,
            Estimator::Conditional => HEstimator::Conditional,
        }
    }
}

/// What `simulate` estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    Mean,
    Acf,
    Cdf,
    Ber,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Mean CIR m(t) and received mean N_A m(t) on a time grid.
    Mean,
    /// ACF φ(t1, t2) and normalized ACF ρ(t1, t2) over t2.
    Acf,
    /// Coherence time: first t with ρ(0, t) < η.
    Coherence,
    /// CDF and PDF of h(t, τ_s) at time --t.
    Cdf,
    /// Same table as `cdf`.
    Pdf,
    /// Log-normal approximation of the CIR distribution at time --t.
    Lognormal,
    /// Outage probability Pr(h < h_min) over time.
    Outage,
    /// Expected per-bit error probability of both detectors.
    Ber,
    /// Particle-based estimates of mean, ACF, distribution or BER.
    Simulate {
        #[arg(value_enum, default_value_t = Quantity::Mean)]
        what: Quantity,
    },
    /// Peclet number with reference length |r0|/2.
    Peclet,
    /// Fast self-consistency suite; exits 1 on any failure.
    Validate,
    /// Re-runs the job recorded in a manifest.
    #[serde(skip)]
    Rerun {
        #[arg(value_name = "MANIFEST")]
        manifest: PathBuf,
    },
}
