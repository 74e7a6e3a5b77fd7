mod args;
mod commands;
mod config;
mod output;
mod validate;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;

use args::{Cli, Command, Params};
use commands::Job;
use config::{ConfigError, FileConfig};
use output::{manifest_path, sha256_hex, OutputFile, RunManifest};

const USAGE: u8 = 2;
const FAILURE: u8 = 1;

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.0)
    }
}

impl From<mcchan::Error> for Failure {
    fn from(e: mcchan::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}

/// Runs one command line and returns the process exit code: 0 on success,
/// 1 when a check fails or output cannot be written, 2 on a usage error.
fn run<I: IntoIterator<Item = OsString>>(argv: I) -> u8 {
    let argv: Vec<OsString> = argv.into_iter().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code() as u8;
        }
    };
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(cli, argv) {
        Ok(true) => 0,
        Ok(false) => FAILURE,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            FAILURE
        }
    }
}

/// Everything a job needs after flags, files and manifests are merged.
struct Resolved {
    command: Command,
    seed: u64,
    file: FileConfig,
}

fn resolve(cli: &Cli) -> Result<Resolved, Failure> {
    if let Command::Rerun { manifest } = &cli.command {
        let m = read_manifest(manifest)?;
        let file = config::from_value(m.config)?;
        return Ok(Resolved {
            command: m.job,
            seed: m.seed,
            file,
        });
    }
    let mut file = match &cli.global.config {
        Some(path) => config::load_config(path)?,
        None => FileConfig::default(),
    };
    if let Some(d) = cli.global.dtx {
        file.system.d_tx = d;
        file.system.validate()?;
    }
    file.params = cli.global.params.clone().or(file.params);
    Ok(Resolved {
        command: cli.command.clone(),
        seed: cli.global.seed,
        file,
    })
}

fn read_manifest(path: &Path) -> Result<RunManifest, Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: not a run manifest: {e}", path.display())))
}

fn execute(cli: Cli, argv: Vec<String>) -> Result<bool, Failure> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("starting the worker pool")?;
    }
    let r = resolve(&cli)?;
    let ch = config::channel(&r.file.system, r.file.params.scenario)?;
    let mut job = Job {
        ch: &ch,
        seed: r.seed,
        params: Params {
            scenario: Some(ch.scenario()),
            ..r.file.params.clone()
        },
    };
    let outcome = commands::run(&r.command, &mut job)?;
    for n in &outcome.notes {
        eprintln!("{n}");
    }
    let csv = outcome.table.to_csv();
    match &cli.global.out {
        Some(out) => {
            fs::write(out, &csv).with_context(|| format!("writing {}", out.display()))?;
            let manifest = RunManifest {
                tool: env!("CARGO_PKG_NAME").to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                timestamp: chrono::Utc::now().to_rfc3339(),
                argv,
                job: r.command,
                seed: r.seed,
                config: config::to_value(ch.config(), &job.params),
                outputs: vec![OutputFile {
                    path: out.clone(),
                    sha256: sha256_hex(&csv),
                }],
            };
            let side = manifest_path(out);
            let json = serde_json::to_string_pretty(&manifest).context("encoding the manifest")?;
            fs::write(&side, json + "\n").with_context(|| format!("writing {}", side.display()))?;
        }
        None => {
            std::io::stdout().write_all(&csv).context("writing to stdout")?;
        }
    }
    Ok(!outcome.failed)
}

