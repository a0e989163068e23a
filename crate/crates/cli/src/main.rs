//! `bergman-lab`: runs one named experiment from a flat config file and
//! writes `run.json` plus the experiment's CSV tables.
//!
//! Exit codes: 0 success, 2 configuration error, 3 geometry error,
//! 4 numerical failure, 1 I/O failure while writing results. The only
//! environment variable read is `BERGMAN_LAB_THREADS`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bergman_core::experiment::{run, ExperimentConfig, ExperimentKind, RunOutput};
use bergman_core::Error;
use clap::Parser;

const THREADS_VAR: &str = "BERGMAN_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "bergman-lab", version, about = "Hankel-operator and dbar experiments on model domains")]
struct Cli {
    /// localize, prop1, analytic_disc, extend, hormander or certify
    #[arg(value_parser = parse_kind)]
    experiment: ExperimentKind,
    /// Flat `key = value` config file
    #[arg(long)]
    config: PathBuf,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config's resolution
    #[arg(long)]
    resolution: Option<u32>,
    /// Suppress the summary on stdout
    #[arg(long)]
    quiet: bool,
}

fn parse_kind(s: &str) -> Result<ExperimentKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

enum Failure {
    Run(Error),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Run(e) => e.exit_code() as u8,
            Failure::Io(_) => 1,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidInput(format!("{THREADS_VAR} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Io(format!("thread pool: {e}")))
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(&cli.config)
        .map_err(|e| Error::InvalidInput(format!("cannot read config {}: {e}", cli.config.display())))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(n) = cli.resolution {
        cfg.set("resolution", &n.to_string())?;
    }
    Ok(cfg)
}

fn write_outputs(dir: &Path, output: &RunOutput) -> Result<Vec<PathBuf>, Failure> {
    let io = |path: &Path, e: std::io::Error| Failure::Io(format!("{}: {e}", path.display()));
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut written = Vec::new();
    let json_path = dir.join("run.json");
    let json = serde_json::to_string_pretty(&output.record).map_err(|e| Failure::Io(format!("run.json: {e}")))?;
    fs::write(&json_path, json + "\n").map_err(|e| io(&json_path, e))?;
    written.push(json_path);
    for table in &output.tables {
        let path = dir.join(&table.file_name);
        fs::write(&path, &table.content).map_err(|e| io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    configure_threads()?;
    let cfg = load_config(cli)?;
    let output = run(cli.experiment, &cfg)?;
    let written = write_outputs(&cli.out, &output)?;
    if !cli.quiet {
        println!("{} finished in {:.2} s", cli.experiment, output.record.wall_clock_seconds);
        for path in written {
            println!("  wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Run(e) => eprintln!("error: {e}"),
                Failure::Io(msg) => eprintln!("error: {msg}"),
            }
            ExitCode::from(failure.code())
        }
    }
}
