use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qdiffract::scenario::{
    runs, verify, write_atomic, ConfigError, ConfigSource, Document, Format, Overrides, Scenario,
};

#[derive(Parser, Debug)]
#[command(name = "qdiffract", version, about = "Quantum Fraunhofer diffraction of multimode light")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML scenario file. Defaults apply to anything it leaves out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file. Standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Drop the incident-mode contribution from the pattern.
    #[arg(long, global = true)]
    decorrelate: bool,

    #[arg(long, global = true)]
    grid_nmax: Option<u32>,

    /// Per-mode Fock cutoff for `verify`.
    #[arg(long, global = true)]
    cutoff: Option<usize>,

    /// Tolerance for `verify`.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Mean photon number across detector modes.
    Pattern,
    /// Normalized number correlation against the input Fano factor.
    EtaScan,
    /// Correlation distance of diffracted thermal light.
    GammaScan,
    /// Idler-conditioned correlation for a down-converted pair.
    Ghost,
    /// Compare closed forms against the truncated Fock oracle.
    Verify,
}

enum Failure {
    Config(ConfigError),
    Verification,
    Other(anyhow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn load(cli: &Cli) -> Result<(Scenario, ConfigSource), ConfigError> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| ConfigError { line: None, message: format!("cannot read {}: {e}", path.display()) })?,
        None => String::new(),
    };
    let source = ConfigSource::new(text);
    let mut config = source.parse()?;
    Overrides {
        out: cli.out.clone(),
        format: cli.format,
        decorrelate: cli.decorrelate,
        grid_nmax: cli.grid_nmax,
        cutoff: cli.cutoff,
        tolerance: cli.tolerance,
    }
    .apply(&mut config);
    let scenario = Scenario::resolve(config, &source)?;
    Ok((scenario, source))
}

fn emit(scenario: &Scenario, doc: &Document) -> anyhow::Result<()> {
    let text = doc.render(scenario.config.output.format)?;
    match &scenario.config.output.path {
        Some(path) => write_atomic(path, &text),
        None => match std::io::stdout().lock().write_all(text.as_bytes()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
            _ => Ok(()),
        },
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let (scenario, source) = load(cli)?;
    let doc = match cli.command {
        Command::Pattern => runs::run_pattern(&scenario, &source)?,
        Command::EtaScan => runs::run_eta_scan(&scenario, &source)?,
        Command::GammaScan => runs::run_gamma_scan(&scenario, &source)?,
        Command::Ghost => runs::run_ghost(&scenario, &source)?,
        Command::Verify => {
            let report = verify::run_suite(&scenario);
            for check in report.checks.iter().filter(|c| !c.passed) {
                log::warn!("check {} failed: error {} > {} {}", check.name, check.error, check.tolerance, check.detail);
            }
            emit(&scenario, &verify::report_document(&scenario, &report))?;
            return if report.passed() { Ok(()) } else { Err(Failure::Verification) };
        }
    };
    emit(&scenario, &doc)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(Failure::Verification) => {
            eprintln!("verification failed");
            ExitCode::from(3)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
