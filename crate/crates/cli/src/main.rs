mod config;
mod error;
mod io;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Config, ExperimentKind, Provenance};
use error::CliError;

#[derive(Parser)]
#[command(name = "lightshift", version, about = "Simulate and fit light-shifted two-level ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Quadrature nodes; overrides `quadrature.nodes`.
    #[arg(long)]
    nodes: Option<usize>,
    /// Random seed; overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Stroboscopic Rabi trace.
    Rabi(RunArgs),
    /// Ramsey fringe over a detuning scan.
    Ramsey(RunArgs),
    /// Spin-echo fringe over the readout time offset.
    Echo(RunArgs),
    /// Fit a damped cosine or the ensemble model to a trace.
    Fit(RunArgs),
    /// Fringe phase shift and contrast relative to a reference scan.
    FringeExtract(RunArgs),
    /// Run the experiment named by the config's `experiment` key.
    Run(RunArgs),
    /// Pointwise deviation between two traces on the same grid.
    Compare {
        trace_a: PathBuf,
        trace_b: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
}

fn run_experiment(args: &RunArgs, requested: Option<ExperimentKind>) -> Result<(), CliError> {
    let mut cfg = Config::load(&args.config)?;
    let kind = match (requested, cfg.experiment) {
        (Some(r), Some(c)) if r != c => {
            return Err(CliError::config(format!(
                "experiment = \"{c}\" in {} does not match subcommand `{r}`",
                args.config.display()
            )))
        }
        (Some(r), _) => r,
        (None, Some(c)) => c,
        (None, None) => return Err(CliError::config("missing key experiment")),
    };
    if let Some(dir) = &args.out {
        cfg.output.dir = std::path::absolute(dir).unwrap_or_else(|_| dir.clone());
    }
    if let Some(n) = args.nodes {
        cfg.quadrature.nodes = n;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.experiment = Some(kind);
    cfg.provenance = Some(Provenance {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: kind,
    });

    log::info!("running {kind} with {} quadrature nodes", cfg.quadrature.nodes);
    let outputs = run::execute(&cfg, kind)?;
    let manifest = cfg.to_toml()?;
    let dir = cfg.output.dir.clone();
    for (name, bytes) in outputs {
        let path = io::write_atomic(&dir, name, &bytes)?;
        println!("{}", path.display());
    }
    let path = io::write_atomic(&dir, "manifest.toml", manifest.as_bytes())?;
    println!("{}", path.display());
    Ok(())
}

fn compare(a: &Path, b: &Path, tolerance: f64) -> Result<(), CliError> {
    let dev = io::compare(&io::Table::read(a)?, &io::Table::read(b)?)?;
    println!("samples = {}", dev.samples);
    println!("max_abs_deviation = {:e}", dev.max_abs);
    println!("rms_deviation = {:e}", dev.rms);
    if dev.max_abs > tolerance {
        return Err(CliError::Tolerance(format!(
            "max deviation {:e} exceeds tolerance {tolerance:e}",
            dev.max_abs
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Rabi(a) => run_experiment(a, Some(ExperimentKind::Rabi)),
        Command::Ramsey(a) => run_experiment(a, Some(ExperimentKind::Ramsey)),
        Command::Echo(a) => run_experiment(a, Some(ExperimentKind::Echo)),
        Command::Fit(a) => run_experiment(a, Some(ExperimentKind::Fit)),
        Command::FringeExtract(a) => run_experiment(a, Some(ExperimentKind::FringeExtract)),
        Command::Run(a) => run_experiment(a, None),
        Command::Compare {
            trace_a,
            trace_b,
            tolerance,
        } => compare(trace_a, trace_b, *tolerance),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
