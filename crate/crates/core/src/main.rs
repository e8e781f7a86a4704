use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use lumpwave::cli::{self, ExperimentConfig, Scenario};

#[derive(Parser)]
#[command(name = "lumpwave", version, about = "Damped-wave experiments on a lumpy torus")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Quasimode residual sweep
    Quasimode(RunArgs),
    /// Damped spectrum near each k
    Spectrum(RunArgs),
    /// Per-mode decay and envelope, or the viscous circle with --overdamped
    Evolve {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        overdamped: bool,
    },
    /// Resolvent norm scans
    Resolvent(RunArgs),
    /// Oscillator propagator checks
    Egorov(RunArgs),
    /// Summarize the artifacts in a run directory
    Report {
        dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated, e.g. 50,100,200
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    k_list: Option<Vec<i64>>,
    /// Tolerance for the identity-type checks
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

fn configure(args: &RunArgs, scenario: Scenario) -> lumpwave::Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.scenario = scenario;
    if let Some(k) = &args.k_list {
        cfg.k_list = k.clone();
    }
    if let Some(t) = args.tol {
        cfg.tolerances.numeric = t;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let out = args.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("runs").join(format!("{scenario:?}").to_lowercase()));
    Ok((cfg, out))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, scenario) = match &cli.cmd {
        Cmd::Report { dir } => {
            return match cli::report(dir) {
                Ok(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(cli::exit_code(&e) as u8)
                }
            };
        }
        Cmd::Quasimode(a) => (a, Scenario::QuasimodeSweep),
        Cmd::Spectrum(a) => (a, Scenario::OracleSweep),
        Cmd::Evolve { run, overdamped } => (run, if *overdamped { Scenario::DecayOverdamped } else { Scenario::DecaySubexp }),
        Cmd::Resolvent(a) => (a, Scenario::ResolventScan),
        Cmd::Egorov(a) => (a, Scenario::EgorovSuite),
    };
    let result = configure(args, scenario).and_then(|(cfg, out)| cli::run(&cfg, &out).map(|m| (m, out)));
    match result {
        Ok((m, out)) => {
            for c in &m.checks {
                println!("{} {} = {:.6e} ({})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold);
            }
            println!("artifacts in {}", out.display());
            ExitCode::from(if m.pass { cli::EXIT_OK } else { cli::EXIT_CHECKS_FAILED } as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
