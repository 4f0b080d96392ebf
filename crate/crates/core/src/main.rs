use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use trigzeros::cli::{load_config, run_experiment, ExperimentKind, ExperimentReport, Overrides};

#[derive(Parser)]
#[command(name = "trigzeros", version, about = "Zeros of random trigonometric polynomials with dependent coefficients")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args)]
struct Global {
    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, replacing the config value.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, replacing the config value.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to every core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Replicate count, replacing the config value.
    #[arg(long, global = true)]
    reps: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Expected zero density against Kac-Rice or the universal limit.
    ExpectZeros,
    /// Kolmogorov distance of the normalized local field.
    Clt,
    /// Small-ball frequencies of the local field.
    SmallBall,
    /// Total-variation bounds for truncated Gaussian covariances.
    TvBound,
    /// Spectral density and Hermite expansion tables.
    Spectral,
    /// Zero intensity of the sinc-kernel limit process.
    SincOracle,
    /// Print the verdicts of a written report.
    Report {
        /// Path to `report.json` or the directory holding it.
        path: PathBuf,
    },
}

fn kind(c: &Command) -> Option<ExperimentKind> {
    Some(match c {
        Command::ExpectZeros => ExperimentKind::ExpectZeros,
        Command::Clt => ExperimentKind::Clt,
        Command::SmallBall => ExperimentKind::SmallBall,
        Command::TvBound => ExperimentKind::TvBound,
        Command::Spectral => ExperimentKind::Spectral,
        Command::SincOracle => ExperimentKind::SincOracle,
        Command::Report { .. } => return None,
    })
}

fn run(cli: Cli) -> trigzeros::Result<bool> {
    if let Some(t) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| trigzeros::Error::Argument(e.to_string()))?;
    }
    let report = match (&cli.command, kind(&cli.command)) {
        (Command::Report { path }, _) => {
            let file = if path.is_dir() { path.join("report.json") } else { path.clone() };
            ExperimentReport::read(&file)?
        }
        (_, Some(kind)) => {
            let config = cli.global.config.as_ref().ok_or_else(|| trigzeros::Error::Config {
                path: ".".into(),
                message: "--config is required".into(),
            })?;
            let overrides = Overrides {
                kind: Some(kind),
                seed: cli.global.seed,
                out: cli.global.out.clone(),
                reps: cli.global.reps,
            };
            run_experiment(&load_config(config, &overrides)?)?
        }
        _ => unreachable!(),
    };
    print!("{}", report.summary());
    Ok(report.passed())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
