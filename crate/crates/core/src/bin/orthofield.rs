use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use orthofield::cli::{self, OutputFormat, RunConfig};
use orthofield::{Error, Rectangle, Result};

#[derive(Parser)]
#[command(name = "orthofield", version, about = "Ortho-martingale approximation of lattice random fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the approximation criteria along the ladder.
    Check(Common),
    /// Simulate the CLT and the approximation error.
    Clt(Common),
    /// Cross-check the algebra by exhaustive enumeration.
    Oracle(Common),
    /// Print the candidate martingale difference.
    ConstructD(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// csv or structured
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated rectangles, e.g. 2x2,4x4
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut config = RunConfig::load(&common.config)?;
    if let Some(f) = &common.format {
        config.format = f.parse::<OutputFormat>()?;
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(grid) = &common.grid {
        config.ladder = grid
            .split(',')
            .map(|g| Rectangle::parse_label(g.trim()))
            .collect::<Result<_>>()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    if let Some(out) = &common.output {
        config.output = Some(out.clone());
    }
    config.validate()?;
    Ok(config)
}

fn emit(config: &RunConfig, rendered: &str) {
    if config.output.is_none() {
        print!("{rendered}");
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Check(c) => {
            let config = load(&c)?;
            emit(&config, &cli::run_check(&config)?.rendered);
        }
        Command::Clt(c) => {
            let config = load(&c)?;
            emit(&config, &cli::run_clt(&config, c.threads)?.rendered);
        }
        Command::Oracle(c) => {
            let config = load(&c)?;
            print!("{}", cli::run_oracle(&config)?.render());
        }
        Command::ConstructD(c) => {
            let config = load(&c)?;
            emit(&config, &cli::construct_d(&config)?.rendered);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
