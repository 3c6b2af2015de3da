mod commands;
mod config;
mod reproduce;
mod table;

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::error;

use reinsgame::analysis::Party;
use reinsgame::simulation::SimulationConfig;

use crate::commands::GateFailure;
use crate::config::{ConfigError, RunConfig};
use crate::table::Table;

/// Environment variable holding the default worker thread count.
const THREADS_VAR: &str = "REINSGAME_THREADS";

#[derive(Parser)]
#[command(name = "reinsgame", version, about = "Reinsurance pricing game between an insurer and a reinsurer")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(short, long, global = true, default_value = "configs/table1.toml")]
    config: PathBuf,
    /// Write the result table here instead of standard output.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    #[arg(short, long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads; defaults to $REINSGAME_THREADS, then to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum PartyArg {
    Insurer,
    Reinsurer,
}

#[derive(Clone, Copy, ValueEnum)]
enum What {
    HedgeError,
    Wealth,
    VerifyAll,
}

#[derive(Subcommand)]
enum Command {
    /// Equilibrium loading, amount, prices and initial portfolios.
    Equilibrium,
    /// One equilibrium per grid value of a parameter.
    Sensitivity {
        /// rra-insurer, rra-reinsurer, rate, horizon or guarantee.
        #[arg(long)]
        param: String,
        /// Comma-separated values or start:stop:count.
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        /// Reset the benchmark weight to the insurer's Merton fraction at every point.
        #[arg(long)]
        recompute_pi_cm: bool,
    },
    /// Wealth-equivalent utility change between two action combinations.
    Weuc {
        /// equilibrium | discount:<alpha> | buy:<theta>,<xi> | none | constant-mix:<w1>,<w2>
        #[arg(long)]
        reference: String,
        #[arg(long)]
        alternative: String,
        #[arg(long, value_enum)]
        party: PartyArg,
    },
    /// Reinsurer's loss probability at a discount, or the discount meeting a criterion.
    Lossprob {
        #[arg(long, conflicts_with = "solve", required_unless_present = "solve")]
        alpha: Option<String>,
        /// increase:<dq> | max:<p> | weuc-cap:<x>
        #[arg(long)]
        solve: Option<String>,
    },
    /// Monte Carlo runs.
    Simulate {
        #[arg(long, value_enum)]
        what: What,
        /// Path count; defaults to the config for verify-all and 10^4 otherwise.
        #[arg(long)]
        paths: Option<usize>,
        /// Rebalancing grids for hedge-error.
        #[arg(long, value_delimiter = ',', default_value = "64,256,1024")]
        resolutions: Vec<usize>,
    },
    /// Recompute the published base-case figures and compare.
    ReproducePaper,
}

fn emit(table: &Table, cli: &Cli) -> Result<()> {
    let mut out: Box<dyn Write> = match &cli.output {
        Some(p) => Box::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    };
    match cli.format {
        Format::Csv => table.write_csv(&mut out)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &table.to_json())?;
            writeln!(out)?;
        }
    }
    Ok(())
}

fn number(s: &str) -> Result<f64> {
    config::parse_number(s).map_err(anyhow::Error::msg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = RunConfig::load(&cli.config)?;
    let smoke = SimulationConfig::smoke(cfg.simulation.seed).n_paths;
    match &cli.command {
        Command::Equilibrium => emit(&commands::equilibrium(&cfg)?, cli),
        Command::Sensitivity { param, grid, recompute_pi_cm } => {
            let parameter = commands::parse_parameter(param)?;
            let grid = commands::parse_grid(grid)?;
            emit(&commands::sensitivity(&cfg, parameter, &grid, *recompute_pi_cm)?, cli)
        }
        Command::Weuc { reference, alternative, party } => {
            let party = match party {
                PartyArg::Insurer => Party::Insurer,
                PartyArg::Reinsurer => Party::Reinsurer,
            };
            emit(&commands::weuc_table(&cfg, reference, alternative, party)?, cli)
        }
        Command::Lossprob { alpha, solve } => {
            let alpha = alpha.as_deref().map(number).transpose()?;
            let solve = solve.as_deref().map(commands::parse_criterion).transpose()?;
            emit(&commands::lossprob(&cfg, alpha, solve)?, cli)
        }
        Command::Simulate { what, paths, resolutions } => match what {
            What::HedgeError => emit(&commands::hedge(&cfg, paths.unwrap_or(smoke), resolutions)?, cli),
            What::Wealth => emit(&commands::wealth(&cfg, paths.unwrap_or(smoke))?, cli),
            What::VerifyAll => {
                let n = paths.unwrap_or(cfg.simulation.n_paths);
                let sim =
                    SimulationConfig::new(n, cfg.simulation.steps, cfg.simulation.seed, cfg.simulation.antithetic)?;
                let (table, failure) = commands::verify(&cfg, &sim)?;
                emit(&table, cli)?;
                failure.map_or(Ok(()), |f| Err(f.into()))
            }
        },
        Command::ReproducePaper => {
            let (table, all) = reproduce::reproduce(&cfg.scenario)?;
            emit(&table, cli)?;
            if all {
                Ok(())
            } else {
                Err(GateFailure { worst: "published figures not all reproduced; see the pass column".into() }.into())
            }
        }
    }
}

/// 1 for bad input, 2 for numerical failure, 3 for failed verification.
fn exit_status(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<GateFailure>().is_some() {
        return 3;
    }
    if err.downcast_ref::<ConfigError>().is_some() {
        return 1;
    }
    match err.downcast_ref::<reinsgame::Error>() {
        Some(
            reinsgame::Error::Bracket { .. }
            | reinsgame::Error::NonFinite(_)
            | reinsgame::Error::RuleFailure { .. }
            | reinsgame::Error::NonPositiveWealth { .. }
            | reinsgame::Error::Infeasible(_),
        ) => 2,
        _ => 1,
    }
}

fn broken_pipe(err: &anyhow::Error) -> bool {
    err.chain().any(|c| {
        c.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe)
            || c.downcast_ref::<csv::Error>()
                .is_some_and(|e| matches!(e.kind(), csv::ErrorKind::Io(io) if io.kind() == io::ErrorKind::BrokenPipe))
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let threads = cli.threads.or_else(|| std::env::var(THREADS_VAR).ok().and_then(|v| v.parse().ok()));
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            error!("cannot size the thread pool: {e}");
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_status(&e))
        }
    }
}
