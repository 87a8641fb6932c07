//! `sip`: experiment runner for the symmetric inclusion process toolkit.
//!
//! Exit codes: 0 success, 1 invalid input (flags, config, parameters),
//! 2 runtime abort (window edge, event cap, solver failure, I/O).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::Value;

use commands::{
    CheckBalance, CheckDuality, CouplingScaling, Ctx, Experiment, HydroLep, NesFactorization, NesProfile, Oracle,
    Simulate, ZChain,
};
use config::{CliResult, FileSettings};

#[derive(Parser)]
#[command(
    name = "sip",
    version,
    about = "Exact checks and Monte Carlo experiments for the symmetric inclusion process"
)]
struct Cli {
    /// TOML or JSON file with the command's parameters; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; falls back to the config file, then $SIP_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// CSV output path; a JSON mirror is written next to it.
    /// Default: `<command>.csv` in the working directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// No progress messages on standard error.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exhaustive duality residual on a ring or boundary-driven segment.
    CheckDuality(CheckDuality),
    /// Detailed balance and moment identity of the product measures.
    CheckBalance(CheckBalance),
    /// One trajectory; writes the event list.
    Simulate(Simulate),
    /// Discrepancy and collision times of the coupling against T.
    CouplingScaling(CouplingScaling),
    /// Occupation of ±1 and the additive functional of the relative chain.
    ZChain(ZChain),
    /// Propagation of local equilibrium under diffusive scaling.
    HydroLep(HydroLep),
    /// Steady-state density profile of the boundary-driven process.
    NesProfile(NesProfile),
    /// Factorization of dual absorption probabilities.
    NesFactorization(NesFactorization),
    /// Exact reference values.
    Oracle(Oracle),
}

fn execute<E: Experiment>(flags: &E, cli: &Cli) -> CliResult<()> {
    let file = match &cli.config {
        Some(path) => config::load(path, E::NAME)?,
        None => FileSettings::default(),
    };
    let params = config::merge(flags, file.params)?.resolve()?;
    let seed = cli.seed.or(file.seed).unwrap_or_else(sip_core::stats::default_seed);
    let ctx = Ctx {
        seed,
        threads: cli.threads.or(file.threads).unwrap_or(0),
        quiet: cli.quiet,
    };
    let out = cli
        .out
        .clone()
        .or(file.output)
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", E::NAME)));

    let mut echo = serde_json::Map::new();
    echo.insert("command".into(), Value::String(E::NAME.into()));
    if E::SEEDED {
        echo.insert("seed".into(), seed.into());
    }
    if let Value::Object(p) = serde_json::to_value(&params).expect("parameters serialize") {
        echo.extend(p.into_iter().filter(|(_, v)| !v.is_null()));
    }

    let started = Instant::now();
    let outcome = params.run(&ctx, Value::Object(echo))?;
    let json = outcome.report.write(&out, Some(started.elapsed().as_secs_f64()))?;
    for line in &outcome.summary {
        println!("{line}");
    }
    ctx_note(&ctx, &format!("wrote {} and {}", out.display(), json.display()));
    Ok(())
}

fn ctx_note(ctx: &Ctx, msg: &str) {
    if !ctx.quiet {
        eprintln!("sip: {msg}");
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::CheckDuality(a) => execute(a, &cli),
        Command::CheckBalance(a) => execute(a, &cli),
        Command::Simulate(a) => execute(a, &cli),
        Command::CouplingScaling(a) => execute(a, &cli),
        Command::ZChain(a) => execute(a, &cli),
        Command::HydroLep(a) => execute(a, &cli),
        Command::NesProfile(a) => execute(a, &cli),
        Command::NesFactorization(a) => execute(a, &cli),
        Command::Oracle(a) => execute(a, &cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sip: error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
