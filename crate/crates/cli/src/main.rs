mod cli;
mod flat;
mod run;

use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;

use cli::{Cli, Command, FamilyArg};

/// Exit code for validation and protocol errors.
const EXIT_INVALID: u8 = 3;
/// Exit code for file system errors.
const EXIT_IO: u8 = 4;

fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args().collect();
    match execute(raw) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) if is_broken_pipe(&err) => ExitCode::SUCCESS,
        Err(err) => {
            let (category, code) = classify(&err);
            eprintln!("error[{category}]: {err:#}");
            ExitCode::from(code)
        }
    }
}

fn is_broken_pipe(err: &anyhow::Error) -> bool {
    let io_kind = |e: &std::io::Error| e.kind() == std::io::ErrorKind::BrokenPipe;
    err.chain().any(|c| match c.downcast_ref::<csv::Error>() {
        Some(e) => matches!(e.kind(), csv::ErrorKind::Io(io) if io_kind(io)),
        None => c.downcast_ref::<std::io::Error>().is_some_and(io_kind),
    })
}

fn classify(err: &anyhow::Error) -> (&'static str, u8) {
    if let Some(e) = err.downcast_ref::<qdistill::Error>() {
        return (e.category(), EXIT_INVALID);
    }
    if err.downcast_ref::<flat::ConfigError>().is_some() {
        return ("InvalidConfig", EXIT_INVALID);
    }
    if err
        .chain()
        .any(|c| c.downcast_ref::<std::io::Error>().is_some())
        || err.downcast_ref::<csv::Error>().is_some()
    {
        return ("Io", EXIT_IO);
    }
    ("Internal", 1)
}

fn execute(raw: Vec<String>) -> Result<()> {
    let args = flat::expand_args(raw)?;
    let cli = Cli::try_parse_from(&args).unwrap_or_else(|e| e.exit());
    let command = &cli.command;

    let mut seed = None;
    let table = match command {
        Command::TedGhz(a) => run::ted(&run::ghz_config(a)?)?,
        Command::TedW(a) => run::ted(&run::w_config(a)?)?,
        Command::TsdGhz(a) => run::tsd(a, FamilyArg::Ghz)?,
        Command::SdW(a) => run::tsd(a, FamilyArg::W)?,
        Command::Sweep(a) => run::sweep(a)?,
        Command::Simulate(a) => {
            let cfg = match a.family {
                FamilyArg::Ghz => run::ghz_config(&a.spec)?,
                FamilyArg::W => run::w_config(&a.spec)?,
            };
            seed = Some(a.seed);
            run::simulate(&cfg, a.trials, a.seed)?
        }
    };

    let output = command.output();
    run::emit(&table, output)?;
    if let Some(out) = &output.out {
        let flags = flat::effective_flags(&args[2..]);
        flat::write_manifest(out, command.name(), &flags, seed)?;
    }
    Ok(())
}
