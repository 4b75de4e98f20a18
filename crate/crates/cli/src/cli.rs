use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Threshold entanglement and steering distillation of GHZ and W states.
#[derive(Parser, Debug)]
#[command(name = "qdistill", version, args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Distill a GHZ state.
    TedGhz(SpecArgs),
    /// Distill a W state.
    TedW(SpecArgs),
    /// Distill a GHZ steering assemblage.
    TsdGhz(SteeringArgs),
    /// Distill a W steering assemblage.
    SdW(SteeringArgs),
    /// Evaluate a parameter grid.
    Sweep(SweepArgs),
    /// Monte Carlo run of the N-copy protocol.
    Simulate(SimulateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::TedGhz(_) => "ted-ghz",
            Command::TedW(_) => "ted-w",
            Command::TsdGhz(_) => "tsd-ghz",
            Command::SdW(_) => "sd-w",
            Command::Sweep(_) => "sweep",
            Command::Simulate(_) => "simulate",
        }
    }

    pub fn output(&self) -> &OutputArgs {
        match self {
            Command::TedGhz(a) | Command::TedW(a) => &a.output,
            Command::TsdGhz(a) | Command::SdW(a) => &a.spec.output,
            Command::Sweep(a) => &a.output,
            Command::Simulate(a) => &a.spec.output,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Tsv,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Repr {
    Compact,
    Dense,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Ghz,
    W,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Gap,
    EqualTail,
    Success,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file; a `<out>.manifest` sidecar is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat `key = value` file with flag defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SpecArgs {
    /// Local dimension (GHZ); checked against the coefficient count.
    #[arg(long)]
    pub d: Option<usize>,
    /// Number of parties.
    #[arg(long)]
    pub p: Option<usize>,
    /// Number of participating parties.
    #[arg(long)]
    pub q: Option<usize>,
    /// Number of copies.
    #[arg(long)]
    pub n: usize,
    /// GHZ coefficients, comma separated, pivot first.
    #[arg(long)]
    pub alphas: Option<String>,
    /// W coefficients, comma separated, pivot last.
    #[arg(long)]
    pub betas: Option<String>,
    /// Index blocks per participant, `/` between blocks and `,` inside.
    #[arg(long)]
    pub partition: Option<String>,
    #[arg(long, value_enum, default_value_t = Repr::Compact)]
    pub representation: Repr,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct SteeringArgs {
    /// Number of uncharacterized parties.
    #[arg(long, default_value_t = 1)]
    pub s: usize,
    #[command(flatten)]
    pub spec: SpecArgs,
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = FamilyArg::Ghz)]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub spec: SpecArgs,
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    /// Named grid: fig2-ghz, fig2-w, s1, s2, s3.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Local dimensions, e.g. `2..10` or `3,5`.
    #[arg(long)]
    pub d: Option<String>,
    /// Party counts.
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long)]
    pub q: Option<usize>,
    /// Copy counts.
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub alpha0: Option<String>,
    #[arg(long)]
    pub gap: Option<String>,
    #[arg(long)]
    pub pu: Option<String>,
    #[arg(long)]
    pub beta: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}
