//! `survimp`: run imputation benchmarks, summarize them, and impute CSV files.

mod impute;
mod report;
mod simulate;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use survimp::imputer::{method_names, core_method_names, preset, Scale, Variant};

/// Exit status for bad flags, configs and unreadable inputs.
pub const EXIT_USAGE: u8 = 2;
/// Exit status for data the methods cannot work with.
pub const EXIT_DATA: u8 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) => m,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

pub fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScaleArg {
    Desk,
    Full,
}

impl From<ScaleArg> for Scale {
    fn from(s: ScaleArg) -> Scale {
        match s {
            ScaleArg::Desk => Scale::Desk,
            ScaleArg::Full => Scale::Full,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Deterministic,
    Random,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Variant {
        match v {
            VariantArg::Deterministic => Variant::Deterministic,
            VariantArg::Random => Variant::Random,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "survimp", version, about = "Survey-weighted imputation benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario grid and write long-format results, a summary and a manifest.
    Simulate(simulate::Args),
    /// Rebuild summary tables and plot data from a results directory.
    Report(report::Args),
    /// Fill missing values of one column in a CSV file.
    Impute(impute::Args),
    /// List the named method presets.
    Methods {
        #[arg(long, value_enum, default_value = "desk")]
        scale: ScaleArg,
        /// Print full configurations as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Write one simulated population to CSV.
    Population {
        #[arg(long, default_value_t = 4000)]
        size: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Generate the high-dimensional load-curve population.
        #[arg(long)]
        high_dim: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

fn list_methods(scale: ScaleArg, json: bool) -> CliResult<()> {
    let core = core_method_names();
    let mut out = std::io::stdout().lock();
    for name in method_names() {
        let cfg = preset(name, scale.into()).map_err(usage)?;
        let line = if json {
            serde_json::to_string(&cfg).map_err(data)?
        } else {
            let tag = if core.contains(&name) { "" } else { "  (extra)" };
            format!("{name:<10} {}{tag}", cfg.spec.family())
        };
        if writeln!(out, "{line}").is_err() {
            // closed pipe, e.g. piped into `head`
            break;
        }
    }
    Ok(())
}

fn write_population(size: usize, seed: u64, high_dim: bool, out: &PathBuf) -> CliResult<()> {
    let mut rng = survimp::rng::seeded(seed);
    let pop = if high_dim {
        let cfg = survimp::popgen::HighDimConfig {
            n_units: size,
            ..Default::default()
        };
        survimp::popgen::generate_highdim_population(&cfg, &mut rng).map_err(usage)?
    } else {
        survimp::popgen::generate_population(size, &mut rng)
    };
    let file = std::fs::File::create(out).map_err(|e| usage(format!("{}: {e}", out.display())))?;
    pop.write_csv(std::io::BufWriter::new(file)).map_err(data)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Report(a) => report::run(a),
        Command::Impute(a) => impute::run(a),
        Command::Methods { scale, json } => list_methods(scale, json),
        Command::Population {
            size,
            seed,
            high_dim,
            out,
        } => write_population(size, seed, high_dim, &out),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
