//! `rdsnet`: validate, estimate, model and simulate respondent-driven
//! sampling surveys.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::{
    ConfigFile, ErgmFitSection, EstimateSection, FitSection, GlobalSection, MixingSection, PowerSection,
    SimulateSection, TreesSection, ValidateSection,
};
use output::Format;

/// Environment variable naming the default output directory.
const OUT_DIR_ENV: &str = "RDSNET_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "rdsnet", version, about = "Network estimation for respondent-driven sampling surveys")]
struct Cli {
    /// TOML file with a [global] section and one section per subcommand
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: $RDSNET_OUT_DIR, else the current directory]
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads [default: available cores]
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More progress output
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Only errors
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a survey file for linkage and coding violations
    Validate(ValidateSection),
    /// RDS-II estimates of mean degree, whole sample and by subgroup
    Estimate(EstimateSection),
    /// Count-model family selection and stepwise regression for a degree
    Fit(FitSection),
    /// Isomorphism census and wave statistics of the recruitment trees
    Trees(TreesSection),
    /// Recruiter-by-recruitee mixing matrix for an attribute
    Mixing(MixingSection),
    /// Draw a population graph and simulate an RDS survey on it
    Simulate(SimulateSection),
    /// Fit ERGM coefficients to target statistics
    #[command(name = "ergm-fit")]
    ErgmFit(ErgmFitSection),
    /// Accuracy of RDS-II estimates across survey sizes on ERGM populations
    Power(PowerSection),
}

/// Exit status for a dataset that fails validation.
const EXIT_INVALID: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            if commands::is_validation_failure(&err) {
                ExitCode::from(EXIT_INVALID)
            } else {
                ExitCode::from(EXIT_RUNTIME)
            }
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let global = GlobalSection {
        out_dir: cli.out_dir,
        format: cli.format,
        threads: cli.threads,
        verbosity: if cli.quiet {
            Some(0)
        } else if cli.verbose > 0 {
            Some(1 + cli.verbose)
        } else {
            None
        },
    }
    .or(file.global.clone());
    let out_dir = global
        .out_dir
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    if let Some(threads) = global.threads {
        rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build_global()?;
    }
    let ctx = commands::Context {
        out_dir,
        format: global.format.unwrap_or_default(),
        verbosity: global.verbosity.unwrap_or(1),
    };
    match cli.command {
        Command::Validate(a) => commands::validate::run(&ctx, a.or(file.validate)),
        Command::Estimate(a) => commands::estimate::run(&ctx, a.or(file.estimate)),
        Command::Fit(a) => commands::fit::run(&ctx, a.or(file.fit)),
        Command::Trees(a) => commands::trees::run(&ctx, a.or(file.trees)),
        Command::Mixing(a) => commands::mixing::run(&ctx, a.or(file.mixing)),
        Command::Simulate(a) => commands::simulate::run(&ctx, a.or(file.simulate)),
        Command::ErgmFit(a) => commands::ergm::run_fit(&ctx, a.or(file.ergm_fit)),
        Command::Power(a) => commands::ergm::run_power(&ctx, a.or(file.power)),
    }
}
