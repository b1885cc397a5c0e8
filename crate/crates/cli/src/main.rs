//! `dg3pd`: decomposition, inpainting and filter analysis from the command line.
//!
//! Every subcommand takes `--config FILE` (flat `key = value` lines) and any
//! number of `--key value` overrides; a bare `--flag` means `true`.

mod commands;
mod config;
mod error;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "dg3pd", version, about = "Directional three-part decomposition and inpainting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Overrides {
    /// `--config FILE` and `--key value` pairs.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "ARGS")]
    args: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Split the input into u, v and eps.
    Decompose(Overrides),
    /// Decompose, restore the texture inside the mask and recombine.
    Inpaint(Overrides),
    /// Analytic filter spectra, unity report and empirical filters.
    AnalyzeFilters(Overrides),
    /// Score DG3PD, TVL2 and external results against the ground truth.
    Compare(Overrides),
    /// Histograms and QQ data of the decomposition components.
    Diagnostics(Overrides),
    /// Write the synthetic cartoon and stripe test scene.
    MakeScene(Overrides),
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("DG3PD_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::validation(format!("DG3PD_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::validation(format!("cannot size the thread pool: {e}")))
}

type Handler = fn(&RunConfig) -> Result<(), CliError>;

fn dispatch(command: Command) -> Result<(), CliError> {
    configure_threads()?;
    let (run, args): (Handler, Vec<String>) = match command {
        Command::Decompose(o) => (commands::decompose_cmd, o.args),
        Command::Inpaint(o) => (commands::inpaint_cmd, o.args),
        Command::AnalyzeFilters(o) => (commands::analyze_filters_cmd, o.args),
        Command::Compare(o) => (commands::compare_cmd, o.args),
        Command::Diagnostics(o) => (commands::diagnostics_cmd, o.args),
        Command::MakeScene(o) => (commands::make_scene_cmd, o.args),
    };
    run(&RunConfig::from_args(&args)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dg3pd: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
