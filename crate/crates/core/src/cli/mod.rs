//! Command-line front end.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::Outcome;
pub use config::{Overrides, RunConfig};

use crate::error::{Error, Result};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "glcarleman", version, about = "Carleman-weight laboratory for the cubic complex Ginzburg-Landau equation")]
pub struct Cli {
    /// JSON configuration; every field has a default.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory that receives one sub-directory per run.
    #[arg(long, global = true, default_value = "runs")]
    pub out: PathBuf,
    /// Replaces every λ list in the config with this single value.
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Replaces every μ list in the config with this single value.
    #[arg(long, global = true)]
    pub mu: Option<f64>,
    /// Grid size used for both space and time.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Base seed for initial data and random test fields.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check the pointwise weighted identities on analytic fields.
    VerifyIdentity {
        /// Flip the sign of one right-hand side term (e.g. `b`).
        #[arg(long)]
        corrupt_term: Option<String>,
    },
    /// Integrate the equation from seeded data and report energy balance.
    Solve,
    /// Scan both sides of the Carleman inequalities over λ and μ.
    CarlemanScan,
    /// Conditional-stability perturbation experiments.
    Stability,
    /// Admissibility and derivative checks of the weight functions.
    CheckWeights,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::VerifyIdentity { .. } => "verify-identity",
            Command::Solve => "solve",
            Command::CarlemanScan => "carleman-scan",
            Command::Stability => "stability",
            Command::CheckWeights => "check-weights",
        }
    }
}

/// Loads the config, applies overrides and validates; errors here are
/// configuration errors.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides { lambda: cli.lambda, mu: cli.mu, grid: cli.grid, seed: cli.seed });
    cfg.validate()?;
    Ok(cfg)
}

pub fn execute(cli: &Cli, cfg: &RunConfig) -> Result<Outcome> {
    match &cli.command {
        Command::VerifyIdentity { corrupt_term } => commands::verify_identity(cfg, &cli.out, corrupt_term.as_deref()),
        Command::Solve => commands::solve_cmd(cfg, &cli.out),
        Command::CarlemanScan => commands::carleman_scan(cfg, &cli.out),
        Command::Stability => commands::stability_cmd(cfg, &cli.out),
        Command::CheckWeights => commands::check_weights(cfg, &cli.out),
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let cfg = match resolve_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return EXIT_CONFIG;
        }
    };
    match execute(&cli, &cfg) {
        Ok(o) => {
            let verdict = if o.pass { "PASS" } else { "FAIL" };
            println!("{} {verdict}: {} ({})", cli.command.name(), o.message, o.dir.display());
            if o.pass {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Err(e @ Error::InvalidArgument(_)) if matches!(cli.command, Command::VerifyIdentity { corrupt_term: Some(_) }) => {
            eprintln!("configuration error: {e}");
            EXIT_CONFIG
        }
        Err(e) => {
            eprintln!("{} failed: {e}", cli.command.name());
            EXIT_FAIL
        }
    }
}
