//! Command-line front end: tableau audits and Monte Carlo campaigns driven by a
//! TOML configuration with flag overrides.
//!
//! Exit codes: 0 success, 1 assertion failure, 2 configuration error,
//! 3 numerical failure.

pub mod commands;
pub mod config;
pub mod ladder;
pub mod plot;
pub mod selftest;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

/// Environment variable naming the default output directory.
pub const OUTPUT_ENV: &str = "SRK_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "srk", version, about = "Stochastic Runge-Kutta order audits and convergence campaigns")]
pub struct Cli {
    /// TOML configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default: $SRK_OUTPUT_DIR, then ./srk-out).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Skip SVG plots.
    #[arg(long, global = true)]
    pub no_plots: bool,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print order-condition residuals and η for a tableau.
    Audit(AuditArgs),
    /// Root-mean-square error orders.
    Strong(StrongArgs),
    /// Weak error orders.
    Weak(WeakArgs),
    /// Distance between the normalized error and its limit law.
    Dist(CampaignArgs),
    /// Mean-square error over time.
    Evolution(EvolutionArgs),
    /// Fast internal consistency checks.
    Selftest,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Catalog name (`trapezoid`, `midpoint`, `theta:<v>`, ...).
    #[arg(long, conflicts_with = "file")]
    pub builtin: Option<String>,
    /// Tableau file.
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Look the builtin up in the additive-noise catalog.
    #[arg(long)]
    pub additive: bool,
    /// Condition set that must hold for exit code 0: `strong1`, `weak2` or `none`.
    #[arg(long)]
    pub require: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct CampaignArgs {
    /// Builtin problem name.
    #[arg(long)]
    pub problem: Option<String>,
    /// Problem parameter override `name=value`; repeatable.
    #[arg(long = "param")]
    pub params: Vec<String>,
    /// Comma-separated method names.
    #[arg(long, alias = "method")]
    pub methods: Option<String>,
    /// Step ladder, e.g. `2^-4..2^-8` or `0.01`.
    #[arg(long)]
    pub h: Option<String>,
    /// Number of sample paths.
    #[arg(long = "M", alias = "paths")]
    pub paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Final time.
    #[arg(long = "T")]
    pub t_end: Option<f64>,
    /// Step of the reference solution.
    #[arg(long)]
    pub ref_h: Option<String>,
    /// Method of the reference solution.
    #[arg(long)]
    pub ref_method: Option<String>,
    /// Comma-separated test functions (`sin`, `sin3`, `exp(-x)`, `x`, `x2`, `const:<c>`).
    #[arg(long)]
    pub phi: Option<String>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub fp_tol: Option<f64>,
    #[arg(long)]
    pub fp_max_iter: Option<usize>,
    /// Fail (exit 1) if a fitted slope is below this value.
    #[arg(long)]
    pub slope_min: Option<f64>,
    /// Fail (exit 1) if a fitted slope is above this value.
    #[arg(long)]
    pub slope_max: Option<f64>,
    /// Fail (exit 1) unless distribution errors decrease with h.
    #[arg(long)]
    pub expect_monotone: bool,
}

#[derive(Debug, Args)]
pub struct StrongArgs {
    #[command(flatten)]
    pub campaign: CampaignArgs,
    /// Measure the gap to the appurtenant companion instead of the reference.
    #[arg(long)]
    pub two_chain: bool,
}

#[derive(Debug, Args)]
pub struct WeakArgs {
    #[command(flatten)]
    pub campaign: CampaignArgs,
    /// Use independent paths for the reference expectation.
    #[arg(long)]
    pub no_crn: bool,
}

#[derive(Debug, Args)]
pub struct EvolutionArgs {
    #[command(flatten)]
    pub campaign: CampaignArgs,
    /// Fail (exit 1) unless the terminal ordering follows η2.
    #[arg(long)]
    pub expect_ordering: bool,
}

/// Parses `args` (including the program name) and runs the command; returns
/// the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { commands::EXIT_CONFIG } else { 0 };
        }
    };
    commands::run(cli)
}
