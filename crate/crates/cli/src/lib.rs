//! Command-line front end: data ingestion, run configuration, the `fit`,
//! `simulate` and `report` commands, and their output files.

pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;
pub mod output;
pub mod simulate;
pub mod traces;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use nbmix::Variant;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "nbmix", version, about = "Mixtures of Negative Binomial regressions for count data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a mixture by multi-chain MCMC.
    Fit(FitArgs),
    /// Draw a synthetic dataset and its ground truth.
    Simulate(SimulateArgs),
    /// Rebuild tables and plot data from a fit directory.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// TOML file with any of the settings below; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Name of the count column [default: y].
    #[arg(long)]
    pub outcome: Option<String>,
    /// Field separator; detected from the header when omitted.
    #[arg(long)]
    pub delimiter: Option<char>,
    #[arg(long, value_parser = parse_variant)]
    pub model: Option<Variant>,
    #[arg(long)]
    pub kmax: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sweeps of proposal adaptation, at most the burn-in.
    #[arg(long)]
    pub adapt: Option<usize>,
    #[arg(long)]
    pub target_accept: Option<f64>,
    /// Dirichlet concentration of the mixing weights.
    #[arg(long)]
    pub alpha0: Option<f64>,
    /// Normal prior mean of the coefficients.
    #[arg(long)]
    pub m0: Option<f64>,
    /// Normal prior standard deviation of the coefficients.
    #[arg(long)]
    pub s0: Option<f64>,
    /// Location of the log-normal precision prior.
    #[arg(long)]
    pub a0: Option<f64>,
    /// Scale of the log-normal precision prior.
    #[arg(long)]
    pub b0: Option<f64>,
    /// Beta prior on zero-inflation probabilities.
    #[arg(long)]
    pub pi_a: Option<f64>,
    #[arg(long)]
    pub pi_b: Option<f64>,
    /// Exit with status 5 when a tracked R-hat exceeds this.
    #[arg(long)]
    pub rhat_threshold: Option<f64>,
    /// Minimum posterior mean weight of an occupied component.
    #[arg(long)]
    pub occupancy: Option<f64>,
    /// Draws averaged for hard assignments and predictive pmfs.
    #[arg(long)]
    pub max_assignment_draws: Option<usize>,
    /// Categorical column and its reference level, NAME=LEVEL.
    #[arg(long, value_parser = ingest::parse_assignment)]
    pub categorical: Vec<(String, String)>,
    /// Allowed levels of a categorical column, NAME=a,b,c.
    #[arg(long, value_parser = ingest::parse_levels)]
    pub levels: Vec<(String, Vec<String>)>,
}

impl FitArgs {
    fn as_config(&self) -> RunConfig {
        RunConfig {
            input: self.input.clone(),
            out: self.out.clone(),
            outcome: self.outcome.clone(),
            delimiter: self.delimiter,
            model: self.model,
            kmax: self.kmax,
            iters: self.iters,
            burnin: self.burnin,
            thin: self.thin,
            chains: self.chains,
            seed: self.seed,
            adapt: self.adapt,
            target_accept: self.target_accept,
            alpha0: self.alpha0,
            m0: self.m0,
            s0: self.s0,
            a0: self.a0,
            b0: self.b0,
            pi_a: self.pi_a,
            pi_b: self.pi_b,
            rhat_threshold: self.rhat_threshold,
            occupancy: self.occupancy,
            max_assignment_draws: self.max_assignment_draws,
            categorical: self.categorical.iter().cloned().collect(),
            levels: self.levels.iter().cloned().collect(),
        }
    }

    pub fn plan(&self) -> CliResult<config::FitPlan> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        base.overlay(self.as_config()).resolve()
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON file with weights, coefficients, precisions and covariates.
    #[arg(long, conflicts_with = "demo", required_unless_present = "demo")]
    pub truth: Option<PathBuf>,
    /// Built-in three-component design.
    #[arg(long, value_parser = parse_variant)]
    pub demo: Option<Variant>,
    /// Number of rows [default: 7118].
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory written by `fit`.
    #[arg(long)]
    pub dir: PathBuf,
    /// Data file, if it moved since the fit.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output directory [default: DIR/report].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|_| format!("expected nb or zinb, got {s:?}"))
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit(args) => commands::fit(&args.plan()?).map(drop),
        Command::Simulate(args) => {
            let source = match (&args.truth, args.demo) {
                (Some(p), _) => commands::TruthSource::File(p.clone()),
                (None, Some(v)) => commands::TruthSource::Demo(v),
                (None, None) => return Err(CliError::Usage("--truth or --demo is required".into())),
            };
            commands::simulate(&source, args.n.map(|n| n as usize), args.seed, &args.out).map(drop)
        }
        Command::Report(args) => {
            commands::report(&args.dir, args.input.as_deref(), args.out.as_deref()).map(drop)
        }
    }
}
