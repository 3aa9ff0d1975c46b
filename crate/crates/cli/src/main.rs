//! `dse`: fit, merge, compare and cluster doubly self-exciting scoring models
//! from shot-level play-by-play files.

mod analyze;
mod error;
mod fit;
mod output;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dse_core::data::EntitySelector;
use dse_core::inference::McmcConfig;

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "dse",
    version,
    about = "Doubly self-exciting Poisson models for basketball scoring"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Input file: shot events, draws, or a truth file, depending on the command.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    #[arg(long, global = true, default_value = ".")]
    pub output_dir: PathBuf,
    /// Required by every stochastic command.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value_t = 4)]
    pub chains: usize,
    #[arg(long, global = true, default_value_t = 20_000)]
    pub iters: usize,
    #[arg(long, global = true, default_value_t = 10_000)]
    pub burnin: usize,
    #[arg(long, global = true, default_value_t = 2)]
    pub thin: usize,
    /// Fit the model without carryover terms (κ = η = 0).
    #[arg(long, global = true)]
    pub baseline: bool,
    /// Game blocks for the minute-level fit, 1-based and inclusive, e.g. `1-41,42-82`.
    #[arg(long, global = true)]
    pub partition: Option<String>,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    pub force: bool,
}

impl GlobalArgs {
    pub fn seed(&self, command: &str) -> CliResult<u64> {
        self.seed
            .ok_or_else(|| CliError::usage(format!("`{command}` is stochastic and needs an explicit --seed")))
    }

    pub fn input(&self, command: &str) -> CliResult<&PathBuf> {
        self.input
            .as_ref()
            .ok_or_else(|| CliError::usage(format!("`{command}` needs --input")))
    }

    pub fn mcmc(&self, seed: u64) -> CliResult<McmcConfig> {
        let cfg = McmcConfig {
            n_chains: self.chains,
            n_iterations: self.iters,
            burn_in: self.burnin,
            thin: self.thin,
            adaptation_window: self.burnin,
            ..McmcConfig::with_seed(seed)
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn model_label(&self) -> &'static str {
        if self.baseline {
            "baseline"
        } else {
            "dse"
        }
    }
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct EntityArgs {
    /// Team code, e.g. BOS.
    #[arg(long)]
    pub team: Option<String>,
    /// Player name as it appears in the input.
    #[arg(long)]
    pub player: Option<String>,
}

impl EntityArgs {
    pub fn selector(&self) -> EntitySelector {
        match (&self.team, &self.player) {
            (Some(t), _) => EntitySelector::Team(t.clone()),
            (None, Some(p)) => EntitySelector::Player(p.clone()),
            (None, None) => unreachable!("clap enforces one entity flag"),
        }
    }

    pub fn name(&self) -> &str {
        self.team.as_deref().or(self.player.as_deref()).unwrap_or_default()
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the game-level model and write draws, summaries and per-game rates.
    FitGame {
        #[command(flatten)]
        entity: EntityArgs,
    },
    /// Fit the minute-level model block by block and merge the blocks.
    FitMinute {
        #[command(flatten)]
        entity: EntityArgs,
        /// Per-game rate table from `fit-game`; defaults to the matching file in the output directory.
        #[arg(long, conflicts_with = "derive_offsets")]
        offsets: Option<PathBuf>,
        /// Run the game-level fit in-process to obtain the offsets.
        #[arg(long)]
        derive_offsets: bool,
    },
    /// Compare fits by WAIC. Each FIT is `[NAME=]PATH` to a log-likelihood or WAIC file.
    Waic {
        #[arg(required = true)]
        fits: Vec<String>,
    },
    /// Cluster entities by Wasserstein distance between posteriors of one parameter.
    Cluster {
        /// Draws files, one per entity.
        #[arg(required = true)]
        draws: Vec<PathBuf>,
        #[arg(long)]
        param: String,
        /// Comma-separated labels, one per draws file; defaults to file stems.
        #[arg(long, value_delimiter = ',')]
        labels: Option<Vec<String>>,
        /// Wasserstein order, 1 or 2.
        #[arg(long, default_value_t = 1)]
        order: u32,
    },
    /// Simulate a shot file from a truth file given with --input.
    Simulate,
    /// Posterior autocorrelation function of the fitted counts.
    Acf {
        #[arg(long, default_value_t = 10)]
        max_lag: u32,
        /// Carryover column; detected from the draws header when omitted.
        #[arg(long)]
        kappa: Option<String>,
        /// Excitation column; detected from the draws header when omitted.
        #[arg(long)]
        eta: Option<String>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let g = &cli.global;
    match cli.command {
        Command::FitGame { entity } => fit::fit_game(g, &entity),
        Command::FitMinute {
            entity,
            offsets,
            derive_offsets,
        } => fit::fit_minute(g, &entity, offsets.as_deref(), derive_offsets),
        Command::Waic { fits } => analyze::compare_fits(g, &fits),
        Command::Cluster {
            draws,
            param,
            labels,
            order,
        } => analyze::cluster(g, &draws, &param, labels, order),
        Command::Simulate => simulate::simulate(g),
        Command::Acf { max_lag, kappa, eta } => analyze::acf(g, max_lag, kappa, eta),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind as u8)
        }
    }
}
