use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ddrj::cli::{self, RunOptions, DEFAULT_FOLDS};
use ddrj::datagen::builtin_scenarios;
use ddrj::proposals::ProposalMode;

#[derive(Parser)]
#[command(name = "ddrj", version, about = "Bayesian variable selection for probit models by reversible-jump MCMC")]
struct Cli {
    /// Worker threads for chains and folds (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ChainArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = ["ddrj", "rj"])]
    mode: Option<String>,
}

impl ChainArgs {
    fn options(&self) -> ddrj::Result<RunOptions> {
        Ok(RunOptions {
            config: self.config.clone(),
            seed: self.seed,
            mode: self.mode.as_deref().map(str::parse::<ProposalMode>).transpose()?,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset from a built-in scenario name or a scenario TOML file.
    Simulate {
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the sampler on a dataset CSV.
    Fit {
        data: PathBuf,
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict new rows with the model average saved by `fit`.
    Predict {
        fit_dir: PathBuf,
        newdata: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stratified k-fold cross-validation.
    Crossval {
        data: PathBuf,
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long, default_value_t = DEFAULT_FOLDS)]
        folds: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// List the built-in scenarios.
    Scenarios,
}

fn run(cli: Cli) -> ddrj::Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| ddrj::Error::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Simulate { scenario, seed, out } => {
            cli::cmd_simulate(&scenario, seed, &out)?;
        }
        Command::Fit { data, chain, out } => {
            cli::cmd_fit(&data, &chain.options()?, &out)?;
        }
        Command::Predict { fit_dir, newdata, out } => {
            cli::cmd_predict(&fit_dir, &newdata, &out)?;
        }
        Command::Crossval { data, chain, folds, out } => {
            cli::cmd_crossval(&data, &chain.options()?, folds, &out)?;
        }
        Command::Scenarios => {
            for s in builtin_scenarios() {
                println!("{}\tn={}\tg={}\tm={}", s.name, s.n, s.g, s.m);
            }
        }
    }
    Ok(())
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
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
