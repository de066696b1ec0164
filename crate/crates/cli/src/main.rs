use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gridres_cli::commands::{self, load_config};
use gridres_cli::config::{load_weight_cases, Overrides, RunConfig};
use gridres_cli::golden;
use gridres_cli::CliError;
use gridres_core::mcdm::reference_weight_cases;
use gridres_core::risk::DEFAULT_ALPHA;

#[derive(Debug, Parser)]
#[command(name = "gridres", version, about = "Distribution-grid resilience under wind events")]
struct Cli {
    /// Run configuration, or a run manifest from a previous run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the number of trials per scenario.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Override the CVaR confidence level.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write per-trial parameter values.
    #[arg(long, global = true)]
    raw: bool,
    /// Worker threads for trial evaluation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log more (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte-Carlo trials for every mode and scenario.
    Simulate,
    /// CVaR table from a scenario-stats file.
    Risk {
        #[arg(long)]
        stats: PathBuf,
    },
    /// Shapley and score tables from a CVaR table.
    Score {
        #[arg(long)]
        cvar: PathBuf,
        /// JSON array of {name, densities}; defaults to the config's cases.
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// simulate, risk and score in one run, plus the manifest.
    Full,
    /// Check the bundled weight cases against the published Shapley indices.
    Verify,
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            trials: self.trials,
            alpha: self.alpha,
            out: self.out.clone(),
            raw: self.raw,
        }
    }

    fn require_config(&self) -> Result<RunConfig, CliError> {
        let path = self
            .config
            .as_deref()
            .ok_or_else(|| CliError::Config("--config is required for this command".into()))?;
        self.config_at(path)
    }

    fn config_at(&self, path: &Path) -> Result<RunConfig, CliError> {
        let mut cfg = load_config(path)?;
        cfg.apply(&self.overrides())?;
        Ok(cfg)
    }

    fn optional_config(&self) -> Result<Option<RunConfig>, CliError> {
        self.config.as_deref().map(|p| self.config_at(p)).transpose()
    }

    fn out_dir(&self, cfg: Option<&RunConfig>) -> PathBuf {
        match (&self.out, cfg) {
            (Some(out), _) => out.clone(),
            (None, Some(cfg)) => cfg.output_dir(),
            (None, None) => PathBuf::from("gridres-out"),
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate => {
            let path = commands::cmd_simulate(&cli.require_config()?)?;
            println!("{}", path.display());
        }
        Command::Risk { stats } => {
            let cfg = cli.optional_config()?;
            let alpha = cli.alpha.or(cfg.as_ref().map(|c| c.alpha)).unwrap_or(DEFAULT_ALPHA);
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(CliError::Config(format!("alpha must lie in (0, 1), got {alpha}")));
            }
            let path = commands::cmd_risk(stats, alpha, &cli.out_dir(cfg.as_ref()))?;
            println!("{}", path.display());
        }
        Command::Score { cvar, weights } => {
            let cfg = cli.optional_config()?;
            let cases = match (weights, &cfg) {
                (Some(w), _) => load_weight_cases(w)?,
                (None, Some(cfg)) => cfg.resolved_weight_cases()?,
                (None, None) => reference_weight_cases(),
            };
            let path = commands::cmd_score(cvar, &cases, &cli.out_dir(cfg.as_ref()))?;
            println!("{}", path.display());
        }
        Command::Full => {
            let cfg = cli.require_config()?;
            commands::cmd_full(&cfg)?;
            println!("{}", cfg.output_dir().display());
        }
        Command::Verify => golden::cmd_verify(&mut std::io::stdout().lock())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
