use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use elastobie_cli::acceptance::{run_all, CRITERIA};
use elastobie_cli::experiments::{run_experiment, solve_single};
use elastobie_cli::{fit_rate, ExperimentConfig, ExperimentKind, Outcome, Table};

#[derive(Parser)]
#[command(name = "elastobie", version, about = "Lamé transmission solver and experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Nodes per boundary.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// One transmission solve; writes the boundary densities.
    Solve(Common),
    /// Elastic moment tensors of the reference inclusion.
    Emt(Common),
    /// Runs the sweep named in the config.
    Sweep(Common),
    /// Log-log rate fit of two columns of a sweep CSV.
    Fit {
        /// Sweep CSV to read.
        input: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        /// Fail unless the slope is at least this.
        #[arg(long)]
        min_slope: Option<f64>,
    },
    /// Runs the acceptance criteria.
    Check {
        /// Only these criteria (1-11); all when absent.
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
    },
}

fn load(common: &Common, default: ExperimentKind) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::defaults(default),
    };
    if common.n.is_some() {
        cfg.n = common.n;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if common.out.is_some() {
        cfg.out = common.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sink(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn report(outcome: &Outcome) -> bool {
    eprint!("{}", outcome.summary());
    outcome.passed()
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Solve(common) => {
            let cfg = load(&common, ExperimentKind::MuSweep)?;
            let outcome = solve_single(&cfg)?;
            outcome.table.write_csv(sink(cfg.out.as_deref())?)?;
            Ok(report(&outcome))
        }
        Command::Emt(common) => {
            let mut cfg = load(&common, ExperimentKind::Emt)?;
            cfg.experiment = ExperimentKind::Emt;
            let outcome = run_experiment(&cfg)?;
            let text = outcome.text.as_deref().unwrap_or_default();
            sink(cfg.out.as_deref())?.write_all(text.as_bytes())?;
            Ok(report(&outcome))
        }
        Command::Sweep(common) => {
            if common.config.is_none() {
                bail!("sweep needs --config naming the experiment");
            }
            let cfg = load(&common, ExperimentKind::MuSweep)?;
            let outcome = run_experiment(&cfg)?;
            match &outcome.text {
                Some(text) => sink(cfg.out.as_deref())?.write_all(text.as_bytes())?,
                None => outcome.table.write_csv(sink(cfg.out.as_deref())?)?,
            }
            Ok(report(&outcome))
        }
        Command::Fit { input, x, y, min_slope } => {
            let table = Table::read_csv(File::open(&input).with_context(|| format!("opening {}", input.display()))?)?;
            let fit = fit_rate(&table, &x, &y)?;
            println!("slope {:.16e}\nintercept {:.16e}", fit.slope, fit.intercept);
            Ok(min_slope.is_none_or(|m| fit.slope >= m))
        }
        Command::Check { only } => {
            let selected: Vec<usize> = if only.is_empty() { CRITERIA.to_vec() } else { only };
            let results = run_all(&selected, |line| println!("{line}"))?;
            Ok(results.iter().all(|r| r.pass))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
