use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use edgebid::scenarios::commands::{self, parse_seeds};
use edgebid::scenarios::oracle::{run_suite, Mutation};
use edgebid::scenarios::report::aggregate_dir;
use edgebid::scenarios::{Preset, ScenarioConfig};
use edgebid::Error;

#[derive(Parser)]
#[command(name = "edgebid", version, about = "Edge offloading auction simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML scenario file; the command's preset when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Inclusive range `A..B`.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fault {
    Payment,
    Gradient,
}

#[derive(Subcommand)]
enum Cmd {
    /// Offline training; writes checkpoints and training curves.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Deployment runs from trained checkpoints.
    Test {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Also write the auction audit log and the event trace.
        #[arg(long)]
        audit_log: bool,
    },
    /// Heterogeneous populations; writes per-bidder OFR per mix.
    Mix {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Grid over valuation and backoff scales and fixed preference weights.
    Sensitivity {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Brute-force and property oracles.
    Oracle {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Inject a fault to confirm the matching oracle fails.
        #[arg(long, value_enum)]
        mutate: Option<Fault>,
    },
    /// Rebuilds report.json from the metrics under a test output directory.
    Report {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn load_config(path: Option<&Path>, preset: Preset) -> Result<ScenarioConfig, Error> {
    match path {
        Some(p) => ScenarioConfig::load(p),
        None => Ok(ScenarioConfig::preset(preset)),
    }
}

fn seeds(c: &Common, cfg: &ScenarioConfig) -> Result<Vec<u64>, Error> {
    match (&c.seeds, c.seed) {
        (Some(s), _) => parse_seeds(s),
        (None, Some(s)) => Ok(vec![s]),
        (None, None) => Ok(vec![cfg.seed]),
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.cmd {
        Cmd::Train { common, epochs } => {
            let mut cfg = load_config(common.config.as_deref(), Preset::Train)?;
            if let Some(e) = epochs {
                cfg.epochs = e;
            }
            let seeds = seeds(&common, &cfg)?;
            for s in commands::train(&cfg, &seeds, &common.out)? {
                println!("{}", serde_json::to_string(&s)?);
            }
        }
        Cmd::Test {
            common,
            checkpoint,
            audit_log,
        } => {
            let cfg = load_config(common.config.as_deref(), Preset::Test)?;
            let seeds = seeds(&common, &cfg)?;
            let r = commands::test(&cfg, &seeds, checkpoint.as_deref(), &common.out, audit_log)?;
            println!("{}", serde_json::to_string_pretty(&r.aggregate)?);
        }
        Cmd::Mix { common, checkpoint } => {
            let cfg = load_config(common.config.as_deref(), Preset::Test)?;
            let seeds = seeds(&common, &cfg)?;
            let (_, reports) = commands::mix(&cfg, &seeds, checkpoint.as_deref(), &common.out)?;
            for r in reports {
                println!("{} {}", r.command, serde_json::to_string(&r.aggregate)?);
            }
        }
        Cmd::Sensitivity { common, checkpoint } => {
            let cfg = load_config(common.config.as_deref(), Preset::Test)?;
            let seeds = seeds(&common, &cfg)?;
            let rows = commands::sensitivity(&cfg, &seeds, checkpoint.as_deref(), &common.out)?;
            println!("{} grid rows written", rows.len());
        }
        Cmd::Oracle { seed, mutate } => {
            let m = match mutate {
                None => Mutation::None,
                Some(Fault::Payment) => Mutation::PaymentRule,
                Some(Fault::Gradient) => Mutation::Gradient,
            };
            let report = run_suite(seed, m);
            println!("{}", report.to_json());
            if !report.passed() {
                return Ok(ExitCode::from(2));
            }
        }
        Cmd::Report { config, input } => {
            let cfg = match config {
                Some(p) => ScenarioConfig::load(&p)?,
                None => ScenarioConfig::load(&input.join(commands::CONFIG_FILE))?,
            };
            let r = aggregate_dir("test", &cfg, &input)?;
            r.save(&input.join("report.json"))?;
            println!("{}", r.provenance());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
