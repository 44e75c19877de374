use std::path::{Path, PathBuf};

use ccdsim_core::accountant::compose_all;
use ccdsim_core::data::SyntheticConfig;
use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::{RunConfig, SweepConfig};
use crate::dataset::dataset_csv;
use crate::error::{CliError, Result};
use crate::format::{create_dir, write_json, SCHEMA_VERSION};
use crate::runner::{run, BudgetsJson};
use crate::sweep::{report, sweep};

#[derive(Debug, Parser)]
#[command(name = "ccdsim", version, about = "Differentially private federated attack-detection simulator")]
pub struct Cli {
    /// Worker threads for cluster training (speed only, never results).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic train/test CSVs and a manifest.
    GenData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Training rows per class.
        #[arg(long, default_value_t = 29_400)]
        per_class: usize,
        /// Test rows per class [default: 3/7 of --per-class].
        #[arg(long)]
        test_per_class: Option<usize>,
        #[arg(long, default_value_t = 3.0)]
        separation: f64,
    },
    /// Train one configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `federation.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train every cell of a sweep grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `federation.seed` (the first repetition's seed).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print composed privacy budgets as JSON.
    Accountant {
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 1e-5)]
        delta: f64,
        #[arg(long, default_value_t = 3)]
        clusters: usize,
        #[arg(long, default_value_t = 1000)]
        rounds: usize,
        #[arg(long, default_value_t = 1e-5)]
        delta_slack: f64,
        /// Also write the JSON to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate a sweep CSV over seeds.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Serialize)]
struct GenDataConfig {
    seed: u64,
    per_class: usize,
    test_per_class: usize,
    class_separation: f64,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    config: &'a GenDataConfig,
    train_rows: usize,
    test_rows: usize,
    train_class_counts: Vec<usize>,
    test_class_counts: Vec<usize>,
}

fn gen_data(out: &Path, cfg: GenDataConfig) -> Result<()> {
    if cfg.per_class == 0 {
        return Err(CliError::config("per-class", "must be at least 1"));
    }
    if cfg.test_per_class == 0 {
        return Err(CliError::config("test-per-class", "must be at least 1"));
    }
    let (train, test) = SyntheticConfig {
        n_train: 5 * cfg.per_class,
        n_test: 5 * cfg.test_per_class,
        class_separation: cfg.class_separation,
        seed: cfg.seed,
    }
    .generate()
    .map_err(|e| match e {
        ccdsim_core::Error::InvalidParameter { name, reason } => CliError::config(name, reason),
        e => e.into(),
    })?;
    create_dir(out)?;
    dataset_csv(&train, &cfg).write(&out.join("train.csv"))?;
    dataset_csv(&test, &cfg).write(&out.join("test.csv"))?;
    write_json(
        &out.join("manifest.json"),
        &Manifest {
            schema_version: SCHEMA_VERSION,
            config: &cfg,
            train_rows: train.len(),
            test_rows: test.len(),
            train_class_counts: train.class_counts(),
            test_class_counts: test.class_counts(),
        },
    )
}

#[derive(Debug, Serialize)]
struct AccountantConfig {
    epsilon: f64,
    delta: f64,
    clusters: usize,
    rounds: usize,
    delta_slack: f64,
}

#[derive(Debug, Serialize)]
struct AccountantJson {
    schema_version: u32,
    config: AccountantConfig,
    #[serde(flatten)]
    budgets: BudgetsJson,
}

fn accountant(cfg: AccountantConfig, out: Option<&Path>) -> Result<()> {
    let report = compose_all(cfg.epsilon, cfg.delta, cfg.clusters, cfg.rounds, cfg.delta_slack).map_err(|e| match e {
        ccdsim_core::Error::InvalidParameter { name, reason } => CliError::config(name, reason),
        e => e.into(),
    })?;
    let advanced = report.advanced.clone();
    let json = AccountantJson {
        schema_version: SCHEMA_VERSION,
        config: cfg,
        budgets: (&report).into(),
    };
    println!("{}", serde_json::to_string_pretty(&json).expect("serializable"));
    if let Some(path) = out {
        write_json(path, &json)?;
    }
    advanced.map(|_| ()).map_err(CliError::from)
}

pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData {
            out,
            seed,
            per_class,
            test_per_class,
            separation,
        } => gen_data(
            &out,
            GenDataConfig {
                seed,
                per_class,
                test_per_class: test_per_class.unwrap_or_else(|| ((per_class * 3) as f64 / 7.0).round().max(1.0) as usize),
                class_separation: separation,
            },
        ),
        Command::Run { config, out, seed } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.federation.seed = s;
            }
            let r = run(&cfg, &out, cli.threads)?;
            println!(
                "tail accuracy {:.4}  precision {:.4}  recall {:.4}  ({} rounds, {:.0} ms)",
                r.tail.accuracy, r.tail.precision, r.tail.recall, r.config.max_rounds, r.total_elapsed_ms
            );
            Ok(())
        }
        Command::Sweep { config, out, seed } => {
            let mut cfg = SweepConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.federation.seed = s;
            }
            let results = sweep(&cfg, &out, cli.threads)?;
            let failed = results.iter().filter(|r| r.outcome.is_err()).count();
            println!("{} runs, {failed} failed", results.len());
            Ok(())
        }
        Command::Accountant {
            epsilon,
            delta,
            clusters,
            rounds,
            delta_slack,
            out,
        } => accountant(
            AccountantConfig {
                epsilon,
                delta,
                clusters,
                rounds,
                delta_slack,
            },
            out.as_deref(),
        ),
        Command::Report { input, out } => report(&input, &out),
    }
}
