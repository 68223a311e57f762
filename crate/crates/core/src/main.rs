use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use optexec::ddql::{FeatureMode, Policy};
use optexec::harness::{
    self, evaluate_policy, export, run_benchmark, run_experiment_with, table_scenarios,
    ExperimentConfig, Profile, Strategy, StrategyColumn,
};

#[derive(Parser)]
#[command(name = "optexec", version, about = "Optimal-execution lab with a DDQL liquidation agent")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct Common {
    /// Experiment config file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "full", value_parser = parse_profile)]
    profile: Profile,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent; writes the checkpoint, training log and evaluation report.
    Train {
        #[command(flatten)]
        common: Common,
        /// Scenario when no config file is given.
        #[arg(long)]
        scenario: Option<String>,
        /// Feature set when no config file is given (qt or qts).
        #[arg(long)]
        features: Option<String>,
    },
    /// Evaluate a saved checkpoint against the config's benchmarks.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Simulate a benchmark strategy and write its per-episode shortfall.
    Benchmark {
        #[command(flatten)]
        common: Common,
        /// twap, qp or barger-lorig.
        #[arg(long)]
        strategy: String,
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Write heatmap CSVs for a saved checkpoint.
    ExportPolicy {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full recipe behind one cost table (table2, table4, table6, table8, table9, table10).
    Reproduce {
        table: String,
        #[command(flatten)]
        common: Common,
        /// Feature sets to train (qt, qts or both).
        #[arg(long, default_value = "both")]
        features: String,
    },
}

fn parse_profile(s: &str) -> std::result::Result<Profile, String> {
    s.parse().map_err(|e: optexec::Error| e.to_string())
}

fn load_config(
    common: &Common,
    scenario: Option<&str>,
    features: Option<&str>,
) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path, common.profile)
            .with_context(|| format!("reading config {}", path.display()))?,
        None => {
            let Some(name) = scenario else {
                bail!("either --config or --scenario is required");
            };
            let mode: FeatureMode = features.unwrap_or("qts").parse()?;
            ExperimentConfig::new(name.parse()?, mode, 0, common.profile)
        }
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("runs/{}-{}-{}", cfg.scenario, cfg.mode, cfg.seed)))
}

fn train(mut cfg: ExperimentConfig) -> Result<()> {
    let dir = out_dir(&cfg);
    cfg.out_dir = Some(dir.clone());
    let every = (cfg.train_episodes / 10).max(1);
    let run = run_experiment_with(&cfg, |e| {
        if (e.episode + 1) % every == 0 {
            eprintln!(
                "episode {:>6}  epsilon {:.4}  IS {:.5}",
                e.episode + 1,
                e.epsilon,
                e.shortfall
            );
        }
    })?;
    print!("{}", run.report.render());
    println!("artifacts in {}", dir.display());
    Ok(())
}

fn evaluate(cfg: ExperimentConfig, checkpoint: &Path) -> Result<()> {
    let policy = Policy::load(checkpoint)
        .with_context(|| format!("loading checkpoint {}", checkpoint.display()))?;
    let report = evaluate_policy(&cfg, &policy)?;
    let dir = out_dir(&cfg);
    std::fs::create_dir_all(&dir)?;
    export::write_report(&dir, &cfg, &report, &policy)?;
    print!("{}", report.render());
    Ok(())
}

fn benchmark(cfg: ExperimentConfig, strategy: &str) -> Result<()> {
    let strategy: Strategy = strategy.parse()?;
    let test = cfg.test_scenario()?;
    let col = StrategyColumn::new(
        strategy.name(),
        run_benchmark(&strategy, &test, cfg.test_episodes, cfg.seed)?,
    )?;
    let dir = out_dir(&cfg);
    std::fs::create_dir_all(&dir)?;
    let path = dir.join(format!("{}_shortfall.csv", strategy.name()));
    export::write_strategy(&path, &col)?;
    println!(
        "{} on {}: E[IS] = {:.5}, std = {:.5} over {} episodes -> {}",
        strategy.name(),
        cfg.scenario,
        col.is_summary.mean,
        col.is_summary.std,
        col.is_summary.count,
        path.display()
    );
    Ok(())
}

fn reproduce(table: &str, common: &Common, features: &str) -> Result<()> {
    let Some(kinds) = table_scenarios(table) else {
        bail!("unknown table '{table}' (expected one of {})", harness::TABLES.join(", "));
    };
    let modes: Vec<FeatureMode> = match features {
        "both" => vec![FeatureMode::Qt, FeatureMode::Qts],
        other => vec![other.parse()?],
    };
    let base_out = common.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(table));
    for &kind in kinds {
        for &mode in &modes {
            let mut cfg = match &common.config {
                Some(path) => {
                    let mut c = ExperimentConfig::load(path, common.profile)?;
                    c.scenario = kind;
                    c.mode = mode;
                    c.apply_profile(common.profile);
                    c
                }
                None => ExperimentConfig::new(kind, mode, 0, common.profile),
            };
            if let Some(seed) = common.seed {
                cfg.seed = seed;
            }
            cfg.out_dir = Some(base_out.join(format!("{}-{}", kind, mode.as_str().to_ascii_lowercase())));
            cfg.validate()?;
            eprintln!("training {kind} with {mode} features");
            train(cfg)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            common,
            scenario,
            features,
        } => train(load_config(&common, scenario.as_deref(), features.as_deref())?),
        Command::Evaluate {
            common,
            checkpoint,
            scenario,
        } => {
            let mode = Policy::load(&checkpoint)?.mode().as_str().to_ascii_lowercase();
            let cfg = load_config(&common, scenario.as_deref(), Some(&mode))?;
            evaluate(cfg, &checkpoint)
        }
        Command::Benchmark {
            common,
            strategy,
            scenario,
        } => benchmark(load_config(&common, scenario.as_deref(), None)?, &strategy),
        Command::ExportPolicy { checkpoint, out } => {
            let policy = Policy::load(&checkpoint)?;
            export::export_policy(&out, &policy)?;
            println!("heatmap written to {}", out.join("heatmap.csv").display());
            Ok(())
        }
        Command::Reproduce {
            table,
            common,
            features,
        } => reproduce(&table, &common, &features),
    }
}

fn main() {
    if let Err(err) = run(Cli::parse()) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
