//! Train, evaluate and benchmark one scenario end to end.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::benchmark::{run_benchmark, Strategy};
use super::config::{ExperimentConfig, ScenarioKind};
use super::export;
use super::stats::{paired_delta_pnl, Summary};
use crate::ddql::{evaluate, train_with, EpisodeLog, FeatureMode, Policy};
use crate::error::{invalid, Result};
use crate::market_sim::EpisodeOutcome;

/// Benchmarks reported for a scenario; the first one is the "theoretical" reference.
pub fn benchmarks_for(kind: ScenarioKind) -> Vec<Strategy> {
    match kind {
        ScenarioKind::Constant => vec![Strategy::Twap],
        ScenarioKind::StochasticLow | ScenarioKind::StochasticHigh => {
            vec![Strategy::BargerLorig, Strategy::Twap]
        }
        _ => vec![Strategy::Qp, Strategy::Twap],
    }
}

/// Test-phase results of one strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyColumn {
    pub name: String,
    pub outcomes: Vec<EpisodeOutcome>,
    pub shortfall: Vec<f64>,
    pub cash: Vec<f64>,
    pub is_summary: Summary,
}

impl StrategyColumn {
    pub fn new(name: &str, outcomes: Vec<EpisodeOutcome>) -> Result<Self> {
        let shortfall: Vec<f64> = outcomes.iter().map(|o| o.shortfall).collect();
        let cash = outcomes.iter().map(|o| o.cash).collect();
        Ok(Self {
            name: name.to_string(),
            is_summary: Summary::of(&shortfall)?,
            outcomes,
            shortfall,
            cash,
        })
    }

    /// Mean inventory before each step plus the final, always empty, holding (`N + 1` values).
    pub fn mean_holdings(&self) -> Vec<f64> {
        let n = self.outcomes.first().map_or(0, |o| o.states.len());
        let mut acc = vec![0.0; n + 1];
        for o in &self.outcomes {
            for (a, s) in acc.iter_mut().zip(&o.states) {
                *a += f64::from(s.q);
            }
        }
        let count = self.outcomes.len().max(1) as f64;
        acc.iter().map(|a| a / count).collect()
    }
}

/// Per-episode agent-vs-benchmark cash difference in basis points.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub benchmark: String,
    pub delta_pnl: Vec<f64>,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub scenario: ScenarioKind,
    pub mode: FeatureMode,
    pub seed: u64,
    pub train_episodes: usize,
    pub test_episodes: usize,
    pub agent: StrategyColumn,
    /// Theoretical reference first, then the remaining benchmarks.
    pub benchmarks: Vec<StrategyColumn>,
    pub comparisons: Vec<Comparison>,
}

impl ExperimentReport {
    pub fn benchmark(&self, name: &str) -> Option<&StrategyColumn> {
        self.benchmarks.iter().find(|b| b.name == name)
    }

    pub fn comparison(&self, name: &str) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.benchmark == name)
    }

    /// Human-readable summary in the layout of the cost tables.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} | features {} | seed {} | train {} | test {}",
            self.scenario, self.mode, self.seed, self.train_episodes, self.test_episodes
        );
        let _ = writeln!(s, "{:<14}{:>12}{:>12}", "strategy", "E[IS]", "std[IS]");
        for col in std::iter::once(&self.agent).chain(&self.benchmarks) {
            let _ = writeln!(
                s,
                "{:<14}{:>12.4}{:>12.4}",
                col.name, col.is_summary.mean, col.is_summary.std
            );
        }
        let _ = writeln!(s, "{:<14}{:>12}{:>12}{:>12}", "dP&L vs", "mean bp", "std bp", "median bp");
        for c in &self.comparisons {
            let _ = writeln!(
                s,
                "{:<14}{:>12.3}{:>12.3}{:>12.3}",
                c.benchmark, c.summary.mean, c.summary.std, c.summary.median
            );
        }
        s
    }
}

/// Evaluates a trained policy and all paired benchmarks on the config's test scenario.
pub fn evaluate_policy(cfg: &ExperimentConfig, policy: &Policy) -> Result<ExperimentReport> {
    if policy.mode() != cfg.mode {
        return Err(invalid(format!(
            "policy uses {} features but the config asks for {}",
            policy.mode(),
            cfg.mode
        )));
    }
    let test = cfg.test_scenario()?;
    let agent = StrategyColumn::new(
        "ddql",
        evaluate(policy, cfg.test_episodes, &test, cfg.seed)?.outcomes,
    )?;
    let mut benchmarks = Vec::new();
    let mut comparisons = Vec::new();
    for strategy in benchmarks_for(cfg.scenario) {
        let col = StrategyColumn::new(
            strategy.name(),
            run_benchmark(&strategy, &test, cfg.test_episodes, cfg.seed)?,
        )?;
        let delta = paired_delta_pnl(&agent.cash, &col.cash)?;
        comparisons.push(Comparison {
            benchmark: col.name.clone(),
            summary: Summary::of(&delta)?,
            delta_pnl: delta,
        });
        benchmarks.push(col);
    }
    Ok(ExperimentReport {
        scenario: cfg.scenario,
        mode: cfg.mode,
        seed: cfg.seed,
        train_episodes: cfg.train_episodes,
        test_episodes: cfg.test_episodes,
        agent,
        benchmarks,
        comparisons,
    })
}

/// Everything produced by one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub config: ExperimentConfig,
    pub policy: Policy,
    pub training_log: Vec<EpisodeLog>,
    pub report: ExperimentReport,
}

/// Trains the agent, evaluates it and its benchmarks, and writes every artifact to
/// `config.out_dir` when one is set. A failed training run still leaves its partial log and a
/// `status.txt` explaining the failure.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentRun> {
    run_experiment_with(cfg, |_| {})
}

pub fn run_experiment_with<F: FnMut(&EpisodeLog)>(
    cfg: &ExperimentConfig,
    mut progress: F,
) -> Result<ExperimentRun> {
    cfg.validate()?;
    let out = cfg.out_dir.as_deref();
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.txt"), cfg.to_text())?;
        fs::write(dir.join("status.txt"), "running\n")?;
    }
    let mut partial = Vec::new();
    let trained = train_with(&cfg.train_config(), &cfg.train_scenario()?, |e| {
        partial.push(*e);
        progress(e);
    });
    let (policy, training_log) = match trained {
        Ok(ok) => ok,
        Err(err) => {
            if let Some(dir) = out {
                export::write_training_log(&dir.join("training_log.csv"), &partial)?;
                fs::write(dir.join("status.txt"), format!("failed: {err}\n"))?;
            }
            return Err(err);
        }
    };
    let report = evaluate_policy(cfg, &policy)?;
    let run = ExperimentRun {
        config: cfg.clone(),
        policy,
        training_log,
        report,
    };
    if let Some(dir) = out {
        write_run(&run, dir)?;
        fs::write(dir.join("status.txt"), "complete\n")?;
    }
    Ok(run)
}

/// Writes checkpoint, training log and all report/figure CSVs into `dir`.
pub fn write_run(run: &ExperimentRun, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    run.policy.save(&dir.join("policy.bin"))?;
    export::write_training_log(&dir.join("training_log.csv"), &run.training_log)?;
    export::write_report(dir, &run.config, &run.report, &run.policy)?;
    fs::write(dir.join("report.txt"), run.report.render())?;
    Ok(())
}
