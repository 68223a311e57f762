//! Experiment orchestration: configs, paired benchmarks, reports and CSV output.

mod benchmark;
mod config;
pub mod export;
mod experiment;
mod stats;

pub use benchmark::{run_benchmark, Strategy};
pub use config::{ExperimentConfig, Profile, ScenarioKind, CONFIG_SCHEMA};
pub use experiment::{
    benchmarks_for, evaluate_policy, run_experiment, run_experiment_with, write_run, Comparison,
    ExperimentReport, ExperimentRun, StrategyColumn,
};
pub use stats::{delta_pnl, paired_delta_pnl, Summary};

/// Table recipes: which scenarios make up each reproduced cost table.
pub fn table_scenarios(table: &str) -> Option<&'static [ScenarioKind]> {
    use ScenarioKind::*;
    Some(match table {
        "table2" => &[Constant],
        "table4" => &[Increasing],
        "table6" => &[Decreasing],
        "table8" => &[MixedTestIncreasing, MixedTestDecreasing],
        "table9" => &[StochasticLow],
        "table10" => &[StochasticHigh],
        _ => return None,
    })
}

pub const TABLES: [&str; 6] = ["table2", "table4", "table6", "table8", "table9", "table10"];
