//! Plot-ready CSV output. Every file starts with a `# optexec-<kind> v1` line, followed by a
//! comma-separated header and LF-terminated rows.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::config::ExperimentConfig;
use super::experiment::{ExperimentReport, StrategyColumn};
use crate::ddql::{policy_heatmap, EpisodeLog, HeatmapCell, Policy, HEATMAP_PRICE_LEVELS};
use crate::error::Result;
use crate::market_sim::{ImpactTrajectory, Phase};
use crate::strategies::{optimal_deterministic_schedule, Schedule};

fn writer(path: &Path, kind: &str, header: &[&str]) -> Result<csv::Writer<File>> {
    let mut file = File::create(path)?;
    writeln!(file, "# optexec-{kind} v1")?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file);
    w.write_record(header)?;
    Ok(w)
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_training_log(path: &Path, log: &[EpisodeLog]) -> Result<()> {
    let mut w = writer(path, "training-log", &["episode", "epsilon", "episode_IS", "mean_loss"])?;
    for e in log {
        w.write_record([
            e.episode.to_string(),
            e.epsilon.to_string(),
            e.shortfall.to_string(),
            opt(e.mean_loss),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectory(path: &Path, traj: &ImpactTrajectory) -> Result<()> {
    let mut w = writer(path, "trajectory", &["t", "kappa", "alpha"])?;
    for t in 0..traj.len() {
        w.write_record([t.to_string(), traj.kappa_at(t).to_string(), traj.alpha_at(t).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per step with the volume sold and the inventory held before it.
pub fn write_schedule(path: &Path, schedule: &Schedule) -> Result<()> {
    let mut w = writer(path, "schedule", &["t", "volume", "holdings"])?;
    let holdings = schedule.holdings();
    for (t, v) in schedule.volumes().iter().enumerate() {
        w.write_record([t.to_string(), v.to_string(), holdings[t].to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-episode shortfall of every strategy and the agent's paired basis-point differences.
pub fn write_shortfalls(path: &Path, report: &ExperimentReport) -> Result<()> {
    let mut header = vec!["episode".to_string(), "ddql_IS".to_string()];
    header.extend(report.benchmarks.iter().map(|b| format!("{}_IS", b.name)));
    header.extend(report.comparisons.iter().map(|c| format!("dpnl_vs_{}_bp", c.benchmark)));
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut w = writer(path, "shortfall", &refs)?;
    for i in 0..report.agent.shortfall.len() {
        let mut row = vec![i.to_string(), report.agent.shortfall[i].to_string()];
        row.extend(report.benchmarks.iter().map(|b| b.shortfall[i].to_string()));
        row.extend(report.comparisons.iter().map(|c| c.delta_pnl[i].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-episode shortfall and cash of a single strategy.
pub fn write_strategy(path: &Path, col: &StrategyColumn) -> Result<()> {
    let mut w = writer(path, "benchmark", &["episode", "IS", "cash"])?;
    for (i, (is, cash)) in col.shortfall.iter().zip(&col.cash).enumerate() {
        w.write_record([i.to_string(), is.to_string(), cash.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary(path: &Path, report: &ExperimentReport) -> Result<()> {
    let mut w = writer(path, "summary", &["strategy", "mean_IS", "std_IS", "median_IS"])?;
    for col in std::iter::once(&report.agent).chain(&report.benchmarks) {
        let s = &col.is_summary;
        w.write_record([col.name.clone(), s.mean.to_string(), s.std.to_string(), s.median.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_delta_pnl(path: &Path, report: &ExperimentReport) -> Result<()> {
    let mut w = writer(path, "delta-pnl", &["benchmark", "mean_bp", "std_bp", "median_bp"])?;
    for c in &report.comparisons {
        let s = &c.summary;
        w.write_record([c.benchmark.clone(), s.mean.to_string(), s.std.to_string(), s.median.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean holdings per step for the agent, the theoretical benchmark and TWAP.
pub fn write_holdings(path: &Path, report: &ExperimentReport) -> Result<()> {
    let mut w = writer(path, "holdings", &["t", "ddql", "theoretical", "twap"])?;
    let agent = report.agent.mean_holdings();
    let theo = report.benchmarks.first().map(StrategyColumn::mean_holdings).unwrap_or_default();
    let twap = report.benchmark("twap").map(StrategyColumn::mean_holdings).unwrap_or_default();
    for t in 0..agent.len() {
        let get = |v: &[f64]| v.get(t).map(|x| x.to_string()).unwrap_or_default();
        w.write_record([t.to_string(), get(&agent), get(&theo), get(&twap)])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean action over the `(q, t)` states the agent visited in its test episodes.
pub fn write_visited_actions(path: &Path, agent: &StrategyColumn) -> Result<()> {
    let mut acc: BTreeMap<(usize, u32), (u64, u64)> = BTreeMap::new();
    for o in &agent.outcomes {
        for (s, f) in o.states.iter().zip(&o.fills) {
            let e = acc.entry((s.t, s.q)).or_default();
            e.0 += 1;
            e.1 += u64::from(f.volume);
        }
    }
    let mut w = writer(path, "actions-qt", &["t", "q", "visits", "mean_action"])?;
    for ((t, q), (n, sum)) in acc {
        w.write_record([t.to_string(), q.to_string(), n.to_string(), (sum as f64 / n as f64).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean action over visited `(q, t, price level)` states; the normalised price is snapped to
/// the nearest heatmap level.
pub fn write_visited_price_actions(path: &Path, agent: &StrategyColumn, policy: &Policy) -> Result<()> {
    let mut acc: BTreeMap<(usize, u32, usize), (u64, u64)> = BTreeMap::new();
    for o in &agent.outcomes {
        for (s, f) in o.states.iter().zip(&o.fills) {
            let x = policy.bounds().normalize(s.mid);
            let level = HEATMAP_PRICE_LEVELS
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
                .map_or(0, |(i, _)| i);
            let e = acc.entry((s.t, s.q, level)).or_default();
            e.0 += 1;
            e.1 += u64::from(f.volume);
        }
    }
    let mut w = writer(path, "actions-qts", &["t", "q", "price_level", "visits", "mean_action"])?;
    for ((t, q, level), (n, sum)) in acc {
        w.write_record([
            t.to_string(),
            q.to_string(),
            HEATMAP_PRICE_LEVELS[level].to_string(),
            n.to_string(),
            (sum as f64 / n as f64).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Greedy action on the full `(q, t[, price level])` lattice.
pub fn write_heatmap(path: &Path, cells: &[HeatmapCell]) -> Result<()> {
    let mut w = writer(path, "heatmap", &["t", "q", "price_level", "action"])?;
    for c in cells {
        w.write_record([c.t.to_string(), c.q.to_string(), opt(c.price_level), c.action.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Policy-only figure data: the lattice heatmap.
pub fn export_policy(dir: &Path, policy: &Policy) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_heatmap(&dir.join("heatmap.csv"), &policy_heatmap(policy, &HEATMAP_PRICE_LEVELS))
}

/// All report and figure CSVs of an evaluated experiment.
pub fn write_report(dir: &Path, cfg: &ExperimentConfig, report: &ExperimentReport, policy: &Policy) -> Result<()> {
    write_shortfalls(&dir.join("shortfall.csv"), report)?;
    write_summary(&dir.join("summary.csv"), report)?;
    write_delta_pnl(&dir.join("delta_pnl.csv"), report)?;
    write_holdings(&dir.join("holdings.csv"), report)?;
    write_visited_actions(&dir.join("actions_qt.csv"), &report.agent)?;
    if policy.mode().uses_price() {
        write_visited_price_actions(&dir.join("actions_qts.csv"), &report.agent, policy)?;
    }
    export_policy(dir, policy)?;
    let test = cfg.test_scenario()?;
    let (traj, _) = test.episode(cfg.seed, Phase::Test, 0)?;
    write_trajectory(&dir.join("trajectory.csv"), &traj)?;
    if !test.impact.is_stochastic() {
        let schedule = optimal_deterministic_schedule(&traj, f64::from(cfg.market.q0))?;
        write_schedule(&dir.join("schedule.csv"), &schedule)?;
    }
    Ok(())
}
