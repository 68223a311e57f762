//! Benchmark strategies run on the same episode streams as the agent's test phase.

use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::market_sim::{simulate_episode, EpisodeOutcome, ImpactModel, ImpactTrajectory, Phase, Scenario};
use crate::strategies::{barger_lorig_action, optimal_deterministic_schedule, twap};

#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    Twap,
    /// Expected-cost optimum on each episode's impact path, rounded to whole shares.
    Qp,
    /// Perturbative policy reading the true impacts of each step.
    BargerLorig,
    /// Fixed whole-share schedule.
    Schedule(Vec<u32>),
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Twap => "twap",
            Strategy::Qp => "qp",
            Strategy::BargerLorig => "barger_lorig",
            Strategy::Schedule(_) => "schedule",
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "twap" => Ok(Strategy::Twap),
            "qp" => Ok(Strategy::Qp),
            "barger_lorig" | "barger-lorig" => Ok(Strategy::BargerLorig),
            other => Err(invalid(format!(
                "unknown strategy '{other}' (expected twap, qp or barger-lorig)"
            ))),
        }
    }
}

/// Rounded QP schedule for one trajectory, reused while the trajectory repeats.
#[derive(Default)]
struct QpCache {
    traj: Option<ImpactTrajectory>,
    shares: Vec<u32>,
}

impl QpCache {
    fn shares(&mut self, traj: &ImpactTrajectory, q0: u32) -> Result<&[u32]> {
        if self.traj.as_ref() != Some(traj) {
            self.shares = optimal_deterministic_schedule(traj, f64::from(q0))?.to_shares();
            self.traj = Some(traj.clone());
        }
        Ok(&self.shares)
    }
}

/// Simulates `episodes` test episodes of `strategy`. Episode `i` uses the same impact path and
/// price noise as the agent's `i`-th evaluation episode for the same seed.
pub fn run_benchmark(
    strategy: &Strategy,
    scenario: &Scenario,
    episodes: usize,
    seed: u64,
) -> Result<Vec<EpisodeOutcome>> {
    let params = &scenario.params;
    let fixed: Option<Vec<u32>> = match strategy {
        Strategy::Twap => Some(twap(params.q0, params.n_steps)?.to_shares()),
        Strategy::Schedule(shares) => {
            let total: u64 = shares.iter().map(|&v| u64::from(v)).sum();
            if shares.len() != params.n_steps || total != u64::from(params.q0) {
                return Err(invalid(format!(
                    "schedule of {} steps selling {total} does not liquidate {} shares in {} steps",
                    shares.len(),
                    params.q0,
                    params.n_steps
                )));
            }
            Some(shares.clone())
        }
        _ => None,
    };
    let cir = match (strategy, &scenario.impact) {
        (Strategy::BargerLorig, ImpactModel::Cir(spec)) => Some(*spec),
        (Strategy::BargerLorig, _) => {
            return Err(invalid("the Barger-Lorig policy needs stochastic (CIR) impacts"))
        }
        _ => None,
    };
    let mut cache = QpCache::default();
    let mut outcomes = Vec::with_capacity(episodes);
    for i in 0..episodes {
        let (traj, mut rng) = scenario.episode(seed, Phase::Test, i as u64)?;
        let qp: Option<Vec<u32>> = match strategy {
            Strategy::Qp => Some(cache.shares(&traj, params.q0)?.to_vec()),
            _ => None,
        };
        let out = simulate_episode(params, &traj, &mut rng, |s, tr| {
            if let Some(spec) = &cir {
                return Ok(barger_lorig_action(
                    s.q,
                    s.t,
                    params.n_steps,
                    tr.alpha_at(s.t),
                    tr.kappa_at(s.t),
                    spec,
                    params.tau,
                ));
            }
            let plan = fixed.as_deref().or(qp.as_deref()).expect("schedule strategy");
            if s.t + 1 >= params.n_steps {
                Ok(s.q)
            } else {
                Ok(plan[s.t].min(s.q))
            }
        })?;
        outcomes.push(out);
    }
    Ok(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_sim::{CirImpactSpec, LinearImpactSpec, MarketParams};

    fn scenario(impact: ImpactModel) -> Scenario {
        Scenario::new(MarketParams::default(), impact).unwrap()
    }

    #[test]
    fn qp_equals_twap_on_constant_impacts() {
        let sc = scenario(ImpactModel::Constant {
            kappa: 0.001,
            alpha: 0.002,
        });
        let a = run_benchmark(&Strategy::Twap, &sc, 200, 3).unwrap();
        let b = run_benchmark(&Strategy::Qp, &sc, 200, 3).unwrap();
        assert_eq!(a, b);
        let mean = a.iter().map(|o| o.shortfall).sum::<f64>() / 200.0;
        assert!((mean - 0.26).abs() < 0.01);
    }

    #[test]
    fn qp_beats_twap_on_increasing_impacts() {
        let sc = scenario(ImpactModel::Linear(LinearImpactSpec::INCREASING));
        let mean = |s: &Strategy| {
            run_benchmark(s, &sc, 100, 1)
                .unwrap()
                .iter()
                .map(|o| o.shortfall)
                .sum::<f64>()
                / 100.0
        };
        assert!(mean(&Strategy::Qp) < mean(&Strategy::Twap));
    }

    #[test]
    fn barger_lorig_needs_cir() {
        let sc = scenario(ImpactModel::Linear(LinearImpactSpec::DECREASING));
        assert!(run_benchmark(&Strategy::BargerLorig, &sc, 1, 0).is_err());
        let sc = scenario(ImpactModel::Cir(CirImpactSpec::HIGH_REVERSION));
        let out = run_benchmark(&Strategy::BargerLorig, &sc, 20, 0).unwrap();
        assert!(out.iter().all(|o| o.volumes().sum::<u32>() == 20));
    }

    #[test]
    fn infeasible_schedules_rejected() {
        let sc = scenario(ImpactModel::Constant {
            kappa: 0.001,
            alpha: 0.002,
        });
        assert!(run_benchmark(&Strategy::Schedule(vec![2; 9]), &sc, 1, 0).is_err());
        assert!(run_benchmark(&Strategy::Schedule(vec![3; 10]), &sc, 1, 0).is_err());
        let mut front = vec![0; 10];
        front[0] = 20;
        assert!(run_benchmark(&Strategy::Schedule(front), &sc, 3, 0).is_ok());
    }
}
