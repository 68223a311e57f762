//! Experiment configuration and its flat `key = value` file format.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::ddql::{FeatureMode, RewardBaseline, TrainConfig};
use crate::error::{invalid, Error, Result};
use crate::market_sim::{CirImpactSpec, ImpactModel, LinearImpactSpec, MarketParams, Scenario};

/// First line of every config file.
pub const CONFIG_SCHEMA: &str = "# optexec-config v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    Constant,
    Increasing,
    Decreasing,
    /// Trained on alternating increasing/decreasing episodes, tested on increasing.
    MixedTestIncreasing,
    /// Trained on alternating increasing/decreasing episodes, tested on decreasing.
    MixedTestDecreasing,
    StochasticLow,
    StochasticHigh,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 7] = [
        ScenarioKind::Constant,
        ScenarioKind::Increasing,
        ScenarioKind::Decreasing,
        ScenarioKind::MixedTestIncreasing,
        ScenarioKind::MixedTestDecreasing,
        ScenarioKind::StochasticLow,
        ScenarioKind::StochasticHigh,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Constant => "constant",
            ScenarioKind::Increasing => "increasing",
            ScenarioKind::Decreasing => "decreasing",
            ScenarioKind::MixedTestIncreasing => "mixed_test_increasing",
            ScenarioKind::MixedTestDecreasing => "mixed_test_decreasing",
            ScenarioKind::StochasticLow => "stochastic_low",
            ScenarioKind::StochasticHigh => "stochastic_high",
        }
    }

    pub fn is_mixed(self) -> bool {
        matches!(
            self,
            ScenarioKind::MixedTestIncreasing | ScenarioKind::MixedTestDecreasing
        )
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, ScenarioKind::StochasticLow | ScenarioKind::StochasticHigh)
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| invalid(format!("unknown scenario '{s}'")))
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Episode budget: `full` is the reference scale, `smoke` a quick CI-sized run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Full,
    Smoke,
}

impl Profile {
    /// `(training episodes per regime, test episodes)`.
    pub fn episodes(self) -> (usize, usize) {
        match self {
            Profile::Full => (10_000, 5_000),
            Profile::Smoke => (2_000, 500),
        }
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Profile::Full),
            "smoke" => Ok(Profile::Smoke),
            other => Err(invalid(format!("unknown profile '{other}' (expected full or smoke)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: ScenarioKind,
    pub mode: FeatureMode,
    pub seed: u64,
    pub market: MarketParams,
    pub constant_kappa: f64,
    pub constant_alpha: f64,
    pub increasing: LinearImpactSpec,
    pub decreasing: LinearImpactSpec,
    /// Shared by both stochastic scenarios; the reversion rates come from the `cir_*_low`/`_high` keys.
    pub cir: CirImpactSpec,
    pub cir_lambda_low: f64,
    pub cir_lambda_high: f64,
    /// Total training episodes (both regimes together for mixed scenarios).
    pub train_episodes: usize,
    pub test_episodes: usize,
    pub batch_size: usize,
    pub memory_capacity: usize,
    pub sync_interval: u64,
    pub epsilon_decay: f64,
    pub gamma: f64,
    pub learning_rate: f64,
    pub reward_baseline: RewardBaseline,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(scenario: ScenarioKind, mode: FeatureMode, seed: u64, profile: Profile) -> Self {
        let train = TrainConfig::new(mode, seed);
        let mut cfg = Self {
            scenario,
            mode,
            seed,
            market: MarketParams::default(),
            constant_kappa: 0.001,
            constant_alpha: 0.002,
            increasing: LinearImpactSpec::INCREASING,
            decreasing: LinearImpactSpec::DECREASING,
            cir: CirImpactSpec::LOW_REVERSION,
            cir_lambda_low: CirImpactSpec::LOW_REVERSION.lambda_alpha,
            cir_lambda_high: CirImpactSpec::HIGH_REVERSION.lambda_alpha,
            train_episodes: 0,
            test_episodes: 0,
            batch_size: train.batch_size,
            memory_capacity: train.memory_capacity,
            sync_interval: train.sync_interval,
            epsilon_decay: train.epsilon_decay,
            gamma: train.gamma,
            learning_rate: train.learning_rate,
            reward_baseline: train.reward_baseline,
            out_dir: None,
        };
        cfg.apply_profile(profile);
        cfg
    }

    /// Resets episode counts to the profile's budget; mixed scenarios get one budget per regime.
    pub fn apply_profile(&mut self, profile: Profile) {
        let (m, b) = profile.episodes();
        self.train_episodes = if self.scenario.is_mixed() { 2 * m } else { m };
        self.test_episodes = b;
    }

    pub fn cir_spec(&self) -> Result<CirImpactSpec> {
        let lambda = match self.scenario {
            ScenarioKind::StochasticLow => self.cir_lambda_low,
            ScenarioKind::StochasticHigh => self.cir_lambda_high,
            other => return Err(invalid(format!("scenario {other} has no stochastic impacts"))),
        };
        Ok(CirImpactSpec {
            lambda_kappa: lambda,
            lambda_alpha: lambda,
            ..self.cir
        })
    }

    /// Impact model seen during training.
    pub fn train_impact(&self) -> Result<ImpactModel> {
        Ok(match self.scenario {
            ScenarioKind::MixedTestIncreasing | ScenarioKind::MixedTestDecreasing => {
                ImpactModel::Alternating(
                    Box::new(ImpactModel::Linear(self.increasing)),
                    Box::new(ImpactModel::Linear(self.decreasing)),
                )
            }
            _ => self.test_impact()?,
        })
    }

    /// Impact model of the test episodes and benchmarks.
    pub fn test_impact(&self) -> Result<ImpactModel> {
        Ok(match self.scenario {
            ScenarioKind::Constant => ImpactModel::Constant {
                kappa: self.constant_kappa,
                alpha: self.constant_alpha,
            },
            ScenarioKind::Increasing | ScenarioKind::MixedTestIncreasing => {
                ImpactModel::Linear(self.increasing)
            }
            ScenarioKind::Decreasing | ScenarioKind::MixedTestDecreasing => {
                ImpactModel::Linear(self.decreasing)
            }
            ScenarioKind::StochasticLow | ScenarioKind::StochasticHigh => {
                ImpactModel::Cir(self.cir_spec()?)
            }
        })
    }

    pub fn train_scenario(&self) -> Result<Scenario> {
        Scenario::new(self.market, self.train_impact()?)
    }

    pub fn test_scenario(&self) -> Result<Scenario> {
        Scenario::new(self.market, self.test_impact()?)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            episodes: self.train_episodes,
            batch_size: self.batch_size,
            memory_capacity: self.memory_capacity,
            sync_interval: self.sync_interval,
            epsilon_decay: self.epsilon_decay,
            gamma: self.gamma,
            learning_rate: self.learning_rate,
            reward_baseline: self.reward_baseline,
            mode: self.mode,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train_scenario()?;
        self.test_scenario()?;
        self.train_config().validate()?;
        if self.train_episodes == 0 || self.test_episodes == 0 {
            return Err(invalid("episode counts must be positive"));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{CONFIG_SCHEMA}");
        for (key, value) in self.entries() {
            let _ = writeln!(s, "{key} = {value}");
        }
        s
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        let f = |x: f64| format!("{x:?}");
        let mut out = vec![
            ("scenario", self.scenario.to_string()),
            ("feature_mode", self.mode.as_str().to_ascii_lowercase()),
            ("seed", self.seed.to_string()),
            ("s0", f(self.market.s0)),
            ("sigma", f(self.market.sigma)),
            ("q0", self.market.q0.to_string()),
            ("n_steps", self.market.n_steps.to_string()),
            ("tau", f(self.market.tau)),
            ("constant_kappa", f(self.constant_kappa)),
            ("constant_alpha", f(self.constant_alpha)),
            ("increasing_kappa0", f(self.increasing.kappa0)),
            ("increasing_beta_kappa", f(self.increasing.beta_kappa)),
            ("increasing_alpha0", f(self.increasing.alpha0)),
            ("increasing_beta_alpha", f(self.increasing.beta_alpha)),
            ("decreasing_kappa0", f(self.decreasing.kappa0)),
            ("decreasing_beta_kappa", f(self.decreasing.beta_kappa)),
            ("decreasing_alpha0", f(self.decreasing.alpha0)),
            ("decreasing_beta_alpha", f(self.decreasing.beta_alpha)),
            ("cir_lambda_low", f(self.cir_lambda_low)),
            ("cir_lambda_high", f(self.cir_lambda_high)),
            ("cir_theta_kappa", f(self.cir.theta_kappa)),
            ("cir_theta_alpha", f(self.cir.theta_alpha)),
            ("cir_sigma_kappa", f(self.cir.sigma_kappa)),
            ("cir_sigma_alpha", f(self.cir.sigma_alpha)),
            ("cir_omega", f(self.cir.omega)),
            ("train_episodes", self.train_episodes.to_string()),
            ("test_episodes", self.test_episodes.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("memory_capacity", self.memory_capacity.to_string()),
            ("sync_interval", self.sync_interval.to_string()),
            ("epsilon_decay", f(self.epsilon_decay)),
            ("gamma", f(self.gamma)),
            ("learning_rate", f(self.learning_rate)),
            ("reward_baseline", self.reward_baseline.as_str().to_string()),
        ];
        if let Some(dir) = &self.out_dir {
            out.push(("out_dir", dir.display().to_string()));
        }
        out
    }

    /// Parses a config file. `scenario` is required; every other key falls back to the
    /// defaults of the given profile. Unknown keys are rejected.
    pub fn parse(text: &str, profile: Profile) -> Result<Self> {
        let mut lines = text.lines().enumerate().peekable();
        match lines.peek() {
            Some((_, first)) if first.trim() == CONFIG_SCHEMA => {
                lines.next();
            }
            _ => return Err(Error::Format(format!("config must start with '{CONFIG_SCHEMA}'"))),
        }
        let mut pairs = Vec::new();
        for (no, raw) in lines {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("line {}: expected key = value", no + 1)))?;
            pairs.push((no + 1, key.trim().to_string(), value.trim().to_string()));
        }
        let scenario: ScenarioKind = pairs
            .iter()
            .find(|(_, k, _)| k == "scenario")
            .ok_or_else(|| Error::Format("config has no 'scenario' key".into()))?
            .2
            .parse()?;
        let mode: FeatureMode = match pairs.iter().find(|(_, k, _)| k == "feature_mode") {
            Some((_, _, v)) => v.parse()?,
            None => FeatureMode::Qts,
        };
        let mut cfg = ExperimentConfig::new(scenario, mode, 0, profile);
        for (no, key, value) in &pairs {
            cfg.set(key, value)
                .map_err(|e| Error::Format(format!("line {no}: {key}: {e}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| invalid(format!("cannot parse '{value}'")))
        }
        match key {
            "scenario" | "feature_mode" => {}
            "seed" => self.seed = num(value)?,
            "s0" => self.market.s0 = num(value)?,
            "sigma" => self.market.sigma = num(value)?,
            "q0" => self.market.q0 = num(value)?,
            "n_steps" => self.market.n_steps = num(value)?,
            "tau" => self.market.tau = num(value)?,
            "constant_kappa" => self.constant_kappa = num(value)?,
            "constant_alpha" => self.constant_alpha = num(value)?,
            "increasing_kappa0" => self.increasing.kappa0 = num(value)?,
            "increasing_beta_kappa" => self.increasing.beta_kappa = num(value)?,
            "increasing_alpha0" => self.increasing.alpha0 = num(value)?,
            "increasing_beta_alpha" => self.increasing.beta_alpha = num(value)?,
            "decreasing_kappa0" => self.decreasing.kappa0 = num(value)?,
            "decreasing_beta_kappa" => self.decreasing.beta_kappa = num(value)?,
            "decreasing_alpha0" => self.decreasing.alpha0 = num(value)?,
            "decreasing_beta_alpha" => self.decreasing.beta_alpha = num(value)?,
            "cir_lambda_low" => self.cir_lambda_low = num(value)?,
            "cir_lambda_high" => self.cir_lambda_high = num(value)?,
            "cir_theta_kappa" => self.cir.theta_kappa = num(value)?,
            "cir_theta_alpha" => self.cir.theta_alpha = num(value)?,
            "cir_sigma_kappa" => self.cir.sigma_kappa = num(value)?,
            "cir_sigma_alpha" => self.cir.sigma_alpha = num(value)?,
            "cir_omega" => self.cir.omega = num(value)?,
            "train_episodes" => self.train_episodes = num(value)?,
            "test_episodes" => self.test_episodes = num(value)?,
            "batch_size" => self.batch_size = num(value)?,
            "memory_capacity" => self.memory_capacity = num(value)?,
            "sync_interval" => self.sync_interval = num(value)?,
            "epsilon_decay" => self.epsilon_decay = num(value)?,
            "gamma" => self.gamma = num(value)?,
            "learning_rate" => self.learning_rate = num(value)?,
            "reward_baseline" => self.reward_baseline = value.parse()?,
            "out_dir" => self.out_dir = Some(PathBuf::from(value)),
            other => return Err(invalid(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn load(path: &Path, profile: Profile) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, profile)
    }
}
