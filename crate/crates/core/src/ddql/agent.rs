//! Double deep Q-learning with experience replay.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use super::features::{FeatureMode, FeatureScaler, PriceBounds};
use super::memory::{Observation, ReplayMemory, Transition};
use super::policy::{argmax_action, ArgmaxScratch, Policy};
use crate::error::{invalid, Error, Result};
use crate::market_sim::{episode_rng, step_market, EpisodeRng, EpisodeState, Phase, Scenario};
use crate::neural::{AdamState, NetConfig, QNetwork, TrainCache};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Training episodes.
    pub episodes: usize,
    /// Minibatch size.
    pub batch_size: usize,
    /// Replay capacity; the oldest half is dropped when it fills.
    pub memory_capacity: usize,
    /// Actions between exploration decays and target-network syncs.
    pub sync_interval: u64,
    pub epsilon_decay: f64,
    pub gamma: f64,
    pub learning_rate: f64,
    pub reward_baseline: RewardBaseline,
    pub mode: FeatureMode,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(mode: FeatureMode, seed: u64) -> Self {
        Self {
            episodes: 10_000,
            batch_size: 32,
            memory_capacity: 15_000,
            sync_interval: 100,
            epsilon_decay: 0.995,
            gamma: 1.0,
            learning_rate: 1e-4,
            reward_baseline: RewardBaseline::ArrivalValue,
            mode,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.memory_capacity < 2 || self.sync_interval == 0 {
            return Err(invalid("batch size, memory capacity and sync interval must be positive"));
        }
        if self.batch_size > self.memory_capacity {
            return Err(invalid("batch size exceeds replay capacity"));
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0) {
            return Err(invalid(format!("epsilon decay {} outside (0, 1]", self.epsilon_decay)));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(invalid(format!("discount {} outside [0, 1]", self.gamma)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning rate must be positive"));
        }
        Ok(())
    }
}

/// What is subtracted from the sale proceeds before a transition is stored.
///
/// `ArrivalValue` stores `r - S0 v`. Summed over the rest of an episode the offset is `S0 q`,
/// which depends on the state only, so the greedy action is unchanged while the regression
/// targets shrink from hundreds of currency units to the size of the trading cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardBaseline {
    /// Raw proceeds `S_tilde v`.
    Proceeds,
    ArrivalValue,
}

impl RewardBaseline {
    pub fn offset(self, s0: f64, volume: u32) -> f64 {
        match self {
            RewardBaseline::Proceeds => 0.0,
            RewardBaseline::ArrivalValue => s0 * f64::from(volume),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RewardBaseline::Proceeds => "proceeds",
            RewardBaseline::ArrivalValue => "arrival",
        }
    }
}

impl std::str::FromStr for RewardBaseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proceeds" => Ok(RewardBaseline::Proceeds),
            "arrival" => Ok(RewardBaseline::ArrivalValue),
            other => Err(invalid(format!("unknown reward baseline '{other}' (expected proceeds or arrival)"))),
        }
    }
}

/// Per-episode training diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeLog {
    pub episode: usize,
    /// Exploration probability at the end of the episode.
    pub epsilon: f64,
    pub shortfall: f64,
    /// Mean minibatch loss over the episode, if any update ran.
    pub mean_loss: Option<f64>,
}

/// Exploratory action: `Binomial(q, 1 / (N - t))`, or everything on the last step.
pub fn explore_action<R: Rng + ?Sized>(q: u32, t: usize, n_steps: usize, rng: &mut R) -> u32 {
    if t + 1 >= n_steps || q == 0 {
        return q;
    }
    let p = 1.0 / (n_steps - t) as f64;
    Binomial::new(u64::from(q), p)
        .expect("valid binomial parameters")
        .sample(rng) as u32
}

/// Double-Q regression targets `r + gamma * Q_tgt(s', argmax_v Q_main(s', v))`; terminal
/// transitions get the bare reward.
pub fn compute_targets(
    batch: &[Transition],
    gamma: f64,
    main: &QNetwork,
    target: &QNetwork,
    scaler: &FeatureScaler,
    bounds: &PriceBounds,
) -> Vec<f64> {
    let mut scratch = ArgmaxScratch::default();
    let mut out = Vec::new();
    let mut inputs = Vec::new();
    let mut q_tgt = Vec::new();
    targets_into(batch, gamma, main, target, scaler, bounds, &mut scratch, &mut inputs, &mut q_tgt, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn targets_into(
    batch: &[Transition],
    gamma: f64,
    main: &QNetwork,
    target: &QNetwork,
    scaler: &FeatureScaler,
    bounds: &PriceBounds,
    scratch: &mut ArgmaxScratch,
    inputs: &mut Vec<f64>,
    q_tgt: &mut Vec<f64>,
    out: &mut Vec<f64>,
) {
    inputs.clear();
    let mut bootstrap = Vec::with_capacity(batch.len());
    for (k, tr) in batch.iter().enumerate() {
        if tr.terminal || gamma == 0.0 {
            continue;
        }
        let next = &tr.next;
        let price = price_feature(scaler, bounds, next.mid);
        let (v_star, _) = argmax_action(main, scaler, next.q, next.t, price, scratch);
        scaler.state_prefix(next.q, next.t, price, &mut scratch.prefix);
        inputs.extend_from_slice(&scratch.prefix);
        inputs.push(scaler.volume(v_star));
        bootstrap.push(k);
    }
    target.forward_batch(inputs, bootstrap.len(), &mut scratch.ws, q_tgt);
    out.clear();
    out.extend(batch.iter().map(|tr| tr.reward));
    for (i, &k) in bootstrap.iter().enumerate() {
        out[k] += gamma * q_tgt[i];
    }
}

fn price_feature(scaler: &FeatureScaler, bounds: &PriceBounds, mid: f64) -> f64 {
    if scaler.mode.uses_price() {
        bounds.normalize(mid)
    } else {
        0.0
    }
}

/// Learner state across training episodes.
#[derive(Debug, Clone)]
pub struct Agent {
    config: TrainConfig,
    scaler: FeatureScaler,
    main: QNetwork,
    target: QNetwork,
    adam: AdamState,
    bounds: PriceBounds,
    memory: ReplayMemory,
    actions: u64,
    decays: i32,
    rng: EpisodeRng,
    scratch: ArgmaxScratch,
    cache: TrainCache,
    grad: Vec<f64>,
    batch: Vec<Transition>,
    inputs: Vec<f64>,
    targets: Vec<f64>,
    tgt_inputs: Vec<f64>,
    tgt_values: Vec<f64>,
}

impl Agent {
    pub fn new(config: TrainConfig, scenario: &Scenario) -> Result<Self> {
        config.validate()?;
        let params = &scenario.params;
        let scaler = FeatureScaler {
            mode: config.mode,
            q0: params.q0,
            n_steps: params.n_steps,
        };
        let mut rng = episode_rng(config.seed, Phase::Agent, 0);
        let main = QNetwork::new(NetConfig::q_network(config.mode.input_dim()), &mut rng)?;
        let mut target = main.clone();
        target.copy_weights_from(&main)?;
        let adam = AdamState::new(main.param_count(), config.learning_rate);
        Ok(Self {
            memory: ReplayMemory::new(config.memory_capacity),
            bounds: PriceBounds::starting_at(params.s0),
            config,
            scaler,
            main,
            target,
            adam,
            actions: 0,
            decays: 0,
            rng,
            scratch: ArgmaxScratch::default(),
            cache: TrainCache::default(),
            grad: Vec::new(),
            batch: Vec::new(),
            inputs: Vec::new(),
            targets: Vec::new(),
            tgt_inputs: Vec::new(),
            tgt_values: Vec::new(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// `c^k` after `k` completed sync intervals.
    pub fn epsilon(&self) -> f64 {
        self.config.epsilon_decay.powi(self.decays)
    }

    pub fn actions_taken(&self) -> u64 {
        self.actions
    }

    pub fn main_network(&self) -> &QNetwork {
        &self.main
    }

    pub fn target_network(&self) -> &QNetwork {
        &self.target
    }

    pub fn memory(&self) -> &ReplayMemory {
        &self.memory
    }

    pub fn bounds(&self) -> &PriceBounds {
        &self.bounds
    }

    /// Epsilon-greedy action; the last step always sells the remainder.
    pub fn select_action(&mut self, state: &EpisodeState) -> u32 {
        if state.t + 1 >= self.scaler.n_steps {
            return state.q;
        }
        let zeta = 1.0 - self.rng.random::<f64>();
        if zeta <= self.epsilon() {
            explore_action(state.q, state.t, self.scaler.n_steps, &mut self.rng)
        } else {
            let price = price_feature(&self.scaler, &self.bounds, state.mid);
            argmax_action(&self.main, &self.scaler, state.q, state.t, price, &mut self.scratch).0
        }
    }

    /// Runs training episode `index` on the scenario's training streams.
    pub fn run_episode(&mut self, scenario: &Scenario, index: usize) -> Result<EpisodeLog> {
        let params = &scenario.params;
        let (traj, mut market_rng) = scenario.episode(self.config.seed, Phase::Train, index as u64)?;
        let mut state = EpisodeState::initial(params);
        let mut fills = Vec::with_capacity(params.n_steps);
        let mut loss_sum = 0.0;
        let mut updates = 0usize;
        while state.t < params.n_steps {
            let action = self.select_action(&state);
            let (next, fill, reward) = step_market(&state, action, &traj, params, &mut market_rng)?;
            fills.push(fill);
            self.bounds.observe(next.mid);
            self.memory.push(Transition {
                state: Observation {
                    q: state.q,
                    t: state.t,
                    mid: state.mid,
                },
                action,
                reward: reward - self.config.reward_baseline.offset(params.s0, action),
                next: Observation {
                    q: next.q,
                    t: next.t,
                    mid: next.mid,
                },
                terminal: next.t >= params.n_steps || next.q == 0,
            });
            if self.memory.len() >= self.config.batch_size {
                let loss = self.update().map_err(|e| tag_episode(e, index))?;
                loss_sum += loss;
                updates += 1;
                self.memory.halve_if_full();
            }
            self.actions += 1;
            if self.actions % self.config.sync_interval == 0 {
                self.decays += 1;
                self.target.copy_weights_from(&self.main)?;
            }
            state = next;
        }
        if state.q != 0 {
            return Err(crate::error::contract(format!(
                "episode {index} ended with {} unsold shares",
                state.q
            )));
        }
        let shortfall = crate::market_sim::implementation_shortfall(params.s0, params.q0, &fills)?;
        if !shortfall.is_finite() {
            return Err(Error::NonFinite {
                episode: index,
                detail: "implementation shortfall".into(),
            });
        }
        Ok(EpisodeLog {
            episode: index,
            epsilon: self.epsilon(),
            shortfall,
            mean_loss: (updates > 0).then(|| loss_sum / updates as f64),
        })
    }

    /// One minibatch regression step on the main network.
    fn update(&mut self) -> Result<f64> {
        self.memory
            .sample(self.config.batch_size, &mut self.rng, &mut self.batch);
        targets_into(
            &self.batch,
            self.config.gamma,
            &self.main,
            &self.target,
            &self.scaler,
            &self.bounds,
            &mut self.scratch,
            &mut self.tgt_inputs,
            &mut self.tgt_values,
            &mut self.targets,
        );
        self.inputs.clear();
        for tr in &self.batch {
            let s = &tr.state;
            let price = price_feature(&self.scaler, &self.bounds, s.mid);
            self.scaler.state_prefix(s.q, s.t, price, &mut self.scratch.prefix);
            self.inputs.extend_from_slice(&self.scratch.prefix);
            self.inputs.push(self.scaler.volume(tr.action));
        }
        self.main.train_batch(
            &mut self.adam,
            &self.inputs,
            &self.targets,
            &mut self.cache,
            &mut self.grad,
        )
    }

    /// Freezes the main network and price bounds into a greedy policy.
    pub fn into_policy(self) -> Result<Policy> {
        Policy::new(self.main, self.scaler, self.bounds)
    }
}

fn tag_episode(err: Error, episode: usize) -> Error {
    match err {
        Error::NonFinite { detail, .. } => Error::NonFinite { episode, detail },
        other => other,
    }
}

/// Trains on `config.episodes` episodes, calling `on_episode` after each one.
pub fn train_with<F: FnMut(&EpisodeLog)>(
    config: &TrainConfig,
    scenario: &Scenario,
    mut on_episode: F,
) -> Result<(Policy, Vec<EpisodeLog>)> {
    let mut agent = Agent::new(config.clone(), scenario)?;
    let mut log = Vec::with_capacity(config.episodes);
    for i in 0..config.episodes {
        let entry = agent.run_episode(scenario, i)?;
        on_episode(&entry);
        log.push(entry);
    }
    Ok((agent.into_policy()?, log))
}

pub fn train(config: &TrainConfig, scenario: &Scenario) -> Result<(Policy, Vec<EpisodeLog>)> {
    train_with(config, scenario, |_| {})
}
