//! Greedy policies backed by a trained Q-network, their evaluation and persistence.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::features::{FeatureMode, FeatureScaler, PriceBounds};
use crate::error::{invalid, Error, Result};
use crate::market_sim::{simulate_episode, EpisodeOutcome, EpisodeState, Phase, Scenario};
use crate::neural::{read_f64, read_network, read_u32, write_network, QNetwork, Workspace};

pub const POLICY_MAGIC: &[u8; 8] = b"OXPOLI01";

/// Actions the agent may take at `(q, t)`: everything up to `q`, or exactly `q` on the last step.
pub fn feasible_actions(q: u32, t: usize, n_steps: usize) -> std::ops::RangeInclusive<u32> {
    if t + 1 >= n_steps {
        q..=q
    } else {
        0..=q
    }
}

/// Buffers reused across argmax sweeps.
#[derive(Debug, Default, Clone)]
pub struct ArgmaxScratch {
    pub(crate) ws: Workspace,
    pub(crate) prefix: Vec<f64>,
    pub(crate) values: Vec<f64>,
    pub(crate) out: Vec<f64>,
}

/// Argmax of `net(prefix, v)` over the feasible actions; ties go to the smallest `v`.
pub(crate) fn argmax_action(
    net: &QNetwork,
    scaler: &FeatureScaler,
    q: u32,
    t: usize,
    price_feature: f64,
    scratch: &mut ArgmaxScratch,
) -> (u32, f64) {
    let actions = feasible_actions(q, t, scaler.n_steps);
    let first = *actions.start();
    scaler.state_prefix(q, t, price_feature, &mut scratch.prefix);
    scratch.values.clear();
    scratch.values.extend(actions.map(|v| scaler.volume(v)));
    net.forward_sweep(&scratch.prefix, &scratch.values, &mut scratch.ws, &mut scratch.out);
    let mut best = 0;
    for k in 1..scratch.out.len() {
        if scratch.out[k] > scratch.out[best] {
            best = k;
        }
    }
    (first + best as u32, scratch.out[best])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    net: QNetwork,
    scaler: FeatureScaler,
    bounds: PriceBounds,
}

impl Policy {
    pub fn new(net: QNetwork, scaler: FeatureScaler, bounds: PriceBounds) -> Result<Self> {
        if net.config().input_dim != scaler.mode.input_dim() {
            return Err(Error::ConfigMismatch(format!(
                "{} features need input_dim {}, network has {}",
                scaler.mode,
                scaler.mode.input_dim(),
                net.config().input_dim
            )));
        }
        Ok(Self { net, scaler, bounds })
    }

    pub fn net(&self) -> &QNetwork {
        &self.net
    }

    pub fn scaler(&self) -> &FeatureScaler {
        &self.scaler
    }

    pub fn mode(&self) -> FeatureMode {
        self.scaler.mode
    }

    pub fn bounds(&self) -> &PriceBounds {
        &self.bounds
    }

    pub fn price_feature(&self, mid: f64) -> f64 {
        if self.scaler.mode.uses_price() {
            self.bounds.normalize(mid)
        } else {
            0.0
        }
    }

    /// Greedy action from normalised state inputs.
    pub fn action_for(&self, q: u32, t: usize, price_feature: f64, scratch: &mut ArgmaxScratch) -> u32 {
        if t + 1 >= self.scaler.n_steps {
            return q;
        }
        argmax_action(&self.net, &self.scaler, q, t, price_feature, scratch).0
    }

    pub fn greedy_action(&self, state: &EpisodeState, scratch: &mut ArgmaxScratch) -> u32 {
        self.action_for(state.q, state.t, self.price_feature(state.mid), scratch)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        buf.write_all(POLICY_MAGIC)?;
        buf.push(self.scaler.mode.code());
        buf.write_all(&self.scaler.q0.to_le_bytes())?;
        buf.write_all(&(self.scaler.n_steps as u32).to_le_bytes())?;
        buf.write_all(&self.bounds.min.to_le_bytes())?;
        buf.write_all(&self.bounds.max.to_le_bytes())?;
        write_network(&mut buf, &self.net)?;
        Ok(buf)
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        let r = &mut bytes;
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != POLICY_MAGIC {
            return Err(Error::Format("not a policy checkpoint (bad magic)".into()));
        }
        let mut mode = [0u8; 1];
        r.read_exact(&mut mode)?;
        let mode = FeatureMode::from_code(mode[0])?;
        let q0 = read_u32(r)?;
        let n_steps = read_u32(r)? as usize;
        if q0 == 0 || n_steps == 0 {
            return Err(invalid("policy header has zero inventory or horizon"));
        }
        let bounds = PriceBounds {
            min: read_f64(r)?,
            max: read_f64(r)?,
        };
        let net = read_network(r)?;
        if !r.is_empty() {
            return Err(Error::Format("trailing bytes after policy checkpoint".into()));
        }
        Self::new(net, FeatureScaler { mode, q0, n_steps }, bounds)
    }

    /// Writes the binary checkpoint and a `<path>.cfg` text sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        let mut side = crate::neural::sidecar_text(self.net.config());
        side.push_str(&format!(
            "policy_format = OXPOLI01\nfeature_mode = {}\nq0 = {}\nn_steps = {}\nprice_min = {:?}\nprice_max = {:?}\n",
            self.scaler.mode, self.scaler.q0, self.scaler.n_steps, self.bounds.min, self.bounds.max
        ));
        fs::write(crate::neural::sidecar_path(path), side)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Greedy test episodes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Evaluation {
    pub outcomes: Vec<EpisodeOutcome>,
}

impl Evaluation {
    pub fn shortfalls(&self) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.shortfall).collect()
    }

    pub fn cash(&self) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.cash).collect()
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }
}

/// Runs `episodes` greedy test episodes on the scenario's test streams for `seed`.
pub fn evaluate(policy: &Policy, episodes: usize, scenario: &Scenario, seed: u64) -> Result<Evaluation> {
    check_geometry(policy, scenario)?;
    let mut scratch = ArgmaxScratch::default();
    let mut outcomes = Vec::with_capacity(episodes);
    for i in 0..episodes {
        let (traj, mut rng) = scenario.episode(seed, Phase::Test, i as u64)?;
        let out = simulate_episode(&scenario.params, &traj, &mut rng, |s, _| {
            Ok(policy.greedy_action(s, &mut scratch))
        })?;
        outcomes.push(out);
    }
    Ok(Evaluation { outcomes })
}

pub(crate) fn check_geometry(policy: &Policy, scenario: &Scenario) -> Result<()> {
    if policy.scaler.q0 != scenario.params.q0 || policy.scaler.n_steps != scenario.params.n_steps {
        return Err(invalid(format!(
            "policy trained for q0={}, N={} but scenario has q0={}, N={}",
            policy.scaler.q0, policy.scaler.n_steps, scenario.params.q0, scenario.params.n_steps
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapCell {
    pub t: usize,
    pub q: u32,
    /// Normalised price level (QTS policies only).
    pub price_level: Option<f64>,
    pub action: u32,
}

/// Greedy action on the `(q, t)` lattice, repeated for each normalised price level in QTS mode.
pub fn policy_heatmap(policy: &Policy, price_levels: &[f64]) -> Vec<HeatmapCell> {
    let levels: Vec<Option<f64>> = if policy.mode().uses_price() {
        price_levels.iter().map(|&s| Some(s.clamp(-1.0, 1.0))).collect()
    } else {
        vec![None]
    };
    let mut scratch = ArgmaxScratch::default();
    let mut cells = Vec::new();
    for level in levels {
        for t in 0..policy.scaler.n_steps {
            for q in 0..=policy.scaler.q0 {
                let action = policy.action_for(q, t, level.unwrap_or(0.0), &mut scratch);
                cells.push(HeatmapCell {
                    t,
                    q,
                    price_level: level,
                    action,
                });
            }
        }
    }
    cells
}

/// Default normalised price levels for QTS heatmaps.
pub const HEATMAP_PRICE_LEVELS: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];
