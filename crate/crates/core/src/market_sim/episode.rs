//! Almgren-Chriss price dynamics with linear permanent and temporary impact.

use rand::Rng;
use rand_distr::StandardNormal;

use super::impact::ImpactTrajectory;
use crate::error::{contract, invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    /// Initial mid-price.
    pub s0: f64,
    /// Price volatility per unit time.
    pub sigma: f64,
    /// Shares to liquidate.
    pub q0: u32,
    /// Number of trading steps.
    pub n_steps: usize,
    /// Step length; the lab runs with `tau = 1`.
    pub tau: f64,
}

impl Default for MarketParams {
    fn default() -> Self {
        Self {
            s0: 10.0,
            sigma: 1e-5,
            q0: 20,
            n_steps: 10,
            tau: 1.0,
        }
    }
}

impl MarketParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return Err(invalid(format!("initial price must be positive, got {}", self.s0)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(invalid(format!("volatility must be >= 0, got {}", self.sigma)));
        }
        if self.q0 == 0 {
            return Err(invalid("initial inventory must be at least one share"));
        }
        if self.n_steps == 0 {
            return Err(invalid("need at least one trading step"));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(invalid(format!("step length must be positive, got {}", self.tau)));
        }
        Ok(())
    }

    /// Mark-to-market value of the initial inventory, `S0 * q0`.
    pub fn initial_value(&self) -> f64 {
        self.s0 * f64::from(self.q0)
    }
}

/// What the trader knows at the start of step `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeState {
    pub t: usize,
    pub q: u32,
    /// Latest mid-price `S_{t-1}`.
    pub mid: f64,
    pub cash: f64,
}

impl EpisodeState {
    pub fn initial(params: &MarketParams) -> Self {
        Self {
            t: 0,
            q: params.q0,
            mid: params.s0,
            cash: 0.0,
        }
    }

    pub fn is_last_step(&self, n_steps: usize) -> bool {
        self.t + 1 == n_steps
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fill {
    pub step: usize,
    pub volume: u32,
    pub exec_price: f64,
    pub mid_before: f64,
}

impl Fill {
    pub fn proceeds(&self) -> f64 {
        self.exec_price * f64::from(self.volume)
    }
}

/// Sells `volume` shares at step `state.t`.
///
/// The execution price is `S_{t-1} - alpha_t v`, the reward is the sale proceeds, and the next
/// mid is `S_{t-1} - kappa_t v + sigma sqrt(tau) xi`. One normal is drawn per call whatever
/// the volume, so the noise sequence does not depend on the actions taken.
pub fn step_market<R: Rng + ?Sized>(
    state: &EpisodeState,
    volume: u32,
    traj: &ImpactTrajectory,
    params: &MarketParams,
    rng: &mut R,
) -> Result<(EpisodeState, Fill, f64)> {
    if volume > state.q {
        return Err(contract(format!(
            "cannot sell {volume} shares with {} remaining",
            state.q
        )));
    }
    if state.t >= params.n_steps || state.t >= traj.len() {
        return Err(contract(format!(
            "step {} beyond horizon {}",
            state.t, params.n_steps
        )));
    }
    let v = f64::from(volume);
    let alpha = traj.alpha_at(state.t);
    let kappa = traj.kappa_at(state.t);
    let exec_price = state.mid - alpha * v;
    let reward = exec_price * v;
    let xi: f64 = rng.sample(StandardNormal);
    let next_mid = state.mid - kappa * v + params.sigma * params.tau.sqrt() * xi;
    let fill = Fill {
        step: state.t,
        volume,
        exec_price,
        mid_before: state.mid,
    };
    let next = EpisodeState {
        t: state.t + 1,
        q: state.q - volume,
        mid: next_mid,
        cash: state.cash + reward,
    };
    Ok((next, fill, reward))
}

/// `S0 q0 - sum_t exec_price_t v_t`; the fills must liquidate exactly `q0` shares.
pub fn implementation_shortfall(s0: f64, q0: u32, fills: &[Fill]) -> Result<f64> {
    let sold: u64 = fills.iter().map(|f| u64::from(f.volume)).sum();
    if sold != u64::from(q0) {
        return Err(contract(format!("fills sell {sold} shares, expected {q0}")));
    }
    let proceeds: f64 = fills.iter().map(Fill::proceeds).sum();
    Ok(s0 * f64::from(q0) - proceeds)
}

/// Expected implementation shortfall of a static schedule:
/// `sum_t alpha_t v_t^2 + sum_t v_t sum_{s<t} kappa_s v_s`.
pub fn expected_cost(volumes: &[f64], traj: &ImpactTrajectory) -> Result<f64> {
    if volumes.len() != traj.len() {
        return Err(invalid(format!(
            "schedule has {} steps, trajectory {}",
            volumes.len(),
            traj.len()
        )));
    }
    if let Some(v) = volumes.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(invalid(format!("schedule entry {v} is not a non-negative volume")));
    }
    let mut cost = 0.0;
    let mut permanent = 0.0;
    for (t, &v) in volumes.iter().enumerate() {
        cost += traj.alpha_at(t) * v * v + v * permanent;
        permanent += traj.kappa_at(t) * v;
    }
    Ok(cost)
}

/// One fully simulated liquidation.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    /// States at the start of each step, in order.
    pub states: Vec<EpisodeState>,
    pub fills: Vec<Fill>,
    pub cash: f64,
    pub shortfall: f64,
}

impl EpisodeOutcome {
    pub fn volumes(&self) -> impl Iterator<Item = u32> + '_ {
        self.fills.iter().map(|f| f.volume)
    }
}

/// Runs one episode with `policy(state, traj)` choosing each step's volume.
pub fn simulate_episode<R, F>(
    params: &MarketParams,
    traj: &ImpactTrajectory,
    rng: &mut R,
    mut policy: F,
) -> Result<EpisodeOutcome>
where
    R: Rng + ?Sized,
    F: FnMut(&EpisodeState, &ImpactTrajectory) -> Result<u32>,
{
    let mut state = EpisodeState::initial(params);
    let mut states = Vec::with_capacity(params.n_steps);
    let mut fills = Vec::with_capacity(params.n_steps);
    for _ in 0..params.n_steps {
        let volume = policy(&state, traj)?;
        let (next, fill, _) = step_market(&state, volume, traj, params, rng)?;
        states.push(state);
        fills.push(fill);
        state = next;
    }
    if state.q != 0 {
        return Err(contract(format!(
            "episode ended with {} shares unsold",
            state.q
        )));
    }
    let shortfall = implementation_shortfall(params.s0, params.q0, &fills)?;
    Ok(EpisodeOutcome {
        states,
        fills,
        cash: state.cash,
        shortfall,
    })
}
