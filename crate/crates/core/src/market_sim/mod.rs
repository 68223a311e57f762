//! Market simulator: impact trajectories, price dynamics and implementation shortfall.

mod episode;
mod impact;
mod scenario;

pub use episode::{
    expected_cost, implementation_shortfall, simulate_episode, step_market, EpisodeOutcome,
    EpisodeState, Fill, MarketParams,
};
pub use impact::{
    cir_trajectory, constant_trajectory, correlated_normals, linear_trajectory, CirImpactSpec,
    ImpactTrajectory, LinearImpactSpec, CIR_SUBSTEPS, IMPACT_FLOOR,
};
pub use scenario::{episode_rng, EpisodeRng, ImpactModel, Phase, Scenario};
