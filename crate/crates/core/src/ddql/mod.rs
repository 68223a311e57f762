//! Liquidation agent trained by double deep Q-learning.

mod agent;
mod features;
mod memory;
mod policy;

pub use agent::{
    compute_targets, explore_action, train, train_with, Agent, EpisodeLog, RewardBaseline,
    TrainConfig,
};
pub use features::{normalize_features, FeatureMode, FeatureScaler, PriceBounds};
pub use memory::{Observation, ReplayMemory, Transition};
pub use policy::{
    evaluate, feasible_actions, policy_heatmap, ArgmaxScratch, Evaluation, HeatmapCell, Policy,
    HEATMAP_PRICE_LEVELS, POLICY_MAGIC,
};
