//! Max-margin BEV motion planning.

pub mod bank;
pub mod cost;
pub mod margin;
pub mod planner;
pub mod sampler;
pub mod train;
mod trajectory;

pub use bank::{BankConfig, TrajectoryBank};
pub use cost::{
    compose_costmap, occupancy_cost_shortcut, trajectory_cost, waypoint_voxels, CostMap,
    DEFAULT_OUT_OF_BOUNDS_COST,
};
pub use margin::{
    candidate_margins, margin, margin_penalty, FreespaceMask, MarginPenalty, PenaltyContext,
    PenaltySpec, DEFAULT_GAMMA,
};
pub use planner::{candidate_costs, plan, PlanChoice};
pub use sampler::{sample_model_driven, sampler, Horizon, SamplerConfig, TrajectorySampler};
pub use train::{
    max_margin_loss, train_residual, MarginLoss, ResidualFit, ResidualProblem, TrainConfig,
    DEFAULT_ALPHA,
};
pub use trajectory::{EgoState, PastTrack, Trajectory, Waypoint};
