//! Synthetic worlds and an exact 2D LiDAR.

mod lidar;
mod scenario;
pub mod suite;

pub use lidar::{simulate_future_sweeps, simulate_sweep};
pub use scenario::{expert_trajectory, Mover, Pose, Scenario, SensorConfig, SweepRate};
pub use suite::{
    equidistant_suite, expert_collides, generate_scenario_suite, generate_scenario_suite_at,
    scenario_kind, scenario_kind_names, EquidistantCase, ScenarioKind,
};
