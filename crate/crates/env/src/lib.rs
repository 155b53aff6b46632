//! Desk-scale exploration: procedural floorplans, ray-cast sensing into a
//! global map, A* planning with a waypoint controller, and frontier-based
//! goal selection.

mod episode;
mod error;
pub mod frontier;
pub mod grid;
pub mod mapgen;
pub mod planning;
pub mod pose;
pub mod sensor;
pub mod state;

pub use episode::{EnvConfig, Environment, LogRow, NavOutcome};
pub use error::EnvError;
pub use frontier::{detect_frontiers, fbe_rl_select_goal, fbe_select_goal, frontiers_from_masks, FrontierGoal, FrontierMap};
pub use grid::{Cell, OccupancyGrid};
pub use mapgen::{generate_map, MapGeneratorSpec, Suite};
pub use planning::{local_step, shortest_path, subsample_short_term_goals, CostGrid, PlannedPath};
pub use pose::{apply_action, Action, AgentPose, Motion, MotionConfig};
pub use sensor::{cast_ray, sense, EgoObservation, RangeScan, SensorConfig};
pub use state::{coverage, make_policy_state, step_reward, GlobalMapState};
