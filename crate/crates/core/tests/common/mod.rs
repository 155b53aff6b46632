#![allow(dead_code)]

use std::sync::Arc;

use symnav_core::RunConfig;
use symnav_env::{AgentPose, EnvConfig, OccupancyGrid};
use symnav_nn::{ModelVariant, NetConfig};

/// 32-cell maps, 16-cell policy state, a few thousand parameters.
pub fn small_run(variant: ModelVariant) -> RunConfig {
    let mut cfg = RunConfig::reduced();
    cfg.variant = variant;
    cfg.env = EnvConfig { side: 32, cell_size: 0.5, v: 8, g: 16, episode_steps: 120, decision_interval: 10, ..EnvConfig::default() };
    cfg.net = NetConfig { g: 16, widths: vec![4, 4, 8, 8, 8], actor_hidden: 32, critic_hidden: 16, ..NetConfig::default() };
    cfg.train.envs = 4;
    cfg.train.rollout_len = 6;
    cfg.train.maps = 4;
    cfg
}

/// A long east-west room; everything outside it is wall.
pub fn long_room(side: usize, cell_size: f64) -> Arc<OccupancyGrid> {
    let mut g = OccupancyGrid::solid(side, cell_size);
    for r in side * 5 / 16..side * 11 / 16 {
        for c in 1..side - 1 {
            g.set_free((r, c), true);
        }
    }
    Arc::new(g)
}

/// West end of [`long_room`], facing north into the wall.
pub fn west_end(side: usize) -> AgentPose {
    AgentPose::at_cell((side / 2, 2), -std::f64::consts::FRAC_PI_2)
}
