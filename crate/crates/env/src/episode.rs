//! One exploration episode: ground truth, noisy pose estimate, global map.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use symnav_nn::PolicyState;

use crate::error::EnvError;
use crate::grid::{Cell, OccupancyGrid};
use crate::planning::{local_step, shortest_path, subsample_short_term_goals, CostGrid};
use crate::pose::{apply_action, wrap_angle, Action, AgentPose, MotionConfig};
use crate::sensor::{sense, SensorConfig};
use crate::state::{coverage, make_policy_state, GlobalMapState};

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    /// Map side M in cells.
    pub side: usize,
    pub cell_size: f64,
    pub v: usize,
    pub fov_deg: f64,
    /// Policy-state side G.
    pub g: usize,
    pub episode_steps: usize,
    /// Environment steps between global decisions.
    pub decision_interval: usize,
    pub motion: MotionConfig,
    pub unknown_cost: f64,
    /// Cells between short-term goals along a planned path.
    pub waypoint_interval: usize,
    /// Range noise in m.
    pub range_noise: f64,
    /// Per-step position noise of the pose estimate, in cells.
    pub pose_noise: f64,
    /// Per-step heading noise of the pose estimate, in degrees.
    pub heading_noise_deg: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            side: 128,
            cell_size: 0.25,
            v: 32,
            fov_deg: 90.0,
            g: 64,
            episode_steps: 1000,
            decision_interval: 25,
            motion: MotionConfig::default(),
            unknown_cost: 1.5,
            waypoint_interval: 4,
            range_noise: 0.0,
            pose_noise: 0.0,
            heading_noise_deg: 0.0,
        }
    }
}

impl EnvConfig {
    /// Defaults with the sensing and odometry noise used for headline runs.
    pub fn noisy() -> Self {
        Self {
            range_noise: 0.05,
            pose_noise: 0.01,
            heading_noise_deg: 0.2,
            ..Self::default()
        }
    }

    pub fn sensor(&self) -> SensorConfig {
        SensorConfig {
            range_noise: self.range_noise / self.cell_size,
            fov_deg: self.fov_deg,
            ..SensorConfig::new(self.v)
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.side < 16 {
            return Err(EnvError::config("env.M", format!("{} is below 16", self.side)));
        }
        if !(self.cell_size > 0.0) {
            return Err(EnvError::config("env.cell_size", "must be positive"));
        }
        if self.v < 4 || self.v % 2 != 0 {
            return Err(EnvError::config("env.v", format!("{} must be even and >= 4", self.v)));
        }
        if !(self.fov_deg > 0.0 && self.fov_deg <= 360.0) {
            return Err(EnvError::config("env.fov_deg", "must lie in (0, 360]"));
        }
        if self.g == 0 || self.side % self.g != 0 {
            return Err(EnvError::config("env.G", format!("{} must divide M={}", self.g, self.side)));
        }
        if self.episode_steps == 0 {
            return Err(EnvError::config("env.episode_steps", "must be positive"));
        }
        if self.decision_interval == 0 {
            return Err(EnvError::config("env.decision_interval", "must be positive"));
        }
        if !(self.unknown_cost >= 1.0) {
            return Err(EnvError::config("env.unknown_cost", "must be >= 1"));
        }
        if !(self.motion.step > 0.0 && self.motion.turn_deg > 0.0) {
            return Err(EnvError::config("env.step", "step and turn must be positive"));
        }
        if self.range_noise < 0.0 || self.pose_noise < 0.0 || self.heading_noise_deg < 0.0 {
            return Err(EnvError::config("env.noise", "noise levels must be non-negative"));
        }
        Ok(())
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        vec![
            ("env.M".into(), self.side.to_string()),
            ("env.cell_size".into(), self.cell_size.to_string()),
            ("env.v".into(), self.v.to_string()),
            ("env.fov_deg".into(), self.fov_deg.to_string()),
            ("env.G".into(), self.g.to_string()),
            ("env.episode_steps".into(), self.episode_steps.to_string()),
            ("env.decision_interval".into(), self.decision_interval.to_string()),
            ("env.step".into(), self.motion.step.to_string()),
            ("env.turn_deg".into(), self.motion.turn_deg.to_string()),
            ("env.turn_threshold_deg".into(), self.motion.turn_threshold_deg.to_string()),
            ("env.unknown_cost".into(), self.unknown_cost.to_string()),
            ("env.waypoint_interval".into(), self.waypoint_interval.to_string()),
            ("env.range_noise".into(), self.range_noise.to_string()),
            ("env.pose_noise".into(), self.pose_noise.to_string()),
            ("env.heading_noise_deg".into(), self.heading_noise_deg.to_string()),
        ]
    }

    /// Applies one `env.*` key; returns false for keys of other namespaces.
    pub fn apply_pair(&mut self, key: &str, value: &str) -> Result<bool, EnvError> {
        fn parse<T: std::str::FromStr>(field: &'static str, v: &str) -> Result<T, EnvError> {
            v.trim()
                .parse()
                .map_err(|_| EnvError::config(field, format!("cannot parse {v:?}")))
        }
        match key {
            "env.M" => self.side = parse("env.M", value)?,
            "env.cell_size" => self.cell_size = parse("env.cell_size", value)?,
            "env.v" => self.v = parse("env.v", value)?,
            "env.fov_deg" => self.fov_deg = parse("env.fov_deg", value)?,
            "env.G" => self.g = parse("env.G", value)?,
            "env.episode_steps" => self.episode_steps = parse("env.episode_steps", value)?,
            "env.decision_interval" => self.decision_interval = parse("env.decision_interval", value)?,
            "env.step" => self.motion.step = parse("env.step", value)?,
            "env.turn_deg" => self.motion.turn_deg = parse("env.turn_deg", value)?,
            "env.turn_threshold_deg" => self.motion.turn_threshold_deg = parse("env.turn_threshold_deg", value)?,
            "env.unknown_cost" => self.unknown_cost = parse("env.unknown_cost", value)?,
            "env.waypoint_interval" => self.waypoint_interval = parse("env.waypoint_interval", value)?,
            "env.range_noise" => self.range_noise = parse("env.range_noise", value)?,
            "env.pose_noise" => self.pose_noise = parse("env.pose_noise", value)?,
            "env.heading_noise_deg" => self.heading_noise_deg = parse("env.heading_noise_deg", value)?,
            k if k.starts_with("env.") => return Err(EnvError::config("env", format!("unknown key {k:?}"))),
            _ => return Ok(false),
        }
        Ok(true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub step: usize,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub coverage: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavOutcome {
    pub reward: f64,
    pub steps: usize,
    pub arrived: bool,
}

#[derive(Debug, Clone)]
pub struct Environment {
    cfg: EnvConfig,
    grid: Arc<OccupancyGrid>,
    pose: AgentPose,
    estimate: AgentPose,
    map: GlobalMapState,
    t: usize,
    rng: ChaCha8Rng,
    log: Vec<LogRow>,
    collisions: usize,
}

/// Arrival radius around a goal cell centre, in cells.
const ARRIVAL: f64 = 1.0;

impl Environment {
    /// Starts an episode at a seeded open cell with a seeded heading.
    pub fn new(grid: Arc<OccupancyGrid>, cfg: EnvConfig, seed: u64) -> Result<Self, EnvError> {
        cfg.validate()?;
        if grid.side() != cfg.side {
            return Err(EnvError::config(
                "env.M",
                format!("map side {} differs from configured {}", grid.side(), cfg.side),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let starts = grid.open_cells();
        if starts.is_empty() {
            return Err(EnvError::contract("Environment::new", "map has no open start cell"));
        }
        let start = starts[rng.random_range(0..starts.len())];
        let turns = (360.0 / cfg.motion.turn_deg).round().max(1.0) as usize;
        let heading = (rng.random_range(0..turns) as f64 * cfg.motion.turn_deg).to_radians();
        Self::with_pose(grid, cfg, AgentPose::at_cell(start, heading), rng)
    }

    /// Starts at a given pose; `seed` drives only the noise.
    pub fn at_pose(grid: Arc<OccupancyGrid>, cfg: EnvConfig, pose: AgentPose, seed: u64) -> Result<Self, EnvError> {
        cfg.validate()?;
        if grid.blocked_at(pose.y.floor() as isize, pose.x.floor() as isize) {
            return Err(EnvError::contract("Environment::at_pose", "pose is not in a free cell"));
        }
        Self::with_pose(grid, cfg, pose, ChaCha8Rng::seed_from_u64(seed))
    }

    fn with_pose(grid: Arc<OccupancyGrid>, cfg: EnvConfig, pose: AgentPose, rng: ChaCha8Rng) -> Result<Self, EnvError> {
        let side = grid.side();
        let mut env = Self {
            cfg,
            grid,
            pose,
            estimate: pose,
            map: GlobalMapState::new(side),
            t: 0,
            rng,
            log: Vec::new(),
            collisions: 0,
        };
        env.observe();
        Ok(env)
    }

    fn observe(&mut self) {
        let obs = sense(&self.grid, &self.pose, &self.cfg.sensor(), &mut self.rng);
        self.map.register(&obs, &self.estimate);
        self.map.place_agent(&self.estimate);
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn pose(&self) -> &AgentPose {
        &self.pose
    }

    /// Pose the agent believes it has; equals `pose` without noise.
    pub fn estimate(&self) -> &AgentPose {
        &self.estimate
    }

    pub fn map(&self) -> &GlobalMapState {
        &self.map
    }

    pub fn steps_taken(&self) -> usize {
        self.t
    }

    pub fn done(&self) -> bool {
        self.t >= self.cfg.episode_steps
    }

    pub fn coverage(&self) -> f64 {
        coverage(&self.map, self.cfg.cell_size)
    }

    pub fn collisions(&self) -> usize {
        self.collisions
    }

    pub fn log(&self) -> &[LogRow] {
        &self.log
    }

    /// Fraction of the ground-truth free cells that are explored.
    pub fn free_fraction_explored(&self) -> f64 {
        let free = self.grid.free_count();
        let seen = self.grid.free_cells().filter(|&c| self.map.is_explored(c)).count();
        seen as f64 / free.max(1) as f64
    }

    pub fn policy_state(&self) -> Result<PolicyState, EnvError> {
        make_policy_state(&self.map, &self.estimate, self.cfg.g)
    }

    /// Map cell at the centre of goal-lattice cell `index` on a
    /// `side x side` lattice over the whole map.
    pub fn lattice_goal(&self, index: usize, side: usize) -> Cell {
        let block = self.cfg.side / side;
        let (r, c) = (index / side, index % side);
        (r * block + block / 2, c * block + block / 2)
    }

    /// One environment step; returns the coverage gained in m².
    pub fn step(&mut self, action: Action) -> f64 {
        let before = self.coverage();
        let motion = apply_action(&self.grid, &self.pose, action, &self.cfg.motion);
        let travelled = motion.travelled;
        self.pose = motion.pose;

        // odometry: the commanded motion as executed, plus noise
        let (fx, fy) = self.estimate.forward();
        let mut est = AgentPose {
            x: self.estimate.x + fx * travelled,
            y: self.estimate.y + fy * travelled,
            heading: wrap_angle(self.estimate.heading + turn_delta(action, &self.cfg.motion)),
        };
        if self.cfg.pose_noise > 0.0 {
            let n = Normal::new(0.0, self.cfg.pose_noise).expect("positive sigma");
            est.x += n.sample(&mut self.rng);
            est.y += n.sample(&mut self.rng);
        }
        if self.cfg.heading_noise_deg > 0.0 {
            let n = Normal::new(0.0, self.cfg.heading_noise_deg.to_radians()).expect("positive sigma");
            est.heading = wrap_angle(est.heading + n.sample(&mut self.rng));
        }
        let max = self.cfg.side as f64 - 1e-6;
        est.x = est.x.clamp(0.0, max);
        est.y = est.y.clamp(0.0, max);
        self.estimate = est;

        if let Some((dr, dc)) = motion.blocked_by {
            // the bump sensor reports the blocking cell relative to the agent
            self.collisions += 1;
            let here = self.estimate.cell();
            if let Some(cell) = crate::grid::offset(here, (dr, dc), self.cfg.side) {
                if cell != here {
                    self.map.mark_collision(cell);
                }
            }
        }
        self.observe();
        self.t += 1;
        let reward = self.coverage() - before;
        self.log.push(LogRow {
            step: self.t,
            x: self.pose.x,
            y: self.pose.y,
            heading: self.pose.heading,
            coverage: self.coverage(),
            reward,
        });
        reward
    }

    /// Plans on the current map and picks the next action toward `goal`,
    /// or `None` once the agent is within the arrival radius of the goal or
    /// of the nearest reachable cell to it.
    pub fn next_action(&self, goal: Cell) -> Result<Option<Action>, EnvError> {
        let n = self.cfg.side;
        let goal = (goal.0.min(n - 1), goal.1.min(n - 1));
        if self.estimate.distance_to(goal) <= ARRIVAL {
            return Ok(None);
        }
        let costs = CostGrid::from_map(&self.map, self.cfg.unknown_cost);
        let start = self.estimate.cell();
        let start = if costs.blocked(start) {
            // a noisy estimate can land on a marked obstacle; plan from the
            // cheapest free neighbour instead
            match crate::grid::NEIGHBOURS_8
                .iter()
                .filter_map(|&d| crate::grid::offset(start, d, n))
                .find(|&c| !costs.blocked(c))
            {
                Some(c) => c,
                None => return Ok(None),
            }
        } else {
            start
        };
        let path = shortest_path(&costs, start, goal)?;
        if !path.reached_goal && self.estimate.distance_to(path.end()) <= ARRIVAL {
            return Ok(None);
        }
        if path.cells.len() == 1 {
            return Ok(None);
        }
        let waypoints = subsample_short_term_goals(&path, self.cfg.waypoint_interval);
        // aim at the first short-term goal the agent is not already at; if
        // the straight line there clips a known obstacle, follow the path
        // cell by cell instead
        let target = waypoints
            .iter()
            .copied()
            .find(|&w| self.estimate.distance_to(w) > 0.5)
            .unwrap_or(path.end());
        let target = if segment_clear(&costs, &self.estimate, target) {
            target
        } else {
            path.cells[1]
        };
        Ok(Some(local_step(&self.estimate, target, &self.cfg.motion)))
    }

    /// Runs the navigation loop toward `goal` for at most `max_steps` steps,
    /// stopping early on arrival or at the end of the episode.
    pub fn navigate(&mut self, goal: Cell, max_steps: usize) -> Result<NavOutcome, EnvError> {
        let mut out = NavOutcome {
            reward: 0.0,
            steps: 0,
            arrived: false,
        };
        while out.steps < max_steps && !self.done() {
            match self.next_action(goal)? {
                None => {
                    out.arrived = true;
                    break;
                }
                Some(a) => {
                    out.reward += self.step(a);
                    out.steps += 1;
                }
            }
        }
        if !out.arrived && !self.done() {
            out.arrived = self.next_action(goal)?.is_none();
        }
        Ok(out)
    }

    /// Navigates toward `goal` for one decision interval (or until arrival);
    /// at least one step is always taken so a decision cannot stall.
    pub fn run_decision(&mut self, goal: Cell) -> Result<NavOutcome, EnvError> {
        let budget = self.cfg.decision_interval.min(self.cfg.episode_steps - self.t.min(self.cfg.episode_steps));
        let mut out = self.navigate(goal, budget)?;
        if out.steps == 0 && !self.done() {
            out.reward += self.step(Action::TurnLeft);
            out.steps = 1;
        }
        Ok(out)
    }

    /// Episode log as CSV: step, x, y, heading, coverage_m2, reward.
    pub fn log_csv(&self) -> String {
        let mut s = String::from("step,x,y,heading,coverage_m2,reward\n");
        for r in &self.log {
            let _ = writeln!(s, "{},{},{},{},{},{}", r.step, r.x, r.y, r.heading, r.coverage, r.reward);
        }
        s
    }
}

/// Whether the straight segment from the pose to the centre of `target`
/// stays in unblocked cells without squeezing between blocked corners.
fn segment_clear(costs: &CostGrid, from: &AgentPose, target: Cell) -> bool {
    let (tx, ty) = (target.1 as f64 + 0.5, target.0 as f64 + 0.5);
    let len = (tx - from.x).hypot(ty - from.y);
    let steps = (len / 0.05).ceil().max(1.0) as usize;
    let n = costs.side() as isize;
    let blocked = |r: isize, c: isize| r < 0 || c < 0 || r >= n || c >= n || costs.blocked((r as usize, c as usize));
    let (mut r0, mut c0) = (from.y.floor() as isize, from.x.floor() as isize);
    for k in 1..=steps {
        let t = k as f64 / steps as f64;
        let (x, y) = (from.x + (tx - from.x) * t, from.y + (ty - from.y) * t);
        let (r1, c1) = (y.floor() as isize, x.floor() as isize);
        if blocked(r1, c1) || (r0 != r1 && c0 != c1 && (blocked(r0, c1) || blocked(r1, c0))) {
            return false;
        }
        (r0, c0) = (r1, c1);
    }
    true
}

fn turn_delta(action: Action, motion: &MotionConfig) -> f64 {
    match action {
        Action::Forward => 0.0,
        Action::TurnLeft => motion.turn_deg.to_radians(),
        Action::TurnRight => -motion.turn_deg.to_radians(),
    }
}
