//! The global map `h` and the policy state built from it.

use symnav_nn::PolicyState;
use symnav_tensor::Tensor;

use crate::error::EnvError;
use crate::grid::Cell;
use crate::pose::AgentPose;
use crate::sensor::EgoObservation;

pub const OBSTACLE: usize = 0;
pub const EXPLORED: usize = 1;
pub const AGENT: usize = 2;
pub const VISITED: usize = 3;

/// Radius of the agent-position disk, in cells.
pub const AGENT_RADIUS: f64 = 1.5;

/// `[4, M, M]` map: obstacles, explored, agent position, visited path.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalMapState {
    side: usize,
    data: Vec<f64>,
    agent: Option<Cell>,
    /// Obstacle evidence: the obstacle channel is `hits / (hits + misses)`.
    hits: Vec<u32>,
    misses: Vec<u32>,
}

/// Evidence weight of a bump; outweighs any run of free readings.
const COLLISION_HITS: u32 = 1 << 20;

impl GlobalMapState {
    pub fn new(side: usize) -> Self {
        Self {
            side,
            data: vec![0.0; 4 * side * side],
            agent: None,
            hits: vec![0; side * side],
            misses: vec![0; side * side],
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn channel(&self, ch: usize) -> &[f64] {
        let n = self.side * self.side;
        &self.data[ch * n..(ch + 1) * n]
    }

    fn channel_mut(&mut self, ch: usize) -> &mut [f64] {
        let n = self.side * self.side;
        &mut self.data[ch * n..(ch + 1) * n]
    }

    pub fn value(&self, ch: usize, cell: Cell) -> f64 {
        self.data[(ch * self.side + cell.0) * self.side + cell.1]
    }

    pub fn is_explored(&self, cell: Cell) -> bool {
        self.value(EXPLORED, cell) >= 0.5
    }

    pub fn is_obstacle(&self, cell: Cell) -> bool {
        self.value(OBSTACLE, cell) >= 0.5
    }

    pub fn is_explored_free(&self, cell: Cell) -> bool {
        self.is_explored(cell) && !self.is_obstacle(cell)
    }

    pub fn agent_cell(&self) -> Option<Cell> {
        self.agent
    }

    pub fn tensor(&self) -> Tensor {
        Tensor::new(vec![4, self.side, self.side], self.data.clone()).expect("sized at construction")
    }

    pub fn explored_mass(&self) -> f64 {
        self.channel(EXPLORED).iter().sum()
    }

    /// Stamps the scan behind `obs`, taken from `pose`, into the map. Cells
    /// whose centre lies before the hit on the nearest ray count as free
    /// readings, cells holding a ray endpoint as obstacle readings; the
    /// obstacle channel is the hit fraction. Explored only ever grows.
    pub fn register(&mut self, obs: &EgoObservation, pose: &AgentPose) {
        let scan = obs.scan();
        let n = self.side;
        let (fx, fy) = pose.forward();
        let (rx, ry) = pose.right();
        let mut hit_cells: Vec<usize> = scan
            .endpoints()
            .filter_map(|(fwd, right)| {
                let (x, y) = (pose.x + fwd * fx + right * rx, pose.y + fwd * fy + right * ry);
                let (r, c) = (y.floor(), x.floor());
                (r >= 0.0 && c >= 0.0 && r < n as f64 && c < n as f64).then(|| r as usize * n + c as usize)
            })
            .collect();
        hit_cells.sort_unstable();
        hit_cells.dedup();

        let reach = scan.range.ceil() as isize + 1;
        let (pr, pc) = (pose.y.floor() as isize, pose.x.floor() as isize);
        for r in (pr - reach).max(0)..(pr + reach + 1).min(n as isize) {
            for c in (pc - reach).max(0)..(pc + reach + 1).min(n as isize) {
                let idx = r as usize * n + c as usize;
                let (dx, dy) = (c as f64 + 0.5 - pose.x, r as f64 + 0.5 - pose.y);
                let fwd = dx * fx + dy * fy;
                let right = dx * rx + dy * ry;
                if hit_cells.binary_search(&idx).is_err() && scan.sees_free(fwd.hypot(right), (-right).atan2(fwd)) {
                    self.misses[idx] += 1;
                    self.data[EXPLORED * n * n + idx] = 1.0;
                    self.refresh_obstacle(idx);
                }
            }
        }
        for idx in hit_cells {
            self.hits[idx] = self.hits[idx].saturating_add(1);
            self.data[EXPLORED * n * n + idx] = 1.0;
            self.refresh_obstacle(idx);
        }
    }

    fn refresh_obstacle(&mut self, idx: usize) {
        let (h, m) = (self.hits[idx] as f64, self.misses[idx] as f64);
        let n = self.side;
        self.data[OBSTACLE * n * n + idx] = if h + m > 0.0 { h / (h + m) } else { 0.0 };
    }

    /// Moves the agent disk and extends the visited path.
    pub fn place_agent(&mut self, pose: &AgentPose) {
        let n = self.side;
        let cell = pose.cell();
        let cell = (cell.0.min(n - 1), cell.1.min(n - 1));
        self.channel_mut(AGENT).fill(0.0);
        let reach = AGENT_RADIUS.ceil() as isize;
        for dr in -reach..=reach {
            for dc in -reach..=reach {
                if ((dr * dr + dc * dc) as f64).sqrt() > AGENT_RADIUS {
                    continue;
                }
                let (r, c) = (cell.0 as isize + dr, cell.1 as isize + dc);
                if r >= 0 && c >= 0 && (r as usize) < n && (c as usize) < n {
                    self.channel_mut(AGENT)[r as usize * n + c as usize] = 1.0;
                }
            }
        }
        self.channel_mut(VISITED)[cell.0 * n + cell.1] = 1.0;
        self.agent = Some(cell);
    }

    /// Records a bump: the cell is an obstacle and is now known.
    pub fn mark_collision(&mut self, cell: Cell) {
        let idx = cell.0 * self.side + cell.1;
        self.hits[idx] = self.hits[idx].saturating_add(COLLISION_HITS);
        self.channel_mut(EXPLORED)[idx] = 1.0;
        self.refresh_obstacle(idx);
    }

    /// For test fixtures.
    pub fn set(&mut self, ch: usize, cell: Cell, value: f64) {
        let n = self.side;
        self.channel_mut(ch)[cell.0 * n + cell.1] = value;
    }
}

/// Explored area in m².
pub fn coverage(h: &GlobalMapState, cell_size: f64) -> f64 {
    h.explored_mass() * cell_size * cell_size
}

pub fn step_reward(before: &GlobalMapState, after: &GlobalMapState, cell_size: f64) -> f64 {
    coverage(after, cell_size) - coverage(before, cell_size)
}

/// Concatenates the local crop around `pose` (zero outside the map) with the
/// area-averaged downscale of the whole map.
pub fn make_policy_state(h: &GlobalMapState, pose: &AgentPose, g: usize) -> Result<PolicyState, EnvError> {
    let m = h.side();
    if g == 0 || m < g || m % g != 0 {
        return Err(EnvError::contract(
            "make_policy_state",
            format!("map side {m} is not a positive multiple of G={g}"),
        ));
    }
    let f = m / g;
    let inv = 1.0 / (f * f) as f64;
    let (ar, ac) = pose.cell();
    let (r0, c0) = (ar as isize - (g / 2) as isize, ac as isize - (g / 2) as isize);
    let mut data = vec![0.0; 8 * g * g];
    for ch in 0..4 {
        let src = h.channel(ch);
        for i in 0..g {
            for j in 0..g {
                let (r, c) = (r0 + i as isize, c0 + j as isize);
                if r >= 0 && c >= 0 && (r as usize) < m && (c as usize) < m {
                    data[(ch * g + i) * g + j] = src[r as usize * m + c as usize];
                }
                let mut acc = 0.0;
                for a in 0..f {
                    let row = &src[(i * f + a) * m + j * f..(i * f + a) * m + j * f + f];
                    acc += row.iter().sum::<f64>();
                }
                data[((4 + ch) * g + i) * g + j] = acc * inv;
            }
        }
    }
    Ok(PolicyState::new(Tensor::new(vec![8, g, g], data)?)?)
}
