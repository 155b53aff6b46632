//! Grid path planning and the waypoint-following controller.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::{PI, SQRT_2};

use crate::error::EnvError;
use crate::grid::{offset, Cell, OccupancyGrid, NEIGHBOURS_8};
use crate::pose::{wrap_angle, Action, AgentPose, MotionConfig};
use crate::state::GlobalMapState;

/// Per-cell traversal cost multipliers; infinite means blocked.
#[derive(Debug, Clone, PartialEq)]
pub struct CostGrid {
    side: usize,
    cost: Vec<f64>,
}

impl CostGrid {
    pub fn new(side: usize, cost: Vec<f64>) -> Result<Self, EnvError> {
        if cost.len() != side * side {
            return Err(EnvError::contract("CostGrid::new", format!("{} costs for side {side}", cost.len())));
        }
        if cost.iter().any(|c| c.is_nan() || *c < 1.0) {
            return Err(EnvError::contract("CostGrid::new", "costs must be >= 1 (or infinite)"));
        }
        Ok(Self { side, cost })
    }

    /// Known obstacles block, known free costs 1, unknown costs `unknown_cost`.
    pub fn from_map(h: &GlobalMapState, unknown_cost: f64) -> Self {
        let n = h.side();
        let cost = (0..n * n)
            .map(|i| {
                let cell = (i / n, i % n);
                if h.is_obstacle(cell) {
                    f64::INFINITY
                } else if h.is_explored(cell) {
                    1.0
                } else {
                    unknown_cost
                }
            })
            .collect();
        Self { side: n, cost }
    }

    /// Fully known map: free costs 1.
    pub fn from_grid(grid: &OccupancyGrid) -> Self {
        let n = grid.side();
        let cost = (0..n * n)
            .map(|i| if grid.is_obstacle((i / n, i % n)) { f64::INFINITY } else { 1.0 })
            .collect();
        Self { side: n, cost }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn cost(&self, cell: Cell) -> f64 {
        self.cost[cell.0 * self.side + cell.1]
    }

    pub fn blocked(&self, cell: Cell) -> bool {
        self.cost(cell).is_infinite()
    }

    /// Successors of `cell` with step costs. Diagonal moves need both
    /// orthogonal neighbours open.
    pub fn neighbours(&self, cell: Cell) -> impl Iterator<Item = (Cell, f64)> + '_ {
        NEIGHBOURS_8.iter().filter_map(move |&d| {
            let next = offset(cell, d, self.side)?;
            if self.blocked(next) {
                return None;
            }
            let diagonal = d.0 != 0 && d.1 != 0;
            if diagonal {
                let a = offset(cell, (d.0, 0), self.side)?;
                let b = offset(cell, (0, d.1), self.side)?;
                if self.blocked(a) || self.blocked(b) {
                    return None;
                }
            }
            let len = if diagonal { SQRT_2 } else { 1.0 };
            Some((next, len * self.cost(next)))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedPath {
    /// Start to end, inclusive; consecutive cells are 8-neighbours.
    pub cells: Vec<Cell>,
    pub cost: f64,
    /// False when the goal was unreachable and the path ends at the
    /// reachable cell nearest to it.
    pub reached_goal: bool,
}

impl PlannedPath {
    pub fn end(&self) -> Cell {
        *self.cells.last().expect("paths are non-empty")
    }

    /// Geometric length in cells.
    pub fn length(&self) -> f64 {
        self.cells
            .windows(2)
            .map(|w| if w[0].0 != w[1].0 && w[0].1 != w[1].1 { SQRT_2 } else { 1.0 })
            .sum()
    }
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    g: f64,
    index: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on f, then prefer deeper nodes, then lower index
        other
            .f
            .total_cmp(&self.f)
            .then(self.g.total_cmp(&other.g))
            .then(other.index.cmp(&self.index))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn octile(a: Cell, b: Cell) -> f64 {
    let dr = a.0.abs_diff(b.0) as f64;
    let dc = a.1.abs_diff(b.1) as f64;
    dr.max(dc) + (SQRT_2 - 1.0) * dr.min(dc)
}

/// A* over the 8-connected grid with an octile heuristic (admissible since
/// every cost multiplier is at least 1). An unreachable goal yields the
/// path to the reachable cell closest to it in straight-line distance.
pub fn shortest_path(costs: &CostGrid, start: Cell, goal: Cell) -> Result<PlannedPath, EnvError> {
    let n = costs.side();
    if start.0 >= n || start.1 >= n || goal.0 >= n || goal.1 >= n {
        return Err(EnvError::contract("shortest_path", format!("{start:?} -> {goal:?} outside side {n}")));
    }
    if costs.blocked(start) {
        return Err(EnvError::contract("shortest_path", format!("start {start:?} is an obstacle")));
    }
    let mut g = vec![f64::INFINITY; n * n];
    let mut parent = vec![usize::MAX; n * n];
    let mut closed = vec![false; n * n];
    let idx = |c: Cell| c.0 * n + c.1;
    let mut open = BinaryHeap::new();
    g[idx(start)] = 0.0;
    open.push(Open {
        f: octile(start, goal),
        g: 0.0,
        index: idx(start),
    });
    let mut reached = None;
    while let Some(Open { index, .. }) = open.pop() {
        if closed[index] {
            continue;
        }
        closed[index] = true;
        let cell = (index / n, index % n);
        if cell == goal {
            reached = Some(index);
            break;
        }
        for (next, step) in costs.neighbours(cell) {
            let j = idx(next);
            let cand = g[index] + step;
            if !closed[j] && cand < g[j] {
                g[j] = cand;
                parent[j] = index;
                open.push(Open {
                    f: cand + octile(next, goal),
                    g: cand,
                    index: j,
                });
            }
        }
    }
    let (end, reached_goal) = match reached {
        Some(i) => (i, true),
        None => {
            // the whole reachable set is closed; pick the nearest to the goal
            let dist = |i: usize| {
                let (r, c) = ((i / n) as f64, (i % n) as f64);
                (r - goal.0 as f64).hypot(c - goal.1 as f64)
            };
            let best = (0..n * n)
                .filter(|&i| closed[i])
                .min_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(g[a].total_cmp(&g[b])).then(a.cmp(&b)))
                .expect("start is always closed");
            (best, false)
        }
    };
    let mut cells = vec![(end / n, end % n)];
    let mut cur = end;
    while parent[cur] != usize::MAX {
        cur = parent[cur];
        cells.push((cur / n, cur % n));
    }
    cells.reverse();
    Ok(PlannedPath {
        cells,
        cost: g[end],
        reached_goal,
    })
}

/// Every `interval`-th cell after the start, plus the final cell.
pub fn subsample_short_term_goals(path: &PlannedPath, interval: usize) -> Vec<Cell> {
    let interval = interval.max(1);
    let last = path.cells.len() - 1;
    let mut out: Vec<Cell> = (1..)
        .map(|k| k * interval)
        .take_while(|&i| i < last)
        .map(|i| path.cells[i])
        .collect();
    out.push(path.cells[last]);
    out
}

/// Turn toward the centre of `waypoint` when the heading error exceeds the
/// threshold (the smaller way round; an exact about-turn goes left),
/// otherwise step forward.
pub fn local_step(pose: &AgentPose, waypoint: Cell, motion: &MotionConfig) -> Action {
    let (tx, ty) = (waypoint.1 as f64 + 0.5, waypoint.0 as f64 + 0.5);
    let (dx, dy) = (tx - pose.x, ty - pose.y);
    if dx == 0.0 && dy == 0.0 {
        return Action::Forward;
    }
    let bearing = (-dy).atan2(dx);
    let err = wrap_angle(bearing - pose.heading);
    if err.abs() <= motion.turn_threshold_deg.to_radians() {
        Action::Forward
    } else if err.abs() >= PI - 1e-9 || err > 0.0 {
        Action::TurnLeft
    } else {
        Action::TurnRight
    }
}
