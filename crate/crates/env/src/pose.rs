//! Agent pose and the discrete motion model.

use std::f64::consts::PI;

use crate::grid::{Cell, OccupancyGrid};

/// Continuous pose in cell units. Cell `(r, c)` spans `[c, c+1) x [r, r+1)`
/// in `(x, y)`. Heading 0 faces +x; positive headings turn
/// counter-clockwise as the map is printed (rows grow downwards).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentPose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl AgentPose {
    pub fn at_cell(cell: Cell, heading: f64) -> Self {
        Self {
            x: cell.1 as f64 + 0.5,
            y: cell.0 as f64 + 0.5,
            heading: wrap_angle(heading),
        }
    }

    pub fn cell(&self) -> Cell {
        (self.y.floor().max(0.0) as usize, self.x.floor().max(0.0) as usize)
    }

    /// Unit vector of the heading in `(x, y)`.
    pub fn forward(&self) -> (f64, f64) {
        (self.heading.cos(), -self.heading.sin())
    }

    /// Unit vector to the agent's right in `(x, y)`.
    pub fn right(&self) -> (f64, f64) {
        (self.heading.sin(), self.heading.cos())
    }

    pub fn distance_to(&self, cell: Cell) -> f64 {
        (cell.1 as f64 + 0.5 - self.x).hypot(cell.0 as f64 + 0.5 - self.y)
    }
}

/// Wraps into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut a = a.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Forward,
    TurnLeft,
    TurnRight,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionConfig {
    /// Forward step in cells.
    pub step: f64,
    pub turn_deg: f64,
    pub turn_threshold_deg: f64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            step: 1.0,
            turn_deg: 10.0,
            turn_threshold_deg: 15.0,
        }
    }
}

const SUBSTEP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Motion {
    pub pose: AgentPose,
    /// Distance moved, in cells.
    pub travelled: f64,
    /// `(dr, dc)` from the final cell to the obstacle cell that stopped a
    /// forward move short.
    pub blocked_by: Option<(isize, isize)>,
}

/// Applies `action` on the ground-truth grid. Forward motion stops at the
/// last point before an obstacle or a diagonal squeeze between two
/// obstacle corners.
pub fn apply_action(grid: &OccupancyGrid, pose: &AgentPose, action: Action, motion: &MotionConfig) -> Motion {
    let turned = |delta: f64| Motion {
        pose: AgentPose {
            heading: wrap_angle(pose.heading + delta),
            ..*pose
        },
        travelled: 0.0,
        blocked_by: None,
    };
    match action {
        Action::TurnLeft => turned(motion.turn_deg.to_radians()),
        Action::TurnRight => turned(-motion.turn_deg.to_radians()),
        Action::Forward => {
            let (fx, fy) = pose.forward();
            let steps = (motion.step / SUBSTEP).round() as usize;
            let mut current = *pose;
            let mut travelled = 0.0;
            let mut blocked_by = None;
            for k in 1..=steps {
                let d = (k as f64 * SUBSTEP).min(motion.step);
                let next = AgentPose {
                    x: pose.x + fx * d,
                    y: pose.y + fy * d,
                    heading: pose.heading,
                };
                if let Some(cell) = blocker(grid, &current, &next) {
                    blocked_by = Some(cell);
                    break;
                }
                current = next;
                travelled = d;
            }
            Motion {
                pose: current,
                travelled,
                blocked_by,
            }
        }
    }
}

/// Offset of the obstacle cell preventing the move `from -> to`, if any.
fn blocker(grid: &OccupancyGrid, from: &AgentPose, to: &AgentPose) -> Option<(isize, isize)> {
    let (r0, c0) = (from.y.floor() as isize, from.x.floor() as isize);
    let (r1, c1) = (to.y.floor() as isize, to.x.floor() as isize);
    if grid.blocked_at(r1, c1) {
        return Some((r1 - r0, c1 - c0));
    }
    if r0 != r1 && c0 != c1 {
        // no corner cutting
        if grid.blocked_at(r0, c1) {
            return Some((0, c1 - c0));
        }
        if grid.blocked_at(r1, c0) {
            return Some((r1 - r0, 0));
        }
    }
    None
}
