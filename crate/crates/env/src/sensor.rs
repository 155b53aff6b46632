//! Ray-cast depth sensing into an egocentric top-down patch.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use symnav_tensor::Tensor;

use crate::grid::OccupancyGrid;
use crate::pose::AgentPose;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorConfig {
    /// Side of the egocentric patch in cells.
    pub v: usize,
    pub fov_deg: f64,
    /// Maximum range in cells.
    pub range: f64,
    /// Standard deviation of per-ray range noise, in cells.
    pub range_noise: f64,
}

impl SensorConfig {
    pub fn new(v: usize) -> Self {
        Self {
            v,
            fov_deg: 90.0,
            range: v as f64 / 2.0,
            range_noise: 0.0,
        }
    }

    pub fn ray_count(&self) -> usize {
        // roughly two rays per cell of arc at full range
        ((self.fov_deg.to_radians() * self.range * 2.0).ceil() as usize).max(8)
    }

    fn full_circle(&self) -> bool {
        self.fov_deg >= 360.0
    }

    /// Angle of ray `k` relative to the heading, positive to the left.
    fn ray_angle(&self, k: usize, n: usize) -> f64 {
        if self.full_circle() {
            -PI + 2.0 * PI * k as f64 / n as f64
        } else {
            let half = self.fov_deg.to_radians() / 2.0;
            -half + 2.0 * half * k as f64 / (n - 1) as f64
        }
    }

    /// Ray closest in angle to `phi`, or `None` outside the field of view.
    fn nearest_ray(&self, phi: f64, n: usize) -> Option<usize> {
        if self.full_circle() {
            let k = ((phi + PI) / (2.0 * PI) * n as f64).round() as usize;
            Some(k % n)
        } else {
            let half = self.fov_deg.to_radians() / 2.0;
            if phi.abs() > half + 1e-12 {
                return None;
            }
            let k = ((phi + half) / (2.0 * half) * (n - 1) as f64).round() as usize;
            Some(k.min(n - 1))
        }
    }
}

/// Range readings of one sweep, in the agent frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeScan {
    pub fov_deg: f64,
    pub range: f64,
    /// Per-ray distance to the first obstacle; `None` when nothing was hit
    /// within range.
    pub hits: Vec<Option<f64>>,
}

/// How far past a reported hit distance the obstacle is stamped, so the
/// stamp lands inside the hit cell rather than on its boundary.
const HIT_DEPTH: f64 = 1e-3;

impl RangeScan {
    fn config(&self) -> SensorConfig {
        SensorConfig {
            v: 0,
            fov_deg: self.fov_deg,
            range: self.range,
            range_noise: 0.0,
        }
    }

    pub fn ray_angle(&self, k: usize) -> f64 {
        self.config().ray_angle(k, self.hits.len())
    }

    /// Whether a point at distance `s` and bearing `phi` (positive left)
    /// lies in observed free space.
    pub fn sees_free(&self, s: f64, phi: f64) -> bool {
        if s > self.range {
            return false;
        }
        if s == 0.0 {
            return true;
        }
        match self.config().nearest_ray(phi, self.hits.len()) {
            None => false,
            Some(k) => self.hits[k].is_none_or(|d| s < d),
        }
    }

    /// Obstacle points as `(forward, right)` offsets from the agent.
    pub fn endpoints(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.hits.iter().enumerate().filter_map(|(k, h)| {
            let d = (*h)? + HIT_DEPTH;
            let a = self.ray_angle(k);
            Some((d * a.cos(), -d * a.sin()))
        })
    }
}

/// `[2, v, v]` patch: channel 0 obstacles, channel 1 explored. The agent
/// sits at the centre of cell `(v/2, v/2)` facing up (decreasing row);
/// columns grow to the agent's right. The scan it was rendered from rides
/// along so registration can place it without resampling the raster.
#[derive(Debug, Clone, PartialEq)]
pub struct EgoObservation {
    data: Tensor,
    scan: RangeScan,
}

impl EgoObservation {
    pub fn tensor(&self) -> &Tensor {
        &self.data
    }

    pub fn scan(&self) -> &RangeScan {
        &self.scan
    }

    pub fn side(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn obstacle(&self, i: usize, j: usize) -> f64 {
        self.data.get(&[0, i, j])
    }

    pub fn explored(&self, i: usize, j: usize) -> f64 {
        self.data.get(&[1, i, j])
    }

    /// `(right, forward)` offset of an ego cell centre from the agent.
    pub fn cell_offset(v: usize, i: usize, j: usize) -> (f64, f64) {
        let h = (v / 2) as f64;
        (j as f64 - h, h - i as f64)
    }
}

/// Distance along a ray to the first obstacle cell boundary, up to `max`.
/// Grid traversal after Amanatides and Woo.
pub fn cast_ray(grid: &OccupancyGrid, x: f64, y: f64, dx: f64, dy: f64, max: f64) -> Option<f64> {
    let (mut cx, mut cy) = (x.floor() as isize, y.floor() as isize);
    if grid.blocked_at(cy, cx) {
        return Some(0.0);
    }
    let step_x: isize = if dx > 0.0 { 1 } else { -1 };
    let step_y: isize = if dy > 0.0 { 1 } else { -1 };
    let t_delta_x = if dx != 0.0 { (1.0 / dx).abs() } else { f64::INFINITY };
    let t_delta_y = if dy != 0.0 { (1.0 / dy).abs() } else { f64::INFINITY };
    let mut t_max_x = if dx > 0.0 {
        (cx as f64 + 1.0 - x) * t_delta_x
    } else if dx < 0.0 {
        (x - cx as f64) * t_delta_x
    } else {
        f64::INFINITY
    };
    let mut t_max_y = if dy > 0.0 {
        (cy as f64 + 1.0 - y) * t_delta_y
    } else if dy < 0.0 {
        (y - cy as f64) * t_delta_y
    } else {
        f64::INFINITY
    };
    loop {
        let t = if t_max_x < t_max_y {
            cx += step_x;
            let t = t_max_x;
            t_max_x += t_delta_x;
            t
        } else {
            cy += step_y;
            let t = t_max_y;
            t_max_y += t_delta_y;
            t
        };
        if t > max {
            return None;
        }
        if grid.blocked_at(cy, cx) {
            return Some(t);
        }
    }
}

/// Senses the ground-truth `grid` from `pose`. Range noise draws one
/// Gaussian per ray from `rng`; with zero noise `rng` is left untouched.
pub fn sense<R: Rng>(grid: &OccupancyGrid, pose: &AgentPose, cfg: &SensorConfig, rng: &mut R) -> EgoObservation {
    let n = cfg.ray_count();
    let noise = (cfg.range_noise > 0.0).then(|| Normal::new(0.0, cfg.range_noise).expect("positive sigma"));
    let hits: Vec<Option<f64>> = (0..n)
        .map(|k| {
            let a = pose.heading + cfg.ray_angle(k, n);
            let hit = cast_ray(grid, pose.x, pose.y, a.cos(), -a.sin(), cfg.range);
            match &noise {
                // one draw per ray keeps the stream aligned with the ray index
                Some(dist) => {
                    let e = dist.sample(rng);
                    hit.map(|d| (d + e).clamp(0.0, cfg.range))
                }
                None => hit,
            }
        })
        .collect();
    let scan = RangeScan {
        fov_deg: cfg.fov_deg,
        range: cfg.range,
        hits,
    };

    let v = cfg.v;
    let mut data = vec![0.0; 2 * v * v];
    for i in 0..v {
        for j in 0..v {
            let (right, fwd) = EgoObservation::cell_offset(v, i, j);
            if scan.sees_free(right.hypot(fwd), (-right).atan2(fwd)) {
                data[v * v + i * v + j] = 1.0;
            }
        }
    }
    let h = (v / 2) as f64;
    for (fwd, right) in scan.endpoints() {
        let (i, j) = ((h - fwd).round(), (h + right).round());
        if i >= 0.0 && j >= 0.0 && i < v as f64 && j < v as f64 {
            let (i, j) = (i as usize, j as usize);
            data[i * v + j] = 1.0;
            data[v * v + i * v + j] = 1.0;
        }
    }
    EgoObservation {
        data: Tensor::new(vec![2, v, v], data).expect("sized above"),
        scan,
    }
}
