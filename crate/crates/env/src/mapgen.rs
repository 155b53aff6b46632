//! Procedural floorplans: rectangular rooms joined by corridors.
//!
//! The in-distribution suite has a few rooms and straight L-shaped
//! corridors. The out-of-distribution suite is larger, with meandering
//! narrow corridors, dead ends and pillars.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::EnvError;
use crate::grid::{Cell, OccupancyGrid};

const MAX_ATTEMPTS: usize = 400;
const PLACEMENT_TRIES: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    Iid,
    Ood,
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Iid => "iid",
            Suite::Ood => "ood",
        })
    }
}

impl FromStr for Suite {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "iid" => Ok(Suite::Iid),
            "ood" => Ok(Suite::Ood),
            _ => Err(EnvError::config("env.suite", format!("{s:?} is not iid or ood"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapGeneratorSpec {
    pub suite: Suite,
    pub side: usize,
    pub cell_size: f64,
    /// Inclusive range of room counts.
    pub rooms: (usize, usize),
    /// Inclusive range of total free area in m².
    pub free_area: (f64, f64),
    /// Inclusive range of room side lengths in m.
    pub room_side: (f64, f64),
    /// Corridor width range in m.
    pub corridor_width: (f64, f64),
    /// 0 gives straight corridors and empty rooms; 1 gives meanders,
    /// dead ends and pillars everywhere.
    pub irregularity: f64,
    pub seed: u64,
}

impl MapGeneratorSpec {
    pub fn iid(side: usize, cell_size: f64, seed: u64) -> Self {
        Self {
            suite: Suite::Iid,
            side,
            cell_size,
            rooms: (3, 6),
            free_area: (40.0, 80.0),
            room_side: (2.5, 6.5),
            corridor_width: (1.0, 1.0),
            irregularity: 0.0,
            seed,
        }
    }

    pub fn ood(side: usize, cell_size: f64, seed: u64) -> Self {
        Self {
            suite: Suite::Ood,
            side,
            cell_size,
            rooms: (8, 14),
            free_area: (120.0, 250.0),
            room_side: (2.5, 6.5),
            corridor_width: (0.5, 1.0),
            irregularity: 0.7,
            seed,
        }
    }

    pub fn for_suite(suite: Suite, side: usize, cell_size: f64, seed: u64) -> Self {
        match suite {
            Suite::Iid => Self::iid(side, cell_size, seed),
            Suite::Ood => Self::ood(side, cell_size, seed),
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.side < 16 {
            return Err(EnvError::config("env.M", format!("{} is too small for a floorplan", self.side)));
        }
        if !(self.cell_size > 0.0) {
            return Err(EnvError::config("env.cell_size", "must be positive"));
        }
        if self.rooms.0 == 0 || self.rooms.0 > self.rooms.1 {
            return Err(EnvError::config("map.rooms", format!("bad range {:?}", self.rooms)));
        }
        if !(self.free_area.0 > 0.0 && self.free_area.0 <= self.free_area.1) {
            return Err(EnvError::config("map.free_area", format!("bad range {:?}", self.free_area)));
        }
        let map_area = ((self.side - 2) as f64 * self.cell_size).powi(2);
        if self.free_area.1 > 0.5 * map_area {
            return Err(EnvError::config(
                "map.free_area",
                format!("{} m² does not fit a {map_area} m² interior", self.free_area.1),
            ));
        }
        if !(self.room_side.0 > 0.0 && self.room_side.0 <= self.room_side.1) {
            return Err(EnvError::config("map.room_side", format!("bad range {:?}", self.room_side)));
        }
        if !(self.corridor_width.0 > 0.0 && self.corridor_width.0 <= self.corridor_width.1) {
            return Err(EnvError::config("map.corridor_width", format!("bad range {:?}", self.corridor_width)));
        }
        if !(0.0..=1.0).contains(&self.irregularity) {
            return Err(EnvError::config("map.irregularity", "must lie in [0, 1]"));
        }
        Ok(())
    }

    fn cells(&self, metres: f64) -> usize {
        ((metres / self.cell_size).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy)]
struct Room {
    r0: usize,
    c0: usize,
    h: usize,
    w: usize,
}

impl Room {
    fn centre(&self) -> Cell {
        (self.r0 + self.h / 2, self.c0 + self.w / 2)
    }

    /// Overlap test with a `gap`-cell margin of wall between rooms.
    fn clashes(&self, other: &Room, gap: usize) -> bool {
        self.r0 < other.r0 + other.h + gap
            && other.r0 < self.r0 + self.h + gap
            && self.c0 < other.c0 + other.w + gap
            && other.c0 < self.c0 + self.w + gap
    }
}

/// Deterministic in `spec.seed`.
pub fn generate_map(spec: &MapGeneratorSpec) -> Result<OccupancyGrid, EnvError> {
    spec.validate()?;
    let mut last = String::new();
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(attempt as u64);
        match try_generate(spec, &mut rng) {
            Ok(grid) => return Ok(grid),
            Err(why) => last = why,
        }
    }
    Err(EnvError::Generation {
        attempts: MAX_ATTEMPTS,
        detail: last,
    })
}

fn try_generate(spec: &MapGeneratorSpec, rng: &mut ChaCha8Rng) -> Result<OccupancyGrid, String> {
    let n = spec.side;
    let cell_area = spec.cell_size * spec.cell_size;
    let rooms_wanted = rng.random_range(spec.rooms.0..=spec.rooms.1);
    let target = rng.random_range(spec.free_area.0..=spec.free_area.1) / cell_area;
    // corridors and irregular extras take a share of the free area
    let room_share = 0.8 - 0.15 * spec.irregularity;
    let weights: Vec<f64> = (0..rooms_wanted).map(|_| rng.random_range(0.6..1.4)).collect();
    let wsum: f64 = weights.iter().sum();
    let (smin, smax) = (spec.cells(spec.room_side.0).max(3), spec.cells(spec.room_side.1).max(3));

    let mut grid = OccupancyGrid::solid(n, spec.cell_size);
    let mut rooms: Vec<Room> = Vec::with_capacity(rooms_wanted);
    for wt in &weights {
        let area = target * room_share * wt / wsum;
        let aspect: f64 = rng.random_range(0.6..1.6);
        let w = ((area * aspect).sqrt().round() as usize).clamp(smin, smax);
        let h = ((area / w as f64).round() as usize).clamp(smin, smax);
        let placed = (0..PLACEMENT_TRIES).find_map(|_| {
            let room = Room {
                r0: rng.random_range(2..n - h - 2),
                c0: rng.random_range(2..n - w - 2),
                h,
                w,
            };
            (!rooms.iter().any(|o| room.clashes(o, 3))).then_some(room)
        });
        rooms.push(placed.ok_or("no room for the next room")?);
    }
    for room in &rooms {
        carve_rect(&mut grid, room.r0, room.c0, room.h, room.w);
    }

    // join each room to its nearest predecessor: a tree, hence connected
    let mut corridor_cells: Vec<Cell> = Vec::new();
    for i in 1..rooms.len() {
        let a = rooms[i].centre();
        let j = (0..i)
            .min_by_key(|&j| {
                let b = rooms[j].centre();
                a.0.abs_diff(b.0) + a.1.abs_diff(b.1)
            })
            .expect("i >= 1");
        let width = spec.cells(rng.random_range(spec.corridor_width.0..=spec.corridor_width.1));
        let b = rooms[j].centre();
        let mut stops = vec![a];
        if rng.random_bool(spec.irregularity) {
            // meander through one or two random waypoints
            for _ in 0..rng.random_range(1..=2) {
                stops.push((rng.random_range(2..n - 2 - width), rng.random_range(2..n - 2 - width)));
            }
        }
        stops.push(b);
        for pair in stops.windows(2) {
            let horizontal_first = rng.random_bool(0.5);
            corridor_cells.extend(carve_l(&mut grid, pair[0], pair[1], width, horizontal_first));
        }
    }

    if spec.irregularity > 0.0 {
        // dead-end spurs off existing corridors
        let spurs = (spec.irregularity * rooms.len() as f64).round() as usize;
        for _ in 0..spurs {
            if corridor_cells.is_empty() {
                break;
            }
            let from = corridor_cells[rng.random_range(0..corridor_cells.len())];
            let len = rng.random_range(4..12usize);
            let (dr, dc) = [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)][rng.random_range(0..4)];
            let mut cell = from;
            for _ in 0..len {
                let (r, c) = (cell.0 as isize + dr, cell.1 as isize + dc);
                if r < 2 || c < 2 || r >= n as isize - 2 || c >= n as isize - 2 {
                    break;
                }
                cell = (r as usize, c as usize);
                grid.set_free(cell, true);
            }
        }
        // pillars inside rooms, kept off the walls so rooms stay connected
        for room in &rooms {
            if room.h < 7 || room.w < 7 || !rng.random_bool(spec.irregularity) {
                continue;
            }
            for _ in 0..rng.random_range(1..=3) {
                let size = rng.random_range(1..=2usize);
                let r = rng.random_range(room.r0 + 2..room.r0 + room.h - 2 - size + 1);
                let c = rng.random_range(room.c0 + 2..room.c0 + room.w - 2 - size + 1);
                for dr in 0..size {
                    for dc in 0..size {
                        grid.set_free((r + dr, c + dc), false);
                    }
                }
            }
        }
    }

    if !grid.border_is_solid() {
        return Err("carving reached the border".into());
    }
    if !grid.is_connected() {
        return Err("free space is not connected".into());
    }
    let area = grid.free_area();
    if area < spec.free_area.0 || area > spec.free_area.1 {
        return Err(format!("free area {area:.1} m² outside {:?}", spec.free_area));
    }
    if grid.open_cells().is_empty() {
        return Err("no open start cell".into());
    }
    Ok(grid)
}

fn carve_rect(grid: &mut OccupancyGrid, r0: usize, c0: usize, h: usize, w: usize) {
    for r in r0..r0 + h {
        for c in c0..c0 + w {
            grid.set_free((r, c), true);
        }
    }
}

/// L-shaped corridor of the given width between two cells; returns the
/// cells on its centreline.
fn carve_l(grid: &mut OccupancyGrid, a: Cell, b: Cell, width: usize, horizontal_first: bool) -> Vec<Cell> {
    let corner = if horizontal_first { (a.0, b.1) } else { (b.0, a.1) };
    let mut line = Vec::new();
    for (p, q) in [(a, corner), (corner, b)] {
        let (r0, r1) = (p.0.min(q.0), p.0.max(q.0));
        let (c0, c1) = (p.1.min(q.1), p.1.max(q.1));
        for r in r0..=r1 {
            for c in c0..=c1 {
                line.push((r, c));
                for dr in 0..width {
                    for dc in 0..width {
                        let cell = (r + dr, c + dc);
                        if cell.0 < grid.side() - 2 && cell.1 < grid.side() - 2 {
                            grid.set_free(cell, true);
                        }
                    }
                }
            }
        }
    }
    line
}
