//! Ground-truth occupancy grids and their text format.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::EnvError;

/// Row/column index of a cell.
pub type Cell = (usize, usize);

pub const NEIGHBOURS_4: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
pub const NEIGHBOURS_8: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

pub(crate) fn offset(cell: Cell, d: (isize, isize), side: usize) -> Option<Cell> {
    let r = cell.0.checked_add_signed(d.0)?;
    let c = cell.1.checked_add_signed(d.1)?;
    (r < side && c < side).then_some((r, c))
}

/// Square map of free and obstacle cells.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    side: usize,
    cell_size: f64,
    obstacle: Vec<bool>,
}

impl OccupancyGrid {
    /// All-obstacle grid.
    pub fn solid(side: usize, cell_size: f64) -> Self {
        Self {
            side,
            cell_size,
            obstacle: vec![true; side * side],
        }
    }

    /// Grid with an obstacle border and a free interior.
    pub fn open_room(side: usize, cell_size: f64) -> Self {
        let mut g = Self::solid(side, cell_size);
        for r in 1..side.saturating_sub(1) {
            for c in 1..side - 1 {
                g.set_free((r, c), true);
            }
        }
        g
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn in_bounds(&self, r: isize, c: isize) -> bool {
        r >= 0 && c >= 0 && (r as usize) < self.side && (c as usize) < self.side
    }

    pub fn is_obstacle(&self, cell: Cell) -> bool {
        self.obstacle[cell.0 * self.side + cell.1]
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        !self.is_obstacle(cell)
    }

    /// Out-of-bounds counts as obstacle.
    pub fn blocked_at(&self, r: isize, c: isize) -> bool {
        !self.in_bounds(r, c) || self.obstacle[r as usize * self.side + c as usize]
    }

    pub fn set_free(&mut self, cell: Cell, free: bool) {
        self.obstacle[cell.0 * self.side + cell.1] = !free;
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.side * self.side)
            .filter(|&i| !self.obstacle[i])
            .map(|i| (i / self.side, i % self.side))
    }

    pub fn free_count(&self) -> usize {
        self.obstacle.iter().filter(|o| !**o).count()
    }

    pub fn free_area(&self) -> f64 {
        self.free_count() as f64 * self.cell_size * self.cell_size
    }

    pub fn border_is_solid(&self) -> bool {
        let n = self.side;
        (0..n).all(|i| self.is_obstacle((0, i)) && self.is_obstacle((n - 1, i)) && self.is_obstacle((i, 0)) && self.is_obstacle((i, n - 1)))
    }

    /// Free cells 4-connected to `start`.
    pub fn flood_fill(&self, start: Cell) -> Vec<bool> {
        let mut seen = vec![false; self.side * self.side];
        if self.is_obstacle(start) {
            return seen;
        }
        let mut queue = VecDeque::from([start]);
        seen[start.0 * self.side + start.1] = true;
        while let Some(cell) = queue.pop_front() {
            for d in NEIGHBOURS_4 {
                if let Some(n) = offset(cell, d, self.side) {
                    let i = n.0 * self.side + n.1;
                    if !self.obstacle[i] && !seen[i] {
                        seen[i] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
        seen
    }

    /// True when the free cells form one 4-connected component.
    pub fn is_connected(&self) -> bool {
        match self.free_cells().next() {
            None => true,
            Some(start) => self.flood_fill(start).iter().filter(|s| **s).count() == self.free_count(),
        }
    }

    /// Free cells whose 8 neighbours are all free too.
    pub fn open_cells(&self) -> Vec<Cell> {
        self.free_cells()
            .filter(|&cell| {
                NEIGHBOURS_8
                    .iter()
                    .all(|&d| offset(cell, d, self.side).is_some_and(|n| self.is_free(n)))
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.side, self.cell_size);
        for r in 0..self.side {
            for c in 0..self.side {
                out.push(if self.is_obstacle((r, c)) { '#' } else { '.' });
            }
            out.push('\n');
        }
        out
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), EnvError> {
        w.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self, EnvError> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| EnvError::MapFormat("empty file".into()))??;
        let mut parts = header.split_whitespace();
        let side: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| EnvError::MapFormat(format!("bad header {header:?}")))?;
        let cell_size: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .filter(|v: &f64| *v > 0.0)
            .ok_or_else(|| EnvError::MapFormat(format!("bad header {header:?}")))?;
        let mut grid = Self::solid(side, cell_size);
        for r in 0..side {
            let line = lines
                .next()
                .ok_or_else(|| EnvError::MapFormat(format!("expected {side} rows, got {r}")))??;
            let row: Vec<char> = line.trim_end().chars().collect();
            if row.len() != side {
                return Err(EnvError::MapFormat(format!("row {r} has {} cells, expected {side}", row.len())));
            }
            for (c, ch) in row.into_iter().enumerate() {
                match ch {
                    '#' => {}
                    '.' => grid.set_free((r, c), true),
                    other => return Err(EnvError::MapFormat(format!("unexpected {other:?} at row {r}"))),
                }
            }
        }
        Ok(grid)
    }

    /// Multi-line picture, handy in assertion messages.
    pub fn render_with(&self, marks: &[(Cell, char)]) -> String {
        let mut s = String::new();
        for r in 0..self.side {
            for c in 0..self.side {
                let ch = marks
                    .iter()
                    .find(|(m, _)| *m == (r, c))
                    .map(|(_, ch)| *ch)
                    .unwrap_or(if self.is_obstacle((r, c)) { '#' } else { '.' });
                s.push(ch);
            }
            let _ = writeln!(s);
        }
        s
    }
}
