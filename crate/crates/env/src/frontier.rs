//! Frontier detection and the frontier-based goal selectors.

use rand::Rng;
use symnav_nn::{sample_categorical, GoalLikelihoodMap};
use symnav_tensor::Tensor;

use crate::error::EnvError;
use crate::grid::{offset, Cell, NEIGHBOURS_4, NEIGHBOURS_8};
use crate::state::GlobalMapState;

/// Frontier cells of a square view: explored, not an obstacle, with an
/// unexplored 4-neighbour inside the view.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierMap {
    side: usize,
    mask: Vec<bool>,
    /// 8-connected components, largest first; ties keep scan order.
    pub components: Vec<Vec<Cell>>,
}

impl FrontierMap {
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn contains(&self, cell: Cell) -> bool {
        self.mask[cell.0 * self.side + cell.1]
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn tensor(&self) -> Tensor {
        Tensor::new(
            vec![self.side, self.side],
            self.mask.iter().map(|&m| f64::from(u8::from(m))).collect(),
        )
        .expect("sized at construction")
    }

    pub fn component_sizes(&self) -> Vec<usize> {
        self.components.iter().map(Vec::len).collect()
    }
}

/// Frontiers of explored/obstacle masks over a `side x side` view.
pub fn frontiers_from_masks(side: usize, explored: &[bool], obstacle: &[bool]) -> Result<FrontierMap, EnvError> {
    if explored.len() != side * side || obstacle.len() != side * side {
        return Err(EnvError::contract("detect_frontiers", "mask sizes do not match the side"));
    }
    let mask: Vec<bool> = (0..side * side)
        .map(|i| {
            let cell = (i / side, i % side);
            explored[i]
                && !obstacle[i]
                && NEIGHBOURS_4
                    .iter()
                    .any(|&d| offset(cell, d, side).is_some_and(|n| !explored[n.0 * side + n.1]))
        })
        .collect();

    let mut label = vec![false; side * side];
    let mut components = Vec::new();
    for start in 0..side * side {
        if !mask[start] || label[start] {
            continue;
        }
        label[start] = true;
        let mut stack = vec![(start / side, start % side)];
        let mut comp = Vec::new();
        while let Some(cell) = stack.pop() {
            comp.push(cell);
            for d in NEIGHBOURS_8 {
                if let Some(n) = offset(cell, d, side) {
                    let j = n.0 * side + n.1;
                    if mask[j] && !label[j] {
                        label[j] = true;
                        stack.push(n);
                    }
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }
    // stable: equal sizes keep the order of their first cell
    components.sort_by(|a, b| b.len().cmp(&a.len()));
    Ok(FrontierMap { side, mask, components })
}

pub fn detect_frontiers(h: &GlobalMapState) -> FrontierMap {
    let n = h.side();
    let explored: Vec<bool> = (0..n * n).map(|i| h.is_explored((i / n, i % n))).collect();
    let obstacle: Vec<bool> = (0..n * n).map(|i| h.is_obstacle((i / n, i % n))).collect();
    frontiers_from_masks(n, &explored, &obstacle).expect("sizes agree")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrontierGoal {
    pub cell: Cell,
    /// No frontier was available; the goal is a random explored free cell.
    pub fallback: bool,
}

/// Uniform explored free cell, or the map centre when nothing is known.
fn fallback_goal<R: Rng>(h: &GlobalMapState, rng: &mut R) -> FrontierGoal {
    let n = h.side();
    let free: Vec<Cell> = (0..n * n)
        .map(|i| (i / n, i % n))
        .filter(|&c| h.is_explored_free(c))
        .collect();
    let cell = if free.is_empty() {
        (n / 2, n / 2)
    } else {
        free[rng.random_range(0..free.len())]
    };
    FrontierGoal { cell, fallback: true }
}

/// Uniform cell of the largest frontier component.
pub fn fbe_select_goal<R: Rng>(f: &FrontierMap, h: &GlobalMapState, rng: &mut R) -> FrontierGoal {
    match f.components.first() {
        Some(comp) => FrontierGoal {
            cell: comp[rng.random_range(0..comp.len())],
            fallback: false,
        },
        None => fallback_goal(h, rng),
    }
}

/// Lattice cells of `f` max-pooled onto a `side x side` lattice.
pub fn pooled_frontier_mask(f: &FrontierMap, side: usize) -> Result<Vec<bool>, EnvError> {
    if side == 0 || f.side() % side != 0 {
        return Err(EnvError::contract(
            "fbe_rl_select_goal",
            format!("frontier view {} does not tile a {side} lattice", f.side()),
        ));
    }
    let b = f.side() / side;
    Ok((0..side * side)
        .map(|k| {
            let (lr, lc) = (k / side, k % side);
            (0..b).any(|i| (0..b).any(|j| f.contains((lr * b + i, lc * b + j))))
        })
        .collect())
}

/// Goal selection that multiplies the actor map by the pooled frontier mask
/// and samples from a softmax over the frontier-positive lattice cells.
/// The goal is a uniform frontier cell inside the chosen lattice block.
pub fn fbe_rl_select_goal<R: Rng>(
    f: &FrontierMap,
    actor: &GoalLikelihoodMap,
    h: &GlobalMapState,
    rng: &mut R,
) -> Result<FrontierGoal, EnvError> {
    let side = actor.side();
    let pooled = pooled_frontier_mask(f, side)?;
    let support: Vec<usize> = (0..side * side).filter(|&k| pooled[k]).collect();
    if support.is_empty() {
        return Ok(fallback_goal(h, rng));
    }
    let probs = actor.probs().data();
    let top = support.iter().map(|&k| probs[k]).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = support.iter().map(|&k| (probs[k] - top).exp()).collect();
    let k = support[sample_categorical(&weights, rng)];
    let b = f.side() / side;
    let (lr, lc) = (k / side, k % side);
    let cells: Vec<Cell> = (0..b * b)
        .map(|i| (lr * b + i / b, lc * b + i % b))
        .filter(|&c| f.contains(c))
        .collect();
    Ok(FrontierGoal {
        cell: cells[rng.random_range(0..cells.len())],
        fallback: false,
    })
}
