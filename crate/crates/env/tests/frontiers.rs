use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symnav_env::state::{EXPLORED, OBSTACLE};
use symnav_env::{
    detect_frontiers, fbe_rl_select_goal, fbe_select_goal, frontiers_from_masks, Cell, EnvConfig, Environment,
    GlobalMapState, MapGeneratorSpec, OccupancyGrid,
};
use symnav_nn::GoalLikelihoodMap;
use symnav_tensor::Tensor;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Direct reading of the definition: explored, not an obstacle, and at
/// least one of up/down/left/right (inside the view) is unexplored.
fn is_frontier(side: usize, explored: &[bool], obstacle: &[bool], r: usize, c: usize) -> bool {
    let at = |r: usize, c: usize| r * side + c;
    if !explored[at(r, c)] || obstacle[at(r, c)] {
        return false;
    }
    let mut neighbours = Vec::new();
    if r > 0 {
        neighbours.push(at(r - 1, c));
    }
    if r + 1 < side {
        neighbours.push(at(r + 1, c));
    }
    if c > 0 {
        neighbours.push(at(r, c - 1));
    }
    if c + 1 < side {
        neighbours.push(at(r, c + 1));
    }
    neighbours.iter().any(|&i| !explored[i])
}

fn state(side: usize, explored: impl Fn(Cell) -> bool, obstacle: impl Fn(Cell) -> bool) -> GlobalMapState {
    let mut h = GlobalMapState::new(side);
    for r in 0..side {
        for c in 0..side {
            if explored((r, c)) {
                h.set(EXPLORED, (r, c), 1.0);
            }
            if obstacle((r, c)) {
                h.set(OBSTACLE, (r, c), 1.0);
            }
        }
    }
    h
}

#[test]
fn fully_explored_map_has_no_frontier() {
    let h = state(16, |_| true, |(r, c)| r == 0 || c == 0);
    assert!(detect_frontiers(&h).is_empty());
}

#[test]
fn half_explored_room_has_the_boundary_column() {
    let h = state(16, |(_, c)| c < 8, |_| false);
    let f = detect_frontiers(&h);
    for r in 0..16 {
        for c in 0..16 {
            assert_eq!(f.contains((r, c)), c == 7, "({r},{c})");
        }
    }
    assert_eq!(f.component_sizes(), vec![16]);
}

#[test]
fn components_are_eight_connected_and_sorted() {
    // a diagonal chain of three isolated explored cells, plus a larger strip
    let explored = |(r, c): Cell| matches!((r, c), (2, 2) | (3, 3) | (4, 4)) || (r == 10 && (2..9).contains(&c));
    let f = detect_frontiers(&state(16, explored, |_| false));
    assert_eq!(f.component_sizes(), vec![7, 3]);
}

#[test]
fn mask_size_mismatch_is_an_error() {
    assert!(frontiers_from_masks(4, &[true; 15], &[false; 16]).is_err());
}

#[test]
fn fbe_single_cell_and_largest_component() {
    let one = state(8, |c| c == (3, 3), |_| false);
    let f = detect_frontiers(&one);
    let g = fbe_select_goal(&f, &one, &mut rng(0));
    assert_eq!((g.cell, g.fallback), ((3, 3), false));

    // sizes 10 and 3
    let h = state(24, |(r, c)| (r == 4 && (2..12).contains(&c)) || (r == 15 && (5..8).contains(&c)), |_| false);
    let f = detect_frontiers(&h);
    assert_eq!(f.component_sizes(), vec![10, 3]);
    let mut r = rng(1);
    for _ in 0..500 {
        let g = fbe_select_goal(&f, &h, &mut r);
        assert_eq!(g.cell.0, 4);
        assert!((2..12).contains(&g.cell.1));
    }
    let a: Vec<_> = (0..20).map(|_| fbe_select_goal(&f, &h, &mut rng(9)).cell).collect();
    assert!(a.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn fbe_falls_back_without_frontiers() {
    let h = state(8, |_| true, |(r, c)| r == 0 || c == 0 || r == 7 || c == 7);
    let f = detect_frontiers(&h);
    let mut r = rng(2);
    for _ in 0..100 {
        let g = fbe_select_goal(&f, &h, &mut r);
        assert!(g.fallback);
        assert!(h.is_explored_free(g.cell));
    }
    let blank = GlobalMapState::new(8);
    assert_eq!(fbe_select_goal(&detect_frontiers(&blank), &blank, &mut r).cell, (4, 4));
}

fn actor(side: usize, values: &[(usize, f64)]) -> GoalLikelihoodMap {
    let fixed: f64 = values.iter().map(|v| v.1).sum();
    let rest = (1.0 - fixed) / (side * side - values.len()) as f64;
    let mut p = vec![rest; side * side];
    for &(k, v) in values {
        p[k] = v;
    }
    GoalLikelihoodMap::new(Tensor::new(vec![side, side], p).unwrap()).unwrap()
}

#[test]
fn fbe_rl_single_frontier_is_certain() {
    let h = state(16, |c| c == (9, 5), |_| false);
    let f = detect_frontiers(&h);
    let uniform = actor(4, &[]);
    let mut r = rng(3);
    for _ in 0..200 {
        let g = fbe_rl_select_goal(&f, &uniform, &h, &mut r).unwrap();
        assert_eq!((g.cell, g.fallback), ((9, 5), false));
    }
}

#[test]
fn fbe_rl_frequencies_follow_the_softmax() {
    // frontier cells in lattice blocks 0 and 15 of a 4x4 lattice over 16 cells
    let h = state(16, |c| c == (1, 1) || c == (14, 13), |_| false);
    let f = detect_frontiers(&h);
    let (a, b) = (0.6, 0.1);
    let m = actor(4, &[(0, a), (15, b)]);
    let p = a.exp() / (a.exp() + b.exp());
    let draws = 100_000;
    let mut r = rng(4);
    let mut hits = 0usize;
    for _ in 0..draws {
        let g = fbe_rl_select_goal(&f, &m, &h, &mut r).unwrap();
        match g.cell {
            (1, 1) => hits += 1,
            (14, 13) => {}
            other => panic!("goal {other:?} is not a frontier"),
        }
    }
    let freq = hits as f64 / draws as f64;
    let sigma = (p * (1.0 - p) / draws as f64).sqrt();
    assert!((freq - p).abs() <= 3.0 * sigma, "frequency {freq} vs softmax {p} (sigma {sigma})");
}

#[test]
fn fbe_rl_fallback_and_lattice_mismatch() {
    let h = state(16, |_| true, |_| false);
    let f = detect_frontiers(&h);
    let g = fbe_rl_select_goal(&f, &actor(4, &[]), &h, &mut rng(5)).unwrap();
    assert!(g.fallback);
    assert!(fbe_rl_select_goal(&f, &actor(3, &[]), &h, &mut rng(5)).is_err());
}

#[test]
fn fbe_covers_single_rooms() {
    for seed in 0..5u64 {
        let mut r = rng(seed);
        let (w, hgt) = (r.random_range(16..40), r.random_range(16..40));
        let mut grid = OccupancyGrid::solid(64, 0.25);
        let (r0, c0) = (r.random_range(1..64 - hgt - 1), r.random_range(1..64 - w - 1));
        for row in r0..r0 + hgt {
            for col in c0..c0 + w {
                grid.set_free((row, col), true);
            }
        }
        let cfg = EnvConfig { side: 64, g: 32, ..EnvConfig::default() };
        let mut env = Environment::new(Arc::new(grid), cfg, seed).unwrap();
        while !env.done() && env.free_fraction_explored() < 0.95 {
            let goal = fbe_select_goal(&detect_frontiers(env.map()), env.map(), &mut r);
            env.run_decision(goal.cell).unwrap();
        }
        assert!(env.free_fraction_explored() >= 0.95, "seed {seed}: {}", env.free_fraction_explored());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mask_matches_the_definition(seed in 0u64..100_000, side in 2usize..20, p in 0.1f64..0.9) {
        let mut r = rng(seed);
        let explored: Vec<bool> = (0..side * side).map(|_| r.random_bool(p)).collect();
        let obstacle: Vec<bool> = (0..side * side).map(|_| r.random_bool(0.2)).collect();
        let f = frontiers_from_masks(side, &explored, &obstacle).unwrap();
        let mut total = 0;
        for row in 0..side {
            for col in 0..side {
                prop_assert_eq!(f.contains((row, col)), is_frontier(side, &explored, &obstacle, row, col));
            }
        }
        for comp in &f.components {
            total += comp.len();
            prop_assert!(comp.iter().all(|&c| f.contains(c)));
        }
        prop_assert_eq!(total, f.count());
        prop_assert!(f.component_sizes().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn fbe_goal_is_explored_free(seed in 0u64..10_000) {
        let grid = Arc::new(symnav_env::generate_map(&MapGeneratorSpec::ood(64, 0.5, seed % 40)).unwrap());
        let cfg = EnvConfig { side: 64, cell_size: 0.5, v: 16, g: 32, ..EnvConfig::default() };
        let mut env = Environment::new(grid, cfg, seed).unwrap();
        let mut r = rng(seed);
        for _ in 0..6 {
            let g = fbe_select_goal(&detect_frontiers(env.map()), env.map(), &mut r);
            prop_assert!(env.map().is_explored_free(g.cell));
            env.run_decision(g.cell).unwrap();
        }
    }
}
