use proptest::prelude::*;
use symnav_env::{generate_map, EnvError, MapGeneratorSpec, OccupancyGrid, Suite};

#[test]
fn same_seed_same_grid() {
    for suite in [Suite::Iid, Suite::Ood] {
        let a = generate_map(&MapGeneratorSpec::for_suite(suite, 128, 0.25, 11)).unwrap();
        let b = generate_map(&MapGeneratorSpec::for_suite(suite, 128, 0.25, 11)).unwrap();
        assert_eq!(a, b);
        let c = generate_map(&MapGeneratorSpec::for_suite(suite, 128, 0.25, 12)).unwrap();
        assert_ne!(a, c);
    }
}

#[test]
fn suites_respect_disjoint_ranges() {
    let iid = MapGeneratorSpec::iid(128, 0.25, 0);
    let ood = MapGeneratorSpec::ood(128, 0.25, 0);
    assert!(iid.free_area.1 < ood.free_area.0);
    assert!(iid.rooms.1 < ood.rooms.0);
    for seed in 0..10 {
        for (spec, lo, hi) in [
            (MapGeneratorSpec::iid(128, 0.25, seed), 40.0, 80.0),
            (MapGeneratorSpec::ood(128, 0.25, seed), 120.0, 250.0),
            (MapGeneratorSpec::iid(64, 0.5, seed), 40.0, 80.0),
            (MapGeneratorSpec::ood(64, 0.5, seed), 120.0, 250.0),
        ] {
            let g = generate_map(&spec).unwrap();
            let area = g.free_area();
            assert!((lo..=hi).contains(&area), "{} seed {seed}: {area}", spec.suite);
        }
    }
}

fn flood_reaches_everything(g: &OccupancyGrid) -> bool {
    // independent breadth-first search over the text rendering
    let rows: Vec<Vec<u8>> = g.to_text().lines().skip(1).map(|l| l.as_bytes().to_vec()).collect();
    let n = rows.len();
    let Some(start) = (0..n * n).find(|&i| rows[i / n][i % n] == b'.') else {
        return true;
    };
    let mut seen = vec![false; n * n];
    let mut stack = vec![start];
    seen[start] = true;
    let mut count = 0;
    while let Some(i) = stack.pop() {
        count += 1;
        let (r, c) = (i / n, i % n);
        let mut push = |r: usize, c: usize| {
            if rows[r][c] == b'.' && !seen[r * n + c] {
                seen[r * n + c] = true;
                stack.push(r * n + c);
            }
        };
        if r > 0 {
            push(r - 1, c);
        }
        if r + 1 < n {
            push(r + 1, c);
        }
        if c > 0 {
            push(r, c - 1);
        }
        if c + 1 < n {
            push(r, c + 1);
        }
    }
    count == rows.iter().flatten().filter(|b| **b == b'.').count()
}

#[test]
fn flood_fill_from_any_free_cell_reaches_all() {
    for seed in 0..5 {
        for suite in [Suite::Iid, Suite::Ood] {
            let g = generate_map(&MapGeneratorSpec::for_suite(suite, 128, 0.25, seed)).unwrap();
            assert!(g.border_is_solid());
            assert!(g.is_connected());
            assert!(flood_reaches_everything(&g), "{suite} seed {seed}");
        }
    }
}

#[test]
fn text_format_round_trips() {
    let g = generate_map(&MapGeneratorSpec::ood(64, 0.5, 3)).unwrap();
    let text = g.to_text();
    assert!(text.starts_with("64 0.5\n"));
    assert_eq!(text.lines().count(), 65);
    let back = OccupancyGrid::read_from(text.as_bytes()).unwrap();
    assert_eq!(back, g);
}

#[test]
fn malformed_map_files_are_rejected() {
    for bad in ["", "3\n###\n#.#\n###\n", "3 0.25\n###\n#.#\n", "3 0.25\n###\n#x#\n###\n", "3 0.25\n###\n#.##\n###\n"] {
        assert!(matches!(OccupancyGrid::read_from(bad.as_bytes()), Err(EnvError::MapFormat(_))), "{bad:?}");
    }
}

#[test]
fn unsatisfiable_spec_fails_after_bounded_retries() {
    // fourteen rooms of at least 6 m a side cannot total 41 m²
    let spec = MapGeneratorSpec {
        rooms: (14, 14),
        free_area: (40.0, 41.0),
        room_side: (6.0, 6.5),
        ..MapGeneratorSpec::iid(128, 0.25, 0)
    };
    match generate_map(&spec) {
        Err(EnvError::Generation { attempts, .. }) => assert!(attempts > 0),
        other => panic!("expected a generation error, got {other:?}"),
    }
    let spec = MapGeneratorSpec {
        free_area: (10.0, 5.0),
        ..MapGeneratorSpec::iid(128, 0.25, 0)
    };
    assert!(matches!(generate_map(&spec), Err(EnvError::Config { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn generated_maps_satisfy_grid_invariants(seed in 0u64..1_000_000, ood in any::<bool>()) {
        let suite = if ood { Suite::Ood } else { Suite::Iid };
        let g = generate_map(&MapGeneratorSpec::for_suite(suite, 64, 0.5, seed)).unwrap();
        prop_assert!(g.border_is_solid());
        prop_assert!(flood_reaches_everything(&g));
        prop_assert!(!g.open_cells().is_empty());
    }
}
