use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symnav_nn::{
    blur_pool, fully_connected, max_pool, orientation_pool, p4_rotate, rot90_spatial, shift_spatial, Bound,
    GroupConv, Init, LiftingConv, OrientationPool, P4Element, ParamStore,
};
use symnav_tensor::{finite_difference_gradient, max_relative_error, Tape, Tensor, Var};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random(shape: &[usize], r: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Evaluates `f` on a fresh tape with frozen parameters.
fn eval(store: &ParamStore, x: &Tensor, f: &dyn for<'t> Fn(&Bound<'t>, Var<'t>) -> Var<'t>) -> Tensor {
    let tape = Tape::new();
    let p = store.bind(&tape, false);
    let v = tape.constant(x.clone());
    f(&p, v).value().as_ref().clone()
}

// ---------- group algebra against the homogeneous-matrix oracle ----------

fn matrix_product(a: [[i64; 3]; 3], b: [[i64; 3]; 3]) -> [[i64; 3]; 3] {
    let mut c = [[0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

fn oracle_matrix(m: i64, z1: i64, z2: i64) -> [[i64; 3]; 3] {
    // cos/sin of m * 90deg computed numerically and rounded
    let t = m as f64 * std::f64::consts::FRAC_PI_2;
    let (c, s) = (t.cos().round() as i64, t.sin().round() as i64);
    [[c, -s, z1], [s, c, z2], [0, 0, 1]]
}

#[test]
fn rotation_subgroup_axioms_exhaustive() {
    for a in 0..4 {
        for b in 0..4 {
            let (ga, gb) = (P4Element::rotation(a), P4Element::rotation(b));
            let ab = ga * gb;
            assert_eq!(ab.matrix(), matrix_product(oracle_matrix(a, 0, 0), oracle_matrix(b, 0, 0)));
            assert_eq!(ab.m() as i64, (a + b) % 4);
            for c in 0..4 {
                let gc = P4Element::rotation(c);
                assert_eq!((ga * gb) * gc, ga * (gb * gc));
            }
        }
        let g = P4Element::rotation(a);
        assert_eq!(g * P4Element::IDENTITY, g);
        assert_eq!(g * g.inverse(), P4Element::IDENTITY);
        assert_eq!(g.inverse() * g, P4Element::IDENTITY);
    }
}

#[test]
fn compose_matches_matrix_product_on_random_pairs() {
    let mut r = rng(3);
    for _ in 0..100 {
        let a = (r.random_range(0..4), r.random_range(-20..20), r.random_range(-20..20));
        let b = (r.random_range(0..4), r.random_range(-20..20), r.random_range(-20..20));
        let prod = P4Element::new(a.0, a.1, a.2) * P4Element::new(b.0, b.1, b.2);
        let want = matrix_product(oracle_matrix(a.0, a.1, a.2), oracle_matrix(b.0, b.1, b.2));
        assert_eq!(prod.matrix(), want);
        let pt = (r.random_range(-9..9), r.random_range(-9..9));
        let g = P4Element::new(a.0, a.1, a.2);
        assert_eq!(g.inverse().act(g.act(pt)), pt);
    }
}

#[test]
fn worked_compose_examples() {
    assert_eq!(P4Element::rotation(1) * P4Element::rotation(1), P4Element::rotation(2));
    assert_eq!(P4Element::new(1, 1, 0) * P4Element::new(0, 1, 0), P4Element::new(1, 1, 1));
}

// ---------- lifting and group convolution ----------

fn lifting(c_in: usize, c_out: usize, k: usize, seed: u64) -> (ParamStore, LiftingConv) {
    let mut store = ParamStore::new();
    let l = LiftingConv::new(&mut store, "lift", c_in, c_out, k, 1, k / 2, Init::FanIn, &mut rng(seed));
    (store, l)
}

fn group(c_in: usize, c_out: usize, k: usize, seed: u64) -> (ParamStore, GroupConv) {
    let mut store = ParamStore::new();
    let l = GroupConv::new(&mut store, "gc", c_in, c_out, k, 1, k / 2, Init::FanIn, &mut rng(seed));
    (store, l)
}

/// Nested-loop cross-correlation of one plane with zero padding.
fn correlate_plane(x: &[f64], h: usize, w: usize, f: &[f64], k: usize, pad: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for oy in 0..h {
        for ox in 0..w {
            let mut acc = 0.0;
            for u in 0..k {
                for v in 0..k {
                    let iy = oy as isize + u as isize - pad as isize;
                    let ix = ox as isize + v as isize - pad as isize;
                    if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                        acc += x[iy as usize * w + ix as usize] * f[u * k + v];
                    }
                }
            }
            out[oy * w + ox] = acc;
        }
    }
    out
}

#[test]
fn lifting_constant_input_with_symmetric_filter_gives_identical_slices() {
    let (mut store, l) = lifting(1, 1, 3, 0);
    // rotation-symmetric filter
    let f = Tensor::new(vec![1, 1, 3, 3], vec![1.0, 2.0, 1.0, 2.0, 4.0, 2.0, 1.0, 2.0, 1.0]).unwrap();
    store.set(l.weight, f).unwrap();
    let x = Tensor::full(&[1, 7, 7], 0.5);
    let y = eval(&store, &x, &|p, v| l.forward(p, v).unwrap());
    let plane = 49;
    for m in 1..4 {
        assert_eq!(&y.data()[m * plane..(m + 1) * plane], &y.data()[..plane]);
    }
    // interior values are constant: sum of filter times input
    assert_eq!(y.get(&[0, 2, 3, 3]), 8.0);
}

#[test]
fn lifting_edge_filter_on_glyph_gives_rotated_detector_responses() {
    let glyph = [
        "#####", //
        "#....", //
        "####.", //
        "#....", //
        "#####",
    ];
    let mut data = vec![0.0; 9 * 9];
    for (r, row) in glyph.iter().enumerate() {
        for (c, ch) in row.chars().enumerate() {
            if ch == '#' {
                data[(r + 2) * 9 + c + 2] = 1.0;
            }
        }
    }
    let x = Tensor::new(vec![1, 9, 9], data.clone()).unwrap();
    let edge = vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0, -1.0, -1.0, -1.0];
    let (mut store, l) = lifting(1, 1, 3, 0);
    store.set(l.weight, Tensor::new(vec![1, 1, 3, 3], edge.clone()).unwrap()).unwrap();
    let y = eval(&store, &x, &|p, v| l.forward(p, v).unwrap());
    let edge_t = Tensor::new(vec![3, 3], edge).unwrap();
    for m in 0..4 {
        let rotated = rot90_spatial(&edge_t, m).unwrap();
        let want = correlate_plane(&data, 9, 9, rotated.data(), 3, 1);
        assert_eq!(&y.data()[m as usize * 81..(m as usize + 1) * 81], &want[..]);
    }
    // the unrotated detector fires on the horizontal strokes, the quarter-turn one on the vertical stroke
    let s0 = &y.data()[..81];
    let s1 = &y.data()[81..162];
    assert!(s0.iter().any(|&v| v.abs() >= 3.0));
    assert!(s1.iter().any(|&v| v.abs() >= 3.0));
    assert_ne!(s0, s1);
}

#[test]
fn lifting_is_equivariant() {
    let mut r = rng(11);
    for seed in 0..5 {
        let (store, l) = lifting(3, 4, 3, seed);
        let x = random(&[3, 9, 9], &mut r);
        let y = eval(&store, &x, &|p, v| l.forward(p, v).unwrap());
        for m in 0..4 {
            let lhs = eval(&store, &rot90_spatial(&x, m).unwrap(), &|p, v| l.forward(p, v).unwrap());
            let rhs = p4_rotate(&y, m).unwrap();
            assert!(lhs.max_abs_diff(&rhs) <= 1e-10, "m={m}: {}", lhs.max_abs_diff(&rhs));
        }
    }
}

#[test]
fn group_conv_delta_filter_permutes_orientations() {
    // only the r = 0 slice is one: output slice m reads input slice (0 + m) mod 4
    let (mut store, l) = group(1, 1, 1, 0);
    store
        .set(l.weight, Tensor::new(vec![1, 1, 4, 1, 1], vec![1.0, 0.0, 0.0, 0.0]).unwrap())
        .unwrap();
    let x = random(&[1, 4, 5, 5], &mut rng(2));
    let y = eval(&store, &x, &|p, v| l.forward(p, v).unwrap());
    assert_eq!(y, x);
    // r = 1 slice set: output m reads input (m + 1) mod 4
    store
        .set(l.weight, Tensor::new(vec![1, 1, 4, 1, 1], vec![0.0, 1.0, 0.0, 0.0]).unwrap())
        .unwrap();
    let y = eval(&store, &x, &|p, v| l.forward(p, v).unwrap());
    for m in 0..4 {
        assert_eq!(&y.data()[m * 25..(m + 1) * 25], &x.data()[((m + 1) % 4) * 25..((m + 1) % 4 + 1) * 25]);
    }
}

#[test]
fn group_conv_is_equivariant_alone_and_stacked() {
    let mut r = rng(12);
    for seed in 0..5 {
        let (s1, g1) = group(2, 3, 3, seed);
        let (s2, g2) = group(3, 2, 3, seed + 100);
        let x = random(&[2, 4, 8, 8], &mut r);
        let one = |x: &Tensor| eval(&s1, x, &|p, v| g1.forward(p, v).unwrap());
        let two = |x: &Tensor| {
            let h = one(x).map(|v| v.max(0.0)).unwrap();
            eval(&s2, &h, &|p, v| g2.forward(p, v).unwrap())
        };
        let (y1, y2) = (one(&x), two(&x));
        for m in 0..4 {
            let xr = p4_rotate(&x, m).unwrap();
            assert!(one(&xr).max_abs_diff(&p4_rotate(&y1, m).unwrap()) <= 1e-10);
            assert!(two(&xr).max_abs_diff(&p4_rotate(&y2, m).unwrap()) <= 1e-9);
        }
    }
}

/// lift -> relu -> gconv -> relu -> blur -> gconv -> relu -> blur
fn stack(seed: u64) -> (ParamStore, LiftingConv, GroupConv, GroupConv) {
    let mut store = ParamStore::new();
    let mut r = rng(seed);
    let l = LiftingConv::new(&mut store, "l", 2, 3, 3, 1, 1, Init::FanIn, &mut r);
    let g1 = GroupConv::new(&mut store, "g1", 3, 3, 3, 1, 1, Init::FanIn, &mut r);
    let g2 = GroupConv::new(&mut store, "g2", 3, 2, 3, 1, 1, Init::FanIn, &mut r);
    (store, l, g1, g2)
}

fn run_stack(s: &(ParamStore, LiftingConv, GroupConv, GroupConv), x: &Tensor) -> Tensor {
    let (store, l, g1, g2) = s;
    eval(store, x, &|p, v| {
        let h = l.forward(p, v).unwrap().relu().unwrap();
        let h = blur_pool(g1.forward(p, h).unwrap().relu().unwrap(), 2).unwrap();
        blur_pool(g2.forward(p, h).unwrap().relu().unwrap(), 2).unwrap()
    })
}

#[test]
fn pooled_stack_is_rotation_equivariant() {
    let mut r = rng(13);
    for i in 0..20 {
        let s = stack(i);
        // alternate even and odd extents so both blur kernels are exercised
        let side = if i % 2 == 0 { 12 } else { 11 };
        let x = random(&[2, side, side], &mut r);
        let y = run_stack(&s, &x);
        for m in 0..4 {
            let lhs = run_stack(&s, &rot90_spatial(&x, m).unwrap());
            assert!(lhs.max_abs_diff(&p4_rotate(&y, m).unwrap()) <= 1e-9);
        }
    }
}

#[test]
fn pooled_stack_is_translation_equivariant_for_stride_multiples() {
    let mut r = rng(14);
    let s = stack(5);
    let n = 48;
    // content well inside the border so no padding is ever reached
    let mut data = vec![0.0; 2 * n * n];
    for c in 0..2 {
        for y in 20..28 {
            for x in 19..27 {
                data[(c * n + y) * n + x] = r.random_range(-1.0..1.0);
            }
        }
    }
    let x = Tensor::new(vec![2, n, n], data).unwrap();
    let y = run_stack(&s, &x);
    for (dy, dx) in [(4, 0), (0, 4), (-4, 8), (8, -4)] {
        let lhs = run_stack(&s, &shift_spatial(&x, dy, dx).unwrap());
        let rhs = shift_spatial(&y, dy / 4, dx / 4).unwrap();
        assert_eq!(lhs, rhs, "shift ({dy},{dx})");
    }
}

// ---------- pooling ----------

#[test]
fn blur_pool_keeps_constants() {
    for (h, w) in [(2, 2), (4, 4), (5, 5), (6, 7), (64, 64)] {
        let x = Tensor::full(&[3, h, w], 0.7);
        let y = eval(&ParamStore::new(), &x, &|_, v| blur_pool(v, 2).unwrap());
        assert_eq!(y.shape(), &[3, h.div_ceil(2), w.div_ceil(2)]);
        assert!(y.data().iter().all(|v| (v - 0.7).abs() <= 1e-12));
    }
}

#[test]
fn blur_pool_impulse_matches_hand_evaluation() {
    // 4x4 plane, impulse at (0,0). Even extent: taps [1,3,3,1]/8 over indices
    // 2i-1..=2i+2, reflecting -1 onto 1 and 4 onto 2. Index 0 is only seen by
    // output 0, with weight 3/8 per axis.
    let mut d = vec![0.0; 16];
    d[0] = 1.0;
    let x = Tensor::new(vec![1, 4, 4], d).unwrap();
    let y = eval(&ParamStore::new(), &x, &|_, v| blur_pool(v, 2).unwrap());
    let a0 = 3.0 / 8.0;
    assert_eq!(y.shape(), &[1, 2, 2]);
    assert!((y.get(&[0, 0, 0]) - a0 * a0).abs() < 1e-15);
    assert_eq!(y.get(&[0, 0, 1]), 0.0);
    assert_eq!(y.get(&[0, 1, 1]), 0.0);

    // 5x5 plane (odd extent): taps [1,2,1]/4 over indices 2i-1..=2i+1 with -1
    // reflected onto 1. Along an axis, output 0 puts 1/2 on index 0 and
    // 1/4 + 1/4 on index 1; output 1 puts 1/4 on index 1.
    let mut d = vec![0.0; 25];
    d[0] = 1.0;
    d[6] = 1.0;
    let x = Tensor::new(vec![1, 5, 5], d).unwrap();
    let y = eval(&ParamStore::new(), &x, &|_, v| blur_pool(v, 2).unwrap());
    assert_eq!(y.shape(), &[1, 3, 3]);
    let want00 = 0.5 * 0.5 + 0.5 * 0.5;
    assert!((y.get(&[0, 0, 0]) - want00).abs() < 1e-15);
    // output column 1 covers columns 1..=3 only: (1,1) contributes 1/2 * 1/4
    assert!((y.get(&[0, 0, 1]) - 0.125).abs() < 1e-15);
    assert!((y.get(&[0, 1, 1]) - 0.25 * 0.25).abs() < 1e-15);
}

/// White noise smoothed by a separable Gaussian (sigma 1 cell, periodic edges).
fn smooth_input(r: &mut ChaCha8Rng, side: usize) -> Tensor {
    let noise: Vec<f64> = (0..side * side).map(|_| r.random_range(-1.0..1.0)).collect();
    let taps: Vec<f64> = (-3i32..=3).map(|d| (-(d * d) as f64 / 2.0).exp()).collect();
    let norm: f64 = taps.iter().sum();
    let wrap = |i: isize| i.rem_euclid(side as isize) as usize;
    let mut tmp = vec![0.0; side * side];
    for y in 0..side {
        for x in 0..side {
            tmp[y * side + x] = (0..7).map(|t| taps[t] * noise[y * side + wrap(x as isize + t as isize - 3)]).sum::<f64>() / norm;
        }
    }
    Tensor::from_fn(&[1, side, side], |i| {
        (0..7).map(|t| taps[t] * tmp[wrap(i[1] as isize + t as isize - 3) * side + i[2]]).sum::<f64>() / norm
    })
    .unwrap()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Mean cosine similarity between pool(x) and pool(x shifted by one pixel),
/// compared on the interior of the aligned output grid.
pub fn shift_consistency(pool: &dyn Fn(&Tensor) -> Tensor, inputs: &[Tensor]) -> f64 {
    let mut total = 0.0;
    for x in inputs {
        let side = x.shape()[1];
        // crop a one-pixel shifted window so both paths see real content
        let crop = |off: usize| {
            Tensor::from_fn(&[1, side - 2, side - 2], |i| x.get(&[0, i[1], i[2] + off])).unwrap()
        };
        let a = pool(&crop(0));
        let b = pool(&crop(1));
        total += cosine(a.data(), b.data());
    }
    total / inputs.len() as f64
}

#[test]
fn blur_pool_is_more_shift_consistent_than_max_pool() {
    let mut r = rng(15);
    let inputs: Vec<Tensor> = (0..100).map(|_| smooth_input(&mut r, 40)).collect();
    let store = ParamStore::new();
    let blur = shift_consistency(&|x| eval(&store, x, &|_, v| blur_pool(v, 2).unwrap()), &inputs);
    let max = shift_consistency(&|x| eval(&store, x, &|_, v| max_pool(v, 2, 2).unwrap()), &inputs);
    assert!(blur > max, "blur {blur} vs max {max}");
}

#[test]
fn max_pool_examples_and_oracle() {
    let store = ParamStore::new();
    let x = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(eval(&store, &x, &|_, v| max_pool(v, 2, 2).unwrap()).data(), &[4.0]);
    let c = Tensor::full(&[2, 6, 6], 1.5);
    assert_eq!(eval(&store, &c, &|_, v| max_pool(v, 2, 2).unwrap()), Tensor::full(&[2, 3, 3], 1.5));
    let x = random(&[3, 7, 9], &mut rng(16));
    let y = eval(&store, &x, &|_, v| max_pool(v, 2, 2).unwrap());
    assert_eq!(y.shape(), &[3, 3, 4]);
    for c in 0..3 {
        for oy in 0..3 {
            for ox in 0..4 {
                let mut m = f64::NEG_INFINITY;
                for u in 0..2 {
                    for v in 0..2 {
                        m = m.max(x.get(&[c, 2 * oy + u, 2 * ox + v]));
                    }
                }
                assert_eq!(y.get(&[c, oy, ox]), m);
            }
        }
    }
}

#[test]
fn orientation_pool_commutes_with_rotation() {
    let store = ParamStore::new();
    let mut r = rng(17);
    let same = random(&[2, 1, 5, 5], &mut r);
    let tiled = Tensor::from_fn(&[2, 4, 5, 5], |i| same.get(&[i[0], 0, i[2], i[3]])).unwrap();
    let pooled = eval(&store, &tiled, &|_, v| orientation_pool(v, OrientationPool::Mean).unwrap());
    assert!(pooled.max_abs_diff(&same.reshape(&[2, 5, 5]).unwrap()) < 1e-15);
    for mode in [OrientationPool::Mean, OrientationPool::Max] {
        let x = random(&[3, 4, 6, 6], &mut r);
        let base = eval(&store, &x, &|_, v| orientation_pool(v, mode).unwrap());
        for m in 0..4 {
            let lhs = eval(&store, &p4_rotate(&x, m).unwrap(), &|_, v| orientation_pool(v, mode).unwrap());
            assert!(lhs.max_abs_diff(&rot90_spatial(&base, m).unwrap()) <= 1e-10);
        }
    }
}

#[test]
fn fully_connected_examples() {
    let tape = Tape::new();
    let x = tape.constant(Tensor::from_vec(vec![1.0, -2.0, 3.0]).unwrap());
    let b = tape.constant(Tensor::from_vec(vec![0.5, 7.0]).unwrap());
    let zero_w = tape.constant(Tensor::zeros(&[2, 3]));
    assert_eq!(fully_connected(x, zero_w, b).unwrap().value().data(), &[0.5, 7.0]);
    let eye = tape.constant(Tensor::from_fn(&[3, 3], |i| f64::from(u8::from(i[0] == i[1]))).unwrap());
    let zb = tape.constant(Tensor::zeros(&[3]));
    assert_eq!(fully_connected(x, eye, zb).unwrap().value().data(), &[1.0, -2.0, 3.0]);
    let mut r = rng(18);
    let w = random(&[4, 3], &mut r);
    let bb = random(&[4], &mut r);
    let y = fully_connected(x, tape.constant(w.clone()), tape.constant(bb.clone())).unwrap().value();
    for o in 0..4 {
        let want: f64 = (0..3).map(|i| w.get(&[o, i]) * [1.0, -2.0, 3.0][i]).sum::<f64>() + bb.get(&[o]);
        assert!((y.get(&[o]) - want).abs() < 1e-14);
    }
    let bad = tape.constant(Tensor::zeros(&[2, 4]));
    assert!(fully_connected(x, bad, b).is_err());
}

// ---------- gradient checks ----------

/// Checks the input gradient and every parameter gradient of `f` against
/// central differences.
fn grad_check(store: &ParamStore, x: &Tensor, f: &dyn for<'t> Fn(&Bound<'t>, Var<'t>) -> Var<'t>) -> f64 {
    let probe = random(&eval(store, x, f).shape().to_vec(), &mut rng(99));
    let loss_at = |store: &ParamStore, x: &Tensor| -> f64 {
        eval(store, x, f).dot(&probe)
    };
    let tape = Tape::new();
    let p = store.bind(&tape, true);
    let xv = tape.param(x.clone());
    let y = f(&p, xv);
    let loss = y.mul(tape.constant(probe.clone())).unwrap().sum().unwrap();
    let grads = tape.backward(loss).unwrap();
    let mut worst = max_relative_error(
        &grads.wrt(xv),
        &finite_difference_gradient(|t| loss_at(store, t), x, 1e-4).unwrap(),
        1e-6,
    );
    let analytic = p.gradients(&grads);
    for (id, g) in store.ids().zip(analytic) {
        let numeric = finite_difference_gradient(
            |t| {
                let mut s = store.clone();
                s.set(id, t.clone()).unwrap();
                loss_at(&s, x)
            },
            store.get(id),
            1e-4,
        )
        .unwrap();
        worst = worst.max(max_relative_error(&g, &numeric, 1e-6));
    }
    worst
}

#[test]
fn lifting_and_group_conv_gradients() {
    let mut r = rng(20);
    let (s, l) = lifting(2, 2, 3, 1);
    let x = random(&[2, 5, 5], &mut r);
    assert!(grad_check(&s, &x, &|p, v| l.forward(p, v).unwrap()) < 1e-3);
    let (s, g) = group(2, 2, 3, 2);
    let x = random(&[2, 4, 4, 4], &mut r);
    assert!(grad_check(&s, &x, &|p, v| g.forward(p, v).unwrap()) < 1e-3);
}

#[test]
fn pooling_and_fc_gradients() {
    let mut r = rng(21);
    let store = ParamStore::new();
    for side in [6, 7] {
        let x = random(&[2, side, side], &mut r);
        assert!(grad_check(&store, &x, &|_, v| blur_pool(v, 2).unwrap()) < 1e-3);
    }
    let x = random(&[2, 4, 3, 3], &mut r);
    assert!(grad_check(&store, &x, &|_, v| orientation_pool(v, OrientationPool::Mean).unwrap()) < 1e-3);
    let mut s = ParamStore::new();
    let lin = symnav_nn::Linear::new(&mut s, "fc", 6, 4, Init::Relu, &mut r);
    let x = random(&[6], &mut r);
    assert!(grad_check(&s, &x, &|p, v| lin.forward(p, v).unwrap()) < 1e-3);
    let mut s = ParamStore::new();
    let conv = symnav_nn::Conv2d::new(&mut s, "c", 2, 3, 3, 1, 1, Init::Relu, &mut r);
    let x = random(&[2, 5, 5], &mut r);
    assert!(grad_check(&s, &x, &|p, v| conv.forward(p, v).unwrap()) < 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rot90_round_trips(seed in 0u64..1000, h in 1usize..7, w in 1usize..7, m in 0i64..4) {
        let x = random(&[2, h, w], &mut rng(seed));
        let back = rot90_spatial(&rot90_spatial(&x, m).unwrap(), 4 - m).unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn blur_pool_preserves_constants_any_extent(h in 2usize..20, w in 2usize..20, c in -5.0f64..5.0) {
        let x = Tensor::full(&[1, h, w], c);
        let y = eval(&ParamStore::new(), &x, &|_, v| blur_pool(v, 2).unwrap());
        prop_assert!(y.data().iter().all(|v| (v - c).abs() <= 1e-12));
    }

    #[test]
    fn compose_is_associative(a in (0i64..4, -9i64..9, -9i64..9), b in (0i64..4, -9i64..9, -9i64..9), c in (0i64..4, -9i64..9, -9i64..9)) {
        let (ga, gb, gc) = (P4Element::new(a.0, a.1, a.2), P4Element::new(b.0, b.1, b.2), P4Element::new(c.0, c.1, c.2));
        prop_assert_eq!((ga * gb) * gc, ga * (gb * gc));
        let det = { let m = ga.matrix(); m[0][0] * m[1][1] - m[0][1] * m[1][0] };
        prop_assert_eq!(det, 1);
    }
}
