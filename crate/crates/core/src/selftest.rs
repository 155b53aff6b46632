//! Quick oracle and property checks behind `symnav selftest`. Everything
//! is seeded and the table holds no timings, so the output is
//! reproducible byte for byte.

use std::f64::consts::SQRT_2;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symnav_env::{frontiers_from_masks, shortest_path, CostGrid};
use symnav_nn::{p4_rotate, GlobalPolicyNetwork, ModelVariant, NetConfig, PolicyState};
use symnav_tensor::{finite_difference_gradient, max_relative_error, ops, Tensor};

use crate::a2c::{a2c_gradients, a2c_loss, Sample};
use crate::config::TrainConfig;
use crate::error::CoreError;
use crate::rollout::discounted_returns;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

fn tiny_config(g: usize) -> NetConfig {
    NetConfig {
        g,
        widths: vec![2, 3, 3, 3, 2],
        actor_hidden: 6,
        critic_hidden: 5,
        polar_r: 2,
        polar_a: 4,
        ..NetConfig::default()
    }
}

fn random_tensor(shape: &[usize], r: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| r.random_range(-1.0..1.0)).collect()).expect("sized")
}

/// Replaces every bias with small random values so no ReLU sits exactly
/// at its kink.
fn randomise_biases(net: &mut GlobalPolicyNetwork, r: &mut ChaCha8Rng) -> Result<(), CoreError> {
    let ids: Vec<_> = net.params().ids().collect();
    for id in ids {
        if net.params().name(id).ends_with("bias") {
            let shape = net.params().get(id).shape().to_vec();
            let n = shape.iter().product();
            let t = Tensor::new(shape, (0..n).map(|_| r.random_range(-0.05..0.05)).collect())?;
            net.params_mut().set(id, t)?;
        }
    }
    Ok(())
}

fn p4_equivariance() -> Result<CheckResult, CoreError> {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let net = GlobalPolicyNetwork::new(ModelVariant::SAns, tiny_config(16), 1)?;
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let s = PolicyState::random(16, &mut r);
        let base = net.block_output(&s)?;
        for m in 1..4 {
            let rotated = net.block_output(&s.rot90(m))?;
            worst = worst.max(rotated.max_abs_diff(&p4_rotate(&base, m)?));
        }
    }
    Ok(check("p4 block equivariance", worst <= 1e-9, format!("max error {worst:.3e}")))
}

fn critic_invariance() -> Result<CheckResult, CoreError> {
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for seed in 0..3 {
        let net = GlobalPolicyNetwork::new(ModelVariant::SAns, tiny_config(16), seed)?;
        for _ in 0..5 {
            let s = PolicyState::random(16, &mut r);
            let v = net.critic_forward(&s)?;
            for m in 1..4 {
                worst = worst.max((net.critic_forward(&s.rot90(m))? - v).abs());
            }
        }
    }
    Ok(check("S-ANS critic quarter-turn invariance", worst <= 1e-9, format!("max gap {worst:.3e}")))
}

fn correlate_oracle() -> Result<CheckResult, CoreError> {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for (stride, pad) in [(1, 0), (1, 1), (2, 1)] {
        let x = random_tensor(&[3, 9, 8], &mut r);
        let w = random_tensor(&[4, 3, 3, 3], &mut r);
        let y = ops::correlate2d(&x, &w, stride, pad)?;
        let (oh, ow) = (y.shape()[1], y.shape()[2]);
        for o in 0..4 {
            for i in 0..oh {
                for j in 0..ow {
                    let mut acc = 0.0;
                    for c in 0..3 {
                        for a in 0..3 {
                            for b in 0..3 {
                                let (yy, xx) = ((i * stride + a) as i64 - pad as i64, (j * stride + b) as i64 - pad as i64);
                                if yy >= 0 && xx >= 0 && yy < 9 && xx < 8 {
                                    acc += x.get(&[c, yy as usize, xx as usize]) * w.get(&[o, c, a, b]);
                                }
                            }
                        }
                    }
                    worst = worst.max((acc - y.get(&[o, i, j])).abs());
                }
            }
        }
    }
    Ok(check("correlate2d vs nested loops", worst <= 1e-10, format!("max error {worst:.3e}")))
}

/// Textbook O(V^2) Dijkstra over the same move rules as the planner.
fn dijkstra(cost: &[f64], n: usize, start: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; n * n];
    let mut done = vec![false; n * n];
    dist[start] = 0.0;
    let free = |r: i64, c: i64| r >= 0 && c >= 0 && r < n as i64 && c < n as i64 && cost[(r * n as i64 + c) as usize].is_finite();
    while let Some(u) = (0..n * n)
        .filter(|&i| !done[i] && dist[i].is_finite())
        .min_by(|&a, &b| dist[a].total_cmp(&dist[b]))
    {
        done[u] = true;
        let (r, c) = ((u / n) as i64, (u % n) as i64);
        for dr in -1..=1 {
            for dc in -1..=1 {
                let diagonal = dr != 0 && dc != 0;
                if (dr, dc) == (0, 0) || !free(r + dr, c + dc) || (diagonal && !(free(r + dr, c) && free(r, c + dc))) {
                    continue;
                }
                let v = ((r + dr) * n as i64 + c + dc) as usize;
                let step = if diagonal { SQRT_2 } else { 1.0 } * cost[v];
                dist[v] = dist[v].min(dist[u] + step);
            }
        }
    }
    dist
}

fn planner_oracle() -> Result<CheckResult, CoreError> {
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for _ in 0..20 {
        let n = 12;
        let mut cost: Vec<f64> = (0..n * n)
            .map(|_| match r.random_range(0..10) {
                0 | 1 => f64::INFINITY,
                2 | 3 => 1.5,
                _ => 1.0,
            })
            .collect();
        cost[0] = 1.0;
        let goal = r.random_range(0..n * n);
        let want = dijkstra(&cost, n, 0)[goal];
        let path = shortest_path(&CostGrid::new(n, cost)?, (0, 0), (goal / n, goal % n))?;
        if want.is_finite() {
            compared += 1;
            worst = worst.max((path.cost - want).abs());
        } else if path.reached_goal {
            worst = f64::INFINITY;
        }
    }
    Ok(check(
        "shortest path vs Dijkstra",
        worst <= 1e-9,
        format!("{compared} reachable goals, max cost gap {worst:.3e}"),
    ))
}

fn returns_oracle() -> Result<CheckResult, CoreError> {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = r.random_range(1..30);
        let rewards: Vec<f64> = (0..n).map(|_| r.random_range(0.0..5.0)).collect();
        let dones: Vec<bool> = (0..n).map(|_| r.random_bool(0.1)).collect();
        let (gamma, boot) = (r.random_range(0.5..1.0), r.random_range(-2.0..2.0));
        let got = discounted_returns(&rewards, &dones, gamma, boot);
        for t in 0..n {
            // explicit discounted sum up to the first episode end
            let mut want = 0.0;
            let mut disc = 1.0;
            let mut ended = false;
            for j in t..n {
                want += disc * rewards[j];
                disc *= gamma;
                if dones[j] {
                    ended = true;
                    break;
                }
            }
            if !ended {
                want += disc * boot;
            }
            worst = worst.max((got[t] - want).abs());
        }
    }
    Ok(check("returns vs direct sums", worst <= 1e-12, format!("max error {worst:.3e}")))
}

fn frontier_oracle() -> Result<CheckResult, CoreError> {
    let mut r = ChaCha8Rng::seed_from_u64(6);
    let mut mismatches = 0;
    for _ in 0..20 {
        let n = r.random_range(2..24);
        let explored: Vec<bool> = (0..n * n).map(|_| r.random_bool(0.5)).collect();
        let obstacle: Vec<bool> = (0..n * n).map(|_| r.random_bool(0.2)).collect();
        let f = frontiers_from_masks(n, &explored, &obstacle)?;
        for i in 0..n * n {
            let (y, x) = (i / n, i % n);
            let mut unexplored_neighbour = false;
            for (dy, dx) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (yy, xx) = (y as i64 + dy, x as i64 + dx);
                if yy >= 0 && xx >= 0 && yy < n as i64 && xx < n as i64 && !explored[(yy * n as i64 + xx) as usize] {
                    unexplored_neighbour = true;
                }
            }
            let want = explored[i] && !obstacle[i] && unexplored_neighbour;
            mismatches += usize::from(want != f.contains((y, x)));
        }
    }
    Ok(check("frontier mask vs definition", mismatches == 0, format!("{mismatches} mismatched cells")))
}

fn loss_gradient() -> Result<CheckResult, CoreError> {
    let mut r = ChaCha8Rng::seed_from_u64(7);
    let mut net = GlobalPolicyNetwork::new(ModelVariant::SAns, tiny_config(8), 7)?;
    randomise_biases(&mut net, &mut r)?;
    let states: Vec<PolicyState> = (0..3).map(|_| PolicyState::random(8, &mut r)).collect();
    let gp = net.config().g_prime();
    let samples: Vec<Sample<'_>> = states
        .iter()
        .map(|s| Sample {
            state: s,
            action: r.random_range(0..gp * gp),
            advantage: r.random_range(-1.0..1.0),
            ret: r.random_range(-1.0..1.0),
        })
        .collect();
    let cfg = TrainConfig::default();
    let (_, grads) = a2c_gradients(&net, &samples, &cfg)?;
    let mut worst: f64 = 0.0;
    let ids: Vec<_> = net.params().ids().collect();
    for (k, id) in ids.into_iter().enumerate() {
        let x = net.params().get(id).clone();
        let mut probe = net.clone();
        let fd = finite_difference_gradient(
            |t| {
                probe.params_mut().set(id, t.clone()).expect("same shape");
                a2c_loss(&probe, &samples, &cfg).map(|l| l.total).unwrap_or(f64::NAN)
            },
            &x,
            1e-6,
        )?;
        let analytic = Tensor::new(x.shape().to_vec(), grads[k].clone())?;
        worst = worst.max(max_relative_error(&analytic, &fd, 1e-6));
    }
    Ok(check("A2C loss gradient vs finite differences", worst < 1e-3, format!("max relative error {worst:.3e}")))
}

/// Runs every check; a check that errors counts as failed.
pub fn run_selftest() -> Vec<CheckResult> {
    let checks: [(&'static str, fn() -> Result<CheckResult, CoreError>); 7] = [
        ("p4 block equivariance", p4_equivariance),
        ("S-ANS critic quarter-turn invariance", critic_invariance),
        ("correlate2d vs nested loops", correlate_oracle),
        ("shortest path vs Dijkstra", planner_oracle),
        ("returns vs direct sums", returns_oracle),
        ("frontier mask vs definition", frontier_oracle),
        ("A2C loss gradient vs finite differences", loss_gradient),
    ];
    checks
        .iter()
        .map(|(name, f)| f().unwrap_or_else(|e| check(name, false, format!("error: {e}"))))
        .collect()
}

pub fn selftest_table(results: &[CheckResult]) -> String {
    let width = results.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut s = String::new();
    for c in results {
        let _ = writeln!(
            s,
            "{:<width$}  {}  {}",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.detail
        );
    }
    s
}
