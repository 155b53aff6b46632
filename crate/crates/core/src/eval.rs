//! Coverage evaluation and the rotation-invariance diagnostics.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use symnav_env::{EnvConfig, Environment, OccupancyGrid};
use symnav_nn::{rot90_spatial, GlobalPolicyNetwork, PolicyState};
use symnav_tensor::{Tape, Tensor};

use crate::error::CoreError;
use crate::policy::{run_episode, EpisodeRecord, GoalPolicy};

/// Seed of episode `(run, map)` of an evaluation seeded with `seed`.
fn episode_seed(seed: u64, run: usize, map: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((run as u64) << 32) ^ map as u64
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub policy: String,
    /// Mean final coverage over the maps, one entry per run.
    pub run_means: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation of `run_means` (0 for a single run).
    pub std: f64,
    /// Episodes in run-major order.
    pub episodes: Vec<EpisodeRecord>,
    pub maps: usize,
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs `policy` for `runs` passes over `maps`, one full episode per map
/// and pass. Episodes are independent and run in parallel; the result does
/// not depend on scheduling.
pub fn evaluate_coverage(
    policy: &GoalPolicy<'_>,
    maps: &[Arc<OccupancyGrid>],
    cfg: &EnvConfig,
    runs: usize,
    seed: u64,
) -> Result<CoverageReport, CoreError> {
    if maps.is_empty() || runs == 0 {
        return Err(CoreError::contract("evaluate_coverage", "need at least one map and one run"));
    }
    let jobs: Vec<(usize, usize)> = (0..runs).flat_map(|r| (0..maps.len()).map(move |m| (r, m))).collect();
    let episodes = jobs
        .par_iter()
        .map(|&(r, m)| {
            let s = episode_seed(seed, r, m);
            let mut env = Environment::new(maps[m].clone(), cfg.clone(), s)?;
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            rng.set_stream(1);
            run_episode(&mut env, policy, &mut rng, |_| {})
        })
        .collect::<Result<Vec<_>, CoreError>>()?;
    let run_means: Vec<f64> = episodes
        .chunks(maps.len())
        .map(|c| c.iter().map(EpisodeRecord::final_coverage).sum::<f64>() / c.len() as f64)
        .collect();
    let (mean, std) = mean_std(&run_means);
    Ok(CoverageReport {
        policy: policy.name(),
        run_means,
        mean,
        std,
        episodes,
        maps: maps.len(),
    })
}

impl CoverageReport {
    /// Mean coverage over the maps at every step, one column per run.
    pub fn curves_csv(&self) -> String {
        let runs = self.run_means.len();
        let len = self.episodes.iter().map(|e| e.coverage.len()).max().unwrap_or(0);
        let mut s = String::from("step");
        for r in 0..runs {
            let _ = write!(s, ",run{r}_coverage_m2");
        }
        s.push('\n');
        for t in 0..len {
            let _ = write!(s, "{t}");
            for r in 0..runs {
                let eps = &self.episodes[r * self.maps..(r + 1) * self.maps];
                let m = eps
                    .iter()
                    .map(|e| e.coverage[t.min(e.coverage.len() - 1)])
                    .sum::<f64>()
                    / eps.len() as f64;
                let _ = write!(s, ",{m}");
            }
            s.push('\n');
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("policy,runs,maps,mean_coverage_m2,std_coverage_m2\n");
        let _ = writeln!(s, "{},{},{},{},{}", self.policy, self.run_means.len(), self.maps, self.mean, self.std);
        s
    }
}

/// Decision-time states from one episode per map with `policy`, then `q`
/// of them drawn uniformly without replacement.
pub fn collect_probe_states(
    policy: &GoalPolicy<'_>,
    maps: &[Arc<OccupancyGrid>],
    cfg: &EnvConfig,
    q: usize,
    seed: u64,
) -> Result<Vec<PolicyState>, CoreError> {
    let per_map = maps
        .par_iter()
        .enumerate()
        .map(|(m, map)| {
            let s = episode_seed(seed, 0, m);
            let mut env = Environment::new(map.clone(), cfg.clone(), s)?;
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let mut states = Vec::new();
            let mut err = None;
            run_episode(&mut env, policy, &mut rng, |e| match e.policy_state() {
                Ok(st) => states.push(st),
                Err(x) => err = Some(x),
            })?;
            match err {
                Some(e) => Err(e.into()),
                None => Ok(states),
            }
        })
        .collect::<Result<Vec<_>, CoreError>>()?;
    let all: Vec<PolicyState> = per_map.into_iter().flatten().collect();
    if all.len() < q {
        return Err(CoreError::contract(
            "collect_probe_states",
            format!("{} states recorded, {q} requested", all.len()),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, all.len(), q).into_vec();
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| all[i].clone()).collect())
}

/// Rotates every channel of a `[C, n, n]` map counter-clockwise by `angle`
/// about its centre with bilinear sampling, keeping only the inscribed disk.
pub fn rotate_bilinear(x: &Tensor, angle: f64) -> Result<Tensor, CoreError> {
    let s = x.shape();
    if s.len() != 3 || s[1] != s[2] {
        return Err(CoreError::contract("rotate_bilinear", format!("expected [C, n, n], got {s:?}")));
    }
    let (ch, n) = (s[0], s[1]);
    let c = (n as f64 - 1.0) / 2.0;
    let (cos, sin) = (angle.cos(), angle.sin());
    let src = x.data();
    let mut out = vec![0.0; x.numel()];
    for i in 0..n {
        for j in 0..n {
            let (y, xx) = (i as f64 - c, j as f64 - c);
            if y.hypot(xx) > c + 1e-9 {
                continue;
            }
            // where the output pixel comes from
            let sy = (cos * y + sin * xx + c).clamp(0.0, n as f64 - 1.0);
            let sx = (-sin * y + cos * xx + c).clamp(0.0, n as f64 - 1.0);
            let (y0, x0) = (sy.floor() as usize, sx.floor() as usize);
            let (y1, x1) = ((y0 + 1).min(n - 1), (x0 + 1).min(n - 1));
            let (fy, fx) = (sy - y0 as f64, sx - x0 as f64);
            for k in 0..ch {
                let p = |r: usize, q: usize| src[(k * n + r) * n + q];
                out[(k * n + i) * n + j] = (1.0 - fy) * ((1.0 - fx) * p(y0, x0) + fx * p(y0, x1))
                    + fy * ((1.0 - fx) * p(y1, x0) + fx * p(y1, x1));
            }
        }
    }
    Ok(Tensor::new(s.to_vec(), out)?)
}

/// Base states and `K` rotations of each by `2 pi k / K`.
#[derive(Debug, Clone)]
pub struct RotationProbe {
    states: Vec<PolicyState>,
    k: usize,
}

impl RotationProbe {
    pub fn new(states: Vec<PolicyState>, k: usize) -> Result<Self, CoreError> {
        if states.is_empty() {
            return Err(CoreError::contract("RotationProbe", "Q = 0"));
        }
        if k == 0 {
            return Err(CoreError::contract("RotationProbe", "K = 0"));
        }
        Ok(Self { states, k })
    }

    pub fn q(&self) -> usize {
        self.states.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn base(&self, i: usize) -> &PolicyState {
        &self.states[i]
    }

    /// `r^k s_i`. Quarter turns with `K = 4` are exact index permutations;
    /// any other `K` resamples bilinearly inside the inscribed disk, and the
    /// disk mask applies to `k = 0` as well.
    pub fn rotated(&self, i: usize, k: usize) -> Result<PolicyState, CoreError> {
        let s = self.states[i].tensor();
        let t = if self.k == 4 {
            rot90_spatial(s, k as i64)?
        } else {
            rotate_bilinear(s, 2.0 * std::f64::consts::PI * k as f64 / self.k as f64)?
        };
        Ok(PolicyState::new(t)?)
    }
}

/// How the per-state mean in the rotation std is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanMode {
    /// Sum over the K rotations divided by K.
    Arithmetic,
    /// Sum over the K rotations divided by K - 1.
    AsPrinted,
}

/// `(1/Q) sum_i sqrt(sum_k (y_i^k - ybar_i)^2)` for `values[i][k]`.
pub fn rotation_std_from_values(values: &[Vec<f64>], mode: MeanMode) -> Result<f64, CoreError> {
    if values.is_empty() {
        return Err(CoreError::contract("rotation_std", "Q = 0"));
    }
    let mut acc = 0.0;
    for row in values {
        let k = row.len();
        let denom = match mode {
            MeanMode::Arithmetic => k as f64,
            MeanMode::AsPrinted if k > 1 => (k - 1) as f64,
            MeanMode::AsPrinted => {
                return Err(CoreError::contract("rotation_std", "K = 1 has no K - 1 normaliser"));
            }
        };
        let mean = row.iter().sum::<f64>() / denom;
        acc += row.iter().map(|y| (y - mean).powi(2)).sum::<f64>().sqrt();
    }
    Ok(acc / values.len() as f64)
}

/// Rotation std of `critic` over `probe`.
pub fn rotation_std(
    probe: &RotationProbe,
    critic: impl Fn(&PolicyState) -> Result<f64, CoreError> + Sync,
    mode: MeanMode,
) -> Result<f64, CoreError> {
    let values = (0..probe.q())
        .into_par_iter()
        .map(|i| (0..probe.k()).map(|k| critic(&probe.rotated(i, k)?)).collect())
        .collect::<Result<Vec<Vec<f64>>, CoreError>>()?;
    rotation_std_from_values(&values, mode)
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.iter().map(|x| x * x).sum::<f64>().sqrt(), b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
}

/// `M[a][b] = mean_i cos(feats[i][a], feats[i][b])`.
pub fn similarity_from_features(feats: &[Vec<Vec<f64>>]) -> Result<Vec<Vec<f64>>, CoreError> {
    let q = feats.len();
    if q == 0 {
        return Err(CoreError::contract("feature_similarity_matrix", "Q = 0"));
    }
    let k = feats[0].len();
    let mut m = vec![vec![0.0; k]; k];
    for a in 0..k {
        for b in a..k {
            let s = feats.iter().map(|f| cosine(&f[a], &f[b])).sum::<f64>() / q as f64;
            m[a][b] = s;
            m[b][a] = s;
        }
    }
    Ok(m)
}

pub fn feature_similarity_matrix(
    probe: &RotationProbe,
    xi: impl Fn(&PolicyState) -> Result<Vec<f64>, CoreError> + Sync,
) -> Result<Vec<Vec<f64>>, CoreError> {
    let feats = (0..probe.q())
        .into_par_iter()
        .map(|i| (0..probe.k()).map(|k| xi(&probe.rotated(i, k)?)).collect())
        .collect::<Result<Vec<Vec<Vec<f64>>>, CoreError>>()?;
    similarity_from_features(&feats)
}

pub fn mean_off_diagonal(m: &[Vec<f64>]) -> f64 {
    let k = m.len();
    if k < 2 {
        return f64::NAN;
    }
    let mut s = 0.0;
    for (a, row) in m.iter().enumerate() {
        for (b, v) in row.iter().enumerate() {
            if a != b {
                s += v;
            }
        }
    }
    s / (k * (k - 1)) as f64
}

/// Critic features and value from one pass.
pub fn critic_pass(net: &GlobalPolicyNetwork, s: &PolicyState) -> Result<(Vec<f64>, f64), CoreError> {
    let tape = Tape::new();
    let p = net.params().bind(&tape, false);
    let block = net.conv_block(&p, tape.constant(s.tensor().clone()))?;
    let f = net.critic_input(block)?;
    let v = net.critic_value(&p, f)?;
    Ok((f.value().data().to_vec(), v.value().item()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceReport {
    pub variant: String,
    pub q: usize,
    pub k: usize,
    pub std: f64,
    pub std_as_printed: f64,
    pub similarity: Vec<Vec<f64>>,
    pub avg_off_diagonal: f64,
}

impl InvarianceReport {
    pub fn similarity_csv(&self) -> String {
        let mut s = String::new();
        for row in &self.similarity {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }

    pub fn summary_line(&self) -> String {
        format!(
            "{} Q={} K={} std={:.6} std_as_printed={:.6} avg_similarity={:.4}",
            self.variant, self.q, self.k, self.std, self.std_as_printed, self.avg_off_diagonal
        )
    }
}

/// Rotation std (both mean conventions) and the feature similarity matrix
/// of `net`'s critic, from one pass per rotated state.
pub fn invariance_report(net: &GlobalPolicyNetwork, probe: &RotationProbe) -> Result<InvarianceReport, CoreError> {
    let rows = (0..probe.q())
        .into_par_iter()
        .map(|i| {
            (0..probe.k())
                .map(|k| critic_pass(net, &probe.rotated(i, k)?))
                .collect::<Result<Vec<_>, CoreError>>()
        })
        .collect::<Result<Vec<_>, CoreError>>()?;
    let values: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| x.1).collect()).collect();
    let feats: Vec<Vec<Vec<f64>>> = rows.into_iter().map(|r| r.into_iter().map(|x| x.0).collect()).collect();
    let similarity = similarity_from_features(&feats)?;
    Ok(InvarianceReport {
        variant: net.variant().tag().to_string(),
        q: probe.q(),
        k: probe.k(),
        std: rotation_std_from_values(&values, MeanMode::Arithmetic)?,
        std_as_printed: if probe.k() > 1 {
            rotation_std_from_values(&values, MeanMode::AsPrinted)?
        } else {
            f64::NAN
        },
        avg_off_diagonal: mean_off_diagonal(&similarity),
        similarity,
    })
}
