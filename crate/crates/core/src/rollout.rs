//! Rollout workers and the per-decision experience they record.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use symnav_env::{AgentPose, EnvConfig, EnvError, Environment, OccupancyGrid};
use symnav_nn::{GlobalPolicyNetwork, PolicyState};

use crate::error::CoreError;

/// Where a worker draws its episodes from.
#[derive(Debug, Clone)]
pub struct EpisodeSource {
    pub maps: Arc<Vec<Arc<OccupancyGrid>>>,
    /// Fixed start pose; a seeded open cell when `None`.
    pub start: Option<AgentPose>,
}

impl EpisodeSource {
    pub fn new(maps: Vec<Arc<OccupancyGrid>>) -> Self {
        Self {
            maps: Arc::new(maps),
            start: None,
        }
    }
}

/// One environment plus the random stream that drives it.
pub struct Worker {
    index: usize,
    source: EpisodeSource,
    cfg: EnvConfig,
    env: Environment,
    rng: ChaCha8Rng,
    episode: usize,
    last_coverage: Option<f64>,
}

impl Worker {
    /// Worker `index` of a run seeded with `seed`; each index gets its own stream.
    pub fn new(index: usize, source: EpisodeSource, cfg: EnvConfig, seed: u64) -> Result<Self, CoreError> {
        if source.maps.is_empty() {
            return Err(CoreError::contract("Worker::new", "episode source has no maps"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64 + 1);
        let env = Self::fresh(&source, &cfg, &mut rng).map_err(|source| CoreError::Episode {
            worker: index,
            episode: 0,
            source,
        })?;
        Ok(Self {
            index,
            source,
            cfg,
            env,
            rng,
            episode: 0,
            last_coverage: None,
        })
    }

    fn fresh(source: &EpisodeSource, cfg: &EnvConfig, rng: &mut ChaCha8Rng) -> Result<Environment, EnvError> {
        let map = source.maps[rng.random_range(0..source.maps.len())].clone();
        let seed = rng.random();
        match source.start {
            Some(pose) => Environment::at_pose(map, cfg.clone(), pose, seed),
            None => Environment::new(map, cfg.clone(), seed),
        }
    }

    fn wrap(&self, source: EnvError) -> CoreError {
        CoreError::Episode {
            worker: self.index,
            episode: self.episode,
            source,
        }
    }

    fn reset(&mut self) -> Result<(), CoreError> {
        self.last_coverage = Some(self.env.coverage());
        self.episode += 1;
        self.env = Self::fresh(&self.source, &self.cfg, &mut self.rng).map_err(|e| self.wrap(e))?;
        Ok(())
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn episodes_finished(&self) -> usize {
        self.episode
    }

    /// Final coverage of the last finished episode, else the running one.
    pub fn recent_coverage(&self) -> f64 {
        self.last_coverage.unwrap_or_else(|| self.env.coverage())
    }

    /// Runs `length` global decisions with `net` choosing the goals.
    pub fn rollout(&mut self, net: &GlobalPolicyNetwork, length: usize) -> Result<RolloutBuffer, CoreError> {
        let side = net.config().g_prime();
        let mut steps = Vec::with_capacity(length);
        for _ in 0..length {
            let state = self.env.policy_state().map_err(|e| self.wrap(e))?;
            let (pi, value) = net.evaluate(&state)?;
            let action = pi.sample_index(&mut self.rng);
            let log_prob = pi.probs().data()[action].ln();
            let goal = self.env.lattice_goal(action, side);
            let out = self.env.run_decision(goal).map_err(|e| self.wrap(e))?;
            let done = self.env.done();
            steps.push(Transition {
                state,
                action,
                log_prob,
                value,
                reward: out.reward,
                done,
            });
            if done {
                self.reset()?;
            }
        }
        let bootstrap = if steps.last().is_some_and(|t| t.done) {
            0.0
        } else {
            let s = self.env.policy_state().map_err(|e| self.wrap(e))?;
            net.critic_forward(&s)?
        };
        Ok(RolloutBuffer { steps, bootstrap })
    }
}

/// One global decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: PolicyState,
    /// Goal-lattice index that was sampled.
    pub action: usize,
    pub log_prob: f64,
    /// Critic value at decision time.
    pub value: f64,
    /// Coverage gained (m²) until the next decision.
    pub reward: f64,
    /// The episode ended with this decision.
    pub done: bool,
}

/// Decisions of one worker in time order, with the critic value of the
/// state after the last one (0 when that decision ended its episode).
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBuffer {
    pub steps: Vec<Transition>,
    pub bootstrap: f64,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|t| t.reward).collect()
    }
}

/// Collects `length` decisions from every worker. The parallel path gives
/// the same buffers as the serial one: workers share nothing but `net`.
pub fn collect_rollout(
    net: &GlobalPolicyNetwork,
    workers: &mut [Worker],
    length: usize,
    parallel: bool,
) -> Result<Vec<RolloutBuffer>, CoreError> {
    if parallel {
        workers.par_iter_mut().map(|w| w.rollout(net, length)).collect()
    } else {
        workers.iter_mut().map(|w| w.rollout(net, length)).collect()
    }
}

/// `R_t = r_t + gamma * R_{t+1}`, restarting at episode ends, seeded with
/// `bootstrap` at the horizon.
pub fn discounted_returns(rewards: &[f64], dones: &[bool], gamma: f64, bootstrap: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut next = bootstrap;
    for t in (0..rewards.len()).rev() {
        if dones[t] {
            next = 0.0;
        }
        next = rewards[t] + gamma * next;
        out[t] = next;
    }
    out
}

/// Returns and advantages `A_t = R_t - V(s_t)` of one buffer.
pub fn returns_and_advantages(buf: &RolloutBuffer, gamma: f64, bootstrap: f64) -> (Vec<f64>, Vec<f64>) {
    scaled_returns_and_advantages(buf, gamma, bootstrap, 1.0)
}

/// As [`returns_and_advantages`] with rewards multiplied by `scale`.
pub fn scaled_returns_and_advantages(buf: &RolloutBuffer, gamma: f64, bootstrap: f64, scale: f64) -> (Vec<f64>, Vec<f64>) {
    let rewards: Vec<f64> = buf.steps.iter().map(|t| t.reward * scale).collect();
    let dones: Vec<bool> = buf.steps.iter().map(|t| t.done).collect();
    let returns = discounted_returns(&rewards, &dones, gamma, bootstrap);
    let adv = returns.iter().zip(&buf.steps).map(|(r, t)| r - t.value).collect();
    (returns, adv)
}
