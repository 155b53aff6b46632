//! Global goal-selection policies and the episode driver shared by
//! evaluation and the baselines.

use rand::Rng;
use symnav_env::{
    detect_frontiers, fbe_rl_select_goal, fbe_select_goal, Cell, Environment,
};
use symnav_nn::network::DOWNSCALE;
use symnav_nn::GlobalPolicyNetwork;

use crate::error::CoreError;

#[derive(Debug, Clone, Copy)]
pub enum GoalPolicy<'a> {
    /// Samples the actor's goal distribution.
    Network(&'a GlobalPolicyNetwork),
    /// Uniform cell of the goal lattice.
    RandomGoal,
    /// Frontier-based exploration.
    Fbe,
    /// Frontier-based exploration weighted by an actor.
    FbeRl(&'a GlobalPolicyNetwork),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GoalChoice {
    pub cell: Cell,
    /// A frontier policy found no frontier and fell back to a known free cell.
    pub fallback: bool,
}

impl GoalPolicy<'_> {
    pub fn name(&self) -> String {
        match self {
            Self::Network(net) => net.variant().tag().to_string(),
            Self::RandomGoal => "random-goal".into(),
            Self::Fbe => "FBE".into(),
            Self::FbeRl(net) => format!("FBE-RL({})", net.variant().tag()),
        }
    }

    fn check(net: &GlobalPolicyNetwork, env: &Environment) -> Result<(), CoreError> {
        if net.config().g != env.config().g {
            return Err(CoreError::config(
                "net.G",
                format!("network G={} but environment G={}", net.config().g, env.config().g),
            ));
        }
        Ok(())
    }

    pub fn choose<R: Rng>(&self, env: &Environment, rng: &mut R) -> Result<GoalChoice, CoreError> {
        let side = env.config().g / DOWNSCALE;
        match self {
            Self::Network(net) => {
                Self::check(net, env)?;
                let pi = net.actor_forward(&env.policy_state()?)?;
                Ok(GoalChoice {
                    cell: env.lattice_goal(pi.sample_index(rng), pi.side()),
                    fallback: false,
                })
            }
            Self::RandomGoal => Ok(GoalChoice {
                cell: env.lattice_goal(rng.random_range(0..side * side), side),
                fallback: false,
            }),
            Self::Fbe => {
                let g = fbe_select_goal(&detect_frontiers(env.map()), env.map(), rng);
                Ok(GoalChoice {
                    cell: g.cell,
                    fallback: g.fallback,
                })
            }
            Self::FbeRl(net) => {
                Self::check(net, env)?;
                let pi = net.actor_forward(&env.policy_state()?)?;
                let g = fbe_rl_select_goal(&detect_frontiers(env.map()), &pi, env.map(), rng)?;
                Ok(GoalChoice {
                    cell: g.cell,
                    fallback: g.fallback,
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    /// Coverage in m² before the first step and after every step.
    pub coverage: Vec<f64>,
    pub decisions: usize,
    pub fallbacks: usize,
    pub collisions: usize,
}

impl EpisodeRecord {
    pub fn final_coverage(&self) -> f64 {
        *self.coverage.last().expect("curves start with the initial coverage")
    }
}

/// Plays `env` to the end of its episode with `policy`; `visit` sees the
/// environment before every global decision.
pub fn run_episode<R: Rng>(
    env: &mut Environment,
    policy: &GoalPolicy<'_>,
    rng: &mut R,
    mut visit: impl FnMut(&Environment),
) -> Result<EpisodeRecord, CoreError> {
    let mut rec = EpisodeRecord {
        coverage: vec![env.coverage()],
        decisions: 0,
        fallbacks: 0,
        collisions: 0,
    };
    while !env.done() {
        visit(env);
        let goal = policy.choose(env, rng)?;
        rec.decisions += 1;
        rec.fallbacks += usize::from(goal.fallback);
        let before = env.steps_taken();
        env.run_decision(goal.cell)?;
        rec.coverage
            .extend(env.log()[before..].iter().map(|row| row.coverage));
    }
    rec.collisions = env.collisions();
    Ok(rec)
}
