mod common;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use symnav_core::{
    collect_rollout, curve_csv, evaluate_coverage, run_episode, train_on, training_maps, EpisodeSource, GoalPolicy, OptimizerKind,
    RunConfig, Worker,
};
use symnav_env::{Environment, OccupancyGrid};
use symnav_nn::{load_checkpoint, GlobalPolicyNetwork, ModelVariant};

use common::{long_room, small_run, west_end};

fn source(cfg: &RunConfig) -> EpisodeSource {
    EpisodeSource::new(training_maps(cfg).unwrap())
}

fn net(cfg: &RunConfig, seed: u64) -> GlobalPolicyNetwork {
    GlobalPolicyNetwork::new(cfg.variant, cfg.net.clone(), seed).unwrap()
}

#[test]
fn rewards_telescope_to_the_coverage_gained() {
    let cfg = small_run(ModelVariant::SAns);
    let n = net(&cfg, 0);
    let mut w = Worker::new(0, source(&cfg), cfg.env.clone(), 3).unwrap();
    let before = w.env().coverage();
    let buf = w.rollout(&n, 2).unwrap();
    assert_eq!(buf.len(), 2);
    assert!(!buf.steps.iter().any(|t| t.done));
    let gained: f64 = buf.rewards().iter().sum();
    assert!((gained - (w.env().coverage() - before)).abs() < 1e-9);
    assert!(buf.rewards().iter().all(|&r| r >= 0.0));
    // not done, so the bootstrap is the critic's value of the current state
    let v = n.critic_forward(&w.env().policy_state().unwrap()).unwrap();
    assert_eq!(buf.bootstrap, v);
}

#[test]
fn episode_ends_reset_the_worker_and_zero_the_bootstrap() {
    let mut cfg = small_run(ModelVariant::Ans);
    cfg.env.episode_steps = 20;
    let n = net(&cfg, 1);
    let mut w = Worker::new(0, source(&cfg), cfg.env.clone(), 0).unwrap();
    let buf = w.rollout(&n, 2).unwrap();
    assert_eq!(buf.steps.iter().map(|t| t.done).collect::<Vec<_>>(), [false, true]);
    assert_eq!(buf.bootstrap, 0.0);
    assert_eq!(w.episodes_finished(), 1);
    assert_eq!(w.env().steps_taken(), 0);
    let buf = w.rollout(&n, 3).unwrap();
    assert_eq!(buf.steps.iter().map(|t| t.done).collect::<Vec<_>>(), [false, true, false]);
    assert_ne!(buf.bootstrap, 0.0);
}

#[test]
fn parallel_collection_equals_serial_and_is_seeded() {
    let cfg = small_run(ModelVariant::GAns);
    let n = net(&cfg, 2);
    let make = || (0..3).map(|i| Worker::new(i, source(&cfg), cfg.env.clone(), 9).unwrap()).collect::<Vec<_>>();
    let (mut a, mut b) = (make(), make());
    for _ in 0..2 {
        let pa = collect_rollout(&n, &mut a, 4, true).unwrap();
        let sb = collect_rollout(&n, &mut b, 4, false).unwrap();
        assert_eq!(pa, sb);
    }
    // distinct workers see distinct streams
    let bufs = collect_rollout(&n, &mut make(), 3, false).unwrap();
    assert_ne!(bufs[0].rewards(), bufs[1].rewards());
}

#[test]
fn same_seed_gives_identical_curves_and_artifacts() {
    let mut cfg = small_run(ModelVariant::EAns);
    cfg.train.updates = 3;
    cfg.train.checkpoint_every = 2;
    let dirs = [tempdir("a"), tempdir("b")];
    let runs: Vec<_> = dirs.iter().map(|d| train_on(&cfg, source(&cfg), Some(d), |_| {}).unwrap()).collect();
    assert_eq!(runs[0].curve, runs[1].curve);
    for f in ["config.txt", "curve.csv", "update_000002.ckpt", "final.ckpt"] {
        let (x, y) = (std::fs::read(dirs[0].join(f)).unwrap(), std::fs::read(dirs[1].join(f)).unwrap());
        assert_eq!(x, y, "{f}");
    }
    assert_eq!(std::fs::read_to_string(dirs[0].join("curve.csv")).unwrap(), curve_csv(&runs[0].curve));
    assert_eq!(RunConfig::parse(&std::fs::read_to_string(dirs[0].join("config.txt")).unwrap()).unwrap(), cfg);
    let back = load_checkpoint(&mut std::fs::File::open(dirs[0].join("final.ckpt")).unwrap()).unwrap();
    assert_eq!(back.params().tensors().collect::<Vec<_>>(), runs[0].net.params().tensors().collect::<Vec<_>>());
    // every update is finite and keeps a spread-out policy
    for row in &runs[0].curve {
        assert!(row.policy_loss.is_finite() && row.value_loss.is_finite());
        assert!(row.entropy > 0.0);
    }
    let mut other = cfg.clone();
    other.train.seed = 1;
    assert_ne!(train_on(&other, source(&other), None, |_| {}).unwrap().curve, runs[0].curve);
}

fn tempdir(tag: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("symnav-core-{}-{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

#[test]
fn zero_learning_rate_matches_the_untrained_policy() {
    let mut cfg = small_run(ModelVariant::SAns);
    cfg.train.updates = 2;
    cfg.train.lr = 0.0;
    let trained = train_on(&cfg, source(&cfg), None, |_| {}).unwrap().net;
    let fresh = net(&cfg, cfg.train.seed);
    let maps = training_maps(&cfg).unwrap();
    let a = evaluate_coverage(&GoalPolicy::Network(&trained), &maps, &cfg.env, 2, 5).unwrap();
    let b = evaluate_coverage(&GoalPolicy::Network(&fresh), &maps, &cfg.env, 2, 5).unwrap();
    assert_eq!(a.summary_csv(), b.summary_csv());
    assert_eq!(a.curves_csv(), b.curves_csv());
}

fn room_coverage(policy: &GoalPolicy<'_>, room: &Arc<OccupancyGrid>, cfg: &RunConfig, episodes: u64) -> f64 {
    let mut total = 0.0;
    for e in 0..episodes {
        let mut env = Environment::at_pose(room.clone(), cfg.env.clone(), west_end(cfg.env.side), e).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + e);
        total += run_episode(&mut env, policy, &mut rng, |_| {}).unwrap().final_coverage();
    }
    total / episodes as f64
}

#[test]
fn trained_policy_beats_random_goals_in_a_long_room() {
    let mut cfg = small_run(ModelVariant::SAns);
    cfg.train.updates = 200;
    cfg.train.optimizer = OptimizerKind::Adam;
    cfg.train.lr = 1e-3;
    cfg.train.reward_scale = 0.1;
    let room = long_room(cfg.env.side, cfg.env.cell_size);
    let src = EpisodeSource { maps: Arc::new(vec![room.clone()]), start: Some(west_end(cfg.env.side)) };
    let random = room_coverage(&GoalPolicy::RandomGoal, &room, &cfg, 20);
    let mut wins = 0;
    let mut means = Vec::new();
    for seed in 0..5 {
        cfg.train.seed = seed;
        let net = train_on(&cfg, src.clone(), None, |_| {}).unwrap().net;
        let c = room_coverage(&GoalPolicy::Network(&net), &room, &cfg, 20);
        wins += usize::from(c > random);
        means.push(c);
    }
    let mean = means.iter().sum::<f64>() / means.len() as f64;
    println!("long room: random {random:.2} m2, trained {means:.2?} m2");
    assert!(mean > random, "trained {mean} vs random {random}");
    assert!(wins >= 4, "{wins}/5 seeds beat random goals");
}
