//! The training loop: collect, update, log, checkpoint.

use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::Path;
use std::sync::Arc;

use symnav_env::{generate_map, MapGeneratorSpec, OccupancyGrid, Suite};
use symnav_nn::{save_checkpoint, GlobalPolicyNetwork};

use crate::a2c::{a2c_update, Optimizer};
use crate::config::RunConfig;
use crate::error::CoreError;
use crate::rollout::{collect_rollout, EpisodeSource, Worker};

/// Map seeds at or above this are never used for training.
pub const HELD_OUT_SEED_BASE: u64 = 1_000_000;

/// `count` maps of `suite` at the run's map size, seeds `first..first+count`.
pub fn map_pool(cfg: &RunConfig, suite: Suite, first: u64, count: usize) -> Result<Vec<Arc<OccupancyGrid>>, CoreError> {
    (0..count as u64)
        .map(|i| {
            let spec = MapGeneratorSpec::for_suite(suite, cfg.env.side, cfg.env.cell_size, first + i);
            Ok(Arc::new(generate_map(&spec)?))
        })
        .collect()
}

pub fn training_maps(cfg: &RunConfig) -> Result<Vec<Arc<OccupancyGrid>>, CoreError> {
    map_pool(cfg, cfg.train.suite, 0, cfg.train.maps)
}

pub fn held_out_maps(cfg: &RunConfig, suite: Suite, count: usize) -> Result<Vec<Arc<OccupancyGrid>>, CoreError> {
    map_pool(cfg, suite, HELD_OUT_SEED_BASE, count)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub update: usize,
    pub mean_coverage_m2: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut s = String::from("update,mean_coverage_m2,policy_loss,value_loss,entropy\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.update, r.mean_coverage_m2, r.policy_loss, r.value_loss, r.entropy
        );
    }
    s
}

pub struct TrainReport {
    pub net: GlobalPolicyNetwork,
    pub curve: Vec<CurveRow>,
}

fn write_checkpoint(net: &GlobalPolicyNetwork, path: &Path) -> Result<(), CoreError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    save_checkpoint(&mut w, net)?;
    Ok(())
}

/// Trains on the configured map pool.
pub fn train(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<TrainReport, CoreError> {
    let source = EpisodeSource::new(training_maps(cfg)?);
    train_on(cfg, source, out_dir, |_| {})
}

/// Trains with episodes drawn from `source`. `progress` sees every curve
/// row as it is produced. With `out_dir` set, the config, the curve CSV,
/// periodic checkpoints and `final.ckpt` are written there.
pub fn train_on(
    cfg: &RunConfig,
    source: EpisodeSource,
    out_dir: Option<&Path>,
    mut progress: impl FnMut(&CurveRow),
) -> Result<TrainReport, CoreError> {
    cfg.validate()?;
    let t = &cfg.train;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.txt"), cfg.to_text())?;
    }
    let mut net = GlobalPolicyNetwork::new(cfg.variant, cfg.net.clone(), t.seed)?;
    let mut workers = (0..t.envs)
        .map(|i| Worker::new(i, source.clone(), cfg.env.clone(), t.seed))
        .collect::<Result<Vec<_>, _>>()?;
    let mut opt = Optimizer::new(t.optimizer, t.lr, &net);
    let mut curve = Vec::with_capacity(t.updates);
    for update in 1..=t.updates {
        let bufs = collect_rollout(&net, &mut workers, t.rollout_len, true)?;
        let stats = a2c_update(&mut net, &bufs, t, &mut opt, update)?;
        let mean_coverage_m2 = workers.iter().map(Worker::recent_coverage).sum::<f64>() / workers.len() as f64;
        let row = CurveRow {
            update,
            mean_coverage_m2,
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
        };
        progress(&row);
        curve.push(row);
        if let Some(dir) = out_dir {
            if t.checkpoint_every > 0 && update % t.checkpoint_every == 0 {
                write_checkpoint(&net, &dir.join(format!("update_{update:06}.ckpt")))?;
            }
        }
    }
    if let Some(dir) = out_dir {
        write_checkpoint(&net, &dir.join("final.ckpt"))?;
        fs::write(dir.join("curve.csv"), curve_csv(&curve))?;
    }
    Ok(TrainReport { net, curve })
}
