//! The advantage actor-critic loss, its gradient and the optimiser step.

use std::sync::Arc;

use rayon::prelude::*;
use symnav_nn::{Bound, GlobalPolicyNetwork, PolicyState};
use symnav_tensor::{Tape, Tensor, TensorError, Var};

use crate::config::{OptimizerKind, TrainConfig};
use crate::error::CoreError;
use crate::rollout::{scaled_returns_and_advantages, RolloutBuffer};

/// One training sample with its targets fixed.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub state: &'a PolicyState,
    pub action: usize,
    pub advantage: f64,
    pub ret: f64,
}

/// Batch means of the three loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossStats {
    /// `-mean(A log pi)`.
    pub policy_loss: f64,
    /// `mean((R - V)^2)`, before the coefficient.
    pub value_loss: f64,
    pub entropy: f64,
    pub total: f64,
    /// Gradient norm before clipping.
    pub grad_norm: f64,
}

struct Terms<'t> {
    total: Var<'t>,
    policy: f64,
    value: f64,
    entropy: f64,
}

/// Loss of one sample, already divided by the batch size `n`.
fn sample_terms<'t>(
    net: &GlobalPolicyNetwork,
    tape: &'t Tape,
    p: &Bound<'t>,
    s: &Sample<'_>,
    cfg: &TrainConfig,
    n: usize,
) -> Result<Terms<'t>, TensorError> {
    let out = net.forward(p, tape.constant(s.state.tensor().clone()))?;
    let lp = out.log_probs;
    let chosen = lp.gather(Arc::from([s.action]), &[1])?.sum()?;
    let entropy = lp.exp()?.mul(lp)?.sum()?.neg()?;
    let value_err = out.value.add_scalar(-s.ret)?.square()?.sum()?;
    let inv = 1.0 / n as f64;
    // the advantage is a plain number here, so no gradient flows through it
    let total = chosen
        .scale(-s.advantage * inv)?
        .add(value_err.scale(cfg.value_coef * inv)?)?
        .add(entropy.scale(-cfg.entropy_coef * inv)?)?;
    Ok(Terms {
        total,
        policy: -s.advantage * chosen.value().item(),
        value: value_err.value().item(),
        entropy: entropy.value().item(),
    })
}

fn stats_of(parts: &[(f64, f64, f64)], cfg: &TrainConfig) -> LossStats {
    let n = parts.len() as f64;
    let (p, v, e) = parts
        .iter()
        .fold((0.0, 0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1, acc.2 + x.2));
    let (p, v, e) = (p / n, v / n, e / n);
    LossStats {
        policy_loss: p,
        value_loss: v,
        entropy: e,
        total: p + cfg.value_coef * v - cfg.entropy_coef * e,
        grad_norm: 0.0,
    }
}

/// Value of the combined loss; no gradients are recorded.
pub fn a2c_loss(net: &GlobalPolicyNetwork, samples: &[Sample<'_>], cfg: &TrainConfig) -> Result<LossStats, CoreError> {
    if samples.is_empty() {
        return Err(CoreError::contract("a2c_loss", "empty batch"));
    }
    let parts = samples
        .iter()
        .map(|s| {
            let tape = Tape::new();
            let p = net.params().bind(&tape, false);
            let t = sample_terms(net, &tape, &p, s, cfg, samples.len())?;
            Ok((t.policy, t.value, t.entropy))
        })
        .collect::<Result<Vec<_>, TensorError>>()?;
    Ok(stats_of(&parts, cfg))
}

/// Samples per gradient chunk. Fixed so the summation order, and hence the
/// result, does not depend on the thread count.
const CHUNK: usize = 4;

/// Loss statistics and the gradient of the mean loss, one flat buffer per
/// parameter in declaration order.
pub fn a2c_gradients(
    net: &GlobalPolicyNetwork,
    samples: &[Sample<'_>],
    cfg: &TrainConfig,
) -> Result<(LossStats, Vec<Vec<f64>>), CoreError> {
    if samples.is_empty() {
        return Err(CoreError::contract("a2c_gradients", "empty batch"));
    }
    let n = samples.len();
    let zero = || -> Vec<Vec<f64>> { net.params().tensors().map(|t| vec![0.0; t.numel()]).collect() };
    let chunks = samples
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = zero();
            let mut parts = Vec::with_capacity(chunk.len());
            for s in chunk {
                let tape = Tape::new();
                let p = net.params().bind(&tape, true);
                let t = sample_terms(net, &tape, &p, s, cfg, n)?;
                let grads = tape.backward(t.total)?;
                for (a, g) in acc.iter_mut().zip(p.gradients(&grads)) {
                    for (x, y) in a.iter_mut().zip(g.data()) {
                        *x += y;
                    }
                }
                parts.push((t.policy, t.value, t.entropy));
            }
            Ok((acc, parts))
        })
        .collect::<Result<Vec<_>, TensorError>>()?;
    let mut total = zero();
    let mut parts = Vec::with_capacity(n);
    for (acc, p) in chunks {
        for (t, a) in total.iter_mut().zip(&acc) {
            for (x, y) in t.iter_mut().zip(a) {
                *x += y;
            }
        }
        parts.extend(p);
    }
    let mut stats = stats_of(&parts, cfg);
    stats.grad_norm = total.iter().flatten().map(|g| g * g).sum::<f64>().sqrt();
    Ok((stats, total))
}

/// Plain gradient descent, or Adam when configured.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, net: &GlobalPolicyNetwork) -> Self {
        let zeros: Vec<Vec<f64>> = match kind {
            OptimizerKind::Sgd => Vec::new(),
            OptimizerKind::Adam => net.params().tensors().map(|t| vec![0.0; t.numel()]).collect(),
        };
        Self {
            kind,
            lr,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn step(&mut self, net: &mut GlobalPolicyNetwork, grads: &[Vec<f64>]) -> Result<(), CoreError> {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let ids: Vec<_> = net.params().ids().collect();
        for (k, id) in ids.into_iter().enumerate() {
            let cur = net.params().get(id);
            let g = &grads[k];
            let data: Vec<f64> = match self.kind {
                OptimizerKind::Sgd => cur.data().iter().zip(g).map(|(w, g)| w - self.lr * g).collect(),
                OptimizerKind::Adam => {
                    let (m, v) = (&mut self.m[k], &mut self.v[k]);
                    let c1 = 1.0 - B1.powi(self.t);
                    let c2 = 1.0 - B2.powi(self.t);
                    cur.data()
                        .iter()
                        .enumerate()
                        .map(|(i, w)| {
                            m[i] = B1 * m[i] + (1.0 - B1) * g[i];
                            v[i] = B2 * v[i] + (1.0 - B2) * g[i] * g[i];
                            w - self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + EPS)
                        })
                        .collect()
                }
            };
            let shape = cur.shape().to_vec();
            net.params_mut().set(id, Tensor::new(shape, data)?)?;
        }
        Ok(())
    }
}

/// Flattens buffers into samples with returns and advantages computed per
/// buffer from its own bootstrap value.
pub fn batch_samples<'a>(bufs: &'a [RolloutBuffer], cfg: &TrainConfig) -> Vec<Sample<'a>> {
    let mut out = Vec::new();
    for buf in bufs {
        let (returns, adv) = scaled_returns_and_advantages(buf, cfg.gamma, buf.bootstrap, cfg.reward_scale);
        for (k, t) in buf.steps.iter().enumerate() {
            out.push(Sample {
                state: &t.state,
                action: t.action,
                advantage: adv[k],
                ret: returns[k],
            });
        }
    }
    out
}

/// One clipped gradient step on the loss of `bufs`. A non-finite loss or
/// gradient leaves the parameters untouched and reports why.
pub fn a2c_update(
    net: &mut GlobalPolicyNetwork,
    bufs: &[RolloutBuffer],
    cfg: &TrainConfig,
    opt: &mut Optimizer,
    update: usize,
) -> Result<LossStats, CoreError> {
    let samples = batch_samples(bufs, cfg);
    let (stats, mut grads) = match a2c_gradients(net, &samples, cfg) {
        Err(CoreError::Tensor(TensorError::NonFinite { op })) => {
            return Err(CoreError::NonFinite {
                update,
                detail: format!("non-finite value in {op}"),
            })
        }
        other => other?,
    };
    if !stats.total.is_finite() || !stats.grad_norm.is_finite() {
        return Err(CoreError::NonFinite {
            update,
            detail: format!(
                "loss {} (policy {}, value {}, entropy {}), gradient norm {}",
                stats.total, stats.policy_loss, stats.value_loss, stats.entropy, stats.grad_norm
            ),
        });
    }
    if stats.grad_norm > cfg.max_grad_norm {
        let f = cfg.max_grad_norm / stats.grad_norm;
        grads.iter_mut().flatten().for_each(|g| *g *= f);
    }
    opt.step(net, &grads)?;
    Ok(stats)
}
