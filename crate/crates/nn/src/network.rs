//! Actor-critic global policy networks in four symmetry variants.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use symnav_tensor::{Tape, Tensor, TensorError, Var};

use crate::error::NnError;
use crate::layers::{blur_pool, max_pool, orientation_pool, Conv2d, GroupConv, Init, LiftingConv, Linear, OrientationPool};
use crate::p4::rot90_spatial;
use crate::params::{Bound, ParamStore};
use crate::sgpp::{global_average_pool, sgpp};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvKind {
    Standard,
    P4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolKind {
    Max,
    Blur,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticHead {
    Flatten,
    Gap,
    Sgpp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelVariant {
    Ans,
    EAns,
    GAns,
    SAns,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 4] = [Self::Ans, Self::EAns, Self::GAns, Self::SAns];

    pub fn tag(self) -> &'static str {
        match self {
            Self::Ans => "ANS",
            Self::EAns => "E-ANS",
            Self::GAns => "G-ANS",
            Self::SAns => "S-ANS",
        }
    }

    pub fn conv_kind(self) -> ConvKind {
        match self {
            Self::Ans => ConvKind::Standard,
            _ => ConvKind::P4,
        }
    }

    pub fn pool_kind(self) -> PoolKind {
        match self {
            Self::Ans => PoolKind::Max,
            _ => PoolKind::Blur,
        }
    }

    pub fn critic_head(self) -> CriticHead {
        match self {
            Self::Ans | Self::EAns => CriticHead::Flatten,
            Self::GAns => CriticHead::Gap,
            Self::SAns => CriticHead::Sgpp,
        }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ModelVariant {
    type Err = NnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| *c != '-' && *c != '_')
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "ans" => Ok(Self::Ans),
            "eans" => Ok(Self::EAns),
            "gans" => Ok(Self::GAns),
            "sans" => Ok(Self::SAns),
            _ => Err(NnError::config(
                "net.variant",
                format!("unknown variant {s:?} (expected ans, e-ans, g-ans or s-ans)"),
            )),
        }
    }
}

/// Architecture hyper-parameters shared by all variants.
#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    /// Side of the policy state in cells; must be a multiple of 4.
    pub g: usize,
    pub in_channels: usize,
    /// Output widths of the convolution layers; pooling follows the 2nd and 4th.
    pub widths: Vec<usize>,
    pub kernel: usize,
    pub actor_hidden: usize,
    pub critic_hidden: usize,
    /// Polar bins of the pooling head; 0 means the side of the pooled map.
    pub polar_r: usize,
    pub polar_a: usize,
    /// Initialisation of every layer followed by a ReLU; the two output
    /// layers always use [`Init::FanIn`].
    pub init: Init,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            g: 64,
            in_channels: 8,
            widths: vec![8, 16, 32, 32, 32],
            kernel: 3,
            actor_hidden: 512,
            critic_hidden: 128,
            polar_r: 0,
            polar_a: 0,
            init: Init::Relu,
        }
    }
}

pub const POOL_AFTER: [usize; 2] = [1, 3];
pub const DOWNSCALE: usize = 4;

impl NetConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if self.g == 0 || self.g % DOWNSCALE != 0 || self.g < 8 {
            return Err(NnError::config("net.G", format!("{} is not a multiple of 4 that is >= 8", self.g)));
        }
        if self.in_channels == 0 {
            return Err(NnError::config("net.in_channels", "must be positive"));
        }
        if self.widths.len() < 4 || self.widths.contains(&0) {
            return Err(NnError::config(
                "net.widths",
                format!("{:?}: need at least 4 positive widths", self.widths),
            ));
        }
        if self.kernel % 2 == 0 {
            return Err(NnError::config("net.kernel", format!("{} must be odd", self.kernel)));
        }
        if self.actor_hidden == 0 {
            return Err(NnError::config("net.actor_hidden", "must be positive"));
        }
        if self.critic_hidden == 0 {
            return Err(NnError::config("net.critic_hidden", "must be positive"));
        }
        if self.polar_a % 4 != 0 {
            return Err(NnError::config(
                "net.polar_a",
                format!("{} must be a multiple of 4", self.polar_a),
            ));
        }
        if self.g_prime() % 4 != 0 && self.polar_a == 0 {
            return Err(NnError::config(
                "net.polar_a",
                format!("default angular bins {} must be a multiple of 4; set it explicitly", self.g_prime()),
            ));
        }
        Ok(())
    }

    /// Side of the goal lattice.
    pub fn g_prime(&self) -> usize {
        self.g / DOWNSCALE
    }

    pub fn radial_bins(&self) -> usize {
        if self.polar_r == 0 {
            self.g_prime()
        } else {
            self.polar_r
        }
    }

    pub fn angular_bins(&self) -> usize {
        if self.polar_a == 0 {
            self.g_prime()
        } else {
            self.polar_a
        }
    }

    pub fn block_channels(&self) -> usize {
        *self.widths.last().unwrap()
    }

    /// `(key, value)` pairs in a fixed order, keys namespaced under `net.`.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let widths = self
            .widths
            .iter()
            .map(|w| w.to_string())
            .collect::<Vec<_>>()
            .join(",");
        vec![
            ("net.G".into(), self.g.to_string()),
            ("net.in_channels".into(), self.in_channels.to_string()),
            ("net.widths".into(), widths),
            ("net.kernel".into(), self.kernel.to_string()),
            ("net.actor_hidden".into(), self.actor_hidden.to_string()),
            ("net.critic_hidden".into(), self.critic_hidden.to_string()),
            ("net.polar_r".into(), self.polar_r.to_string()),
            ("net.polar_a".into(), self.polar_a.to_string()),
            ("net.init".into(), init_name(self.init).into()),
        ]
    }

    /// Overrides fields from `net.*` keys; unknown `net.*` keys are errors,
    /// other namespaces are ignored.
    pub fn apply_pair(&mut self, key: &str, value: &str) -> Result<bool, NnError> {
        fn num(field: &'static str, v: &str) -> Result<usize, NnError> {
            v.trim()
                .parse()
                .map_err(|_| NnError::config(field, format!("{v:?} is not a non-negative integer")))
        }
        match key {
            "net.G" => self.g = num("net.G", value)?,
            "net.in_channels" => self.in_channels = num("net.in_channels", value)?,
            "net.widths" => {
                self.widths = value
                    .split(',')
                    .map(|w| num("net.widths", w))
                    .collect::<Result<_, _>>()?
            }
            "net.kernel" => self.kernel = num("net.kernel", value)?,
            "net.actor_hidden" => self.actor_hidden = num("net.actor_hidden", value)?,
            "net.critic_hidden" => self.critic_hidden = num("net.critic_hidden", value)?,
            "net.polar_r" => self.polar_r = num("net.polar_r", value)?,
            "net.polar_a" => self.polar_a = num("net.polar_a", value)?,
            "net.init" => {
                self.init = match value.trim() {
                    "fan_in" => Init::FanIn,
                    "relu" => Init::Relu,
                    other => return Err(NnError::config("net.init", format!("{other:?} is not fan_in or relu"))),
                }
            }
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn to_text(&self) -> String {
        self.to_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }
}

fn init_name(init: Init) -> &'static str {
    match init {
        Init::FanIn => "fan_in",
        Init::Relu => "relu",
    }
}

/// Policy input: `[8, G, G]` with the local crop in channels 0-3 and the
/// rescaled global view in channels 4-7, all values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyState(Tensor);

impl PolicyState {
    pub const CHANNELS: usize = 8;

    pub fn new(data: Tensor) -> Result<Self, TensorError> {
        let s = data.shape();
        if s.len() != 3 || s[0] != Self::CHANNELS || s[1] != s[2] {
            return Err(TensorError::contract(
                "PolicyState",
                format!("expected [8, G, G], got {s:?}"),
            ));
        }
        if let Some(v) = data.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(TensorError::contract("PolicyState", format!("value {v} outside [0, 1]")));
        }
        Ok(Self(data))
    }

    pub fn side(&self) -> usize {
        self.0.shape()[1]
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }

    /// Quarter-turn rotation of every channel.
    pub fn rot90(&self, m: i64) -> Self {
        Self(rot90_spatial(&self.0, m).expect("rank-3 state"))
    }

    /// Uniform random state, handy for probing architectures.
    pub fn random<R: Rng>(g: usize, rng: &mut R) -> Self {
        let n = Self::CHANNELS * g * g;
        let data = (0..n).map(|_| rng.random::<f64>()).collect();
        Self(Tensor::new(vec![Self::CHANNELS, g, g], data).unwrap())
    }
}

/// Categorical distribution over the `G' x G'` goal lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct GoalLikelihoodMap(Tensor);

impl GoalLikelihoodMap {
    pub fn new(probs: Tensor) -> Result<Self, TensorError> {
        let s = probs.shape();
        if s.len() != 2 || s[0] != s[1] {
            return Err(TensorError::contract(
                "GoalLikelihoodMap",
                format!("expected square [G', G'], got {s:?}"),
            ));
        }
        if probs.data().iter().any(|&p| p < 0.0) || (probs.sum() - 1.0).abs() > 1e-6 {
            return Err(TensorError::contract(
                "GoalLikelihoodMap",
                format!("not a distribution (sum {})", probs.sum()),
            ));
        }
        Ok(Self(probs))
    }

    pub fn side(&self) -> usize {
        self.0.shape()[0]
    }

    pub fn probs(&self) -> &Tensor {
        &self.0
    }

    /// Draws a lattice index `row * side + col`.
    pub fn sample_index<R: Rng>(&self, rng: &mut R) -> usize {
        sample_categorical(self.0.data(), rng)
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .0
            .data()
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|p| p * p.ln())
            .sum::<f64>()
    }
}

/// Inverse-CDF draw from unnormalised non-negative weights.
pub fn sample_categorical<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Samples a goal and returns it in global-view cells: the centre of the
/// chosen lattice cell scaled up by `downscale`.
pub fn sample_goal<R: Rng>(map: &GoalLikelihoodMap, downscale: usize, rng: &mut R) -> (usize, usize) {
    lattice_to_cell(map.sample_index(rng), map.side(), downscale)
}

pub fn lattice_to_cell(index: usize, side: usize, downscale: usize) -> (usize, usize) {
    let (r, c) = (index / side, index % side);
    (r * downscale + downscale / 2, c * downscale + downscale / 2)
}

#[derive(Debug, Clone)]
enum BlockLayer {
    Standard(Conv2d),
    Lifting(LiftingConv),
    Group(GroupConv),
}

/// Tape handles produced by one forward pass through both heads.
pub struct PolicyOutput<'t> {
    /// Shared block output (`[C,4,G',G']` for p4 variants, `[C,G',G']` otherwise).
    pub block: Var<'t>,
    /// Log-probabilities over the flattened goal lattice.
    pub log_probs: Var<'t>,
    /// Critic head input features.
    pub features: Var<'t>,
    /// One-element critic value.
    pub value: Var<'t>,
}

/// Shared convolution block with an actor head and a critic head.
#[derive(Debug, Clone)]
pub struct GlobalPolicyNetwork {
    variant: ModelVariant,
    config: NetConfig,
    params: ParamStore,
    block: Vec<BlockLayer>,
    actor_fc1: Linear,
    actor_fc2: Linear,
    critic_fc1: Linear,
    critic_fc2: Linear,
    param_count: usize,
}

impl GlobalPolicyNetwork {
    pub fn new(variant: ModelVariant, config: NetConfig, seed: u64) -> Result<Self, NnError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let k = config.kernel;
        let pad = k / 2;
        let mut block = Vec::with_capacity(config.widths.len());
        let mut c_in = config.in_channels;
        for (i, &c_out) in config.widths.iter().enumerate() {
            let name = format!("block.{i}");
            let layer = match (variant.conv_kind(), i) {
                (ConvKind::Standard, _) => {
                    BlockLayer::Standard(Conv2d::new(&mut params, &name, c_in, c_out, k, 1, pad, config.init, &mut rng))
                }
                (ConvKind::P4, 0) => {
                    BlockLayer::Lifting(LiftingConv::new(&mut params, &name, c_in, c_out, k, 1, pad, config.init, &mut rng))
                }
                (ConvKind::P4, _) => {
                    BlockLayer::Group(GroupConv::new(&mut params, &name, c_in, c_out, k, 1, pad, config.init, &mut rng))
                }
            };
            block.push(layer);
            c_in = c_out;
        }
        let gp = config.g_prime();
        let c = config.block_channels();
        let flat = c * gp * gp;
        let actor_fc1 = Linear::new(&mut params, "actor.fc1", flat, config.actor_hidden, config.init, &mut rng);
        let actor_fc2 = Linear::new(&mut params, "actor.fc2", config.actor_hidden, gp * gp, Init::FanIn, &mut rng);
        let feat = match variant.critic_head() {
            CriticHead::Flatten => flat,
            CriticHead::Gap => c,
            CriticHead::Sgpp => c * config.radial_bins(),
        };
        let critic_fc1 = Linear::new(&mut params, "critic.fc1", feat, config.critic_hidden, config.init, &mut rng);
        let critic_fc2 = Linear::new(&mut params, "critic.fc2", config.critic_hidden, 1, Init::FanIn, &mut rng);
        let param_count = params.scalar_count();
        Ok(Self {
            variant,
            config,
            params,
            block,
            actor_fc1,
            actor_fc2,
            critic_fc1,
            critic_fc2,
            param_count,
        })
    }

    pub fn variant(&self) -> ModelVariant {
        self.variant
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    /// Mutable access for optimisers; shapes cannot change through it.
    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    pub fn p4_layer_count(&self) -> usize {
        self.block
            .iter()
            .filter(|l| !matches!(l, BlockLayer::Standard(_)))
            .count()
    }

    pub fn sgpp_layer_count(&self) -> usize {
        usize::from(self.variant.critic_head() == CriticHead::Sgpp)
    }

    pub fn conv_layer_count(&self) -> usize {
        self.block.len()
    }

    fn check_state(&self, s: &Var<'_>) -> Result<(), TensorError> {
        let g = self.config.g;
        let want = [self.config.in_channels, g, g];
        if s.shape() != want {
            return Err(TensorError::ShapeMismatch {
                op: "policy state",
                left: s.shape(),
                right: want.to_vec(),
            });
        }
        Ok(())
    }

    pub fn conv_block<'t>(&self, p: &Bound<'t>, s: Var<'t>) -> Result<Var<'t>, TensorError> {
        self.check_state(&s)?;
        let mut x = s;
        for (i, layer) in self.block.iter().enumerate() {
            x = match layer {
                BlockLayer::Standard(l) => l.forward(p, x)?,
                BlockLayer::Lifting(l) => l.forward(p, x)?,
                BlockLayer::Group(l) => l.forward(p, x)?,
            }
            .relu()?;
            if POOL_AFTER.contains(&i) {
                x = match self.variant.pool_kind() {
                    PoolKind::Max => max_pool(x, 2, 2)?,
                    PoolKind::Blur => blur_pool(x, 2)?,
                };
            }
        }
        Ok(x)
    }

    /// Plain `[C,G',G']` map seen by the heads.
    fn planar<'t>(&self, block: Var<'t>) -> Result<Var<'t>, TensorError> {
        match self.variant.conv_kind() {
            ConvKind::Standard => Ok(block),
            ConvKind::P4 => orientation_pool(block, OrientationPool::Mean),
        }
    }

    pub fn actor_logits<'t>(&self, p: &Bound<'t>, block: Var<'t>) -> Result<Var<'t>, TensorError> {
        let x = self.planar(block)?.flatten()?;
        let h = self.actor_fc1.forward(p, x)?.relu()?;
        self.actor_fc2.forward(p, h)
    }

    pub fn critic_input<'t>(&self, block: Var<'t>) -> Result<Var<'t>, TensorError> {
        let x = self.planar(block)?;
        match self.variant.critic_head() {
            CriticHead::Flatten => x.flatten(),
            CriticHead::Gap => global_average_pool(x),
            CriticHead::Sgpp => sgpp(x, self.config.radial_bins(), self.config.angular_bins())?.flatten(),
        }
    }

    pub fn critic_value<'t>(&self, p: &Bound<'t>, features: Var<'t>) -> Result<Var<'t>, TensorError> {
        let h = self.critic_fc1.forward(p, features.flatten()?)?.relu()?;
        self.critic_fc2.forward(p, h)
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, s: Var<'t>) -> Result<PolicyOutput<'t>, TensorError> {
        let block = self.conv_block(p, s)?;
        let log_probs = self.actor_logits(p, block)?.log_softmax()?;
        let features = self.critic_input(block)?;
        let value = self.critic_value(p, features)?;
        Ok(PolicyOutput {
            block,
            log_probs,
            features,
            value,
        })
    }

    fn run<T>(&self, s: &PolicyState, f: impl for<'t> FnOnce(&Bound<'t>, Var<'t>) -> Result<T, TensorError>) -> Result<T, TensorError> {
        let tape = Tape::new();
        let p = self.params.bind(&tape, false);
        let x = tape.constant(s.tensor().clone());
        f(&p, x)
    }

    pub fn block_output(&self, s: &PolicyState) -> Result<Tensor, TensorError> {
        self.run(s, |p, x| Ok(self.conv_block(p, x)?.value().as_ref().clone()))
    }

    pub fn actor_forward(&self, s: &PolicyState) -> Result<GoalLikelihoodMap, TensorError> {
        self.run(s, |p, x| {
            let block = self.conv_block(p, x)?;
            let probs = self.actor_logits(p, block)?.softmax()?.value();
            let gp = self.config.g_prime();
            GoalLikelihoodMap::new(probs.reshape(&[gp, gp])?)
        })
    }

    pub fn critic_forward(&self, s: &PolicyState) -> Result<f64, TensorError> {
        self.run(s, |p, x| {
            let f = self.critic_input(self.conv_block(p, x)?)?;
            Ok(self.critic_value(p, f)?.value().item())
        })
    }

    pub fn critic_features(&self, s: &PolicyState) -> Result<Tensor, TensorError> {
        self.run(s, |p, x| Ok(self.critic_input(self.conv_block(p, x)?)?.value().as_ref().clone()))
    }

    /// Actor distribution and critic value from one shared-block pass.
    pub fn evaluate(&self, s: &PolicyState) -> Result<(GoalLikelihoodMap, f64), TensorError> {
        self.run(s, |p, x| {
            let out = self.forward(p, x)?;
            let gp = self.config.g_prime();
            let probs = out.log_probs.value().map(f64::exp)?.reshape(&[gp, gp])?;
            let total = probs.sum();
            let probs = probs.map(|v| v / total)?;
            Ok((GoalLikelihoodMap::new(probs)?, out.value.value().item()))
        })
    }
}
