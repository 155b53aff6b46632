//! Flat `key=value` run configuration with `env.`, `net.` and `train.` keys.

use std::fmt;
use std::str::FromStr;

use symnav_env::{EnvConfig, Suite};
use symnav_nn::{ModelVariant, NetConfig};

use crate::error::CoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Sgd => "sgd",
            Self::Adam => "adam",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sgd" => Ok(Self::Sgd),
            "adam" => Ok(Self::Adam),
            other => Err(CoreError::config("train.optimizer", format!("{other:?} is not sgd or adam"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub gamma: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub lr: f64,
    /// Global decisions per environment per update.
    pub rollout_len: usize,
    pub envs: usize,
    pub updates: usize,
    pub seed: u64,
    pub max_grad_norm: f64,
    pub optimizer: OptimizerKind,
    /// Multiplier on the m² reward before returns are formed.
    pub reward_scale: f64,
    /// Size of the training map pool.
    pub maps: usize,
    pub suite: Suite,
    /// 0 disables periodic checkpoints; the final one is always written.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            value_coef: 0.5,
            entropy_coef: 0.01,
            lr: 2.5e-4,
            rollout_len: 8,
            envs: 8,
            updates: 500,
            seed: 0,
            max_grad_norm: 0.5,
            optimizer: OptimizerKind::Sgd,
            reward_scale: 1.0,
            maps: 32,
            suite: Suite::Iid,
            checkpoint_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(CoreError::config("train.gamma", format!("{} is outside (0, 1]", self.gamma)));
        }
        for (field, v) in [
            ("train.value_coef", self.value_coef),
            ("train.entropy_coef", self.entropy_coef),
            ("train.lr", self.lr),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(CoreError::config(field, format!("{v} must be finite and >= 0")));
            }
        }
        if !(self.max_grad_norm > 0.0) {
            return Err(CoreError::config("train.max_grad_norm", "must be positive"));
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return Err(CoreError::config("train.reward_scale", "must be positive"));
        }
        for (field, v) in [
            ("train.rollout_len", self.rollout_len),
            ("train.envs", self.envs),
            ("train.maps", self.maps),
        ] {
            if v == 0 {
                return Err(CoreError::config(field, "must be positive"));
            }
        }
        Ok(())
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        vec![
            ("train.gamma".into(), self.gamma.to_string()),
            ("train.value_coef".into(), self.value_coef.to_string()),
            ("train.entropy_coef".into(), self.entropy_coef.to_string()),
            ("train.lr".into(), self.lr.to_string()),
            ("train.rollout_len".into(), self.rollout_len.to_string()),
            ("train.envs".into(), self.envs.to_string()),
            ("train.updates".into(), self.updates.to_string()),
            ("train.seed".into(), self.seed.to_string()),
            ("train.max_grad_norm".into(), self.max_grad_norm.to_string()),
            ("train.optimizer".into(), self.optimizer.to_string()),
            ("train.reward_scale".into(), self.reward_scale.to_string()),
            ("train.maps".into(), self.maps.to_string()),
            ("train.suite".into(), self.suite.to_string()),
            ("train.checkpoint_every".into(), self.checkpoint_every.to_string()),
        ]
    }

    pub fn apply_pair(&mut self, key: &str, value: &str) -> Result<bool, CoreError> {
        fn parse<T: FromStr>(field: &'static str, v: &str) -> Result<T, CoreError> {
            v.trim()
                .parse()
                .map_err(|_| CoreError::config(field, format!("cannot parse {v:?}")))
        }
        match key {
            "train.gamma" => self.gamma = parse("train.gamma", value)?,
            "train.value_coef" => self.value_coef = parse("train.value_coef", value)?,
            "train.entropy_coef" => self.entropy_coef = parse("train.entropy_coef", value)?,
            "train.lr" => self.lr = parse("train.lr", value)?,
            "train.rollout_len" => self.rollout_len = parse("train.rollout_len", value)?,
            "train.envs" => self.envs = parse("train.envs", value)?,
            "train.updates" => self.updates = parse("train.updates", value)?,
            "train.seed" => self.seed = parse("train.seed", value)?,
            "train.max_grad_norm" => self.max_grad_norm = parse("train.max_grad_norm", value)?,
            "train.optimizer" => self.optimizer = value.parse()?,
            "train.reward_scale" => self.reward_scale = parse("train.reward_scale", value)?,
            "train.maps" => self.maps = parse("train.maps", value)?,
            "train.suite" => self.suite = value.trim().parse()?,
            "train.checkpoint_every" => self.checkpoint_every = parse("train.checkpoint_every", value)?,
            k if k.starts_with("train.") => {
                return Err(CoreError::config("train", format!("unknown key {k:?}")));
            }
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// Everything a training or evaluation run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub variant: ModelVariant,
    pub env: EnvConfig,
    pub net: NetConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            variant: ModelVariant::SAns,
            env: EnvConfig::default(),
            net: NetConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    /// Quarter-size setup: 64-cell maps at 0.5 m (same 32 m extent), a
    /// 32-cell policy state and half-width layers. Small enough to train
    /// several seeds of two variants inside a test run.
    pub fn reduced() -> Self {
        Self {
            variant: ModelVariant::SAns,
            env: EnvConfig {
                side: 64,
                cell_size: 0.5,
                v: 16,
                g: 32,
                ..EnvConfig::default()
            },
            net: NetConfig {
                g: 32,
                widths: vec![4, 8, 16, 16, 16],
                actor_hidden: 256,
                critic_hidden: 64,
                ..NetConfig::default()
            },
            // plain SGD at the default rate barely moves in 100 updates
            train: TrainConfig {
                envs: 4,
                updates: 100,
                optimizer: OptimizerKind::Adam,
                lr: 1e-3,
                reward_scale: 0.1,
                checkpoint_every: 0,
                ..TrainConfig::default()
            },
        }
    }

    pub fn preset(name: &str) -> Result<Self, CoreError> {
        match name {
            "default" => Ok(Self::default()),
            "reduced" => Ok(Self::reduced()),
            other => Err(CoreError::config("preset", format!("{other:?} is not default or reduced"))),
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        self.env.validate()?;
        self.net.validate()?;
        self.train.validate()?;
        if self.net.g != self.env.g {
            return Err(CoreError::config(
                "net.G",
                format!("{} differs from env.G={}", self.net.g, self.env.g),
            ));
        }
        if self.net.in_channels != 8 {
            return Err(CoreError::config("net.in_channels", "policy states have 8 channels"));
        }
        Ok(())
    }

    pub fn apply_pair(&mut self, key: &str, value: &str) -> Result<(), CoreError> {
        if key == "net.variant" {
            self.variant = value.trim().parse()?;
            return Ok(());
        }
        let known = self.env.apply_pair(key, value)? || self.net.apply_pair(key, value)? || self.train.apply_pair(key, value)?;
        if known {
            Ok(())
        } else {
            Err(CoreError::config("key", format!("unknown key {key:?}")))
        }
    }

    /// Applies `key=value` lines on top of `self`. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CoreError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let wrap = |e: CoreError| CoreError::ConfigLine {
                line: n + 1,
                detail: e.to_string(),
            };
            let (k, v) = line.split_once('=').ok_or_else(|| {
                wrap(CoreError::config("line", format!("{line:?} is not key=value")))
            })?;
            self.apply_pair(k.trim(), v.trim()).map_err(wrap)?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, CoreError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("net.variant={}\n", self.variant.tag().to_ascii_lowercase());
        for (k, v) in self
            .env
            .to_pairs()
            .into_iter()
            .chain(self.net.to_pairs())
            .chain(self.train.to_pairs())
        {
            out.push_str(&format!("{k}={v}\n"));
        }
        out
    }
}
