//! Run configuration and its flat `key = value` text format.
//!
//! ```text
//! # phase lengths
//! epochs_backbone = 20
//! epochs_pencil = 60
//! epochs_finetune = 40
//! lambda = linear:3000        # or 400, or piecewise:3000@0,500@5
//! ```
//!
//! Unknown keys, repeated keys and malformed values are rejected with the
//! offending line number.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::backbone::Activation;
use crate::labelbank::DEFAULT_INIT_CONSTANT;
use crate::losses::{Hyperparams, LossVariant};
use crate::{Error, Result};

/// Label learning rate as a function of the phase-2 epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LambdaSchedule {
    Constant { value: f64 },
    /// Decreases linearly from `start` to exactly 0 at the last phase-2 epoch.
    LinearToZero { start: f64 },
    /// `(first_epoch, value)` segments; the first segment starts at epoch 0.
    Piecewise { segments: Vec<(usize, f64)> },
}

impl LambdaSchedule {
    /// Lambda for phase-2 epoch `t` (0-based) out of `total`.
    pub fn value(&self, t: usize, total: usize) -> f64 {
        match self {
            LambdaSchedule::Constant { value } => *value,
            LambdaSchedule::LinearToZero { start } => {
                if total <= 1 {
                    0.0
                } else {
                    start * (1.0 - t as f64 / (total - 1) as f64)
                }
            }
            LambdaSchedule::Piecewise { segments } => segments
                .iter()
                .take_while(|(from, _)| *from <= t)
                .last()
                .map(|(_, v)| *v)
                .unwrap_or(0.0),
        }
    }

    fn validate(&self) -> Result<()> {
        let values: Vec<f64> = match self {
            LambdaSchedule::Constant { value } => vec![*value],
            LambdaSchedule::LinearToZero { start } => vec![*start],
            LambdaSchedule::Piecewise { segments } => {
                if segments.first().map(|s| s.0) != Some(0) {
                    return Err(Error::invalid("piecewise lambda must start at epoch 0"));
                }
                if segments.windows(2).any(|w| w[0].0 >= w[1].0) {
                    return Err(Error::invalid("piecewise lambda epochs must increase"));
                }
                segments.iter().map(|s| s.1).collect()
            }
        };
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("lambda values must be finite and >= 0"));
        }
        Ok(())
    }

    fn parse(s: &str) -> Result<Self> {
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad lambda value {v:?}")))
        };
        if let Some(rest) = s.strip_prefix("linear:") {
            return Ok(LambdaSchedule::LinearToZero { start: num(rest)? });
        }
        if let Some(rest) = s.strip_prefix("piecewise:") {
            let segments = rest
                .split(',')
                .map(|seg| {
                    let (v, e) = seg
                        .split_once('@')
                        .ok_or_else(|| Error::invalid(format!("segment {seg:?} is not value@epoch")))?;
                    let epoch = e
                        .trim()
                        .parse::<usize>()
                        .map_err(|_| Error::invalid(format!("bad epoch in {seg:?}")))?;
                    Ok((epoch, num(v)?))
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok(LambdaSchedule::Piecewise { segments });
        }
        Ok(LambdaSchedule::Constant { value: num(s)? })
    }

    fn to_text(&self) -> String {
        match self {
            LambdaSchedule::Constant { value } => format!("{value}"),
            LambdaSchedule::LinearToZero { start } => format!("linear:{start}"),
            LambdaSchedule::Piecewise { segments } => {
                let parts: Vec<String> = segments.iter().map(|(e, v)| format!("{v}@{e}")).collect();
                format!("piecewise:{}", parts.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub epochs_backbone: usize,
    pub epochs_pencil: usize,
    pub epochs_finetune: usize,
    /// Fixed learning rate of the backbone and label-learning phases.
    pub lr: f64,
    /// Initial fine-tuning learning rate.
    pub lr_finetune: f64,
    /// Fine-tuning epochs (0-based, within the phase) at which the rate is divided by 10.
    pub lr_decay_epochs: Vec<usize>,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: LambdaSchedule,
    pub init_constant: f64,
    pub batch_size: usize,
    pub repeat_count: usize,
    /// Learning rate and lambda are multiplied by `repeat_damping^k` on repeat `k`.
    pub repeat_damping: f64,
    pub seed: u64,
    pub variant: LossVariant,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub momentum: f64,
    pub weight_decay: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            epochs_backbone: 20,
            epochs_pencil: 60,
            epochs_finetune: 40,
            lr: 0.05,
            lr_finetune: 0.02,
            lr_decay_epochs: vec![20],
            alpha: 0.1,
            beta: 0.4,
            lambda: LambdaSchedule::Constant { value: 400.0 },
            init_constant: DEFAULT_INIT_CONSTANT,
            batch_size: 64,
            repeat_count: 0,
            repeat_damping: 1.0,
            seed: 0,
            variant: LossVariant::KlInverse,
            hidden: vec![32, 32],
            activation: Activation::Relu,
            momentum: 0.9,
            weight_decay: 1e-4,
            val_fraction: 0.1,
            test_fraction: 0.2,
        }
    }
}

const KEYS: &[&str] = &[
    "epochs_backbone",
    "epochs_pencil",
    "epochs_finetune",
    "lr",
    "lr_finetune",
    "lr_decay_epochs",
    "alpha",
    "beta",
    "lambda",
    "init_constant",
    "batch_size",
    "repeat_count",
    "repeat_damping",
    "seed",
    "variant",
    "hidden",
    "activation",
    "momentum",
    "weight_decay",
    "val_fraction",
    "test_fraction",
];

impl RunConfig {
    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs_backbone == 0 || self.epochs_pencil == 0 || self.epochs_finetune == 0 {
            return Err(Error::invalid("every phase needs at least one epoch"));
        }
        for (name, v) in [("lr", self.lr), ("lr_finetune", self.lr_finetune)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be positive"));
        }
        if !(self.init_constant.is_finite() && self.init_constant > 0.0) {
            return Err(Error::invalid("init_constant must be positive"));
        }
        if !(self.repeat_damping.is_finite() && self.repeat_damping > 0.0) {
            return Err(Error::invalid("repeat_damping must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) || self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return Err(Error::invalid("momentum must be in [0, 1) and weight_decay >= 0"));
        }
        if self.variant.is_binary() {
            return Err(Error::invalid(
                "binary_inverse needs sigmoid outputs; the trainer supports kl_forward and kl_inverse",
            ));
        }
        if self.hidden.contains(&0) {
            return Err(Error::invalid("hidden widths must be positive"));
        }
        self.hyperparams().validate()?;
        self.lambda.validate()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Config {
                line: line_no,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(err(format!("unknown key {key:?}")));
            }
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key {key:?}")));
            }
            cfg.set(key, value).map_err(|e| err(e.to_string()))?;
        }
        cfg.validate().map_err(|e| Error::Config {
            line: 0,
            message: e.to_string(),
        })?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::invalid(format!("bad value {v:?}")))
        }
        fn list(v: &str) -> Result<Vec<usize>> {
            v.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(num)
                .collect()
        }
        match key {
            "epochs_backbone" => self.epochs_backbone = num(value)?,
            "epochs_pencil" => self.epochs_pencil = num(value)?,
            "epochs_finetune" => self.epochs_finetune = num(value)?,
            "lr" => self.lr = num(value)?,
            "lr_finetune" => self.lr_finetune = num(value)?,
            "lr_decay_epochs" => self.lr_decay_epochs = list(value)?,
            "alpha" => self.alpha = num(value)?,
            "beta" => self.beta = num(value)?,
            "lambda" => self.lambda = LambdaSchedule::parse(value)?,
            "init_constant" => self.init_constant = num(value)?,
            "batch_size" => self.batch_size = num(value)?,
            "repeat_count" => self.repeat_count = num(value)?,
            "repeat_damping" => self.repeat_damping = num(value)?,
            "seed" => self.seed = num(value)?,
            "variant" => {
                self.variant = LossVariant::from_name(value)
                    .ok_or_else(|| Error::invalid(format!("unknown variant {value:?}")))?
            }
            "hidden" => self.hidden = list(value)?,
            "activation" => {
                self.activation = Activation::from_name(value)
                    .ok_or_else(|| Error::invalid(format!("unknown activation {value:?}")))?
            }
            "momentum" => self.momentum = num(value)?,
            "weight_decay" => self.weight_decay = num(value)?,
            "val_fraction" => self.val_fraction = num(value)?,
            "test_fraction" => self.test_fraction = num(value)?,
            _ => unreachable!("key list and setter disagree on {key}"),
        }
        Ok(())
    }

    /// Renders every field in the text format; `parse(to_text())` round-trips.
    pub fn to_text(&self) -> String {
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let activation = match self.activation {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        };
        let mut s = String::new();
        let _ = writeln!(s, "epochs_backbone = {}", self.epochs_backbone);
        let _ = writeln!(s, "epochs_pencil = {}", self.epochs_pencil);
        let _ = writeln!(s, "epochs_finetune = {}", self.epochs_finetune);
        let _ = writeln!(s, "lr = {}", self.lr);
        let _ = writeln!(s, "lr_finetune = {}", self.lr_finetune);
        let _ = writeln!(s, "lr_decay_epochs = {}", join(&self.lr_decay_epochs));
        let _ = writeln!(s, "alpha = {}", self.alpha);
        let _ = writeln!(s, "beta = {}", self.beta);
        let _ = writeln!(s, "lambda = {}", self.lambda.to_text());
        let _ = writeln!(s, "init_constant = {}", self.init_constant);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "repeat_count = {}", self.repeat_count);
        let _ = writeln!(s, "repeat_damping = {}", self.repeat_damping);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "variant = {}", self.variant.name());
        let _ = writeln!(s, "hidden = {}", join(&self.hidden));
        let _ = writeln!(s, "activation = {activation}");
        let _ = writeln!(s, "momentum = {}", self.momentum);
        let _ = writeln!(s, "weight_decay = {}", self.weight_decay);
        let _ = writeln!(s, "val_fraction = {}", self.val_fraction);
        let _ = writeln!(s, "test_fraction = {}", self.test_fraction);
        s
    }
}
