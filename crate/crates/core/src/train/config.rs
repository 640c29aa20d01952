//! Training configuration and the `key = value` config file.
//!
//! A key may list several comma-separated values; the file then describes a
//! grid (cartesian product, first key varying slowest) for model selection.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::net::{PoolMode, Pooling};
use crate::regions::{RegionMode, RegionSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    /// Multiplicative decay applied every `decay_interval` epochs.
    pub lr_decay: f64,
    pub decay_interval: usize,
    pub epochs: usize,
    pub batch: usize,
    pub l2: f64,
    pub dropout: f64,
    pub seed: u64,
    pub spec: RegionSpec,
    pub neurons: usize,
    pub pooling: Pooling,
    pub response_norm: bool,
    pub multi_label: bool,
    pub init_scale: f64,
    pub vocab_size: usize,
    pub min_count: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.05,
            lr_decay: 0.9,
            decay_interval: 1,
            epochs: 20,
            batch: 16,
            l2: 1e-4,
            dropout: 0.5,
            seed: 1,
            spec: RegionSpec {
                size: 3,
                stride: 1,
                mode: RegionMode::Seq,
                pad: true,
            },
            neurons: 100,
            pooling: Pooling::default(),
            response_norm: true,
            multi_label: false,
            init_scale: 0.01,
            vocab_size: 30_000,
            min_count: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be > 0");
        }
        if !(self.lr_decay > 0.0) || self.decay_interval == 0 {
            return bad("lr_decay must be > 0 and decay_interval >= 1");
        }
        if self.batch == 0 {
            return bad("batch must be >= 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(self.l2 >= 0.0) {
            return bad("l2 must be >= 0");
        }
        if self.neurons == 0 || self.pooling.segments == 0 {
            return bad("neurons and segments must be >= 1");
        }
        if self.vocab_size == 0 || self.min_count == 0 {
            return bad("vocab_size and min_count must be >= 1");
        }
        Ok(())
    }

    /// Learning rate in effect during `epoch` (0-based).
    pub fn rate_at(&self, epoch: usize) -> f64 {
        self.lr * self.lr_decay.powi((epoch / self.decay_interval) as i32)
    }

    /// N-gram order the input vocabulary needs for this region mode.
    pub fn vocab_ngram(&self) -> usize {
        match self.spec.mode {
            RegionMode::Bonv(n) => n,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegSampleCfg {
    /// Negatives sampled per positive.
    pub eta: usize,
    pub positive_weight: f64,
}

impl Default for NegSampleCfg {
    fn default() -> Self {
        NegSampleCfg {
            eta: 5,
            positive_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TargetKind {
    #[default]
    Unsupervised,
    PartiallySupervised,
}

/// Settings for building tv-embedding targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetConfig {
    pub kind: TargetKind,
    /// `None` picks by the embedding's region mode: seq distinguishes sides.
    pub distinguish: Option<bool>,
    pub tau: f64,
    pub stoplist: Option<PathBuf>,
    pub vocab_size: usize,
}

impl Default for TargetConfig {
    fn default() -> Self {
        TargetConfig {
            kind: TargetKind::Unsupervised,
            distinguish: None,
            tau: 0.0,
            stoplist: None,
            vocab_size: 30_000,
        }
    }
}

impl TargetConfig {
    pub fn distinguish_for(&self, mode: RegionMode) -> bool {
        self.distinguish.unwrap_or(mode == RegionMode::Seq)
    }
}

/// Everything a config file can set.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub train: TrainConfig,
    pub neg: NegSampleCfg,
    pub target: TargetConfig,
    /// Held-out fraction for model selection; 0 disables selection.
    pub holdout: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            train: TrainConfig::default(),
            neg: NegSampleCfg::default(),
            target: TargetConfig::default(),
            holdout: 0.2,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "lr",
    "lr_decay",
    "decay_interval",
    "epochs",
    "batch",
    "l2",
    "dropout",
    "seed",
    "region_size",
    "stride",
    "mode",
    "pad",
    "neurons",
    "pooling",
    "segments",
    "response_norm",
    "multilabel",
    "init_scale",
    "vocab_size",
    "min_count",
    "holdout",
    "target.kind",
    "target.distinguish",
    "target.tau",
    "target.stoplist",
    "target.vocab_size",
    "neg.eta",
    "neg.positive_weight",
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "1" | "true" | "yes" => Ok(true),
        "0" | "false" | "no" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean `{value}` for `{key}`"))),
    }
}

impl Config {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        match key {
            "lr" => t.lr = parse_num(key, value)?,
            "lr_decay" => t.lr_decay = parse_num(key, value)?,
            "decay_interval" => t.decay_interval = parse_num(key, value)?,
            "epochs" => t.epochs = parse_num(key, value)?,
            "batch" => t.batch = parse_num(key, value)?,
            "l2" => t.l2 = parse_num(key, value)?,
            "dropout" => t.dropout = parse_num(key, value)?,
            "seed" => t.seed = parse_num(key, value)?,
            "region_size" => t.spec.size = parse_num(key, value)?,
            "stride" => t.spec.stride = parse_num(key, value)?,
            "mode" => t.spec.mode = value.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            "pad" => t.spec.pad = parse_bool(key, value)?,
            "neurons" => t.neurons = parse_num(key, value)?,
            "pooling" => t.pooling.mode = value.parse::<PoolMode>().map_err(|e| Error::Config(e.to_string()))?,
            "segments" => t.pooling.segments = parse_num(key, value)?,
            "response_norm" => t.response_norm = parse_bool(key, value)?,
            "multilabel" => t.multi_label = parse_bool(key, value)?,
            "init_scale" => t.init_scale = parse_num(key, value)?,
            "vocab_size" => t.vocab_size = parse_num(key, value)?,
            "min_count" => t.min_count = parse_num(key, value)?,
            "holdout" => self.holdout = parse_num(key, value)?,
            "target.kind" => {
                self.target.kind = match value {
                    "unsupervised" => TargetKind::Unsupervised,
                    "partially-supervised" | "partial" => TargetKind::PartiallySupervised,
                    _ => return Err(Error::Config(format!("unknown target kind `{value}`"))),
                }
            }
            "target.distinguish" => self.target.distinguish = Some(parse_bool(key, value)?),
            "target.tau" => self.target.tau = parse_num(key, value)?,
            "target.stoplist" => self.target.stoplist = Some(PathBuf::from(value)),
            "target.vocab_size" => self.target.vocab_size = parse_num(key, value)?,
            "neg.eta" => self.neg.eta = parse_num(key, value)?,
            "neg.positive_weight" => self.neg.positive_weight = parse_num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if !(0.0..1.0).contains(&self.holdout) {
            return Err(Error::Config("holdout must lie in [0, 1)".into()));
        }
        if !(self.neg.positive_weight > 0.0) {
            return Err(Error::Config("neg.positive_weight must be > 0".into()));
        }
        if self.target.vocab_size == 0 {
            return Err(Error::Config("target.vocab_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Parses a config file into its grid of configurations (one entry when no
/// key lists several values).
pub fn parse_config(text: &str) -> Result<Vec<Config>> {
    let mut entries: Vec<(String, Vec<String>)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
        let key = key.trim();
        if !CONFIG_KEYS.contains(&key) {
            return Err(Error::Config(format!("line {}: unknown key `{key}`", i + 1)));
        }
        if entries.iter().any(|(k, _)| k == key) {
            return Err(Error::Config(format!("line {}: duplicate key `{key}`", i + 1)));
        }
        let values: Vec<String> = value.split(',').map(|v| v.trim().to_string()).collect();
        if values.iter().any(String::is_empty) {
            return Err(Error::Config(format!("line {}: empty value for `{key}`", i + 1)));
        }
        entries.push((key.to_string(), values));
    }
    let mut grid = vec![Config::default()];
    for (key, values) in &entries {
        let mut next = Vec::with_capacity(grid.len() * values.len());
        for base in &grid {
            for v in values {
                let mut c = base.clone();
                c.set(key, v)?;
                next.push(c);
            }
        }
        grid = next;
    }
    for c in &grid {
        c.validate()?;
    }
    Ok(grid)
}
