use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{ModelSpec, Task};
use crate::transduction::{default_max_len, DecodeOptions};
use crate::nn::EncoderKind;

use super::losses::LossWeights;

/// Keys every configuration file must define.
pub const CONFIG_KEYS: [&str; 21] = [
    "task",
    "encoder",
    "embed_dim",
    "hidden_dim",
    "layers",
    "heads",
    "lr",
    "batch_size",
    "validate_every",
    "lr_decay",
    "patience",
    "max_decays",
    "w_em",
    "w_nll",
    "w_bce",
    "w_nonmatch",
    "w_interp",
    "beam",
    "len_norm",
    "seed",
    "train_subsample",
];

/// Keys that may be given in addition to the required ones.
const OPTIONAL_KEYS: [&str; 6] =
    ["max_steps", "micro_batch", "kernel_width", "max_positions", "interp_length_norm", "max_output_len"];

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub task: Task,
    pub encoder: EncoderKind,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub validate_every: usize,
    pub lr_decay: f64,
    pub patience: usize,
    pub max_decays: usize,
    pub weights: LossWeights,
    pub beam: usize,
    pub len_norm: f64,
    pub seed: u64,
    /// Number of training examples to keep; 0 keeps all.
    pub train_subsample: usize,
    /// Hard cap on optimiser steps; 0 means no cap.
    pub max_steps: usize,
    /// Examples per gradient chunk; chunks are summed in a fixed order.
    pub micro_batch: usize,
    pub kernel_width: usize,
    pub max_positions: usize,
    /// Output length limit for decoding; 0 uses a limit derived from the source length.
    pub max_output_len: usize,
}

impl TrainConfig {
    /// Full-size settings for a task.
    pub fn defaults(task: Task) -> Self {
        Self {
            task,
            encoder: EncoderKind::Rnn,
            embed_dim: 256,
            hidden_dim: 256,
            layers: 2,
            heads: 4,
            lr: 1e-4,
            batch_size: 512,
            validate_every: 50,
            lr_decay: 0.7,
            patience: 2,
            max_decays: 10,
            weights: LossWeights::default(),
            beam: 1,
            len_norm: 0.0,
            seed: 13,
            train_subsample: 0,
            max_steps: 0,
            micro_batch: 16,
            kernel_width: 3,
            max_positions: 128,
            max_output_len: 0,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim();
            if !CONFIG_KEYS.contains(&key) && !OPTIONAL_KEYS.contains(&key) {
                return Err(Error::Config(format!("line {}: unknown key `{key}`", lineno + 1)));
            }
            if map.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
        }
        Self::from_map(&map)
    }

    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        for key in CONFIG_KEYS {
            if !map.contains_key(key) {
                return Err(Error::MissingKey(key.to_string()));
            }
        }
        let task: Task = map["task"].parse()?;
        let mut c = Self::defaults(task);
        c.encoder = map["encoder"].parse()?;
        c.embed_dim = num(map, "embed_dim")?;
        c.hidden_dim = num(map, "hidden_dim")?;
        c.layers = num(map, "layers")?;
        c.heads = num(map, "heads")?;
        c.lr = num(map, "lr")?;
        c.batch_size = num(map, "batch_size")?;
        c.validate_every = num(map, "validate_every")?;
        c.lr_decay = num(map, "lr_decay")?;
        c.patience = num(map, "patience")?;
        c.max_decays = num(map, "max_decays")?;
        c.weights.em = num(map, "w_em")?;
        c.weights.nll = num(map, "w_nll")?;
        c.weights.bce = num(map, "w_bce")?;
        c.weights.nonmatch = num(map, "w_nonmatch")?;
        c.weights.interp = num(map, "w_interp")?;
        c.beam = num(map, "beam")?;
        c.len_norm = num(map, "len_norm")?;
        c.seed = num(map, "seed")?;
        c.train_subsample = num(map, "train_subsample")?;
        if map.contains_key("max_steps") {
            c.max_steps = num(map, "max_steps")?;
        }
        if map.contains_key("micro_batch") {
            c.micro_batch = num(map, "micro_batch")?;
        }
        if map.contains_key("kernel_width") {
            c.kernel_width = num(map, "kernel_width")?;
        }
        if map.contains_key("max_positions") {
            c.max_positions = num(map, "max_positions")?;
        }
        if map.contains_key("interp_length_norm") {
            c.weights.interp_length_norm = num(map, "interp_length_norm")?;
        }
        if map.contains_key("max_output_len") {
            c.max_output_len = num(map, "max_output_len")?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("embed_dim", self.embed_dim),
            ("batch_size", self.batch_size),
            ("validate_every", self.validate_every),
            ("beam", self.beam),
            ("micro_batch", self.micro_batch),
            ("max_positions", self.max_positions),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("`{key}` must be positive")));
            }
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::Config("`lr` must be a non-negative number".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Config("`lr_decay` must be in (0, 1]".into()));
        }
        let w = &self.weights;
        for (key, v) in
            [("w_em", w.em), ("w_nll", w.nll), ("w_bce", w.bce), ("w_nonmatch", w.nonmatch), ("w_interp", w.interp)]
        {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("`{key}` must be a non-negative number")));
            }
        }
        Ok(())
    }

    /// `key=value` lines covering every key, parseable by [`TrainConfig::parse`].
    pub fn to_lines(&self) -> Vec<(String, String)> {
        let w = &self.weights;
        let pairs: Vec<(&str, String)> = vec![
            ("task", self.task.to_string()),
            ("encoder", self.encoder.to_string()),
            ("embed_dim", self.embed_dim.to_string()),
            ("hidden_dim", self.hidden_dim.to_string()),
            ("layers", self.layers.to_string()),
            ("heads", self.heads.to_string()),
            ("lr", fmt_f64(self.lr)),
            ("batch_size", self.batch_size.to_string()),
            ("validate_every", self.validate_every.to_string()),
            ("lr_decay", fmt_f64(self.lr_decay)),
            ("patience", self.patience.to_string()),
            ("max_decays", self.max_decays.to_string()),
            ("w_em", fmt_f64(w.em)),
            ("w_nll", fmt_f64(w.nll)),
            ("w_bce", fmt_f64(w.bce)),
            ("w_nonmatch", fmt_f64(w.nonmatch)),
            ("w_interp", fmt_f64(w.interp)),
            ("beam", self.beam.to_string()),
            ("len_norm", fmt_f64(self.len_norm)),
            ("seed", self.seed.to_string()),
            ("train_subsample", self.train_subsample.to_string()),
            ("max_steps", self.max_steps.to_string()),
            ("micro_batch", self.micro_batch.to_string()),
            ("kernel_width", self.kernel_width.to_string()),
            ("max_positions", self.max_positions.to_string()),
            ("interp_length_norm", w.interp_length_norm.to_string()),
            ("max_output_len", self.max_output_len.to_string()),
        ];
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn to_text(&self) -> String {
        self.to_lines().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Shortest text that parses back to the same value.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn num<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T> {
    let raw = &map[key];
    raw.parse().map_err(|_| Error::Config(format!("`{key}` has an invalid value `{raw}`")))
}

impl TrainConfig {
    /// Model architecture for the given vocabulary sizes (sentinels included).
    pub fn model_spec(&self, source_vocab: usize, target_vocab: usize) -> ModelSpec {
        ModelSpec {
            task: self.task,
            encoder: self.encoder,
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
            layers: self.layers,
            heads: self.heads,
            kernel_width: self.kernel_width,
            max_positions: self.max_positions,
            source_vocab,
            target_vocab,
        }
    }

    /// Decoding settings for a source of length `n`.
    pub fn decode_options(&self, n: usize) -> DecodeOptions {
        let max_len = if self.max_output_len > 0 { self.max_output_len } else { default_max_len(n) };
        DecodeOptions { beam: self.beam, len_norm: self.len_norm, max_len }
    }
}
