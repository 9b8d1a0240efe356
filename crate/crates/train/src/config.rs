//! Experiment configuration: one TOML file fully determines a run.

use std::path::{Path, PathBuf};

use grasp_core::datagen::DatagenConfig;
use grasp_core::render::RenderConfig;
use grasp_core::TaskConfig;
use grasp_neural::{ModelConfig, RAdamConfig, Schedule};
use serde::{Deserialize, Serialize};

use crate::TrainError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Samples per forward/backward pass; gradients are accumulated over
    /// the micro-batches of one batch.
    pub micro_batch: usize,
    pub total_samples: u64,
    /// Distinct images kept in the replay buffers.
    pub buffer_capacity: usize,
    /// Fraction of the buffer filled before the first step.
    pub warmup_fraction: f64,
    /// Fresh groups pulled from the stream before every step.
    pub groups_per_step: usize,
    pub label_smoothing: f64,
    pub max_grad_norm: f64,
    pub workers: usize,
    pub eval_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 256,
            micro_batch: 64,
            total_samples: 500_000,
            buffer_capacity: 2_000,
            warmup_fraction: 0.05,
            groups_per_step: 4,
            label_smoothing: 0.01,
            max_grad_norm: 1.0,
            workers: 1,
            eval_every: 50_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Episodes per evaluation, in distribution and again out of distribution.
    pub trajectories: usize,
    /// Target size of the out-of-distribution episodes; 0 means one more
    /// than the largest training target.
    pub ood_size: usize,
    /// Balanced held-out triplets used for transition accuracy.
    pub transition_samples: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            trajectories: 100,
            ood_size: 0,
            transition_samples: 2_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub task: TaskConfig,
    pub render: RenderConfig,
    pub datagen: DatagenConfig,
    pub model: ModelConfig,
    pub optimizer: RAdamConfig,
    pub schedule: Schedule,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("runs/default"),
            task: TaskConfig::default(),
            render: RenderConfig::default(),
            datagen: DatagenConfig::default(),
            model: ModelConfig::default(),
            optimizer: RAdamConfig::default(),
            schedule: Schedule::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        // TOML integers are signed 64-bit; larger seeds would not survive a checkpoint.
        if self.seed > i64::MAX as u64 {
            return bad(format!("seed {} exceeds {}", self.seed, i64::MAX));
        }
        self.task.validate().map_err(TrainError::Config)?;
        self.model.validate()?;
        if self.model.node_colors != self.task.node_colors || self.model.edge_colors != self.task.edge_colors {
            return bad("model color tables must match the task colors".into());
        }
        if self.model.image_size != self.render.size {
            return bad(format!(
                "model image size {} differs from render size {}",
                self.model.image_size, self.render.size
            ));
        }
        let t = &self.train;
        if t.batch_size == 0 || t.batch_size % 2 != 0 {
            return bad(format!("batch size {} must be even and positive", t.batch_size));
        }
        if t.micro_batch == 0 {
            return bad("micro batch must be positive".into());
        }
        if t.eval_every == 0 {
            return bad("evaluation cadence must be positive".into());
        }
        if t.buffer_capacity == 0 || !(0.0..=1.0).contains(&t.warmup_fraction) {
            return bad("buffer capacity and warmup fraction out of range".into());
        }
        if !(0.0..1.0).contains(&t.label_smoothing) || t.max_grad_norm <= 0.0 {
            return bad("label smoothing or gradient norm out of range".into());
        }
        if self.eval.trajectories == 0 {
            return bad("evaluation needs at least one trajectory".into());
        }
        Ok(())
    }

    /// Target size used for out-of-distribution episodes.
    pub fn ood_size(&self) -> usize {
        if self.eval.ood_size == 0 {
            self.task.max_nodes + 1
        } else {
            self.eval.ood_size
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, TrainError> {
        Self::from_table(toml::from_str(text).map_err(|e| TrainError::Config(e.to_string()))?)
    }

    pub fn from_table(table: toml::Table) -> Result<Self, TrainError> {
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| TrainError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        std::fs::write(path, self.to_toml())?;
        Ok(())
    }
}

/// Applies `key = value` overrides to a parsed config table. Keys are
/// dotted paths such as `train.batch_size`; values are TOML literals, and
/// anything that does not parse as one is taken as a string.
pub fn apply_overrides<'a>(
    table: &mut toml::Table,
    overrides: impl IntoIterator<Item = (&'a str, &'a str)>,
) -> Result<(), TrainError> {
    for (key, raw) in overrides {
        let value = parse_literal(raw);
        let parts: Vec<&str> = key.split('.').collect();
        let (last, path) = parts.split_last().expect("split yields one part");
        let mut t = &mut *table;
        for p in path {
            let entry = t
                .entry(p.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            t = entry
                .as_table_mut()
                .ok_or_else(|| TrainError::Config(format!("override {key}: {p} is not a table")))?;
        }
        t.insert(last.to_string(), value);
    }
    Ok(())
}

fn parse_literal(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
