//! Layered configuration: a base table, then the `--config` file, then
//! `GRASP_*` environment variables, then `--set` pairs and explicit flags.

use std::path::Path;

use anyhow::{bail, Context, Result};
use grasp_train::config::apply_overrides;
use grasp_train::ExperimentConfig;

/// Variables consumed by clap directly rather than as config keys.
const RESERVED: [&str; 3] = ["GRASP_CONFIG", "GRASP_SEED", "GRASP_OUT"];

pub struct Layers<'a> {
    pub file: Option<&'a Path>,
    pub env: Vec<(String, String)>,
    pub sets: &'a [String],
    pub seed: Option<u64>,
    pub out: Option<&'a Path>,
}

/// `GRASP_TRAIN__BATCH_SIZE=64` becomes `train.batch_size = 64`.
pub fn env_overrides(vars: impl IntoIterator<Item = (String, String)>) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = vars
        .into_iter()
        .filter(|(k, _)| !RESERVED.contains(&k.as_str()))
        .filter_map(|(k, v)| {
            let key = k.strip_prefix("GRASP_")?;
            (!key.is_empty()).then(|| (key.to_ascii_lowercase().replace("__", "."), v))
        })
        .collect();
    // Process environments are unordered; sort so nested keys land predictably.
    out.sort();
    out
}

pub fn resolve(base: toml::Table, layers: &Layers<'_>) -> Result<ExperimentConfig> {
    let mut table = base;
    if let Some(path) = layers.file {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file: toml::Table = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        merge(&mut table, file);
    }
    apply_overrides(&mut table, layers.env.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
    let mut pairs = Vec::new();
    for s in layers.sets {
        let Some((k, v)) = s.split_once('=') else {
            bail!("--set expects key=value, got {s:?}");
        };
        pairs.push((k.trim(), v.trim()));
    }
    apply_overrides(&mut table, pairs)?;
    if let Some(seed) = layers.seed {
        let seed = i64::try_from(seed).context("seed must fit in a signed 64-bit integer")?;
        table.insert("seed".into(), toml::Value::Integer(seed));
    }
    if let Some(out) = layers.out {
        table.insert("out_dir".into(), toml::Value::String(out.display().to_string()));
    }
    let config = ExperimentConfig::from_table(table)?;
    config.validate()?;
    Ok(config)
}

/// Recursive merge: tables combine key by key, anything else is replaced.
pub fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
