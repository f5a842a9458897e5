//! Run configuration with layered sources.
//!
//! Precedence, lowest first: built-in defaults, `ENTEVAL_DATA_DIR`, the
//! `key=value` config file, command-line flags.

use std::path::PathBuf;

use enteval::probe::{MixMode, TrainConfig};
use enteval::tasks::{LayerSelection, RunSettings, Task};
use enteval::{Error, Result};

pub const DATA_DIR_ENV: &str = "ENTEVAL_DATA_DIR";

/// Keys accepted in config files and their flag equivalents.
pub const KEYS: &[&str] = &[
    "data_dir",
    "tasks",
    "seed",
    "epochs",
    "learning_rate",
    "l2",
    "batch_size",
    "patience",
    "mix_mode",
    "layer",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data_dir: PathBuf,
    pub tasks: Vec<Task>,
    pub seed: u64,
    pub train: TrainConfig,
    pub mix_mode: MixMode,
    pub layer: LayerSelection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data_dir: PathBuf::from("data"),
            tasks: Task::HEADLINES.to_vec(),
            seed: 42,
            train: TrainConfig::default(),
            mix_mode: MixMode::default(),
            layer: LayerSelection::Mixed,
        }
    }
}

fn invalid(key: &str, value: &str) -> Error {
    Error::InvalidArgument(format!("bad value {value:?} for {key}"))
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| invalid(key, value))
}

/// `all`, or a comma-separated list of task names.
pub fn parse_tasks(value: &str) -> Result<Vec<Task>> {
    if value.trim() == "all" {
        return Ok(Task::HEADLINES.to_vec());
    }
    let mut out = Vec::new();
    for name in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let task: Task = name.parse()?;
        if !out.contains(&task) {
            out.push(task);
        }
    }
    if out.is_empty() {
        return Err(invalid("tasks", value));
    }
    Ok(out)
}

pub fn parse_layer(value: &str) -> Result<LayerSelection> {
    match value.trim() {
        "mix" | "mixed" => Ok(LayerSelection::Mixed),
        v => Ok(LayerSelection::Single(number("layer", v)?)),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "data_dir" => self.data_dir = PathBuf::from(value.trim()),
            "tasks" => self.tasks = parse_tasks(value)?,
            "seed" => {
                self.seed = number(key, value)?;
                self.train.seed = self.seed;
            }
            "epochs" => self.train.epochs = number(key, value)?,
            "learning_rate" => self.train.learning_rate = number(key, value)?,
            "l2" => self.train.l2 = number(key, value)?,
            "batch_size" => {
                self.train.batch_size = match value.trim() {
                    "full" | "none" => None,
                    v => Some(number(key, v)?),
                }
            }
            "patience" => self.train.early_stop_patience = number(key, value)?,
            "mix_mode" => self.mix_mode = value.trim().parse()?,
            "layer" => self.layer = parse_layer(value)?,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown config key {other:?} (known: {})",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Applies the layers in precedence order. `flags` are `(key, value)`
    /// pairs already named like config keys.
    pub fn resolve(
        env_data_dir: Option<&str>,
        config_text: Option<&str>,
        flags: &[(&str, String)],
    ) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(dir) = env_data_dir.filter(|d| !d.is_empty()) {
            cfg.set("data_dir", dir)?;
        }
        if let Some(text) = config_text {
            for (key, value) in parse_config(text)? {
                cfg.set(&key, &value)?;
            }
        }
        for (key, value) in flags {
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    pub fn run_settings(&self) -> RunSettings {
        RunSettings {
            train: self.train.clone(),
            mix_mode: self.mix_mode,
            layer: self.layer,
            ..RunSettings::default()
        }
    }
}

/// Flat `key = value` lines; `#` starts a comment line.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidArgument(format!("config line {}: expected key=value", k + 1))
        })?;
        out.push((key.trim().to_owned(), value.trim().to_owned()));
    }
    Ok(out)
}
