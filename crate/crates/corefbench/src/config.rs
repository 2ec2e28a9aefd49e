//! Command configuration: a JSON file with the same field names, overlaid
//! by command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use corefbench_core::encoder::EncoderConfig;
use corefbench_core::numerics::AdamWConfig;
use corefbench_core::objectives::Objective;
use corefbench_core::training::{preset_hyperparameters, RunConfig};
use serde::{Deserialize, Serialize};

use crate::datasets::DatasetFormat;

pub const DATA_DIR_ENV: &str = "COREFBENCH_DATA_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Best hyperparameters per objective from the reference grid.
    Table3,
}

/// Encoder size overrides; unset fields keep the toy defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSettings {
    pub num_layers: Option<usize>,
    pub num_heads: Option<usize>,
    pub hidden: Option<usize>,
    pub ffn: Option<usize>,
    pub max_len: Option<usize>,
    pub dropout: Option<f64>,
}

impl EncoderSettings {
    fn merge(self, over: EncoderSettings) -> Self {
        EncoderSettings {
            num_layers: over.num_layers.or(self.num_layers),
            num_heads: over.num_heads.or(self.num_heads),
            hidden: over.hidden.or(self.hidden),
            ffn: over.ffn.or(self.ffn),
            max_len: over.max_len.or(self.max_len),
            dropout: over.dropout.or(self.dropout),
        }
    }

    pub fn is_empty(&self) -> bool {
        *self == EncoderSettings::default()
    }

    pub fn apply(&self, vocab_size: usize) -> EncoderConfig {
        let mut c = EncoderConfig::toy(vocab_size);
        c.num_layers = self.num_layers.unwrap_or(c.num_layers);
        c.num_heads = self.num_heads.unwrap_or(c.num_heads);
        c.hidden = self.hidden.unwrap_or(c.hidden);
        c.ffn = self.ffn.unwrap_or(c.ffn);
        c.max_len = self.max_len.unwrap_or(c.max_len);
        c.dropout = self.dropout.unwrap_or(c.dropout);
        c
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub data_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub objective: Option<Objective>,
    /// Training and dev sets.
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    /// Input format of `train`, `dev` and `eval_sets`.
    pub format: Option<DatasetFormat>,
    /// Column name of the dev set in reports.
    pub dev_name: Option<String>,
    /// Extra report columns: name to dataset path.
    pub eval_sets: BTreeMap<String, PathBuf>,
    /// Encoder-only checkpoint to warm-start from.
    pub pretrained: Option<PathBuf>,
    pub encoder: EncoderSettings,
    pub preset: Option<Preset>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub adamw: Option<AdamWConfig>,
    pub seed: Option<u64>,
    /// Seed count of a sweep.
    pub seeds: Option<usize>,
    /// Seeds of every grid point.
    pub grid_seeds: Option<Vec<u64>>,
    pub jobs: Option<usize>,
    pub override_file: Option<PathBuf>,
    pub save_checkpoints: Option<bool>,
}

impl CliConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// `over`'s set fields replace ours; maps are merged key by key.
    pub fn merge(self, over: CliConfig) -> Self {
        let mut eval_sets = self.eval_sets;
        eval_sets.extend(over.eval_sets);
        CliConfig {
            data_dir: over.data_dir.or(self.data_dir),
            output_dir: over.output_dir.or(self.output_dir),
            objective: over.objective.or(self.objective),
            train: over.train.or(self.train),
            dev: over.dev.or(self.dev),
            format: over.format.or(self.format),
            dev_name: over.dev_name.or(self.dev_name),
            eval_sets,
            pretrained: over.pretrained.or(self.pretrained),
            encoder: self.encoder.merge(over.encoder),
            preset: over.preset.or(self.preset),
            learning_rate: over.learning_rate.or(self.learning_rate),
            epochs: over.epochs.or(self.epochs),
            batch_size: over.batch_size.or(self.batch_size),
            adamw: over.adamw.or(self.adamw),
            seed: over.seed.or(self.seed),
            seeds: over.seeds.or(self.seeds),
            grid_seeds: over.grid_seeds.or(self.grid_seeds),
            jobs: over.jobs.or(self.jobs),
            override_file: over.override_file.or(self.override_file),
            save_checkpoints: over.save_checkpoints.or(self.save_checkpoints),
        }
    }

    /// Flags over the file named by `--config`, if any.
    pub fn load(config_file: Option<&Path>, flags: CliConfig) -> Result<Self> {
        let base = match config_file {
            Some(p) => CliConfig::from_file(p)?,
            None => CliConfig::default(),
        };
        Ok(base.merge(flags))
    }

    /// `--data-dir`, else `$COREFBENCH_DATA_DIR`, else the working directory.
    pub fn data_dir(&self) -> PathBuf {
        self.data_dir
            .clone()
            .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }

    /// Relative dataset paths are taken from the data directory.
    pub fn data_path(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.data_dir().join(path)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn runs_dir(&self) -> PathBuf {
        self.output_dir().join("runs")
    }

    pub fn format(&self) -> DatasetFormat {
        self.format.unwrap_or(DatasetFormat::Unified)
    }

    pub fn dev_name(&self) -> String {
        self.dev_name.clone().unwrap_or_else(|| "dev".into())
    }

    pub fn jobs(&self) -> usize {
        self.jobs.unwrap_or(1).max(1)
    }

    pub fn objective(&self) -> Result<Objective> {
        self.objective
            .context("no objective given; pass --objective (valid: wg-sr, bwp, css, mas)")
    }

    /// Run configuration for `objective`. Precedence: explicit settings,
    /// then the preset, then the built-in defaults (which equal the preset).
    pub fn run_config(&self, objective: Objective, encoder: EncoderConfig) -> RunConfig {
        let mut c = RunConfig::new(objective, encoder);
        if self.preset == Some(Preset::Table3) {
            (c.learning_rate, c.num_epochs, c.batch_size) = preset_hyperparameters(objective);
        }
        c.learning_rate = self.learning_rate.unwrap_or(c.learning_rate);
        c.num_epochs = self.epochs.unwrap_or(c.num_epochs);
        c.batch_size = self.batch_size.unwrap_or(c.batch_size);
        c.seed = self.seed.unwrap_or(0);
        c.adamw = self.adamw.unwrap_or(c.adamw);
        c.warm_start = self.pretrained.is_some();
        c.train_path = self
            .train
            .as_ref()
            .map(|p| self.data_path(p).display().to_string());
        c.dev_path = self
            .dev
            .as_ref()
            .map(|p| self.data_path(p).display().to_string());
        c.checkpoint_path = self.pretrained.as_ref().map(|p| p.display().to_string());
        c
    }

    /// Write the effective configuration next to the outputs.
    pub fn echo(&self, command: &str) -> Result<PathBuf> {
        let dir = self.output_dir();
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(format!("effective_config.{command}.json"));
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        crate::records::write_atomic(&path, &bytes)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let file: CliConfig = serde_json::from_str(
            r#"{"objective": "css", "learning_rate": 3e-5, "jobs": 4, "eval_sets": {"wsc": "wsc.jsonl"},
                "encoder": {"hidden": 32, "num_heads": 4}}"#,
        )
        .unwrap();
        let flags = CliConfig {
            learning_rate: Some(5e-6),
            eval_sets: [("dpr".to_string(), PathBuf::from("dpr.jsonl"))].into(),
            encoder: EncoderSettings {
                hidden: Some(16),
                ..Default::default()
            },
            ..Default::default()
        };
        let c = file.merge(flags);
        assert_eq!(c.objective, Some(Objective::Css));
        assert_eq!(c.learning_rate, Some(5e-6));
        assert_eq!(c.jobs(), 4);
        assert_eq!(c.eval_sets.len(), 2);
        let enc = c.encoder.apply(10);
        assert_eq!((enc.hidden, enc.num_heads, enc.num_layers), (16, 4, 2));
    }

    #[test]
    fn unknown_objective_lists_valid_names() {
        let err = serde_json::from_str::<CliConfig>(r#"{"objective": "xyz"}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("wg-sr") && msg.contains("mas"), "{msg}");
        assert!(serde_json::from_str::<CliConfig>(r#"{"lr": 1}"#).is_err());
    }

    #[test]
    fn preset_and_explicit_values() {
        let c = CliConfig {
            preset: Some(Preset::Table3),
            ..Default::default()
        };
        let rc = c.run_config(Objective::Mas, EncoderConfig::toy(10));
        assert_eq!(
            (rc.num_epochs, rc.batch_size, rc.learning_rate),
            (8, 8, 1e-5)
        );
        let c = CliConfig {
            epochs: Some(3),
            ..c
        };
        let rc = c.run_config(Objective::WgSr, EncoderConfig::toy(10));
        assert_eq!(
            (rc.num_epochs, rc.batch_size, rc.learning_rate),
            (3, 16, 1e-5)
        );
    }
}
