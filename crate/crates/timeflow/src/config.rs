//! Run configuration: a sectioned TOML file with every default baked in,
//! so a minimal config only names a data source and the task mode.
//!
//! Defaults follow the reference hyperparameters: latent dimension 128,
//! five hidden layers of 256, 64 embedding frequencies, inner rate 1e-2
//! with K = 3 steps, outer rate 5e-4 under cosine annealing, 4×10⁴ epochs,
//! batch size 64.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{CsvLayout, SynthConfig};
use crate::error::{Error, Result};
use crate::meta::{InnerLoopConfig, OuterConfig};
use crate::model::ModelConfig;
use crate::tasks::WindowSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskMode {
    Impute,
    Forecast,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub latent_dim: usize,
    pub hidden_dim: usize,
    pub depth: usize,
    pub n_frequencies: usize,
    pub max_frequency_index: Option<u32>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            latent_dim: 128,
            hidden_dim: 256,
            depth: 5,
            n_frequencies: 64,
            max_frequency_index: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct InnerSection {
    pub alpha: f64,
    pub steps: usize,
}

impl Default for InnerSection {
    fn default() -> Self {
        InnerSection { alpha: 1e-2, steps: 3 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OuterSection {
    pub lr: f64,
    pub lr_min: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub first_order: bool,
}

impl Default for OuterSection {
    fn default() -> Self {
        OuterSection { lr: 5e-4, lr_min: 0.0, epochs: 40_000, batch_size: 64, first_order: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TaskSection {
    pub mode: TaskMode,
    /// Subsampling rate of the observed grid (imputation) or of the
    /// look-back window at inference (forecasting).
    pub tau: f64,
    pub lookback: usize,
    pub horizon: usize,
    /// Stride for enumerating evaluation windows; 0 means one horizon.
    pub stride: usize,
    /// Window draws per sample per epoch in forecast training.
    pub draws_per_epoch: usize,
    pub knn_k: usize,
    /// Evaluation windows: length 0 means the whole series as one window.
    pub window_len: usize,
    pub window_count: usize,
}

impl Default for TaskSection {
    fn default() -> Self {
        TaskSection {
            mode: TaskMode::Impute,
            tau: 0.5,
            lookback: 512,
            horizon: 96,
            stride: 0,
            draws_per_epoch: 1,
            knn_k: 3,
            window_len: 0,
            window_count: 1,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub csv: Option<PathBuf>,
    pub time_column: Option<String>,
    pub sample_columns: Option<Vec<String>>,
    /// z-normalize per sample on load; on by default.
    pub normalize: Option<bool>,
    /// Keep every n-th point (hourly view of a 10-minute series: 6).
    pub downsample: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub n_samples: usize,
    pub length: usize,
    pub frequencies: Vec<f64>,
    pub amp_range: [f64; 2],
    pub phase_range: [f64; 2],
    pub trend_range: [f64; 2],
    pub noise_std: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let d = SynthConfig::default();
        SynthSection {
            n_samples: 16,
            length: 512,
            frequencies: d.frequencies,
            amp_range: [d.amp_range.0, d.amp_range.1],
            phase_range: [d.phase_range.0, d.phase_range.1],
            trend_range: [d.trend_range.0, d.trend_range.1],
            noise_std: d.noise_std,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads for batch parallelism; 0 means all available cores.
    pub threads: usize,
    pub model: ModelSection,
    pub inner: InnerSection,
    pub outer: OuterSection,
    pub task: TaskSection,
    pub data: DataSection,
    pub synth: Option<SynthSection>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.model_config().validate()?;
        self.inner_config().validate()?;
        self.outer_config(0).validate()?;
        if !(self.task.tau > 0.0 && self.task.tau <= 1.0) {
            return Err(Error::Config(format!(
                "task.tau must lie in (0, 1], got {}",
                self.task.tau
            )));
        }
        if self.task.draws_per_epoch == 0 {
            return Err(Error::Config("task.draws_per_epoch must be at least 1".into()));
        }
        if self.task.knn_k == 0 {
            return Err(Error::Config("task.knn_k must be at least 1".into()));
        }
        if matches!(self.task.mode, TaskMode::Forecast)
            && (self.task.lookback == 0 || self.task.horizon == 0)
        {
            return Err(Error::Config(
                "task.lookback and task.horizon must be positive for forecasting".into(),
            ));
        }
        if let Some(s) = &self.synth {
            if s.n_samples == 0 || s.length < 2 {
                return Err(Error::Config(
                    "synth.n_samples must be ≥ 1 and synth.length ≥ 2".into(),
                ));
            }
            if s.frequencies.is_empty() {
                return Err(Error::Config("synth.frequencies must not be empty".into()));
            }
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            n_frequencies: self.model.n_frequencies,
            depth: self.model.depth,
            hidden_dim: self.model.hidden_dim,
            latent_dim: self.model.latent_dim,
            max_frequency_index: self.model.max_frequency_index,
        }
    }

    pub fn inner_config(&self) -> InnerLoopConfig {
        InnerLoopConfig { alpha: self.inner.alpha, steps: self.inner.steps }
    }

    pub fn outer_config(&self, lambda_out: u8) -> OuterConfig {
        OuterConfig {
            lr: self.outer.lr,
            lr_min: self.outer.lr_min,
            epochs: self.outer.epochs,
            batch_size: self.outer.batch_size,
            lambda_out,
            first_order: self.outer.first_order,
        }
    }

    pub fn window_spec(&self) -> WindowSpec {
        WindowSpec {
            lookback: self.task.lookback,
            horizon: self.task.horizon,
            stride: if self.task.stride == 0 { self.task.horizon } else { self.task.stride },
        }
    }

    pub fn csv_layout(&self) -> CsvLayout {
        CsvLayout {
            time_column: self.data.time_column.clone(),
            sample_columns: self.data.sample_columns.clone(),
        }
    }

    pub fn synth_config(&self) -> Option<(usize, usize, SynthConfig)> {
        self.synth.as_ref().map(|s| {
            (
                s.n_samples,
                s.length,
                SynthConfig {
                    frequencies: s.frequencies.clone(),
                    amp_range: (s.amp_range[0], s.amp_range[1]),
                    phase_range: (s.phase_range[0], s.phase_range[1]),
                    trend_range: (s.trend_range[0], s.trend_range[1]),
                    noise_std: s.noise_std,
                },
            )
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_hyperparameters() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.model.latent_dim, 128);
        assert_eq!(cfg.model.hidden_dim, 256);
        assert_eq!(cfg.model.depth, 5);
        assert_eq!(cfg.model.n_frequencies, 64);
        assert_eq!(cfg.inner.alpha, 1e-2);
        assert_eq!(cfg.inner.steps, 3);
        assert_eq!(cfg.outer.lr, 5e-4);
        assert_eq!(cfg.outer.epochs, 40_000);
        assert_eq!(cfg.outer.batch_size, 64);
        assert!(!cfg.outer.first_order);
        cfg.validate().unwrap();
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let text = "[task]\nmode = \"forecast\"\n\n[data]\ncsv = \"series.csv\"\n";
        let cfg: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.task.mode, TaskMode::Forecast);
        assert_eq!(cfg.data.csv, Some(PathBuf::from("series.csv")));
        assert_eq!(cfg.model.hidden_dim, 256); // untouched defaults
    }

    #[test]
    fn unknown_field_is_rejected_by_name() {
        let text = "[outer]\nlearning_rate = 0.1\n";
        let err = toml::from_str::<RunConfig>(text).unwrap_err();
        assert!(err.to_string().contains("learning_rate"));
    }

    #[test]
    fn invalid_values_name_the_field() {
        let mut cfg = RunConfig::default();
        cfg.task.tau = 1.5;
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("tau"));

        let mut cfg = RunConfig::default();
        cfg.inner.alpha = -1.0;
        assert!(cfg.validate().unwrap_err().to_string().contains("alpha"));
    }

    #[test]
    fn stride_defaults_to_horizon() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.window_spec().stride, cfg.task.horizon);
    }

    #[test]
    fn config_echo_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.seed = 42;
        cfg.synth = Some(SynthSection::default());
        let text = cfg.to_toml();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }
}
