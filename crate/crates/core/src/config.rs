//! Flat `key = value` run configuration.
//!
//! Recognized keys mirror the training hyperparameter table:
//! `learning_rate`, `epochs`, `batch_size`, `early_stopping_patience`,
//! `optimizer`, `loss`, `split`, `seed`, `size`, `workers`. Splits accept
//! either `80/20` or a bare fraction. Unknown keys are rejected, and CLI
//! flags override file values.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::nn::TrainConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{source_name} line {line}: {reason}")]
    Parse {
        source_name: String,
        line: usize,
        reason: String,
    },
}

/// Optional overrides collected from a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub early_stopping_patience: Option<usize>,
    pub optimizer: Option<String>,
    pub loss: Option<String>,
    pub split: Option<f64>,
    pub seed: Option<u64>,
    pub size: Option<usize>,
    pub workers: Option<usize>,
}

/// `80/20` or `0.8` -> 0.8.
pub fn parse_split(text: &str) -> Result<f64, String> {
    if let Some((a, b)) = text.split_once('/') {
        let a: f64 = a.trim().parse().map_err(|_| format!("bad split '{text}'"))?;
        let b: f64 = b.trim().parse().map_err(|_| format!("bad split '{text}'"))?;
        if a <= 0.0 || b <= 0.0 {
            return Err(format!("split parts must be positive in '{text}'"));
        }
        Ok(a / (a + b))
    } else {
        let v: f64 = text.trim().parse().map_err(|_| format!("bad split '{text}'"))?;
        if !(0.0 < v && v < 1.0) {
            return Err(format!("split fraction must be inside (0, 1), got '{text}'"));
        }
        Ok(v)
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_str(&text, &path.display().to_string())
    }

    pub fn parse_str(text: &str, source_name: &str) -> Result<Self, ConfigError> {
        let mut config = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |reason: String| ConfigError::Parse {
                source_name: source_name.to_string(),
                line,
                reason,
            };
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got '{trimmed}'")))?;
            let key = key.trim();
            let value = value.trim();
            let parse_num = |what: &str| -> Result<f64, ConfigError> {
                value.parse::<f64>().map_err(|_| err(format!("bad {what} '{value}'")))
            };
            match key {
                "learning_rate" => {
                    let v = parse_num("learning_rate")?;
                    if v <= 0.0 {
                        return Err(err(format!("learning_rate must be > 0, got {v}")));
                    }
                    config.learning_rate = Some(v);
                }
                "epochs" => {
                    config.epochs = Some(value.parse().map_err(|_| err(format!("bad epochs '{value}'")))?)
                }
                "batch_size" => {
                    config.batch_size =
                        Some(value.parse().map_err(|_| err(format!("bad batch_size '{value}'")))?)
                }
                "early_stopping_patience" => {
                    config.early_stopping_patience = Some(
                        value
                            .parse()
                            .map_err(|_| err(format!("bad early_stopping_patience '{value}'")))?,
                    )
                }
                "optimizer" => {
                    if value != "adam" {
                        return Err(err(format!("unsupported optimizer '{value}' (only adam)")));
                    }
                    config.optimizer = Some(value.to_string());
                }
                "loss" => {
                    if value != "mse" {
                        return Err(err(format!("unsupported loss '{value}' (only mse)")));
                    }
                    config.loss = Some(value.to_string());
                }
                "split" => config.split = Some(parse_split(value).map_err(err)?),
                "seed" => config.seed = Some(value.parse().map_err(|_| err(format!("bad seed '{value}'")))?),
                "size" => config.size = Some(value.parse().map_err(|_| err(format!("bad size '{value}'")))?),
                "workers" => {
                    config.workers = Some(value.parse().map_err(|_| err(format!("bad workers '{value}'")))?)
                }
                other => return Err(err(format!("unknown key '{other}'"))),
            }
        }
        Ok(config)
    }

    /// Overlay the file values onto a preset.
    pub fn apply_to(&self, cfg: &mut TrainConfig) {
        if let Some(v) = self.learning_rate {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.epochs {
            cfg.max_epochs = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.early_stopping_patience {
            cfg.early_stop_patience = v;
        }
        if let Some(v) = self.split {
            cfg.train_fraction = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
    }
}

/// The fully-resolved `key = value` rendering logged by every run.
pub fn render_train_config(cfg: &TrainConfig, size: usize) -> String {
    let mut out = String::new();
    out.push_str(&format!("learning_rate = {}\n", cfg.learning_rate));
    out.push_str(&format!("epochs = {}\n", cfg.max_epochs));
    out.push_str(&format!("batch_size = {}\n", cfg.batch_size));
    out.push_str(&format!("early_stopping_patience = {}\n", cfg.early_stop_patience));
    out.push_str("optimizer = adam\n");
    out.push_str("loss = mse\n");
    out.push_str(&format!("split = {}\n", cfg.train_fraction));
    out.push_str(&format!("seed = {}\n", cfg.seed));
    out.push_str(&format!("size = {size}\n"));
    out
}
