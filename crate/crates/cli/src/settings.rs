//! Flat key-value run settings. A config file supplies values, flags
//! override them, and defaults fill the rest.

use std::path::Path;

use anyhow::{Context, Result};
use clap::Args;
use molgen_core::chemstats::ReportConfig;
use molgen_core::genpipe::{SampleConfig, TrainConfig};
use serde::{Deserialize, Serialize};

/// Reads a flat TOML document. Keys use the flag spelling (`seq-len`);
/// keys a command does not use are ignored.
pub fn load<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("bad config {}", path.display()))
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($field:ident),+) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )+
    };
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct TrainKnobs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub seq_len: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr_start: Option<f64>,
    #[arg(long)]
    pub lr_end: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(skip)]
    pub units1: Option<usize>,
    #[arg(skip)]
    pub units2: Option<usize>,
    /// Zero disables clipping.
    #[arg(skip)]
    pub clip_norm: Option<f64>,
}

impl TrainKnobs {
    pub fn resolve(mut self, flags: &TrainKnobs) -> TrainConfig {
        overlay!(self, flags, seed, seq_len, stride, epochs, batch_size, lr_start, lr_end, dropout);
        let d = TrainConfig::default();
        TrainConfig {
            seq_len: self.seq_len.unwrap_or(d.seq_len),
            stride: self.stride.unwrap_or(d.stride),
            epochs: self.epochs.unwrap_or(d.epochs),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            lr_start: self.lr_start.unwrap_or(d.lr_start),
            lr_end: self.lr_end.unwrap_or(d.lr_end),
            seed: self.seed.unwrap_or(d.seed),
            dropout_rate: self.dropout.unwrap_or(d.dropout_rate),
            units1: self.units1.unwrap_or(d.units1),
            units2: self.units2.unwrap_or(d.units2),
            clip_norm: match self.clip_norm {
                Some(0.0) => None,
                Some(c) => Some(c),
                None => d.clip_norm,
            },
        }
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct SampleKnobs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub seq_len: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(skip)]
    pub prompt: Option<String>,
}

impl SampleKnobs {
    pub fn resolve(mut self, flags: &SampleKnobs) -> (SampleConfig, usize) {
        overlay!(self, flags, seed, temperature, count, max_len, seq_len, workers);
        let d = SampleConfig::default();
        let cfg = SampleConfig {
            temperature: self.temperature.unwrap_or(d.temperature),
            max_len: self.max_len.unwrap_or(d.max_len),
            seed: self.seed.unwrap_or(d.seed),
            count: self.count.unwrap_or(d.count),
            seq_len: self.seq_len.unwrap_or(d.seq_len),
            prompt: self.prompt.unwrap_or(d.prompt),
        };
        (cfg, self.workers.unwrap_or(1))
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct BaselineKnobs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub count: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaselineConfig {
    pub seed: u64,
    pub count: usize,
}

impl BaselineKnobs {
    pub fn resolve(mut self, flags: &BaselineKnobs) -> BaselineConfig {
        overlay!(self, flags, seed, count);
        BaselineConfig {
            seed: self.seed.unwrap_or(0),
            count: self.count.unwrap_or(1000),
        }
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct ReportKnobs {
    #[arg(long)]
    pub radius: Option<usize>,
    #[arg(long)]
    pub nbits: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub workers: Option<usize>,
}

impl ReportKnobs {
    pub fn resolve(mut self, flags: &ReportKnobs) -> ReportConfig {
        overlay!(self, flags, radius, nbits, alpha, workers);
        let d = ReportConfig::default();
        ReportConfig {
            radius: self.radius.unwrap_or(d.radius),
            nbits: self.nbits.unwrap_or(d.nbits),
            alpha: self.alpha.unwrap_or(d.alpha),
            workers: self.workers.unwrap_or(d.workers),
        }
    }
}
