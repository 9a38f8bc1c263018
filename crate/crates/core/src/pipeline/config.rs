//! Experiment configuration: a flat, versioned TOML file.
//!
//! Every key is optional and falls back to the Branin protocol defaults.
//! Unknown keys are rejected.
//!
//! ```toml
//! version = 1
//! task = "branin"            # branin | sphere
//! n_samples = 5000
//! trim_fraction = 0.1
//! horizon = 64
//! context_len = 32
//! alpha = 0.8
//! seeds = [0, 1, 2]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::denoiser::{DenoiserArch, TrainConfig};
use crate::diffusion::ScheduleKind;
use crate::nn::Precision;
use crate::proxy::ProxyArch;
use crate::tasks::{BoundsPolicy, Corruption};
use crate::trajectory::ConstructionConfig;
use crate::{Error, Result};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TargetMode {
    /// Normalized known optimum of the oracle.
    #[default]
    Known,
    /// `gamma` times the normalized dataset maximum.
    Gamma,
}

impl std::str::FromStr for TargetMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "known" => Ok(Self::Known),
            "gamma" => Ok(Self::Gamma),
            other => Err(Error::Config(format!("unknown target mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,

    // data
    pub task: String,
    /// Design dimension; only used by `sphere`.
    pub dim: usize,
    /// Load this CSV/JSON file instead of sampling the task box.
    pub dataset_path: Option<PathBuf>,
    pub n_samples: usize,
    pub trim_fraction: f64,
    pub corruption: Option<Corruption>,
    pub corruption_level: f64,

    // trajectory construction
    pub percentile: f64,
    pub horizon: usize,
    pub n_trajectories: usize,
    pub knn_k: usize,
    /// In normalized-score units.
    pub epsilon: f64,

    // diffusion
    pub diffusion_steps: usize,
    pub schedule: ScheduleKind,
    pub omega: f64,
    /// Bound on the implied clean estimate while sampling; 0 disables clipping.
    pub clip_x0: f64,
    pub precision: Precision,

    // denoiser
    pub den_hidden: usize,
    pub den_blocks: usize,
    pub den_time_dim: usize,
    pub den_batch: usize,
    pub den_lr: f64,
    pub den_steps: usize,
    pub cond_dropout: f64,
    pub den_ema: Option<f64>,

    // proxy
    pub proxy_hidden: usize,
    pub proxy_layers: usize,
    pub proxy_batch: usize,
    pub proxy_lr: f64,
    pub proxy_steps: usize,
    pub rank_k: f64,

    // sampling and selection
    pub n_generated: usize,
    pub context_len: usize,
    pub alpha: f64,
    pub target_mode: TargetMode,
    pub gamma: f64,
    pub q: usize,
    pub bounds: BoundsPolicy,

    pub log_interval: usize,
    pub seeds: Vec<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            task: "branin".into(),
            dim: 2,
            dataset_path: None,
            n_samples: 5000,
            trim_fraction: 0.1,
            corruption: None,
            corruption_level: 1.0,
            percentile: 20.0,
            horizon: 64,
            n_trajectories: 400,
            knn_k: 20,
            epsilon: 0.01,
            diffusion_steps: 200,
            schedule: ScheduleKind::Cosine,
            omega: 1.2,
            clip_x0: 1.0,
            precision: Precision::F32,
            den_hidden: 128,
            den_blocks: 2,
            den_time_dim: 32,
            den_batch: 64,
            den_lr: 1e-3,
            den_steps: 5000,
            cond_dropout: 0.25,
            den_ema: None,
            proxy_hidden: 1024,
            proxy_layers: 2,
            proxy_batch: 128,
            proxy_lr: 1e-3,
            proxy_steps: 5000,
            rank_k: crate::proxy::DEFAULT_RANK_K,
            n_generated: 4,
            context_len: 32,
            alpha: 0.8,
            target_mode: TargetMode::Known,
            gamma: 1.0,
            q: 128,
            bounds: BoundsPolicy::Clamp,
            log_interval: 100,
            seeds: vec![0, 1, 2],
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 over the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Designs available for selection per seed.
    pub fn harvested_per_seed(&self) -> usize {
        self.n_generated * self.horizon.saturating_sub(self.context_len)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.version != CONFIG_VERSION {
            return bad(format!("unsupported config version {} (expected {CONFIG_VERSION})", self.version));
        }
        crate::tasks::oracle_by_name(&self.task, self.dim)?;
        if self.dataset_path.is_none() && self.n_samples < 10 {
            return bad("n_samples must be >= 10".into());
        }
        if !(0.0..1.0).contains(&self.trim_fraction) {
            return bad("trim_fraction must be in [0, 1)".into());
        }
        if self.corruption.is_some() && !(self.corruption_level > 0.0 && self.corruption_level <= 1.0) {
            return bad("corruption_level must be in (0, 1]".into());
        }
        if self.context_len >= self.horizon {
            return bad(format!(
                "context_len ({}) must be smaller than horizon ({})",
                self.context_len, self.horizon
            ));
        }
        if self.n_generated < 1 {
            return bad("n_generated must be >= 1".into());
        }
        if self.q < 1 || self.q > self.harvested_per_seed() {
            return bad(format!(
                "q = {} must be in [1, n_generated * (horizon - context_len)] = [1, {}]",
                self.q,
                self.harvested_per_seed()
            ));
        }
        if self.diffusion_steps < 1 {
            return bad("diffusion_steps must be >= 1".into());
        }
        if self.omega.is_nan() || self.omega < 0.0 {
            return bad("omega must be >= 0".into());
        }
        if !(self.clip_x0 >= 0.0) {
            return bad("clip_x0 must be >= 0".into());
        }
        if !self.alpha.is_finite() {
            return bad("alpha must be finite".into());
        }
        if self.target_mode == TargetMode::Gamma && !(self.gamma > 0.0) {
            return bad("gamma must be > 0".into());
        }
        if !(self.rank_k > 0.0) {
            return bad("rank_k must be > 0".into());
        }
        if self.proxy_layers < 1 || self.proxy_hidden < 1 {
            return bad("proxy needs at least one hidden layer".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        let wrap = |e: Error| Error::Config(e.to_string());
        self.construction().validate().map_err(wrap)?;
        self.denoiser_arch(self.dim).validate().map_err(wrap)?;
        self.denoiser_train(0).validate().map_err(wrap)?;
        self.proxy_train(0).validate().map_err(wrap)?;
        Ok(())
    }

    pub fn construction(&self) -> ConstructionConfig {
        ConstructionConfig {
            percentile: self.percentile,
            horizon: self.horizon,
            count: self.n_trajectories,
            k: self.knn_k,
            epsilon: self.epsilon,
        }
    }

    pub fn denoiser_arch(&self, design_dim: usize) -> DenoiserArch {
        DenoiserArch {
            horizon: self.horizon,
            channels: design_dim + 1,
            hidden: self.den_hidden,
            blocks: self.den_blocks,
            time_dim: self.den_time_dim,
            cond_scale: self.horizon as f64,
            max_timestep: self.diffusion_steps,
        }
    }

    pub fn denoiser_train(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            batch_size: self.den_batch,
            learning_rate: self.den_lr,
            train_steps: self.den_steps,
            dropout_p: self.cond_dropout,
            seed,
            ema_decay: self.den_ema,
            log_interval: self.log_interval,
        }
    }

    pub fn proxy_arch(&self, design_dim: usize) -> ProxyArch {
        ProxyArch {
            input_dim: design_dim,
            hidden: self.proxy_hidden,
            layers: self.proxy_layers,
        }
    }

    pub fn proxy_train(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            batch_size: self.proxy_batch,
            learning_rate: self.proxy_lr,
            train_steps: self.proxy_steps,
            dropout_p: 0.0,
            seed,
            ema_decay: None,
            log_interval: self.log_interval,
        }
    }

    pub fn clip(&self) -> Option<f64> {
        (self.clip_x0 > 0.0).then_some(self.clip_x0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml_string().unwrap();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(ExperimentConfig::from_toml_str("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ExperimentConfig::from_toml_str("horizn = 3").is_err());
        assert!(ExperimentConfig::from_toml_str("version = 2").is_err());
        assert!(ExperimentConfig::from_toml_str("context_len = 64").is_err());
        // 4 * (64 - 32) = 128 harvested designs.
        assert!(ExperimentConfig::from_toml_str("q = 129").is_err());
        assert!(ExperimentConfig::from_toml_str("q = 128").is_ok());
        assert!(ExperimentConfig::from_toml_str("task = \"tfbind\"").is_err());
        assert!(ExperimentConfig::from_toml_str("target_mode = \"gamma\"\ngamma = 0.0").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.alpha = 0.2;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
