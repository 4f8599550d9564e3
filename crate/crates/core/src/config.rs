//! Experiment configuration.
//!
//! A TOML document with one table per concern. Every key is optional and
//! defaults to the reference setup; unknown keys are rejected.
//!
//! ```toml
//! seed = 1
//! k_list = [4, 6, 8, 10]
//!
//! [training]
//! epochs = 500
//! seeds = [0, 1, 2]
//!
//! [training.augment]
//! prune_quantile = 0.25
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{GeometryParams, PathLossParams, SystemParams};
use crate::error::{Error, Result};
use crate::gnn::{AdamConfig, DEFAULT_LEAKY_SLOPE};
use crate::rate::DEFAULT_EXHAUSTIVE_CAP;
use crate::train::{AugmentConfig, RegimeKind, TrainingRegime};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub leaky_slope: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_dim: 1,
            hidden_dims: vec![64, 64, 64],
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub ssl_epochs: usize,
    pub tau: f64,
    pub seeds: Vec<u64>,
    pub augment: AugmentConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainingConfig {
            lr: adam.lr,
            adam_beta1: adam.beta1,
            adam_beta2: adam.beta2,
            adam_eps: adam.eps,
            batch_size: 32,
            epochs: 500,
            ssl_epochs: 100,
            tau: 0.1,
            seeds: vec![0, 1, 2],
            augment: AugmentConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub k_max_exhaustive: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            n_train: 256,
            n_test: 256,
            k_max_exhaustive: DEFAULT_EXHAUSTIVE_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub sample_sizes: Vec<usize>,
    pub sample_complexity_k: Vec<usize>,
    pub generalization_k_train: Vec<usize>,
    pub convergence_threshold: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            sample_sizes: vec![32, 64, 128, 256],
            sample_complexity_k: vec![4, 10],
            generalization_k_train: vec![4, 10],
            convergence_threshold: 0.8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub k_values: Vec<usize>,
    pub n_samples: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            k_values: (4..=10).collect(),
            n_samples: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed for dataset generation.
    pub seed: u64,
    pub out_dir: PathBuf,
    pub k_list: Vec<usize>,
    pub system: SystemParams,
    pub geometry: GeometryParams,
    pub path_loss: PathLossParams,
    pub model: ModelConfig,
    pub training: TrainingConfig,
    pub data: DataConfig,
    pub study: StudyConfig,
    pub bench: BenchConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            out_dir: PathBuf::from("out"),
            k_list: vec![4, 6, 8, 10],
            system: SystemParams::default(),
            geometry: GeometryParams::default(),
            path_loss: PathLossParams::default(),
            model: ModelConfig::default(),
            training: TrainingConfig::default(),
            data: DataConfig::default(),
            study: StudyConfig::default(),
            bench: BenchConfig::default(),
        }
    }
}

fn digest_of<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serialises");
    hex::encode(&Sha256::digest(&bytes)[..8])
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.geometry.validate()?;
        self.path_loss.validate()?;
        self.training.augment.validate()?;
        let t = &self.training;
        if t.batch_size == 0 || !(t.lr > 0.0) || !(t.tau > 0.0) {
            return Err(Error::Config("batch_size, lr and tau must be positive".into()));
        }
        if !(0.0..1.0).contains(&t.adam_beta1) || !(0.0..1.0).contains(&t.adam_beta2) || !(t.adam_eps > 0.0) {
            return Err(Error::Config("adam decays must lie in [0, 1) and eps be positive".into()));
        }
        if t.seeds.is_empty() {
            return Err(Error::Config("at least one training seed is required".into()));
        }
        if self.model.input_dim != 1 {
            return Err(Error::Config("graphs carry scalar node features; input_dim must be 1".into()));
        }
        if self.model.hidden_dims.is_empty() || self.model.hidden_dims.contains(&0) {
            return Err(Error::Config("hidden_dims must be non-empty and positive".into()));
        }
        if self.k_list.is_empty() || self.k_list.contains(&0) {
            return Err(Error::Config("k_list must be non-empty with positive sizes".into()));
        }
        if self.data.n_train == 0 || self.data.n_test == 0 {
            return Err(Error::Config("dataset sizes must be positive".into()));
        }
        if let Some(&n) = self.study.sample_sizes.iter().find(|&&n| n == 0 || n > self.data.n_train) {
            return Err(Error::Config(format!(
                "sample size {n} is outside 1..={}",
                self.data.n_train
            )));
        }
        Ok(())
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.model.input_dim];
        d.extend(&self.model.hidden_dims);
        d
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.training.lr,
            beta1: self.training.adam_beta1,
            beta2: self.training.adam_beta2,
            eps: self.training.adam_eps,
        }
    }

    pub fn regime(&self, kind: RegimeKind) -> TrainingRegime {
        TrainingRegime {
            kind,
            epochs: self.training.epochs,
            ssl_epochs: self.training.ssl_epochs,
            tau: self.training.tau,
            batch_size: self.training.batch_size,
            adam: self.adam(),
            augment: self.training.augment.clone(),
            dims: self.dims(),
            leaky_slope: self.model.leaky_slope,
        }
    }

    /// Digest of everything that determines dataset contents.
    pub fn data_digest(&self) -> String {
        digest_of(&(
            self.seed,
            &self.system,
            &self.geometry,
            &self.path_loss,
            self.data.n_train,
            self.data.n_test,
        ))
    }

    /// Digest of everything that determines a training run's outputs.
    pub fn run_digest(&self) -> String {
        digest_of(&(self.data_digest(), &self.model, &self.training))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_setup() {
        let c = ExperimentConfig::default();
        assert_eq!(c.system.p_max_dbm, 10.0);
        assert_eq!(c.system.bandwidth_hz, 1e7);
        assert_eq!(c.system.noise_psd_dbm_hz, -174.0);
        assert_eq!(c.geometry.area_side_m, 250.0);
        assert_eq!(c.geometry.min_tx_separation_m, 35.0);
        assert_eq!((c.geometry.ring_inner_m, c.geometry.ring_outer_m), (10.0, 50.0));
        assert_eq!(c.path_loss.shadowing_std_db, 7.0);
        assert_eq!(c.dims(), vec![1, 64, 64, 64]);
        assert_eq!(c.model.leaky_slope, 1e-2);
        assert_eq!(c.training.lr, 1e-2);
        assert_eq!(c.training.batch_size, 32);
        assert_eq!(c.training.epochs, 500);
        assert_eq!(c.training.ssl_epochs, 100);
        assert_eq!(c.training.tau, 0.1);
        assert_eq!(c.training.seeds.len(), 3);
        assert_eq!((c.training.augment.perturb_low, c.training.augment.perturb_high), (0.9, 1.1));
        assert_eq!((c.data.n_train, c.data.n_test), (256, 256));
        assert_eq!(c.k_list, vec![4, 6, 8, 10]);
        assert_eq!(c.study.convergence_threshold, 0.8);
    }

    #[test]
    fn toml_round_trip() {
        let c = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_document_uses_defaults() {
        let c = ExperimentConfig::from_toml(
            "# small run\nseed = 7\n[training]\nepochs = 3\n[training.augment]\nprune = false\n",
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.training.epochs, 3);
        assert!(!c.training.augment.prune);
        assert_eq!(c.training.batch_size, 32);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for doc in ["sede = 3", "[training]\nepoch = 3", "[training.augment]\nquantile = 0.1", "[bogus]\nx = 1"] {
            match ExperimentConfig::from_toml(doc) {
                Err(Error::Config(_)) => {}
                other => panic!("{doc:?} accepted: {other:?}"),
            }
        }
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(ExperimentConfig::from_toml("[training]\ntau = 0.0").is_err());
        assert!(ExperimentConfig::from_toml("[system]\nbandwidth_hz = -1.0").is_err());
        assert!(ExperimentConfig::from_toml("[study]\nsample_sizes = [512]").is_err());
        assert!(ExperimentConfig::from_toml("[geometry]\nring_inner_m = 60.0").is_err());
    }

    #[test]
    fn digests_track_relevant_fields() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.training.epochs = 10;
        assert_eq!(a.data_digest(), b.data_digest());
        assert_ne!(a.run_digest(), b.run_digest());
        b.seed = 99;
        assert_ne!(a.data_digest(), b.data_digest());
        let mut c = a.clone();
        c.out_dir = PathBuf::from("elsewhere");
        assert_eq!(a.run_digest(), c.run_digest());
        assert_eq!(a.data_digest().len(), 16);
    }
}
