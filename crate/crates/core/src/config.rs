//! Experiment configuration file (TOML).
//!
//! ```toml
//! seed = 7
//! variant = "full-s"
//! world_path = "world.json"
//! profiles_path = "profiles.json"
//! out_dir = "run"
//!
//! [profiles]
//! count = 300
//! split = [200, 50, 50]
//!
//! [train]
//! sl_epochs = 20
//! rl_epochs = 100
//!
//! [train.optim]
//! kind = "adam"
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::kg::WorldGenConfig;
use crate::policy::Variant;
use crate::rng;
use crate::training::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileGenConfig {
    pub count: usize,
    /// Train, dev and test sizes.
    pub split: [usize; 3],
}

impl Default for ProfileGenConfig {
    fn default() -> Self {
        ProfileGenConfig { count: 300, split: [200, 50, 50] }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Passes over the test split; the training config's `eval_repeats` when absent.
    pub repeats: Option<usize>,
    /// Derived from the experiment seed when absent.
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub bind: String,
    pub idle_timeout_secs: u64,
    pub max_sessions: usize,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig { bind: "127.0.0.1:8080".into(), idle_timeout_secs: 900, max_sessions: 1024 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub variant: Variant,
    pub world_path: PathBuf,
    pub profiles_path: PathBuf,
    pub out_dir: PathBuf,
    pub world: WorldGenConfig,
    pub profiles: ProfileGenConfig,
    pub train: TrainConfig,
    pub eval: EvalSection,
    pub serve: ServeConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 7,
            variant: Variant::FullS,
            world_path: "world.json".into(),
            profiles_path: "profiles.json".into(),
            out_dir: "run".into(),
            world: WorldGenConfig::default(),
            profiles: ProfileGenConfig::default(),
            train: TrainConfig::default(),
            eval: EvalSection::default(),
            serve: ServeConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Invalid(e.to_string()))
    }

    /// Reads, validates and resolves paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| Error::parse(path, e))?;
        cfg.check().map_err(|e| Error::parse(path, e))?;
        if let Some(dir) = path.parent() {
            for p in [&mut cfg.world_path, &mut cfg.profiles_path, &mut cfg.out_dir] {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        let [a, b, c] = self.profiles.split;
        if a + b + c > self.profiles.count {
            return Err(Error::Invalid(format!("split {a}/{b}/{c} exceeds {} profiles", self.profiles.count)));
        }
        if self.eval.repeats == Some(0) {
            return Err(Error::Invalid("eval.repeats must be positive".into()));
        }
        self.train.check()
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            repeats: self.eval.repeats.unwrap_or(self.train.eval_repeats),
            seed: self.eval.seed.unwrap_or_else(|| rng::derive(self.seed, &[3])),
            limits: self.train.limits,
            sim: self.train.sim.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn sparse_file_fills_defaults() {
        let cfg = ExperimentConfig::from_toml("variant = \"mp-s\"\n[train]\nrl_epochs = 5\n").unwrap();
        assert_eq!(cfg.variant, Variant::MpS);
        assert_eq!(cfg.train.rl_epochs, 5);
        assert_eq!(cfg.train.sl_epochs, 20);
        assert_eq!(cfg.train.batch_applicants, 32);
        assert_eq!(cfg.train.rewards.gamma_w, 0.99);
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("exp.toml");
        std::fs::write(&p, "[train]\nlearning_rate = 3\n").unwrap();
        let err = ExperimentConfig::load(&p).unwrap_err().to_string();
        assert!(err.contains("exp.toml") && err.contains("learning_rate"), "{err}");
    }

    #[test]
    fn relative_paths_resolve_next_to_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("exp.toml");
        std::fs::write(&p, "world_path = \"w.json\"\n").unwrap();
        let cfg = ExperimentConfig::load(&p).unwrap();
        assert_eq!(cfg.world_path, dir.path().join("w.json"));
    }

    #[test]
    fn oversized_split_is_rejected() {
        let cfg = ExperimentConfig { profiles: ProfileGenConfig { count: 10, split: [8, 2, 1] }, ..Default::default() };
        assert!(cfg.check().is_err());
    }
}
