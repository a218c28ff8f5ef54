use std::fs;
use std::path::{Path, PathBuf};

use netsig_core::eval::{Seeds, DEFAULT_WL_DEPTH};
use netsig_core::learn::{Learner, Representation, TrainConfig};
use netsig_core::manifest::{ClassGraph, DatasetManifest};
use netsig_core::transfer::DEFAULT_K;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const DEFAULT_OUT: &str = "netsig-out";

/// Everything a command needs. Read from `--config` (JSON), then overridden
/// by flags. Relative paths in a config file resolve against its directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    /// Restricts the manifest to these class names.
    pub classes: Option<Vec<String>>,
    pub n: usize,
    pub samples_per_class: usize,
    pub representation: Representation,
    pub learner: Learner,
    pub seed: u64,
    pub k: usize,
    pub fraction: f64,
    /// Sweep selector: size, representation, k, fraction or hybrid.
    pub experiment: String,
    /// Recognizer output to use instead of the built-in stub.
    pub records: Option<PathBuf>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub wl_depth: usize,
    /// Pixel upscaling of written images.
    pub scale: usize,
    /// Not part of the config hash: the same run may target any directory.
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        RunConfig {
            manifest: None,
            classes: None,
            n: 16,
            samples_per_class: 100,
            representation: Representation::Image,
            learner: Learner::Linear,
            seed: 0,
            k: DEFAULT_K,
            fraction: 0.5,
            experiment: "size".into(),
            records: None,
            epochs: train.epochs,
            learning_rate: train.learning_rate,
            wl_depth: DEFAULT_WL_DEPTH,
            scale: 1,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::missing(format!("config {}: {e}", path.display())))?;
        let mut config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Schema(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for path in [&mut config.manifest, &mut config.records, &mut config.out]
            .into_iter()
            .flatten()
        {
            resolve(path);
        }
        Ok(config)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    pub fn seeds(&self) -> Seeds {
        Seeds::from_master(self.seed)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            seed: self.seeds().train,
            ..TrainConfig::default()
        }
    }

    /// SHA-256 over the config (paths excluded) and the bytes of the
    /// referenced manifest and records, so moving files keeps the hash.
    pub fn hash(&self) -> Result<String, CliError> {
        let mut hasher = Sha256::new();
        let mut bare = self.clone();
        bare.manifest = None;
        bare.records = None;
        hasher.update(serde_json::to_vec(&bare).map_err(|e| CliError::Schema(e.to_string()))?);
        for path in [&self.manifest, &self.records].into_iter().flatten() {
            hasher.update(path_bytes(path)?);
        }
        Ok(hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect())
    }

    pub fn load_manifest(&self) -> Result<DatasetManifest, CliError> {
        let path = self
            .manifest
            .as_ref()
            .ok_or_else(|| CliError::Config("no manifest given (--manifest or config)".into()))?;
        if !path.exists() {
            return Err(CliError::missing(format!("manifest {}", path.display())));
        }
        let mut manifest = DatasetManifest::load(path)?;
        if let Some(wanted) = &self.classes {
            if let Some(unknown) = wanted.iter().find(|w| !manifest.classes.iter().any(|c| &c.name == *w)) {
                return Err(CliError::Config(format!("class {unknown:?} is not in the manifest")));
            }
            manifest.classes.retain(|c| wanted.contains(&c.name));
            manifest.validate()?;
        }
        Ok(manifest)
    }

    pub fn load_classes(&self) -> Result<Vec<ClassGraph>, CliError> {
        Ok(self.load_manifest()?.load_graphs()?)
    }
}

fn path_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::missing(format!("{}: {e}", path.display())))
}
