//! Output directory layout and provenance-stamped, atomic file writes.
//!
//! ```text
//! dataset.txt        sampled subgraphs          (sample)
//! index.json         class table + sample spec  (sample)
//! images/*.pgm       structured images          (embed, representation image)
//! random_images/*.pgm                           (embed, representation random_image)
//! features.csv       classical features         (featurize)
//! model.bin          trained model              (train)
//! metrics.csv, confusion.csv                    (eval)
//! records.jsonl, transfer_metrics.csv, transfer_confusion.csv   (transfer)
//! pca/<class>.pgm, pca/summary.json             (pca)
//! sweep_<experiment>.csv                        (sweep)
//! ```

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use netsig_core::learn::Representation;
use netsig_core::sampler::{read_dataset, DatasetIndex, LabeledSample};

use crate::config::RunConfig;
use crate::error::CliError;

/// Config hash and master seed of the run that wrote an artifact.
#[derive(Clone, Debug)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn of(config: &RunConfig) -> Result<Self, CliError> {
        Ok(Provenance {
            config_hash: config.hash()?,
            seed: config.seed,
        })
    }

    pub fn comment(&self) -> String {
        format!("# config_hash={} seed={}", self.config_hash, self.seed)
    }

    /// `text` with the comment line inserted after its first line.
    pub fn stamp_after_header(&self, text: &str) -> String {
        match text.split_once('\n') {
            Some((head, rest)) => format!("{head}\n{}\n{rest}", self.comment()),
            None => format!("{text}\n{}\n", self.comment()),
        }
    }

    /// `text` with the comment line in front.
    pub fn stamp_front(&self, text: &[u8]) -> Vec<u8> {
        let mut out = format!("{}\n", self.comment()).into_bytes();
        out.extend_from_slice(text);
        out
    }

    /// PGM bytes with the comment placed after the magic number.
    pub fn stamp_pgm(&self, pgm: &[u8]) -> Vec<u8> {
        let mut out = pgm[..3].to_vec();
        out.extend_from_slice(self.comment().as_bytes());
        out.push(b'\n');
        out.extend_from_slice(&pgm[3..]);
        out
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| e.error)?;
    log::debug!("wrote {}", path.display());
    Ok(())
}

pub fn read_input(path: &Path, what: &str) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::missing(format!("{what} {} (run the upstream command first)", path.display()))
        } else {
            e.into()
        }
    })
}

pub fn dataset_path(out: &Path) -> PathBuf {
    out.join("dataset.txt")
}

pub fn index_path(out: &Path) -> PathBuf {
    out.join("index.json")
}

pub fn features_path(out: &Path) -> PathBuf {
    out.join("features.csv")
}

pub fn model_path(out: &Path) -> PathBuf {
    out.join("model.bin")
}

pub fn image_dir(out: &Path, representation: Representation) -> Result<PathBuf, CliError> {
    match representation {
        Representation::Image => Ok(out.join("images")),
        Representation::RandomImage => Ok(out.join("random_images")),
        other => Err(CliError::Config(format!("{other} is not an image representation"))),
    }
}

/// Reads `dataset.txt` and `index.json` and checks they agree.
pub fn load_dataset(out: &Path) -> Result<(Vec<LabeledSample>, DatasetIndex), CliError> {
    let index: DatasetIndex = serde_json::from_slice(&read_input(&index_path(out), "dataset index")?)
        .map_err(|e| CliError::Schema(format!("index.json: {e}")))?;
    let bytes = read_input(&dataset_path(out), "dataset")?;
    let samples = read_dataset(BufReader::new(bytes.as_slice()))?;
    if samples.len() != index.records {
        return Err(CliError::Schema(format!(
            "index lists {} records, dataset has {}",
            index.records,
            samples.len()
        )));
    }
    if let Some(bad) = samples.iter().find(|s| s.class_id >= index.classes.len()) {
        return Err(CliError::Schema(format!("class id {} outside the index", bad.class_id)));
    }
    Ok((samples, index))
}
