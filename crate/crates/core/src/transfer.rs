//! Label-vector transfer classification: recognizer outputs become label
//! sets, compared by Jaccard similarity and classified by k-NN vote.
//!
//! Recognizer files are JSON Lines, one record per image:
//!
//! ```json
//! {"v":1,"id":"er_12_32","labels":[["window screen",0.29],["digital clock",0.07]]}
//! ```
//!
//! `labels` holds up to 10 `[label, probability]` pairs sorted by
//! descending probability; label strings use JSON escaping. Image ids follow
//! `{class}_{sample_index}_{n}` and join to ground truth through the dataset
//! index.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ordering::StructuredImage;
use crate::rng::{derived_rng, uniform_index};
use crate::sampler::{parse_image_id, DatasetIndex};

pub const RECORD_VERSION: u32 = 1;
pub const MAX_LABELS: usize = 10;
pub const DEFAULT_K: usize = 15;
/// Tiles per image side in the stub recognizer.
pub const STUB_GRID: usize = 4;
/// Density buckets in the stub recognizer.
pub const STUB_BUCKETS: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelVector {
    pub labels: BTreeSet<String>,
    pub ground_truth: Option<usize>,
}

impl LabelVector {
    pub fn new<I, S>(labels: I, ground_truth: Option<usize>) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: BTreeSet<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::param("label vector is empty"));
        }
        if labels.len() > MAX_LABELS {
            return Err(Error::param(format!(
                "label vector has {} labels (max {MAX_LABELS})",
                labels.len()
            )));
        }
        Ok(LabelVector {
            labels,
            ground_truth,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecognizerRecord {
    #[serde(rename = "v")]
    pub version: u32,
    #[serde(rename = "id")]
    pub image_id: String,
    pub labels: Vec<(String, f64)>,
}

impl RecognizerRecord {
    pub fn new(image_id: impl Into<String>, labels: Vec<(String, f64)>) -> Result<Self> {
        let record = RecognizerRecord {
            version: RECORD_VERSION,
            image_id: image_id.into(),
            labels,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Error::schema(&self.image_id, m);
        if self.version != RECORD_VERSION {
            return Err(bad(format!("unsupported record version {}", self.version)));
        }
        if self.labels.is_empty() {
            return Err(bad("record has no labels".into()));
        }
        if self.labels.len() > MAX_LABELS {
            return Err(bad(format!("{} labels (max {MAX_LABELS})", self.labels.len())));
        }
        for (label, p) in &self.labels {
            if label.is_empty() {
                return Err(bad("empty label string".into()));
            }
            if !(0.0..=1.0).contains(p) {
                return Err(bad(format!("probability {p} outside [0, 1]")));
            }
        }
        if self.labels.windows(2).any(|w| w[0].1 < w[1].1) {
            return Err(bad("probabilities are not descending".into()));
        }
        Ok(())
    }

    /// Label set with probabilities dropped.
    pub fn label_vector(&self, ground_truth: Option<usize>) -> Result<LabelVector> {
        LabelVector::new(self.labels.iter().map(|(l, _)| l.clone()), ground_truth)
    }
}

/// Reads JSON Lines records; blank lines and `#` comment lines are skipped.
pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<RecognizerRecord>> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let record: RecognizerRecord = serde_json::from_str(&line).map_err(|e| {
            Error::schema(format!("line {}", i + 1), e.to_string())
        })?;
        record.validate()?;
        records.push(record);
    }
    Ok(records)
}

pub fn write_records<W: Write>(records: &[RecognizerRecord], mut out: W) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads recognizer records as label vectors. With an index, ground truth
/// comes from the class named in each image id.
pub fn load_label_vectors<R: BufRead>(
    reader: R,
    index: Option<&DatasetIndex>,
) -> Result<Vec<(String, LabelVector)>> {
    read_records(reader)?
        .into_iter()
        .map(|record| {
            let truth = match index {
                None => None,
                Some(index) => {
                    let (class, _, _) = parse_image_id(&record.image_id).ok_or_else(|| {
                        Error::schema(&record.image_id, "image id is not {class}_{index}_{n}")
                    })?;
                    Some(index.class_id(class).ok_or_else(|| {
                        Error::schema(&record.image_id, format!("unknown class {class:?}"))
                    })?)
                }
            };
            let vector = record.label_vector(truth)?;
            Ok((record.image_id, vector))
        })
        .collect()
}

pub fn jaccard_similarity(a: &LabelVector, b: &LabelVector) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::param("jaccard similarity of an empty label vector"));
    }
    let common = a.labels.intersection(&b.labels).count();
    let union = a.len() + b.len() - common;
    Ok(common as f64 / union as f64)
}

/// Majority class among the `k` most similar training vectors. Similarity
/// ties at the boundary go to the earlier training vector; vote ties are
/// broken uniformly at random.
pub fn knn_classify<R: rand::Rng + ?Sized>(
    train: &[LabelVector],
    test: &LabelVector,
    k: usize,
    rng: &mut R,
) -> Result<usize> {
    if train.is_empty() {
        return Err(Error::param("empty training set"));
    }
    if k == 0 || k > train.len() {
        return Err(Error::param(format!(
            "k = {k} must be between 1 and the training size {}",
            train.len()
        )));
    }
    let mut scored = train
        .iter()
        .enumerate()
        .map(|(i, t)| Ok((jaccard_similarity(t, test)?, i)))
        .collect::<Result<Vec<(f64, usize)>>>()?;
    // stable: equal similarities keep training order
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
    for &(_, i) in &scored[..k] {
        let class = train[i]
            .ground_truth
            .ok_or_else(|| Error::param(format!("training vector {i} has no ground truth")))?;
        *votes.entry(class).or_insert(0) += 1;
    }
    let top = *votes.values().max().expect("k >= 1");
    let leaders: Vec<usize> = votes
        .into_iter()
        .filter(|&(_, v)| v == top)
        .map(|(c, _)| c)
        .collect();
    Ok(if leaders.len() == 1 {
        leaders[0]
    } else {
        leaders[uniform_index(rng, leaders.len())]
    })
}

/// Classifies many test vectors in parallel; test `i` draws its tie-breaks
/// from a stream derived from `(seed, i)`.
pub fn knn_classify_batch(
    train: &[LabelVector],
    tests: &[LabelVector],
    k: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    tests
        .par_iter()
        .enumerate()
        .map(|(i, t)| knn_classify(train, t, k, &mut derived_rng(seed, 0x6b6e6e, i as u64)))
        .collect()
}

/// Deterministic offline recognizer. The image is cut into a 4x4 grid of
/// tiles; each tile's black-pixel density is bucketed, and the ten densest
/// tiles (ties by tile index) become labels `t{tile}_d{bucket}` with
/// synthetic descending probabilities.
pub fn stub_recognizer(image_id: &str, image: &StructuredImage) -> RecognizerRecord {
    let side = image.side();
    let bounds = |t: usize| (t * side / STUB_GRID, (t + 1) * side / STUB_GRID);
    let mut tiles: Vec<(f64, usize)> = (0..STUB_GRID * STUB_GRID)
        .map(|t| {
            let (r0, r1) = bounds(t / STUB_GRID);
            let (c0, c1) = bounds(t % STUB_GRID);
            let area = (r1 - r0) * (c1 - c0);
            let black = (r0..r1)
                .flat_map(|i| (c0..c1).map(move |j| (i, j)))
                .filter(|&(i, j)| image.get(i, j))
                .count();
            let density = if area == 0 { 0.0 } else { black as f64 / area as f64 };
            (density, t)
        })
        .collect();
    tiles.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let total: f64 = (1..=MAX_LABELS).map(|r| r as f64).sum();
    let labels = tiles
        .iter()
        .take(MAX_LABELS)
        .enumerate()
        .map(|(rank, &(density, t))| {
            // bucket 0 only for empty tiles, the top bucket only for full ones
            let bucket = (density * (STUB_BUCKETS - 1) as f64).ceil() as usize;
            (
                format!("t{t}_d{bucket}"),
                (MAX_LABELS - rank) as f64 / total,
            )
        })
        .collect();
    RecognizerRecord {
        version: RECORD_VERSION,
        image_id: image_id.to_string(),
        labels,
    }
}

/// Random subset of `fraction` of the indices (at least one, at most all but
/// one), returned with its complement; both sorted.
pub fn split_fraction(len: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::param(format!("training fraction {fraction} must lie in (0, 1)")));
    }
    if len < 2 {
        return Err(Error::param("need at least two vectors to split"));
    }
    let mut rng = derived_rng(seed, 0x7472, 0);
    let mut indices: Vec<usize> = (0..len).collect();
    // partial Fisher-Yates
    let take = ((len as f64 * fraction).round() as usize).clamp(1, len - 1);
    for i in 0..take {
        let j = rng.random_range(i..len);
        indices.swap(i, j);
    }
    let mut train = indices[..take].to_vec();
    let mut test = indices[take..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}
