//! Splits, confusion matrices, metrics and the experiment runners.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{classical_features, wl_features, WlDictionary, WlVocabulary};
use crate::learn::{train, Dataset, Learner, Model, Representation, TrainConfig};
use crate::manifest::ClassGraph;
use crate::ordering::{embed_image, random_ordering, structured_image, StructuredImage};
use crate::rng::{derive_seed, derived_rng, rng_from_seed, shuffle};
use crate::sampler::{build_dataset, sample_class, LabeledSample, SampleSpec};
use crate::transfer::{knn_classify_batch, split_fraction, stub_recognizer, LabelVector, DEFAULT_K};

/// Entry `(i, j)` counts samples of true class `i` predicted as `j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; classes]; classes],
        }
    }

    pub fn from_rows(rows: Vec<Vec<u64>>) -> Result<Self> {
        let c = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != c) {
            return Err(Error::DimensionMismatch {
                expected: c,
                actual: bad.len(),
            });
        }
        Ok(ConfusionMatrix { counts: rows })
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn column_sum(&self, class: usize) -> u64 {
        self.counts.iter().map(|r| r[class]).sum()
    }

    /// Relabels classes: old class `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let c = self.classes();
        let mut seen = vec![false; c];
        if perm.len() != c || perm.iter().any(|&p| p >= c || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::param("class permutation is not a bijection"));
        }
        let mut out = ConfusionMatrix::new(c);
        for i in 0..c {
            for j in 0..c {
                out.counts[perm[i]][perm[j]] = self.counts[i][j];
            }
        }
        Ok(out)
    }

    /// CSV with a `true\pred` header of class names and one row per true
    /// class.
    pub fn write_csv<W: Write>(&self, names: &[String], out: W) -> Result<()> {
        if names.len() != self.classes() {
            return Err(Error::DimensionMismatch {
                expected: self.classes(),
                actual: names.len(),
            });
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["true\\pred".to_string()];
        header.extend(names.iter().cloned());
        w.write_record(&header)?;
        for (name, row) in names.iter().zip(&self.counts) {
            let mut record = vec![name.clone()];
            record.extend(row.iter().map(u64::to_string));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format of [`ConfusionMatrix::write_csv`]; returns the class
    /// names too. Lines starting with `#` are skipped.
    pub fn read_csv<R: Read>(input: R) -> Result<(Vec<String>, ConfusionMatrix)> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let names: Vec<String> = r.headers()?.iter().skip(1).map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, record) in r.records().enumerate() {
            let record = record?;
            let row = record
                .iter()
                .skip(1)
                .map(|x| {
                    x.trim().parse::<u64>().map_err(|_| {
                        Error::schema(format!("row {}", i + 1), format!("bad count {x:?}"))
                    })
                })
                .collect::<Result<Vec<u64>>>()?;
            rows.push(row);
        }
        if rows.len() != names.len() {
            return Err(Error::schema("confusion matrix", "row count differs from header"));
        }
        Ok((names, ConfusionMatrix::from_rows(rows)?))
    }
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::param("accuracy of an empty confusion matrix"));
    }
    Ok(cm.trace() as f64 / total as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// A denominator was zero and the affected value was set to 0.
    pub degenerate: bool,
}

pub fn precision_recall_f1(cm: &ConfusionMatrix, class: usize) -> Result<ClassMetrics> {
    if class >= cm.classes() {
        return Err(Error::param(format!("class {class} out of range")));
    }
    let hit = cm.counts[class][class] as f64;
    let predicted = cm.column_sum(class);
    let actual = cm.row_sum(class);
    let mut degenerate = false;
    let mut ratio = |den: u64| {
        if den == 0 {
            degenerate = true;
            0.0
        } else {
            hit / den as f64
        }
    };
    let precision = ratio(predicted);
    let recall = ratio(actual);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(ClassMetrics {
        precision,
        recall,
        f1,
        degenerate,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded random permutation cut into thirds; remainders go to train, then
/// validation.
pub fn split_thirds(size: usize, seed: u64) -> Result<Split> {
    if size < 3 {
        return Err(Error::param(format!("cannot split {size} samples into thirds")));
    }
    let mut perm: Vec<usize> = (0..size).collect();
    shuffle(&mut perm, &mut rng_from_seed(seed));
    let base = size / 3;
    let rem = size % 3;
    let n_train = base + usize::from(rem > 0);
    let n_val = base + usize::from(rem > 1);
    Ok(Split {
        train: perm[..n_train].to_vec(),
        validation: perm[n_train..n_train + n_val].to_vec(),
        test: perm[n_train + n_val..].to_vec(),
    })
}

/// Seeds of one experiment; every output carries them for replay.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub sample: u64,
    pub split: u64,
    pub train: u64,
}

impl Seeds {
    /// Independent seeds derived from one master seed.
    pub fn from_master(seed: u64) -> Self {
        Seeds {
            sample: seed,
            split: derive_seed(seed, 1, 0),
            train: derive_seed(seed, 2, 0),
        }
    }

    pub fn to_map(self) -> BTreeMap<String, u64> {
        BTreeMap::from([
            ("sample".to_string(), self.sample),
            ("split".to_string(), self.split),
            ("train".to_string(), self.train),
        ])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub experiment: String,
    pub class_names: Vec<String>,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub seeds: BTreeMap<String, u64>,
    pub params: BTreeMap<String, String>,
}

impl ExperimentResult {
    pub fn new(
        experiment: impl Into<String>,
        class_names: Vec<String>,
        confusion: ConfusionMatrix,
        seeds: BTreeMap<String, u64>,
        params: BTreeMap<String, String>,
    ) -> Result<Self> {
        let accuracy = accuracy(&confusion)?;
        let per_class = (0..confusion.classes())
            .map(|c| precision_recall_f1(&confusion, c))
            .collect::<Result<_>>()?;
        Ok(ExperimentResult {
            experiment: experiment.into(),
            class_names,
            confusion,
            accuracy,
            per_class,
            seeds,
            params,
        })
    }
}

/// Metrics CSV: one row per (experiment, class) and a `summary` row holding
/// accuracy and macro averages.
pub fn write_metrics_csv<W: Write>(results: &[ExperimentResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "experiment", "class", "support", "precision", "recall", "f1", "degenerate", "accuracy",
        "params", "seeds",
    ])?;
    for r in results {
        let params = join_map(&r.params);
        let seeds = join_map(&r.seeds);
        for (c, m) in r.per_class.iter().enumerate() {
            w.write_record([
                r.experiment.clone(),
                r.class_names[c].clone(),
                r.confusion.row_sum(c).to_string(),
                format!("{:.6}", m.precision),
                format!("{:.6}", m.recall),
                format!("{:.6}", m.f1),
                m.degenerate.to_string(),
                String::new(),
                params.clone(),
                seeds.clone(),
            ])?;
        }
        let k = r.per_class.len() as f64;
        let macro_avg = |f: fn(&ClassMetrics) -> f64| r.per_class.iter().map(f).sum::<f64>() / k;
        w.write_record([
            r.experiment.clone(),
            "summary".to_string(),
            r.confusion.total().to_string(),
            format!("{:.6}", macro_avg(|m| m.precision)),
            format!("{:.6}", macro_avg(|m| m.recall)),
            format!("{:.6}", macro_avg(|m| m.f1)),
            r.per_class.iter().any(|m| m.degenerate).to_string(),
            format!("{:.6}", r.accuracy),
            params,
            seeds,
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn join_map<V: ToString>(map: &BTreeMap<String, V>) -> String {
    map.iter()
        .map(|(k, v)| format!("{k}={}", v.to_string()))
        .collect::<Vec<_>>()
        .join(";")
}

const RANDOM_ORDER_STREAM: u64 = 0x7261_6e64;

/// Image of one sample under the structured ordering or under a random
/// vertex order drawn from `(seed, class, index)`.
pub fn sample_image(sample: &LabeledSample, representation: Representation, seed: u64) -> Result<StructuredImage> {
    match representation {
        Representation::Image => Ok(structured_image(&sample.subgraph)?.0),
        Representation::RandomImage => {
            let mut rng = derived_rng(
                derive_seed(seed, RANDOM_ORDER_STREAM, 0),
                sample.class_id as u64,
                sample.sample_index as u64,
            );
            let ordering = random_ordering(sample.subgraph.node_count(), &mut rng);
            embed_image(&sample.subgraph, &ordering)
        }
        other => Err(Error::param(format!("{other} is not an image representation"))),
    }
}

pub fn sample_images(
    samples: &[LabeledSample],
    representation: Representation,
    seed: u64,
) -> Result<Vec<StructuredImage>> {
    samples
        .par_iter()
        .map(|s| sample_image(s, representation, seed))
        .collect()
}

/// Default WL depth for the kernel baseline.
pub const DEFAULT_WL_DEPTH: usize = 3;

/// Turns samples into learner inputs. `seed` only matters for random
/// orderings.
pub fn represent(
    samples: &[LabeledSample],
    classes: usize,
    representation: Representation,
    seed: u64,
    wl_depth: usize,
) -> Result<Dataset> {
    let n = samples.first().map_or(0, |s| s.subgraph.node_count());
    let targets: Vec<usize> = samples.iter().map(|s| s.class_id).collect();
    let inputs: Vec<Vec<f64>> = match representation {
        Representation::Image | Representation::RandomImage => sample_images(samples, representation, seed)?
            .iter()
            .map(StructuredImage::to_vector)
            .collect(),
        Representation::Classical => samples
            .par_iter()
            .map(|s| classical_features(&s.subgraph).map(|f| f.to_vec()))
            .collect::<Result<_>>()?,
        Representation::Wl => {
            // sequential on purpose: compressed ids, and so the dense column
            // order, follow first appearance in dataset order
            let dictionary = WlDictionary::new();
            let vectors: Vec<_> = samples
                .iter()
                .map(|s| wl_features(&s.subgraph, wl_depth, &dictionary))
                .collect();
            let vocabulary = WlVocabulary::fit(&vectors);
            vectors.iter().map(|v| vocabulary.densify(v)).collect()
        }
    };
    Dataset::new(inputs, targets, classes, representation, n)
}

/// Trains on the train third (validation third for early stopping) and
/// returns the test-third confusion matrix with the model.
pub fn fit_and_evaluate(
    data: &Dataset,
    learner: Learner,
    config: &TrainConfig,
    split_seed: u64,
) -> Result<(ConfusionMatrix, Model, Split)> {
    let split = split_thirds(data.len(), split_seed)?;
    let train_set = data.subset(&split.train)?;
    let validation = data.subset(&split.validation)?;
    let model = train(learner, &train_set, Some(&validation), config)?;
    let mut cm = ConfusionMatrix::new(data.classes);
    for &i in &split.test {
        cm.record(data.targets[i], model.classify(&data.inputs[i])?);
    }
    Ok((cm, model, split))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupervisedConfig {
    pub n: usize,
    pub samples_per_class: usize,
    pub representation: Representation,
    pub learner: Learner,
    pub train: TrainConfig,
    pub seeds: Seeds,
    pub wl_depth: usize,
}

impl SupervisedConfig {
    pub fn new(
        n: usize,
        samples_per_class: usize,
        representation: Representation,
        learner: Learner,
        seed: u64,
    ) -> Self {
        let seeds = Seeds::from_master(seed);
        SupervisedConfig {
            n,
            samples_per_class,
            representation,
            learner,
            train: TrainConfig {
                seed: seeds.train,
                ..TrainConfig::default()
            },
            seeds,
            wl_depth: DEFAULT_WL_DEPTH,
        }
    }

    fn seed_map(&self) -> BTreeMap<String, u64> {
        let mut seeds = self.seeds.to_map();
        seeds.insert("train".into(), self.train.seed);
        seeds
    }
}

/// Sample, represent, split, train and test one configuration.
pub fn run_supervised_experiment(classes: &[ClassGraph], config: &SupervisedConfig) -> Result<ExperimentResult> {
    let spec = SampleSpec::new(config.n, config.samples_per_class, config.seeds.sample)?;
    let samples = build_dataset(classes, &spec)?;
    let data = represent(
        &samples,
        classes.len(),
        config.representation,
        config.seeds.sample,
        config.wl_depth,
    )?;
    let (cm, _, _) = fit_and_evaluate(&data, config.learner, &config.train, config.seeds.split)?;
    let params = BTreeMap::from([
        ("n".to_string(), config.n.to_string()),
        ("samples_per_class".to_string(), config.samples_per_class.to_string()),
        ("representation".to_string(), config.representation.to_string()),
        ("learner".to_string(), config.learner.to_string()),
    ]);
    ExperimentResult::new(
        format!("supervised_{}_{}_n{}", config.representation, config.learner, config.n),
        class_names(classes),
        cm,
        config.seed_map(),
        params,
    )
}

fn class_names(classes: &[ClassGraph]) -> Vec<String> {
    classes.iter().map(|c| c.name.clone()).collect()
}

/// Stub-recognizer label vectors of structured images, in dataset order,
/// with ground truth attached.
pub fn stub_label_vectors(samples: &[LabeledSample]) -> Result<Vec<LabelVector>> {
    samples
        .par_iter()
        .map(|s| {
            let image = structured_image(&s.subgraph)?.0;
            let id = format!("{}_{}_{}", s.class_id, s.sample_index, image.side());
            stub_recognizer(&id, &image).label_vector(Some(s.class_id))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferConfig {
    pub k: usize,
    pub fraction: f64,
    /// Seed of the train/test selection.
    pub split_seed: u64,
    /// Seed of the k-NN vote tie-breaks.
    pub vote_seed: u64,
}

impl TransferConfig {
    pub fn new(k: usize, fraction: f64, seed: u64) -> Self {
        TransferConfig {
            k,
            fraction,
            split_seed: derive_seed(seed, 3, 0),
            vote_seed: derive_seed(seed, 4, 0),
        }
    }
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig::new(DEFAULT_K, 0.5, 0)
    }
}

/// k-NN transfer classification over labeled vectors: a random `fraction`
/// serves as the neighbor pool, the rest is classified.
pub fn run_transfer_experiment(
    vectors: &[LabelVector],
    class_names: &[String],
    config: &TransferConfig,
) -> Result<ExperimentResult> {
    if class_names.len() < 2 {
        return Err(Error::param("transfer needs at least two classes"));
    }
    let (train_idx, test_idx) = split_fraction(vectors.len(), config.fraction, config.split_seed)?;
    if train_idx.len() < config.k {
        return Err(Error::param(format!(
            "training set of {} vectors is smaller than k = {}",
            train_idx.len(),
            config.k
        )));
    }
    let truth = |v: &LabelVector| {
        v.ground_truth
            .filter(|&t| t < class_names.len())
            .ok_or_else(|| Error::param("label vector without valid ground truth"))
    };
    let train_set: Vec<LabelVector> = train_idx.iter().map(|&i| vectors[i].clone()).collect();
    let test_set: Vec<LabelVector> = test_idx.iter().map(|&i| vectors[i].clone()).collect();
    let predicted = knn_classify_batch(&train_set, &test_set, config.k, config.vote_seed)?;
    let mut cm = ConfusionMatrix::new(class_names.len());
    for (v, p) in test_set.iter().zip(predicted) {
        cm.record(truth(v)?, p);
    }
    let seeds = BTreeMap::from([
        ("split".to_string(), config.split_seed),
        ("vote".to_string(), config.vote_seed),
    ]);
    let params = BTreeMap::from([
        ("k".to_string(), config.k.to_string()),
        ("fraction".to_string(), config.fraction.to_string()),
    ]);
    ExperimentResult::new(
        format!("transfer_k{}_f{}", config.k, config.fraction),
        class_names.to_vec(),
        cm,
        seeds,
        params,
    )
}

/// Samples the classes, labels the structured images with the stub
/// recognizer and runs the transfer experiment.
pub fn run_stub_transfer_experiment(
    classes: &[ClassGraph],
    spec: &SampleSpec,
    config: &TransferConfig,
) -> Result<ExperimentResult> {
    let samples = build_dataset(classes, spec)?;
    let vectors = stub_label_vectors(&samples)?;
    let mut result = run_transfer_experiment(&vectors, &class_names(classes), config)?;
    result.seeds.insert("sample".into(), spec.seed);
    result.params.insert("n".into(), spec.n.to_string());
    Ok(result)
}

/// One transfer result per training fraction, all with the same seeds.
pub fn run_fraction_sweep(
    vectors: &[LabelVector],
    class_names: &[String],
    fractions: &[f64],
    base: &TransferConfig,
) -> Result<Vec<ExperimentResult>> {
    fractions
        .iter()
        .map(|&fraction| {
            run_transfer_experiment(
                vectors,
                class_names,
                &TransferConfig {
                    fraction,
                    ..base.clone()
                },
            )
        })
        .collect()
}

pub const K_SWEEP: [usize; 6] = [7, 15, 23, 31, 39, 47];

/// One transfer result per neighborhood size on a fixed split.
pub fn run_k_sweep(
    vectors: &[LabelVector],
    class_names: &[String],
    ks: &[usize],
    base: &TransferConfig,
) -> Result<Vec<ExperimentResult>> {
    ks.iter()
        .map(|&k| {
            run_transfer_experiment(vectors, class_names, &TransferConfig { k, ..base.clone() })
        })
        .collect()
}

pub const HYBRID_SIZES: [usize; 4] = [8, 16, 32, 64];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridCase {
    pub name: String,
    pub sizes: Vec<usize>,
    pub weights: Vec<f64>,
}

impl HybridCase {
    pub fn new(name: impl Into<String>, sizes: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        let case = HybridCase {
            name: name.into(),
            sizes,
            weights,
        };
        case.validate()?;
        Ok(case)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.sizes.len() != self.weights.len() {
            return Err(Error::param("hybrid case needs one weight per size"));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::param("hybrid weights must be nonnegative"));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::param(format!("hybrid weights sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// Per-size sample counts summing to `total` (largest remainder, ties to
    /// the earlier size).
    pub fn counts(&self, total: usize) -> Vec<usize> {
        let exact: Vec<f64> = self.weights.iter().map(|w| w * total as f64).collect();
        let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by(|&a, &b| {
            let fa = exact[a] - exact[a].floor();
            let fb = exact[b] - exact[b].floor();
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        let missing = total - counts.iter().sum::<usize>();
        for &i in order.iter().take(missing) {
            counts[i] += 1;
        }
        counts
    }
}

/// The four mixture presets over n = 8, 16, 32, 64.
pub fn hybrid_presets() -> Vec<HybridCase> {
    [
        ("case1", [0.25, 0.25, 0.25, 0.25]),
        ("case2", [0.10, 0.20, 0.30, 0.40]),
        ("case3", [0.40, 0.30, 0.20, 0.10]),
        ("case4", [0.10, 0.40, 0.40, 0.10]),
    ]
    .into_iter()
    .map(|(name, w)| HybridCase {
        name: name.into(),
        sizes: HYBRID_SIZES.to_vec(),
        weights: w.to_vec(),
    })
    .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridConfig {
    pub samples_per_class: usize,
    pub learner: Learner,
    pub train: TrainConfig,
    pub seeds: Seeds,
}

impl HybridConfig {
    pub fn new(samples_per_class: usize, learner: Learner, seed: u64) -> Self {
        let seeds = Seeds::from_master(seed);
        HybridConfig {
            samples_per_class,
            learner,
            train: TrainConfig {
                seed: seeds.train,
                ..TrainConfig::default()
            },
            seeds,
        }
    }
}

/// Mixed-size structured images, zero-padded top-left to the largest size in
/// use. Each class draws disjoint sample-index ranges per size, so a single
/// size at weight 1 reproduces the supervised experiment exactly.
pub fn run_hybrid_experiment(
    classes: &[ClassGraph],
    case: &HybridCase,
    config: &HybridConfig,
) -> Result<ExperimentResult> {
    case.validate()?;
    let counts = case.counts(config.samples_per_class);
    let side = case
        .sizes
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(&n, _)| n)
        .max()
        .ok_or_else(|| Error::param("hybrid case selects no samples"))?;
    let mut samples = Vec::new();
    for (class_id, class) in classes.iter().enumerate() {
        let mut offset = 0;
        for (&n, &count) in case.sizes.iter().zip(&counts) {
            samples.extend(sample_class(class, class_id, n, offset..offset + count, config.seeds.sample)?);
            offset += count;
        }
    }
    let images: Vec<StructuredImage> = samples
        .par_iter()
        .map(|s| structured_image(&s.subgraph)?.0.padded(side))
        .collect::<Result<_>>()?;
    let data = Dataset::from_images(
        &images,
        samples.iter().map(|s| s.class_id).collect(),
        classes.len(),
        Representation::Image,
    )?;
    let (cm, _, _) = fit_and_evaluate(&data, config.learner, &config.train, config.seeds.split)?;
    let mut seeds = config.seeds.to_map();
    seeds.insert("train".into(), config.train.seed);
    let params = BTreeMap::from([
        ("case".to_string(), case.name.clone()),
        (
            "weights".to_string(),
            case.weights.iter().map(f64::to_string).collect::<Vec<_>>().join("/"),
        ),
        ("learner".to_string(), config.learner.to_string()),
    ]);
    ExperimentResult::new(format!("hybrid_{}", case.name), class_names(classes), cm, seeds, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes() {
        let s = split_thirds(9, 1).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (3, 3, 3));
        let s = split_thirds(10, 1).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (4, 3, 3));
        let s11 = split_thirds(11, 1).unwrap();
        assert_eq!((s11.train.len(), s11.validation.len()), (4, 4));
        assert_eq!(split_thirds(10, 1).unwrap(), s);
        let mut all: Vec<usize> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(split_thirds(2, 1).is_err());
    }

    #[test]
    fn accuracy_examples() {
        let cm = ConfusionMatrix::from_rows(vec![vec![5, 0], vec![0, 5]]).unwrap();
        assert_eq!(accuracy(&cm).unwrap(), 1.0);
        let m = precision_recall_f1(&cm, 1).unwrap();
        assert_eq!((m.precision, m.recall, m.f1, m.degenerate), (1.0, 1.0, 1.0, false));
        let cm = ConfusionMatrix::from_rows(vec![vec![3, 1], vec![1, 3]]).unwrap();
        assert_eq!(accuracy(&cm).unwrap(), 0.75);
        assert!(accuracy(&ConfusionMatrix::new(2)).is_err());
    }

    #[test]
    fn absent_class_is_degenerate() {
        let cm = ConfusionMatrix::from_rows(vec![vec![4, 0, 0], vec![1, 2, 0], vec![0, 0, 0]]).unwrap();
        let m = precision_recall_f1(&cm, 2).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        assert!(m.degenerate);
    }

    #[test]
    fn permutation_keeps_accuracy() {
        let cm = ConfusionMatrix::from_rows(vec![vec![3, 1, 0], vec![2, 5, 1], vec![0, 4, 6]]).unwrap();
        let p = cm.permuted(&[2, 0, 1]).unwrap();
        assert_eq!(p.counts[2][0], 1);
        assert_eq!(accuracy(&p).unwrap(), accuracy(&cm).unwrap());
        assert!(cm.permuted(&[0, 0, 1]).is_err());
    }

    #[test]
    fn confusion_csv_round_trip() {
        let cm = ConfusionMatrix::from_rows(vec![vec![3, 1], vec![0, 7]]).unwrap();
        let names = vec!["a".to_string(), "b".to_string()];
        let mut buf = Vec::new();
        cm.write_csv(&names, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "true\\pred,a,b\na,3,1\nb,0,7\n");
        assert_eq!(ConfusionMatrix::read_csv(buf.as_slice()).unwrap(), (names, cm));
    }

    #[test]
    fn hybrid_counts_and_presets() {
        let presets = hybrid_presets();
        assert_eq!(presets[1].weights, vec![0.1, 0.2, 0.3, 0.4]);
        assert_eq!(presets[1].counts(300), vec![30, 60, 90, 120]);
        for p in &presets {
            p.validate().unwrap();
            assert_eq!(p.counts(101).iter().sum::<usize>(), 101);
        }
        assert!(HybridCase::new("bad", vec![8, 16], vec![0.5, 0.6]).is_err());
    }
}
