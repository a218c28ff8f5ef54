use std::collections::BTreeMap;
use std::io::BufReader;
use std::path::Path;

use netsig_core::eval::{
    hybrid_presets, run_fraction_sweep, run_hybrid_experiment, run_k_sweep, run_supervised_experiment,
    run_transfer_experiment, sample_images, split_thirds, stub_label_vectors, write_metrics_csv,
    ConfusionMatrix, ExperimentResult, HybridConfig, SupervisedConfig, TransferConfig, K_SWEEP,
};
use netsig_core::eval::{fit_and_evaluate, represent};
use netsig_core::features::{classical_features, read_features_csv, write_features_csv};
use netsig_core::learn::{pca_top_component, Dataset, Model, Representation};
use netsig_core::ordering::{encode_pgm, read_image, structured_image, write_image};
use netsig_core::sampler::{
    build_dataset, image_id, write_dataset, DatasetIndex, LabeledSample, SampleSpec, DATASET_VERSION,
};
use netsig_core::transfer::{load_label_vectors, stub_recognizer, write_records, LabelVector};

use crate::artifacts::*;
use crate::config::RunConfig;
use crate::error::CliError;

pub fn sample(config: &RunConfig) -> Result<(), CliError> {
    let out = config.out_dir();
    let prov = Provenance::of(config)?;
    let classes = config.load_classes()?;
    let spec = SampleSpec::new(config.n, config.samples_per_class, config.seed)?;
    let samples = build_dataset(&classes, &spec)?;
    write_atomic(
        &dataset_path(&out),
        prov.stamp_after_header(&write_dataset(&samples)).as_bytes(),
    )?;
    let index = DatasetIndex {
        version: DATASET_VERSION,
        classes: classes.iter().map(|c| c.name.clone()).collect(),
        spec,
        records: samples.len(),
        config_hash: Some(prov.config_hash),
    };
    let json = serde_json::to_string_pretty(&index).map_err(|e| CliError::Schema(e.to_string()))?;
    write_atomic(&index_path(&out), json.as_bytes())?;
    log::info!("sampled {} subgraphs into {}", samples.len(), out.display());
    Ok(())
}

pub fn embed(config: &RunConfig) -> Result<(), CliError> {
    let out = config.out_dir();
    let prov = Provenance::of(config)?;
    let dir = image_dir(&out, config.representation)?;
    let (samples, index) = load_dataset(&out)?;
    let images = sample_images(&samples, config.representation, config.seed)?;
    for (s, image) in samples.iter().zip(&images) {
        let pgm = write_image(image, config.scale)?;
        write_atomic(&dir.join(format!("{}.pgm", sample_id(&index, s))), &prov.stamp_pgm(&pgm))?;
    }
    log::info!("embedded {} images into {}", images.len(), dir.display());
    Ok(())
}

pub fn featurize(config: &RunConfig) -> Result<(), CliError> {
    let out = config.out_dir();
    let prov = Provenance::of(config)?;
    let (samples, _) = load_dataset(&out)?;
    let rows = samples
        .iter()
        .map(|s| Ok((classical_features(&s.subgraph)?, s.class_id)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut csv = Vec::new();
    write_features_csv(&rows, &mut csv)?;
    write_atomic(&features_path(&out), &prov.stamp_front(&csv))?;
    Ok(())
}

pub fn train(config: &RunConfig) -> Result<(), CliError> {
    let out = config.out_dir();
    let prov = Provenance::of(config)?;
    let (samples, index) = load_dataset(&out)?;
    let data = learner_inputs(config, &samples, &index)?;
    let (cm, mut model, _) = fit_and_evaluate(&data, config.learner, &config.train_config(), config.seeds().split)?;
    model.provenance = BTreeMap::from([
        ("config_hash".to_string(), prov.config_hash.clone()),
        ("seed".to_string(), prov.seed.to_string()),
        ("learner".to_string(), config.learner.to_string()),
    ]);
    write_atomic(&model_path(&out), &model.to_bytes()?)?;
    log::info!(
        "trained {} on {}: held-out accuracy {:.4}",
        config.learner,
        config.representation,
        cm.trace() as f64 / cm.total().max(1) as f64
    );
    Ok(())
}

pub fn eval(config: &RunConfig) -> Result<ExperimentResult, CliError> {
    let out = config.out_dir();
    let prov = Provenance::of(config)?;
    let model = Model::from_bytes(&read_input(&model_path(&out), "model")?)?;
    if model.representation != config.representation {
        return Err(CliError::Config(format!(
            "model was trained on {}, config asks for {}",
            model.representation, config.representation
        )));
    }
    let (samples, index) = load_dataset(&out)?;
    let data = learner_inputs(config, &samples, &index)?;
    let split = split_thirds(data.len(), config.seeds().split)?;
    let mut cm = ConfusionMatrix::new(data.classes);
    for &i in &split.test {
        cm.record(data.targets[i], model.classify(&data.inputs[i])?);
    }
    let learner = model.provenance.get("learner").cloned().unwrap_or_else(|| config.learner.to_string());
    let name = format!("supervised_{}_{learner}_n{}", config.representation, index.spec.n);
    let mut seeds = config.seeds().to_map();
    seeds.insert("master".into(), prov.seed);
    let params = BTreeMap::from([
        ("config_hash".to_string(), prov.config_hash.clone()),
        ("n".to_string(), index.spec.n.to_string()),
        ("representation".to_string(), config.representation.to_string()),
        ("learner".to_string(), learner),
    ]);
    let result = ExperimentResult::new(name, index.classes.clone(), cm, seeds, params)?;
    write_results(&out.join("metrics.csv"), &prov, std::slice::from_ref(&result))?;
    write_confusion(&out.join("confusion.csv"), &prov, &result)?;
    Ok(result)
}

pub fn transfer(config: &RunConfig) -> Result<ExperimentResult, CliError> {
    let out = config.out_dir();
    let prov = Provenance::of(config)?;
    let (samples, index) = load_dataset(&out)?;
    let records_bytes = match &config.records {
        Some(path) => read_input(path, "recognizer records")?,
        None => {
            let records = samples
                .iter()
                .map(|s| Ok(stub_recognizer(&sample_id(&index, s), &structured_image(&s.subgraph)?.0)))
                .collect::<Result<Vec<_>, CliError>>()?;
            let mut bytes = Vec::new();
            write_records(&records, &mut bytes)?;
            let bytes = prov.stamp_front(&bytes);
            write_atomic(&out.join("records.jsonl"), &bytes)?;
            bytes
        }
    };
    let vectors: Vec<LabelVector> = load_label_vectors(BufReader::new(records_bytes.as_slice()), Some(&index))?
        .into_iter()
        .map(|(_, v)| v)
        .collect();
    let mut result = run_transfer_experiment(&vectors, &index.classes, &transfer_config(config))?;
    result.params.insert("config_hash".into(), prov.config_hash.clone());
    result.seeds.insert("master".into(), prov.seed);
    write_results(&out.join("transfer_metrics.csv"), &prov, std::slice::from_ref(&result))?;
    write_confusion(&out.join("transfer_confusion.csv"), &prov, &result)?;
    Ok(result)
}

pub fn pca(config: &RunConfig) -> Result<(), CliError> {
    let out = config.out_dir();
    let prov = Provenance::of(config)?;
    let (samples, index) = load_dataset(&out)?;
    let images = sample_images(&samples, Representation::Image, config.seed)?;
    let mut summary = Vec::new();
    for (class_id, name) in index.classes.iter().enumerate() {
        let class_images: Vec<_> = samples
            .iter()
            .zip(&images)
            .filter(|(s, _)| s.class_id == class_id)
            .map(|(_, im)| im.clone())
            .collect();
        let component = pca_top_component(&class_images)?;
        let file = format!("{name}.pgm");
        let pgm = encode_pgm(component.side, component.side, &component.to_gray());
        write_atomic(&out.join("pca").join(&file), &prov.stamp_pgm(&pgm))?;
        summary.push(serde_json::json!({ "class": name, "variance": component.variance, "file": file }));
    }
    let json = serde_json::json!({
        "config_hash": prov.config_hash,
        "seed": prov.seed,
        "components": summary,
    });
    write_atomic(&out.join("pca").join("summary.json"), json.to_string().as_bytes())?;
    Ok(())
}

pub const SWEEPS: [&str; 5] = ["size", "representation", "k", "fraction", "hybrid"];

pub fn sweep(config: &RunConfig) -> Result<Vec<ExperimentResult>, CliError> {
    let out = config.out_dir();
    let prov = Provenance::of(config)?;
    let classes = config.load_classes()?;
    let names: Vec<String> = classes.iter().map(|c| c.name.clone()).collect();
    let supervised = |n, representation| {
        let mut c = SupervisedConfig::new(n, config.samples_per_class, representation, config.learner, config.seed);
        c.train = config.train_config();
        c.wl_depth = config.wl_depth;
        run_supervised_experiment(&classes, &c)
    };
    let stub_vectors = || {
        let spec = SampleSpec::new(config.n, config.samples_per_class, config.seed)?;
        stub_label_vectors(&build_dataset(&classes, &spec)?)
    };
    let mut results = match config.experiment.as_str() {
        "size" => [8, 16, 32]
            .into_iter()
            .map(|n| supervised(n, config.representation))
            .collect::<Result<Vec<_>, _>>()?,
        "representation" => [
            Representation::Image,
            Representation::RandomImage,
            Representation::Classical,
            Representation::Wl,
        ]
        .into_iter()
        .map(|r| supervised(config.n, r))
        .collect::<Result<Vec<_>, _>>()?,
        "k" => run_k_sweep(&stub_vectors()?, &names, &K_SWEEP, &transfer_config(config))?,
        "fraction" => run_fraction_sweep(&stub_vectors()?, &names, &[0.1, 0.2, 0.3, 0.4, 0.5], &transfer_config(config))?,
        "hybrid" => {
            let mut hybrid = HybridConfig::new(config.samples_per_class, config.learner, config.seed);
            hybrid.train = config.train_config();
            hybrid_presets()
                .iter()
                .map(|case| run_hybrid_experiment(&classes, case, &hybrid))
                .collect::<Result<Vec<_>, _>>()?
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown sweep {other:?} (expected one of {})",
                SWEEPS.join(", ")
            )))
        }
    };
    for r in &mut results {
        r.params.insert("config_hash".into(), prov.config_hash.clone());
        r.seeds.insert("master".into(), prov.seed);
    }
    write_results(&out.join(format!("sweep_{}.csv", config.experiment)), &prov, &results)?;
    Ok(results)
}

fn transfer_config(config: &RunConfig) -> TransferConfig {
    TransferConfig::new(config.k, config.fraction, config.seed)
}

fn sample_id(index: &DatasetIndex, s: &LabeledSample) -> String {
    image_id(&index.classes[s.class_id], s.sample_index, s.subgraph.node_count())
}

/// Learner inputs from the upstream artifacts: image files for image
/// representations, `features.csv` for classical features, the dataset
/// itself for WL.
fn learner_inputs(config: &RunConfig, samples: &[LabeledSample], index: &DatasetIndex) -> Result<Dataset, CliError> {
    let out = config.out_dir();
    let targets: Vec<usize> = samples.iter().map(|s| s.class_id).collect();
    let classes = index.classes.len();
    match config.representation {
        r @ (Representation::Image | Representation::RandomImage) => {
            let dir = image_dir(&out, r)?;
            let images = samples
                .iter()
                .map(|s| {
                    let path = dir.join(format!("{}.pgm", sample_id(index, s)));
                    Ok(read_image(&read_input(&path, "image")?, config.scale)?)
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            Ok(Dataset::from_images(&images, targets, classes, r)?)
        }
        Representation::Classical => {
            let rows = read_features_csv(read_input(&features_path(&out), "features")?.as_slice())?;
            if rows.len() != samples.len() || rows.iter().zip(&targets).any(|((_, c), t)| c != t) {
                return Err(CliError::Schema("features.csv does not match the dataset".into()));
            }
            Ok(Dataset::new(
                rows.into_iter().map(|(x, _)| x).collect(),
                targets,
                classes,
                Representation::Classical,
                index.spec.n,
            )?)
        }
        Representation::Wl => Ok(represent(samples, classes, Representation::Wl, config.seed, config.wl_depth)?),
    }
}

fn write_results(path: &Path, prov: &Provenance, results: &[ExperimentResult]) -> Result<(), CliError> {
    let mut csv = Vec::new();
    write_metrics_csv(results, &mut csv)?;
    write_atomic(path, &prov.stamp_front(&csv))
}

fn write_confusion(path: &Path, prov: &Provenance, result: &ExperimentResult) -> Result<(), CliError> {
    let mut csv = Vec::new();
    result.confusion.write_csv(&result.class_names, &mut csv)?;
    write_atomic(path, &prov.stamp_front(&csv))
}
