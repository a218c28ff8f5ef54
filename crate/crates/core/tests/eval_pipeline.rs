use netsig_core::eval::{
    precision_recall_f1, run_hybrid_experiment, run_supervised_experiment, run_transfer_experiment,
    stub_label_vectors, ConfusionMatrix, HybridCase, HybridConfig, SupervisedConfig, TransferConfig,
};
use netsig_core::learn::{Learner, Representation};
use netsig_core::manifest::{ClassGraph, DatasetManifest};
use netsig_core::sampler::{build_dataset, SampleSpec};
use netsig_core::transfer::{knn_classify, LabelVector};
use netsig_core::Family;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn suite() -> Vec<(String, Family, u64)> {
    vec![
        ("er".into(), Family::ErdosRenyi { n: 400, p: 0.03 }, 1),
        ("ba".into(), Family::BarabasiAlbert { n: 400, m: 2 }, 2),
        ("ws".into(), Family::WattsStrogatz { n: 400, k: 4, beta: 0.1 }, 3),
    ]
}

fn classes() -> Vec<ClassGraph> {
    DatasetManifest::synthetic(suite()).unwrap().load_graphs().unwrap()
}

#[test]
fn reported_wiki_row_is_harmonically_consistent() {
    // tp / column = 0.96, tp / row = 0.93
    let tp = 96 * 93;
    let cm = ConfusionMatrix::from_rows(vec![vec![tp, 9600 - tp], vec![9300 - tp, 5000]]).unwrap();
    let m = precision_recall_f1(&cm, 0).unwrap();
    assert!((m.precision - 0.96).abs() < 1e-12);
    assert!((m.recall - 0.93).abs() < 1e-12);
    assert!((m.f1 - 0.94).abs() <= 0.005, "{}", m.f1);
}

#[test]
fn manifest_order_does_not_change_results() {
    let mut reversed = suite();
    reversed.reverse();
    let a = DatasetManifest::synthetic(suite()).unwrap().load_graphs().unwrap();
    let b = DatasetManifest::synthetic(reversed).unwrap().load_graphs().unwrap();
    let config = SupervisedConfig::new(8, 30, Representation::Image, Learner::Linear, 5);
    let ra = run_supervised_experiment(&a, &config).unwrap();
    let rb = run_supervised_experiment(&b, &config).unwrap();
    assert_eq!(ra, rb);
}

#[test]
fn replay_is_bit_identical() {
    let classes = classes();
    let config = SupervisedConfig::new(16, 30, Representation::Image, Learner::Mlp, 9);
    let a = run_supervised_experiment(&classes, &config).unwrap();
    let b = run_supervised_experiment(&classes, &config).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.accuracy.to_bits(), b.accuracy.to_bits());
    assert_eq!(a.seeds["sample"], 9);
}

#[test]
fn single_size_hybrid_matches_supervised() {
    let classes = classes();
    let case = HybridCase::new("single", vec![16], vec![1.0]).unwrap();
    let hybrid = run_hybrid_experiment(&classes, &case, &HybridConfig::new(30, Learner::Linear, 4)).unwrap();
    let supervised = run_supervised_experiment(
        &classes,
        &SupervisedConfig::new(16, 30, Representation::Image, Learner::Linear, 4),
    )
    .unwrap();
    assert_eq!(hybrid.confusion, supervised.confusion);
}

#[test]
fn every_representation_learns_the_suite() {
    let classes = classes();
    for (repr, learner) in [
        (Representation::Classical, Learner::Linear),
        (Representation::Wl, Learner::Linear),
        (Representation::Image, Learner::Cnn),
    ] {
        let mut config = SupervisedConfig::new(16, 30, repr, learner, 2);
        if learner == Learner::Cnn {
            // plain SGD on ten images per class is too slow for the convolution
            config.samples_per_class = 150;
            config.train.learning_rate = 0.05;
        }
        let r = run_supervised_experiment(&classes, &config).unwrap();
        assert_eq!(r.confusion.total() as usize, config.samples_per_class);
        assert!(r.accuracy > 0.5, "{repr} {learner}: {}", r.accuracy);
    }
    let config = SupervisedConfig::new(16, 30, Representation::RandomImage, Learner::Linear, 2);
    let r = run_supervised_experiment(&classes, &config).unwrap();
    assert_eq!(r.confusion.total(), 30);
    assert_eq!(r.params["representation"], "random_image");
}

fn relabeled(vectors: &[LabelVector], perm: &[usize]) -> Vec<LabelVector> {
    vectors
        .iter()
        .map(|v| LabelVector::new(v.labels.iter().cloned(), v.ground_truth.map(|t| perm[t])).unwrap())
        .collect()
}

#[test]
fn transfer_is_equivariant_under_class_relabeling() {
    let classes = classes();
    let samples = build_dataset(&classes, &SampleSpec::new(16, 40, 3).unwrap()).unwrap();
    let vectors = stub_label_vectors(&samples).unwrap();
    let names: Vec<String> = classes.iter().map(|c| c.name.clone()).collect();
    let perm = [2, 0, 1];
    let mut renamed = names.clone();
    for (i, n) in names.iter().enumerate() {
        renamed[perm[i]] = n.clone();
    }
    let moved = relabeled(&vectors, &perm);

    // a single neighbor has no vote to break, so the match is exact
    let one = TransferConfig::new(1, 0.5, 8);
    let a = run_transfer_experiment(&vectors, &names, &one).unwrap();
    let b = run_transfer_experiment(&moved, &renamed, &one).unwrap();
    assert_eq!(a.confusion.permuted(&perm).unwrap(), b.confusion);

    let k = TransferConfig::new(15, 0.5, 8);
    let a = run_transfer_experiment(&vectors, &names, &k).unwrap();
    let b = run_transfer_experiment(&moved, &renamed, &k).unwrap();
    assert!((a.accuracy - b.accuracy).abs() < 0.05, "{} {}", a.accuracy, b.accuracy);
}

#[test]
fn knn_recovers_planted_classes() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let lv = |labels: &[&str], t| LabelVector::new(labels.iter().copied(), Some(t)).unwrap();
    let train = vec![
        lv(&["a", "b", "c"], 0),
        lv(&["a", "b", "d"], 0),
        lv(&["a", "c", "d"], 0),
        lv(&["x", "y", "z"], 1),
        lv(&["x", "y", "w"], 1),
        lv(&["x", "z", "w"], 1),
    ];
    for k in 1..=3 {
        assert_eq!(knn_classify(&train, &lv(&["a", "b"], 0), k, &mut rng).unwrap(), 0);
        assert_eq!(knn_classify(&train, &lv(&["y", "z", "q"], 1), k, &mut rng).unwrap(), 1);
    }
    assert!(knn_classify(&train, &lv(&["a"], 0), 7, &mut rng).is_err());
    assert!(knn_classify(&train, &lv(&["a"], 0), 0, &mut rng).is_err());
}

#[test]
fn stub_transfer_separates_the_suite() {
    let classes = classes();
    let samples = build_dataset(&classes, &SampleSpec::new(16, 60, 6).unwrap()).unwrap();
    let vectors = stub_label_vectors(&samples).unwrap();
    let names: Vec<String> = classes.iter().map(|c| c.name.clone()).collect();
    let r = run_transfer_experiment(&vectors, &names, &TransferConfig::new(15, 0.5, 6)).unwrap();
    assert_eq!(r.confusion.total(), 90);
    assert!(r.accuracy > 0.5, "{}", r.accuracy);
}

#[test]
fn wl_columns_are_stable_across_runs() {
    let classes = classes();
    let samples = build_dataset(&classes, &SampleSpec::new(16, 40, 1).unwrap()).unwrap();
    let first = netsig_core::eval::represent(&samples, 3, Representation::Wl, 1, 3).unwrap();
    for _ in 0..5 {
        let again = netsig_core::eval::represent(&samples, 3, Representation::Wl, 1, 3).unwrap();
        assert_eq!(again.inputs, first.inputs);
    }
}
