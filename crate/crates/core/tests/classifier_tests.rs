use logitron::classifier::{train_binary_xy, train_ova, Classifier, TrainOptions};
use logitron::dataio::{load_csv, LoadOptions};
use logitron::loss::{logitron_value, Family, LossSpec};
use logitron::{Dataset, SolverSettings};
use ndarray::{array, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;

fn iris() -> Dataset {
    let dir = std::env::var_os("LOGITRON_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"));
    load_csv(dir.join("iris.csv"), &LoadOptions::default()).unwrap()
}

fn tight() -> TrainOptions {
    TrainOptions { solver: SolverSettings { tol: 1e-10, ..SolverSettings::default() }, ..TrainOptions::default() }
}

fn blobs(seed: u64, n: usize) -> (Array2<f64>, Array1<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = Array1::from_shape_fn(n, |i| if i % 2 == 0 { 1.0 } else { -1.0 });
    let x = Array2::from_shape_fn((n, 3), |(i, j)| y[i] * (j as f64 + 1.0) * 0.5 + rng.random_range(-2.0..2.0));
    (x, y)
}

#[test]
fn flipping_labels_negates_the_model() {
    let (x, y) = blobs(3, 40);
    let neg = y.mapv(|v| -v);
    for spec in [LossSpec::logistic(), LossSpec::resolve(Family::HPlus, 1.5, 0.8).unwrap()] {
        let a = train_binary_xy(x.view(), y.view(), &spec, 0.3, &tight()).unwrap();
        let b = train_binary_xy(x.view(), neg.view(), &spec, 0.3, &tight()).unwrap();
        for (u, v) in a.model().w.iter().zip(b.model().w.iter()) {
            assert!((u + v).abs() < 1e-6, "{u} vs {v}");
        }
        assert!((a.model().b + b.model().b).abs() < 1e-6);
    }
}

#[test]
fn standardised_training_equals_training_on_standardised_data() {
    let (x, y) = blobs(5, 50);
    let x = x.mapv(|v| 10.0 * v + 3.0);
    let spec = LossSpec::resolve(Family::HMinus, 0.75, -0.8).unwrap();
    let with = train_binary_xy(x.view(), y.view(), &spec, 0.1, &tight()).unwrap();
    let z = with.stats().apply(x.view()).unwrap();
    let raw = TrainOptions { standardize: false, ..tight() };
    let without = train_binary_xy(z.view(), y.view(), &spec, 0.1, &raw).unwrap();
    for i in 0..x.nrows() {
        let a = with.predict_margin(x.row(i)).unwrap();
        let b = without.predict_margin(z.row(i)).unwrap();
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn one_vs_all_is_deterministic() {
    let d = iris();
    let spec = LossSpec::resolve(Family::HMinus, 0.5, -1.0).unwrap();
    let a = Classifier::train(&d, &spec, 0.5, &TrainOptions::default()).unwrap();
    let b = Classifier::train(&d, &spec, 0.5, &TrainOptions::default()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.predict(d.features()).unwrap(), b.predict(d.features()).unwrap());
    assert!(a.accuracy(&d).unwrap() > 0.9);
}

#[test]
fn two_class_binary_agrees_with_forced_one_vs_all() {
    let d = iris();
    let rows: Vec<usize> = (0..d.n_samples()).filter(|&i| d.labels()[i] != 0).collect();
    let sub = d.select(&rows);
    let two = Dataset::new("pair", sub.features().to_owned(), sub.labels().iter().map(|&l| l - 1).collect(), d.catalog()[1..].to_vec())
        .unwrap();
    let spec = LossSpec::logistic();
    let bin = Classifier::train(&two, &spec, 1.0, &tight()).unwrap();
    let ova = Classifier::train(&two, &spec, 1.0, &TrainOptions { force_ova: true, ..tight() }).unwrap();
    assert!(matches!(bin, Classifier::Binary { .. }));
    assert!(matches!(ova, Classifier::Ova(_)));
    assert_eq!(bin.predict(two.features()).unwrap(), ova.predict(two.features()).unwrap());
}

/// Two antipodal points +-x; the optimum has b = 0 and w parallel to x, so
/// a scan over the scale t in w = t x / |x|^2 finds it.
#[test]
fn antipodal_pair_matches_scale_scan() {
    let x = array![[0.6, -0.8], [-0.6, 0.8]];
    let y = array![1.0, -1.0];
    let spec = LossSpec::resolve(Family::HPlus, 2.0, 1.0).unwrap();
    let lambda = 0.2;
    let raw = TrainOptions { standardize: false, ..tight() };
    let clf = train_binary_xy(x.view(), y.view(), &spec, lambda, &raw).unwrap();
    let f = |t: f64| 2.0 * logitron_value(&spec, t).unwrap() + lambda * t * t;
    let best = (0..=200_000).map(|i| i as f64 * 1e-4).min_by(|a, b| f(*a).total_cmp(&f(*b))).unwrap();
    let w = &clf.model().w;
    assert!((w[0] - 0.6 * best).abs() < 1e-3 && (w[1] + 0.8 * best).abs() < 1e-3, "{w:?} vs t={best}");
    assert!(clf.model().b.abs() < 1e-6);
}

#[test]
fn model_file_round_trip() {
    let d = iris();
    let spec = LossSpec::resolve(Family::LPlus, 1.25, 1.0).unwrap();
    let clf = Classifier::train(&d, &spec, 0.125, &TrainOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.txt");
    clf.save(&path).unwrap();
    let back = Classifier::load(&path).unwrap();
    assert_eq!(back.catalog(), clf.catalog());
    assert_eq!(back.predict(d.features()).unwrap(), clf.predict(d.features()).unwrap());
    for i in 0..d.n_samples() {
        assert_eq!(back.scores(d.row(i)).unwrap(), clf.scores(d.row(i)).unwrap());
    }
}

#[test]
fn truncated_model_file_is_rejected() {
    let d = iris();
    let clf = Classifier::train(&d, &LossSpec::logistic(), 1.0, &TrainOptions::default()).unwrap();
    let mut buf = Vec::new();
    clf.write_to(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let cut = &text[..text.len() / 2];
    assert!(Classifier::read_from(cut.as_bytes()).is_err());
    assert!(Classifier::read_from("not a model\n".as_bytes()).is_err());
}

#[test]
fn single_class_training_is_degenerate() {
    let x = Array2::from_shape_vec((3, 1), vec![1.0, 2.0, 3.0]).unwrap();
    let d = Dataset::from_labels("one", x, &["a", "a", "a"]).unwrap();
    assert!(Classifier::train(&d, &LossSpec::logistic(), 1.0, &TrainOptions::default()).is_err());
    let d3 = iris();
    assert!(train_ova(&d3.select(&[0, 1, 2]), &LossSpec::logistic(), 1.0, &TrainOptions::default()).is_err());
}
