use logitron::dataio::{load_csv, LoadOptions};
use logitron::loss::{logitron_value, Family, LossSpec};
use logitron::modelsel::Submodel;
use logitron::optim::{minimize, Objective, SolverSettings};
use logitron::LinearModel;
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;

fn random_problem(seed: u64, n: usize, d: usize) -> (Array2<f64>, Array1<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0));
    let y = Array1::from_shape_fn(n, |i| {
        let s: f64 = x.row(i).sum() + rng.random_range(-1.0..1.0);
        if s >= 0.0 { 1.0 } else { -1.0 }
    });
    (x, y)
}

fn smooth_specs() -> Vec<LossSpec> {
    Submodel::ALL
        .iter()
        .filter(|m| **m != Submodel::Hinge0)
        .flat_map(|m| m.specs())
        .collect()
}

fn params(m: &LinearModel) -> Vec<f64> {
    m.w.iter().copied().chain(std::iter::once(m.b)).collect()
}

fn model_from(p: &[f64]) -> LinearModel {
    let n = p.len() - 1;
    LinearModel::new(Array1::from(p[..n].to_vec()), p[n])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn objective_gradient_matches_finite_differences(
        seed in 0u64..1000,
        spec in prop::sample::select(smooth_specs()),
        lexp in -6i32..3,
    ) {
        let (x, y) = random_problem(seed, 20, 3);
        let obj = Objective::new(x.view(), y.view(), spec, 2f64.powi(lexp)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 7);
        let p: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ev = obj.eval(&model_from(&p)).unwrap();
        let g: Vec<f64> = ev.grad_w.iter().copied().chain([ev.grad_b]).collect();
        let h = 1e-6;
        for j in 0..4 {
            let (mut up, mut dn) = (p.clone(), p.clone());
            up[j] += h;
            dn[j] -= h;
            let fd = (obj.eval(&model_from(&up)).unwrap().value - obj.eval(&model_from(&dn)).unwrap().value) / (2.0 * h);
            prop_assert!((fd - g[j]).abs() < 1e-4 * (1.0 + g[j].abs()), "j={} fd={} g={}", j, fd, g[j]);
        }
    }

    #[test]
    fn objective_is_convex_along_segments(
        seed in 0u64..1000,
        spec in prop::sample::select(Submodel::ALL.iter().flat_map(|m| m.specs()).collect::<Vec<_>>()),
        t in 0.0f64..1.0,
    ) {
        let (x, y) = random_problem(seed, 15, 2);
        let obj = Objective::new(x.view(), y.view(), spec, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let a: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let b: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let m: Vec<f64> = a.iter().zip(&b).map(|(u, v)| (1.0 - t) * u + t * v).collect();
        let fa = obj.eval(&model_from(&a)).unwrap().value;
        let fb = obj.eval(&model_from(&b)).unwrap().value;
        let fm = obj.eval(&model_from(&m)).unwrap().value;
        prop_assert!(fm <= (1.0 - t) * fa + t * fb + 1e-9 * (fa.abs() + fb.abs() + 1.0));
    }

    #[test]
    fn solver_history_never_increases(seed in 0u64..1000, spec in prop::sample::select(smooth_specs())) {
        let (x, y) = random_problem(seed, 30, 3);
        let obj = Objective::new(x.view(), y.view(), spec, 0.5).unwrap();
        let (_, rep) = minimize(&obj, &LinearModel::zeros(3), &SolverSettings::default()).unwrap();
        prop_assert!(rep.history.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs()));
    }

    #[test]
    fn row_permutation_does_not_change_the_solution(seed in 0u64..500) {
        let (x, y) = random_problem(seed, 25, 3);
        let spec = LossSpec::resolve(Family::HMinus, 0.75, -1.0).unwrap();
        let settings = SolverSettings { tol: 1e-9, ..SolverSettings::default() };
        let obj = Objective::new(x.view(), y.view(), spec, 0.25).unwrap();
        let (m1, _) = minimize(&obj, &LinearModel::zeros(3), &settings).unwrap();
        let perm: Vec<usize> = (0..25).rev().collect();
        let xp = x.select(ndarray::Axis(0), &perm);
        let yp = y.select(ndarray::Axis(0), &perm);
        let objp = Objective::new(xp.view(), yp.view(), spec, 0.25).unwrap();
        let (m2, _) = minimize(&objp, &LinearModel::zeros(3), &settings).unwrap();
        for (a, b) in params(&m1).iter().zip(params(&m2)) {
            prop_assert!((a - b).abs() < 1e-6, "{} vs {}", a, b);
        }
    }
}

fn data_dir() -> PathBuf {
    std::env::var_os("LOGITRON_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

#[test]
fn converges_on_two_iris_classes() {
    let d = load_csv(data_dir().join("iris.csv"), &LoadOptions::default()).unwrap();
    // versicolor against virginica, which overlap
    let rows: Vec<usize> = (0..d.n_samples()).filter(|&i| d.labels()[i] != 0).collect();
    let sub = d.select(&rows);
    let y = sub.binary_targets(1);
    let spec = LossSpec::resolve(Family::HMinus, 0.75, -1.0).unwrap();
    let obj = Objective::new(sub.features(), y.view(), spec, 1.0).unwrap();
    let (_, rep) = minimize(&obj, &LinearModel::zeros(4), &SolverSettings::default()).unwrap();
    assert!(rep.converged, "{rep:?}");
    assert!(rep.grad_norm <= 1e-6);
    assert!(rep.iterations <= 500);
}

/// Points at +1 and -1 on a line: by symmetry b = 0 and the objective is
/// 2 L(w) + lambda w^2, minimised here by golden-section search.
fn brute_force_pair(spec: &LossSpec, lambda: f64) -> f64 {
    let f = |w: f64| 2.0 * logitron_value(spec, w).unwrap() + lambda * w * w;
    let (mut lo, mut hi) = (0.0, 100.0);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let a = hi - r * (hi - lo);
        let b = lo + r * (hi - lo);
        if f(a) <= f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn separable_pair_matches_one_dimensional_search() {
    let x = Array2::from_shape_vec((2, 1), vec![1.0, -1.0]).unwrap();
    let y = Array1::from(vec![1.0, -1.0]);
    let settings = SolverSettings { tol: 1e-10, ..SolverSettings::default() };
    for spec in smooth_specs() {
        for &lambda in &[0.01, 0.1, 1.0] {
            let obj = Objective::new(x.view(), y.view(), spec, lambda).unwrap();
            let (m, _) = minimize(&obj, &LinearModel::zeros(1), &settings).unwrap();
            let want = brute_force_pair(&spec, lambda);
            assert!((m.w[0] - want).abs() < 1e-5 * want.max(1.0), "{spec:?} lambda={lambda}: {} vs {want}", m.w[0]);
            assert!(m.b.abs() < 1e-6);
        }
    }
}

#[test]
fn bad_inputs_are_rejected() {
    let x = Array2::zeros((2, 1));
    assert!(Objective::new(x.view(), Array1::from(vec![1.0, 0.0]).view(), LossSpec::logistic(), 1.0).is_err());
    assert!(Objective::new(x.view(), Array1::from(vec![1.0]).view(), LossSpec::logistic(), 1.0).is_err());
    assert!(Objective::new(x.view(), Array1::from(vec![1.0, -1.0]).view(), LossSpec::logistic(), -1.0).is_err());
}
