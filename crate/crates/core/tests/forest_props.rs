use proptest::prelude::*;

use swp_core::forest::experiment::{fit_final, run_experiment, ModelConfig, Variant};
use swp_core::forest::importance::{impurity_importance, ranking};
use swp_core::forest::model_io::encode_forest;
use swp_core::forest::{train_forest, Hyperparams, Matrix, Targets, Task};
use swp_core::synthetic::{planted_samples, SceneConfig};

fn names(p: usize) -> Vec<String> {
    (0..p).map(|i| format!("x{i}")).collect()
}

fn hp(n_trees: usize, task: Task) -> Hyperparams {
    Hyperparams {
        n_trees,
        ..Hyperparams::defaults(task)
    }
}

/// Small integer-valued rows, so ties and duplicates are common.
fn rows(n: std::ops::Range<usize>, p: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec((-50i32..50).prop_map(f64::from), p), n)
}

/// Powers of three: no value is the midpoint of two others, so no point can
/// sit exactly on a split threshold where rounding would decide its side.
fn spread_rows(n: std::ops::Range<usize>, p: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec((0i32..12).prop_map(|k| 3f64.powi(k)), p), n)
}

fn two_classes(labels: &[usize]) -> bool {
    labels.iter().any(|&l| l != labels[0])
}

fn dedup(mut rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
    rows.dedup();
    rows
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn class_probabilities_sum_to_one(
        x in rows(4..60, 3),
        labels in prop::collection::vec(0usize..3, 60),
        probe in prop::collection::vec(-60.0f64..60.0, 3),
        trees in 1usize..40,
        seed in any::<u64>(),
    ) {
        let labels = labels[..x.len()].to_vec();
        prop_assume!(two_classes(&labels));
        let m = Matrix::from_rows(&x).unwrap();
        let t = Targets::Classification { labels, n_classes: 3 };
        let f = train_forest(&m, &t, &names(3), &hp(trees, Task::Classification), seed).unwrap();
        for row in x.iter().map(Vec::as_slice).chain([probe.as_slice()]) {
            let p = f.predict(row).unwrap();
            let sum: f64 = match &p {
                swp_core::forest::Prediction::Probabilities(p) => p.iter().sum(),
                _ => unreachable!(),
            };
            prop_assert!((sum - 1.0).abs() <= 1e-12, "sum {}", sum);
        }
    }

    #[test]
    fn scaling_features_leaves_predictions_unchanged(
        x in spread_rows(4..50, 4),
        y in prop::collection::vec(-8.0f64..0.0, 50),
        c in 1.0e-3f64..1.0e3,
        classify in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let n = x.len();
        let scaled: Vec<Vec<f64>> = x.iter().map(|r| r.iter().map(|v| v * c).collect()).collect();
        let (task, targets) = if classify {
            let labels: Vec<usize> = y[..n].iter().map(|v| ((-v) as usize).min(2)).collect();
            prop_assume!(two_classes(&labels));
            (Task::Classification, Targets::Classification { labels, n_classes: 3 })
        } else {
            (Task::Regression, Targets::Regression(y[..n].to_vec()))
        };
        let a = train_forest(&Matrix::from_rows(&x).unwrap(), &targets, &names(4), &hp(20, task), seed).unwrap();
        let b = train_forest(&Matrix::from_rows(&scaled).unwrap(), &targets, &names(4), &hp(20, task), seed).unwrap();
        for (r, s) in x.iter().zip(&scaled) {
            prop_assert_eq!(a.predict(r).unwrap(), b.predict(s).unwrap());
        }
    }

    #[test]
    fn unbagged_full_tree_fits_training_data_exactly(
        x in rows(2..60, 3).prop_map(dedup),
        y in prop::collection::vec(-8.0f64..0.0, 60),
        classify in any::<bool>(),
        seed in any::<u64>(),
    ) {
        prop_assume!(x.len() >= 2);
        let n = x.len();
        let task = if classify { Task::Classification } else { Task::Regression };
        let labels: Vec<usize> = y[..n].iter().map(|v| ((-v) as usize).min(2)).collect();
        let targets = match task {
            Task::Regression => Targets::Regression(y[..n].to_vec()),
            Task::Classification => {
                prop_assume!(two_classes(&labels));
                Targets::Classification { labels, n_classes: 3 }
            }
        };
        let params = Hyperparams { n_trees: 1, max_depth: None, min_leaf: 1, mtry: Some(3), bootstrap: false };
        let f = train_forest(&Matrix::from_rows(&x).unwrap(), &targets, &names(3), &params, seed).unwrap();
        for (i, r) in x.iter().enumerate() {
            let p = f.predict(r).unwrap();
            match &targets {
                Targets::Regression(y) => prop_assert_eq!(p.value(), Some(y[i])),
                Targets::Classification { labels, .. } => prop_assert_eq!(p.class(), Some(labels[i])),
            }
        }
    }
}

#[test]
fn identical_inputs_give_identical_reports_and_models() {
    let samples = planted_samples(&SceneConfig::default()).unwrap();
    for task in [Task::Regression, Task::Classification] {
        let mut config = ModelConfig::new(Variant::Full, task);
        config.hyperparams.n_trees = 60;
        config.repetitions = 3;
        config.cv_folds = Some(4);
        let a = run_experiment(&samples, &config, 9).unwrap();
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = single.install(|| run_experiment(&samples, &config, 9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());

        let fa = encode_forest(&fit_final(&samples, &config, 9).unwrap());
        let fb = single.install(|| encode_forest(&fit_final(&samples, &config, 9).unwrap()));
        assert_eq!(fa, fb);
        assert_ne!(fa, encode_forest(&fit_final(&samples, &config, 10).unwrap()));
    }
}

#[test]
fn planted_linear_signal_ranks_first() {
    // y = 10 * x0 with two uniform nuisance features
    let x: Vec<[f64; 3]> = (0..300)
        .map(|i| {
            let i = i as f64;
            [(i * 0.37) % 1.0, (i * 0.61) % 1.0, (i * 0.83) % 1.0]
        })
        .collect();
    let y: Vec<f64> = x.iter().map(|r| 10.0 * r[0]).collect();
    let f = train_forest(
        &Matrix::from_rows(&x).unwrap(),
        &Targets::Regression(y),
        &names(3),
        &hp(200, Task::Regression),
        3,
    )
    .unwrap();
    let scores = impurity_importance(&f).unwrap();
    assert_eq!(ranking(&scores)[0], 0);
    assert!(scores[0] > 5.0 * scores[1].max(scores[2]), "{scores:?}");
}
