mod common;

use std::collections::HashSet;
use std::sync::Arc;

use common::{dataset, indexed_sign_data, ConstantTrainer, Event, Recorder, RecordingTrainer, SignTrainer};
use proptest::prelude::*;
use spectral_bench::eval::{
    cross_validate, make_plan, mean, nested_cross_validate, shuffled_fold_indices,
    stratified_fold_indices, CvOptions, HyperparamGrid, ParamSet, ParamValue, Trainer,
};
use spectral_bench::{Algorithm, KnnConfig, Result, Rng};

fn opts(k: usize, seed: u64) -> CvOptions {
    CvOptions {
        k,
        seed,
        stratified: false,
        parallel: true,
    }
}

proptest! {
    #[test]
    fn fold_partition_invariants(n in 2usize..300, kf in 0.0f64..1.0, seed in any::<u64>(), strat in any::<bool>()) {
        let k = 2 + ((n.min(30) - 2) as f64 * kf) as usize;
        let plan = if strat {
            let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
            stratified_fold_indices(&labels, k, &mut Rng::new(seed)).unwrap()
        } else {
            shuffled_fold_indices(n, k, &mut Rng::new(seed)).unwrap()
        };
        prop_assert_eq!(plan.k(), k);
        let mut all: Vec<usize> = plan.folds.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let sizes = plan.sizes();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let again = if strat {
            let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
            stratified_fold_indices(&labels, k, &mut Rng::new(seed)).unwrap()
        } else {
            shuffled_fold_indices(n, k, &mut Rng::new(seed)).unwrap()
        };
        prop_assert_eq!(plan, again);
    }
}

#[test]
fn constant_predictor_scores_the_class_share() {
    let n = 1000;
    let labels: Vec<usize> = (0..n).map(|i| usize::from(i % 5 < 3)).collect();
    let rows = (0..n).map(|i| vec![i as f64]).collect();
    let data = dataset(rows, labels, 2);
    let out = cross_validate(&ConstantTrainer(1), &data, &opts(5, 3)).unwrap();
    let r = &out.report;
    assert!((r.mean_accuracy - 0.6).abs() <= 1e-12);
    assert!(r.fold_accuracies.iter().all(|a| (a - 0.6).abs() <= 0.1));
    assert!(r.std_accuracy < 0.1);
    assert!((mean(&r.fold_accuracies) - r.mean_accuracy).abs() <= 1e-12);
    assert_eq!(r.folds[0].metrics.specificity, Some(0.0));
    assert_eq!(r.folds[0].metrics.sensitivity, Some(1.0));
}

#[test]
fn leave_one_out_on_duplicates_is_perfect() {
    let mut rng = Rng::new(2);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..15 {
        let r: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
        rows.push(r.clone());
        rows.push(r);
        labels.extend([i % 2, i % 2]);
    }
    let data = dataset(rows, labels, 2);
    let knn = Algorithm::Knn(KnnConfig { k_neighbors: 1 });
    let out = cross_validate(&knn, &data, &opts(data.len(), 9)).unwrap();
    assert_eq!(out.report.mean_accuracy, 1.0);
    assert!(out.report.fold_sizes.iter().all(|&s| s == 1));
}

#[test]
fn representative_fold_is_closest_to_mean() {
    let data = indexed_sign_data(37, 5);
    let knn = Algorithm::Knn(KnnConfig { k_neighbors: 3 });
    for seed in 0..20 {
        let r = cross_validate(&knn, &data, &opts(5, seed)).unwrap().report;
        let m = r.mean_accuracy;
        let best = r.fold_accuracies.iter().map(|a| (a - m).abs()).fold(f64::INFINITY, f64::min);
        let rep = r.representative_fold;
        assert_eq!((r.fold_accuracies[rep] - m).abs(), best);
        assert!(r.fold_accuracies[..rep].iter().all(|a| (a - m).abs() > best));
    }
}

#[test]
fn trainer_errors_name_the_fold() {
    struct Failing;
    impl Trainer for Failing {
        fn fit(&self, _: spectral_bench::SampleView<'_>, _: &mut Rng) -> Result<Box<dyn spectral_bench::eval::Classifier>> {
            Err(spectral_bench::Error::Validation("boom".into()))
        }
    }
    let data = indexed_sign_data(10, 1);
    let err = cross_validate(&Failing, &data, &opts(5, 0)).unwrap_err();
    assert!(matches!(err, spectral_bench::Error::Fold { fold: 0, .. }), "{err}");
}

fn knn_factory(p: &ParamSet) -> Result<Box<dyn Trainer>> {
    Ok(Box::new(Algorithm::Knn(KnnConfig::default()).with_params(p)?))
}

#[test]
fn single_candidate_grid_equals_plain_cv() {
    let data = indexed_sign_data(40, 7);
    let grid = HyperparamGrid::single("k_neighbors", vec![ParamValue::Int(3)]).unwrap();
    let nested = nested_cross_validate(&knn_factory, &grid, &data, &opts(5, 4)).unwrap();
    let plain = cross_validate(&Algorithm::Knn(KnnConfig { k_neighbors: 3 }), &data, &opts(5, 4)).unwrap();
    assert_eq!(nested.report.fold_accuracies, plain.report.fold_accuracies);
}

#[test]
fn good_stub_always_wins() {
    let data = indexed_sign_data(50, 3);
    let grid = HyperparamGrid::single("quality", vec![ParamValue::Text("bad".into()), ParamValue::Text("good".into())]).unwrap();
    let factory = |p: &ParamSet| -> Result<Box<dyn Trainer>> {
        Ok(Box::new(SignTrainer { good: p.get("quality").unwrap().as_str() == Some("good") }))
    };
    let out = nested_cross_validate(&factory, &grid, &data, &opts(5, 1)).unwrap();
    for f in &out.report.folds {
        assert_eq!(f.params.as_ref().unwrap().to_string(), "quality=good");
        assert_eq!(f.accuracy, 1.0);
    }
}

#[test]
fn outer_test_fold_is_never_seen_by_the_search() {
    let n = 47;
    let k = 5;
    let data = indexed_sign_data(n, 11);
    let log = Arc::new(Recorder::default());
    let grid = HyperparamGrid::single("quality", vec![ParamValue::Text("good".into()), ParamValue::Text("bad".into())]).unwrap();
    let factory = |p: &ParamSet| -> Result<Box<dyn Trainer>> {
        Ok(Box::new(RecordingTrainer { log: Arc::clone(&log), good: p.get("quality").unwrap().as_str() == Some("good") }))
    };
    let o = CvOptions { parallel: false, ..opts(k, 21) };
    nested_cross_validate(&factory, &grid, &data, &o).unwrap();
    let plan = make_plan(&data, &o).unwrap();
    let events = log.events.lock().unwrap().clone();
    // Per outer fold: 2 candidates × (k − 1) inner fit/predict pairs, then the final fit/predict.
    let per_fold = 2 * (2 * (k - 1)) + 2;
    assert_eq!(events.len(), k * per_fold);
    for f in 0..k {
        let test: HashSet<usize> = plan.test(f).iter().copied().collect();
        let chunk = &events[f * per_fold..(f + 1) * per_fold];
        for e in &chunk[..per_fold - 2] {
            let ids = match e {
                Event::Fit(ids) | Event::Predict(ids) => ids,
            };
            assert!(ids.iter().all(|i| !test.contains(i)), "fold {f} leaked");
        }
        let Event::Fit(final_train) = &chunk[per_fold - 2] else { panic!() };
        let mut expect = plan.indices_excluding(&[f]);
        expect.sort_unstable();
        let mut got = final_train.clone();
        got.sort_unstable();
        assert_eq!(got, expect);
        let Event::Predict(tested) = &chunk[per_fold - 1] else { panic!() };
        assert_eq!(tested.as_slice(), plan.test(f));
    }
}

#[test]
fn reports_are_byte_identical_and_schedule_independent() {
    let data = indexed_sign_data(60, 2);
    let grid = HyperparamGrid::single("k_neighbors", [1, 3, 5, 7].map(ParamValue::Int).to_vec()).unwrap();
    let run = |parallel| {
        let o = CvOptions { parallel, ..opts(5, 99) };
        serde_json::to_string(&nested_cross_validate(&knn_factory, &grid, &data, &o).unwrap().report).unwrap()
    };
    let a = run(true);
    assert_eq!(a, run(true));
    assert_eq!(a, run(false));
    assert!(!a.contains("train_seconds"));
}

#[test]
fn nested_requires_three_folds() {
    let data = indexed_sign_data(20, 2);
    let grid = HyperparamGrid::single("k", vec![ParamValue::Int(1)]).unwrap();
    assert!(nested_cross_validate(&knn_factory, &grid, &data, &opts(2, 0)).is_err());
}

#[test]
fn timings_are_nonnegative_per_fold() {
    let data = indexed_sign_data(30, 2);
    let out = cross_validate(&Algorithm::Knn(KnnConfig::default()), &data, &opts(5, 1)).unwrap();
    assert_eq!(out.report.train_seconds.len(), 5);
    assert!(out.report.train_seconds.iter().all(|&t| t >= 0.0));
}
