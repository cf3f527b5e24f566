use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::data::{LabeledDataset, SampleView};
use crate::error::{Error, Result};
use crate::rng::Rng;

use super::folds::{shuffled_fold_indices, stratified_fold_indices, FoldPlan};
use super::grid::{HyperparamGrid, ParamSet};
use super::metrics::{confusion, diagnosis_metrics, ConfusionMatrix, DiagnosisMetrics};

/// A fitted model that assigns class ids to rows.
pub trait Classifier: Send + Sync {
    fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>>;

    fn checkpoint(&self) -> Option<Checkpoint> {
        None
    }
}

/// Something that fits a [`Classifier`] on a selection of samples.
pub trait Trainer: Sync {
    fn fit(&self, train: SampleView<'_>, rng: &mut Rng) -> Result<Box<dyn Classifier>>;
}

/// Builds a trainer for one hyperparameter assignment.
pub type TrainerFactory<'a> = dyn Fn(&ParamSet) -> Result<Box<dyn Trainer>> + Sync + 'a;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvOptions {
    pub k: usize,
    pub seed: u64,
    pub stratified: bool,
    /// Run outer folds on the rayon pool.
    pub parallel: bool,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            k: 5,
            seed: 42,
            stratified: false,
            parallel: true,
        }
    }
}

/// Inner-loop result of one hyperparameter assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerScore {
    pub params: ParamSet,
    /// Validation fold id and accuracy, in fold order.
    pub accuracies: Vec<(usize, f64)>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub test_size: usize,
    pub accuracy: f64,
    pub metrics: DiagnosisMetrics,
    pub confusion: ConfusionMatrix,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub params: Option<ParamSet>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub inner_scores: Option<Vec<InnerScore>>,
}

/// Summary of one (nested) cross-validation run. Training times are kept out
/// of the serialized form so that repeated runs serialize identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub n: usize,
    pub seed: u64,
    pub stratified: bool,
    pub std_denominator: String,
    pub fold_sizes: Vec<usize>,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub representative_fold: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub representative_params: Option<ParamSet>,
    pub specificity_mean: Option<f64>,
    pub specificity_std: Option<f64>,
    pub sensitivity_mean: Option<f64>,
    pub sensitivity_std: Option<f64>,
    pub pooled_confusion: ConfusionMatrix,
    pub folds: Vec<FoldReport>,
    #[serde(skip)]
    pub train_seconds: Vec<f64>,
}

pub struct CvOutcome {
    pub report: CvReport,
    pub plan: FoldPlan,
    /// Model of the representative fold.
    pub representative: Box<dyn Classifier>,
}

impl std::fmt::Debug for CvOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CvOutcome")
            .field("report", &self.report)
            .field("plan", &self.plan)
            .finish_non_exhaustive()
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n − 1 denominator); 0 for fewer than 2 values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// Fold whose accuracy is closest to the mean; lowest id on ties.
pub fn representative_fold(accuracies: &[f64], mean: f64) -> usize {
    let mut best = 0;
    for (f, a) in accuracies.iter().enumerate().skip(1) {
        if (a - mean).abs() < (accuracies[best] - mean).abs() {
            best = f;
        }
    }
    best
}

pub fn make_plan(data: &LabeledDataset, opts: &CvOptions) -> Result<FoldPlan> {
    let mut rng = Rng::new(opts.seed);
    if opts.stratified {
        stratified_fold_indices(data.labels(), opts.k, &mut rng)
    } else {
        shuffled_fold_indices(data.len(), opts.k, &mut rng)
    }
}

/// Generator for the training run that produces fold `fold`'s model.
fn fold_rng(seed: u64, fold: usize) -> Rng {
    Rng::new(seed).child(fold as u64).child(0)
}

fn inner_rng(seed: u64, fold: usize, stream: usize) -> Rng {
    Rng::new(seed).child(fold as u64).child(1 + stream as u64)
}

/// Accuracy, confusion matrix and diagnosis metrics of `model` on `test`.
pub fn evaluate(
    model: &dyn Classifier,
    test: SampleView<'_>,
) -> Result<(f64, ConfusionMatrix, DiagnosisMetrics)> {
    let labels = test.labels();
    let preds = model.predict(&test.rows())?;
    let cm = confusion(&preds, &labels, test.dataset().num_classes())?;
    let metrics = diagnosis_metrics(&cm)?;
    Ok((metrics.accuracy, cm, metrics))
}

struct FoldRun {
    report: FoldReport,
    seconds: f64,
    model: Box<dyn Classifier>,
}

fn run_fold(
    trainer: &dyn Trainer,
    data: &LabeledDataset,
    plan: &FoldPlan,
    fold: usize,
    seed: u64,
) -> Result<FoldRun> {
    let train_idx = plan.indices_excluding(&[fold]);
    let start = Instant::now();
    let model = trainer.fit(SampleView::new(data, &train_idx), &mut fold_rng(seed, fold))?;
    let seconds = start.elapsed().as_secs_f64();
    let (accuracy, confusion, metrics) = evaluate(model.as_ref(), SampleView::new(data, plan.test(fold)))?;
    Ok(FoldRun {
        report: FoldReport {
            fold,
            test_size: plan.test(fold).len(),
            accuracy,
            metrics,
            confusion,
            params: None,
            inner_scores: None,
        },
        seconds,
        model,
    })
}

fn map_folds<T: Send>(
    k: usize,
    parallel: bool,
    f: impl Fn(usize) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    let results: Vec<Result<T>> = if parallel {
        (0..k).into_par_iter().map(|i| f(i)).collect()
    } else {
        (0..k).map(f).collect()
    };
    // First failing fold in id order, independent of scheduling.
    results
        .into_iter()
        .enumerate()
        .map(|(fold, r)| r.map_err(|e| e.in_fold(fold)))
        .collect()
}

fn optional_stats(values: impl Iterator<Item = Option<f64>>) -> (Option<f64>, Option<f64>) {
    let defined: Vec<f64> = values.flatten().collect();
    if defined.is_empty() {
        (None, None)
    } else {
        let std = (defined.len() >= 2).then(|| sample_std(&defined));
        (Some(mean(&defined)), std)
    }
}

fn assemble(runs: Vec<FoldRun>, plan: FoldPlan, opts: &CvOptions) -> CvOutcome {
    let fold_accuracies: Vec<f64> = runs.iter().map(|r| r.report.accuracy).collect();
    let mean_accuracy = mean(&fold_accuracies);
    let rep = representative_fold(&fold_accuracies, mean_accuracy);
    let (specificity_mean, specificity_std) =
        optional_stats(runs.iter().map(|r| r.report.metrics.specificity));
    let (sensitivity_mean, sensitivity_std) =
        optional_stats(runs.iter().map(|r| r.report.metrics.sensitivity));
    let c = runs[0].report.confusion.num_classes();
    let mut pooled = ConfusionMatrix {
        counts: vec![vec![0; c]; c],
    };
    for r in &runs {
        pooled.add(&r.report.confusion);
    }
    let train_seconds = runs.iter().map(|r| r.seconds).collect();
    let mut folds = Vec::with_capacity(runs.len());
    let mut representative = None;
    for (i, run) in runs.into_iter().enumerate() {
        if i == rep {
            representative = Some(run.model);
        }
        folds.push(run.report);
    }
    let report = CvReport {
        k: plan.k(),
        n: plan.n(),
        seed: opts.seed,
        stratified: plan.stratified,
        std_denominator: "n-1".into(),
        fold_sizes: plan.sizes(),
        std_accuracy: sample_std(&fold_accuracies),
        fold_accuracies,
        mean_accuracy,
        representative_fold: rep,
        representative_params: folds[rep].params.clone(),
        specificity_mean,
        specificity_std,
        sensitivity_mean,
        sensitivity_std,
        pooled_confusion: pooled,
        folds,
        train_seconds,
    };
    CvOutcome {
        report,
        plan,
        representative: representative.expect("representative fold exists"),
    }
}

/// Shuffle, split into k folds, and for every fold train on the rest and
/// test on it. Returns per-fold results, the mean and sample standard
/// deviation of the accuracies, and the model whose accuracy is closest to
/// the mean.
pub fn cross_validate(
    trainer: &dyn Trainer,
    data: &LabeledDataset,
    opts: &CvOptions,
) -> Result<CvOutcome> {
    let plan = make_plan(data, opts)?;
    let runs = map_folds(plan.k(), opts.parallel, |f| {
        run_fold(trainer, data, &plan, f, opts.seed)
    })?;
    Ok(assemble(runs, plan, opts))
}

/// Cross-validation with a hyperparameter search inside every outer fold.
///
/// For outer test fold `f`, each assignment in the grid is scored by using
/// every other fold `v` once as validation set while training on the folds
/// other than `f` and `v`. The assignment with the best mean validation
/// accuracy (first in grid order on ties) is retrained on all folds but `f`
/// and tested on `f`.
pub fn nested_cross_validate(
    factory: &TrainerFactory<'_>,
    grid: &HyperparamGrid,
    data: &LabeledDataset,
    opts: &CvOptions,
) -> Result<CvOutcome> {
    grid.validate()?;
    nested_search(factory, &grid.combinations(), data, opts)
}

/// [`nested_cross_validate`] over an explicit candidate list, e.g. the
/// output of [`HyperparamGrid::sample`].
pub fn nested_search(
    factory: &TrainerFactory<'_>,
    candidates: &[ParamSet],
    data: &LabeledDataset,
    opts: &CvOptions,
) -> Result<CvOutcome> {
    if candidates.is_empty() {
        return Err(Error::Argument("no hyperparameter candidates".into()));
    }
    if opts.k < 3 {
        return Err(Error::Argument(format!(
            "nested cross-validation needs at least 3 folds, got {}",
            opts.k
        )));
    }
    let combos = candidates;
    let trainers: Vec<Box<dyn Trainer>> = combos.iter().map(factory).collect::<Result<_>>()?;
    let plan = make_plan(data, opts)?;
    let k = plan.k();
    let runs = map_folds(k, opts.parallel, |f| {
        let start = Instant::now();
        let mut scores = Vec::with_capacity(combos.len());
        for (li, (params, trainer)) in combos.iter().zip(&trainers).enumerate() {
            let mut accuracies = Vec::with_capacity(k - 1);
            for v in (0..k).filter(|&v| v != f) {
                let train_idx = plan.indices_excluding(&[f, v]);
                let mut rng = inner_rng(opts.seed, f, li * k + v);
                let model = trainer.fit(SampleView::new(data, &train_idx), &mut rng)?;
                let (acc, _, _) = evaluate(model.as_ref(), SampleView::new(data, plan.test(v)))?;
                accuracies.push((v, acc));
            }
            let accs: Vec<f64> = accuracies.iter().map(|a| a.1).collect();
            scores.push(InnerScore {
                params: params.clone(),
                mean: mean(&accs),
                std: sample_std(&accs),
                accuracies,
            });
        }
        let mut best = 0;
        for (i, s) in scores.iter().enumerate().skip(1) {
            if s.mean > scores[best].mean {
                best = i;
            }
        }
        let mut run = run_fold(trainers[best].as_ref(), data, &plan, f, opts.seed)?;
        run.seconds = start.elapsed().as_secs_f64();
        run.report.params = Some(combos[best].clone());
        run.report.inner_scores = Some(scores);
        Ok(run)
    })?;
    Ok(assemble(runs, plan, opts))
}
