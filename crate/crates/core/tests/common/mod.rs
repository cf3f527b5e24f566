#![allow(dead_code)]

use std::sync::{Arc, Mutex};

use spectral_bench::data::{LabeledDataset, SampleView};
use spectral_bench::eval::{Classifier, Trainer};
use spectral_bench::nn::{CnnConfig, CnnModel, ConvBlock, DropoutPlacement, Tensor3};
use spectral_bench::{Result, Rng};

pub fn names(c: usize) -> Vec<String> {
    (0..c).map(|i| format!("c{i}")).collect()
}

pub fn dataset(rows: Vec<Vec<f64>>, labels: Vec<usize>, c: usize) -> LabeledDataset {
    let p = rows[0].len();
    LabeledDataset::new((0..p).map(|j| j as f64).collect(), rows, labels, names(c)).unwrap()
}

pub fn random_rows(n: usize, dim: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.normal()).collect()).collect()
}

/// Two classes of `per_class` rows each; every feature of class 1 sits
/// `sep` noise standard deviations above class 0, on top of a smooth
/// shared baseline.
pub fn separated_classes(per_class: usize, len: usize, sep: f64, seed: u64) -> LabeledDataset {
    let mut rng = Rng::new(seed);
    let sigma = 0.1;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..2 * per_class {
        let c = i % 2;
        rows.push(
            (0..len)
                .map(|j| {
                    let base = (j as f64 / 6.0).sin();
                    base + c as f64 * sep * sigma + sigma * rng.normal()
                })
                .collect(),
        );
        labels.push(c);
    }
    dataset(rows, labels, 2)
}

/// One conv block (2 channels, kernel 3, pool 2), a hidden dense layer of
/// 8 units, no dropout.
pub fn reference_net(num_classes: usize) -> CnnConfig {
    CnnConfig {
        conv_blocks: vec![ConvBlock {
            out_channels: 2,
            kernel_size: 3,
            pool_size: 2,
        }],
        dense_hidden: vec![8],
        dropout_rate: 0.0,
        dropout_placement: DropoutPlacement::AfterFeatures,
        num_classes,
        ..CnnConfig::default()
    }
}

/// Default architecture with lr 0.001, Adam, batch 4, dropout 0.1, 500 epochs.
pub fn learnability_config() -> CnnConfig {
    CnnConfig {
        learning_rate: 0.001,
        epochs: 500,
        batch_size: 4,
        dropout_rate: 0.1,
        ..CnnConfig::default()
    }
}

pub struct GradCheck {
    pub checked: usize,
    pub worst_rel: f64,
    pub worst_name: String,
}

pub const FD_STEP: f64 = 1e-4;
/// Scale below which relative error is measured against this floor instead.
pub const GRAD_FLOOR: f64 = 1e-6;

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(GRAD_FLOOR)
}

/// Compare backprop gradients with central differences for every scalar
/// parameter of a freshly initialized reference net on 4 random samples.
pub fn gradient_check(seed: u64, weighted: bool) -> GradCheck {
    let mut rng = Rng::new(seed);
    let classes = 3;
    let len = 12;
    let mut model = CnnModel::new(&reference_net(classes), len, &mut rng).unwrap();
    // Perturb biases away from zero so every bias path is exercised.
    for p in model.params_mut() {
        for v in p.value.iter_mut() {
            *v += 0.05 * rng.normal();
        }
    }
    let rows = random_rows(4, len, &mut rng);
    let labels: Vec<usize> = (0..4).map(|i| i % classes).collect();
    let weights = weighted.then(|| vec![0.5, 1.5, 2.0]);
    let x = Tensor3::from_rows(&rows).unwrap();
    model.forward_train(&x, &mut rng).unwrap();
    let (_, grads) = model.backward(&labels, weights.as_deref()).unwrap();

    let mut out = GradCheck {
        checked: 0,
        worst_rel: 0.0,
        worst_name: String::new(),
    };
    let n_params = model.params().len();
    for pi in 0..n_params {
        let size = model.params()[pi].value.len();
        for e in 0..size {
            let orig = model.params()[pi].value[e];
            model.params_mut()[pi].value[e] = orig + FD_STEP;
            let up = model.loss(&rows, &labels, weights.as_deref()).unwrap();
            model.params_mut()[pi].value[e] = orig - FD_STEP;
            let down = model.loss(&rows, &labels, weights.as_deref()).unwrap();
            model.params_mut()[pi].value[e] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let rel = relative_error(grads.0[pi][e], numeric);
            out.checked += 1;
            if rel > out.worst_rel {
                out.worst_rel = rel;
                out.worst_name = format!("{}[{e}]", model.params()[pi].name);
            }
        }
    }
    out
}

/// Exhaustive-sort KNN oracle: full stable sort by (distance, index),
/// majority vote, ties to the nearest neighbour's class, then lowest id.
pub fn knn_oracle(rows: &[Vec<f64>], labels: &[usize], c: usize, k: usize, q: &[f64]) -> usize {
    let mut d: Vec<(f64, usize)> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let s: f64 = r.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum();
            (s.sqrt(), i)
        })
        .collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let mut votes = vec![0; c];
    for &(_, i) in &d[..k] {
        votes[labels[i]] += 1;
    }
    let top = *votes.iter().max().unwrap();
    let nearest = labels[d[0].1];
    if votes[nearest] == top {
        nearest
    } else {
        (0..c).find(|&j| votes[j] == top).unwrap()
    }
}

/// Rows `noise`-close to the span of `factors` orthonormal-ish latent
/// directions, with labels from the sign of the first latent score.
pub fn latent_factor_data(n: usize, p: usize, factors: usize, noise: f64, seed: u64) -> LabeledDataset {
    let mut rng = Rng::new(seed);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for _ in 0..factors {
        let mut v: Vec<f64> = (0..p).map(|_| rng.normal()).collect();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..n {
        let scores: Vec<f64> = (0..factors).map(|f| rng.normal() * (factors - f) as f64).collect();
        let mut row = vec![0.0; p];
        for (s, b) in scores.iter().zip(&basis) {
            row.iter_mut().zip(b).for_each(|(r, x)| *r += s * x);
        }
        row.iter_mut().for_each(|r| *r += noise * rng.normal());
        rows.push(row);
        labels.push(usize::from(scores[0] > 0.0));
    }
    // Guarantee both classes are present.
    labels[0] = 0;
    labels[1] = 1;
    dataset(rows, labels, 2)
}

/// Predicts one fixed class.
pub struct ConstantTrainer(pub usize);

struct Constant(usize);

impl Classifier for Constant {
    fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>> {
        Ok(vec![self.0; rows.len()])
    }
}

impl Trainer for ConstantTrainer {
    fn fit(&self, _train: SampleView<'_>, _rng: &mut Rng) -> Result<Box<dyn Classifier>> {
        Ok(Box::new(Constant(self.0)))
    }
}

/// Classifies by the sign of feature 1: `good` follows the rule the labels
/// were generated with, the other predicts the opposite.
pub struct SignTrainer {
    pub good: bool,
}

struct Sign(bool);

impl Classifier for Sign {
    fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>> {
        Ok(rows
            .iter()
            .map(|r| usize::from((r[1] > 0.0) == self.0))
            .collect())
    }
}

impl Trainer for SignTrainer {
    fn fit(&self, _train: SampleView<'_>, _rng: &mut Rng) -> Result<Box<dyn Classifier>> {
        Ok(Box::new(Sign(self.good)))
    }
}

/// Dataset whose feature 0 is the sample index and whose label is the sign
/// of feature 1, so trainers can report exactly which samples they touched.
pub fn indexed_sign_data(n: usize, seed: u64) -> LabeledDataset {
    let mut rng = Rng::new(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let v = rng.normal();
        rows.push(vec![i as f64, v, rng.normal()]);
        labels.push(usize::from(v > 0.0));
    }
    dataset(rows, labels, 2)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Fit(Vec<usize>),
    Predict(Vec<usize>),
}

/// Records every training index set and every predicted row id (feature 0).
#[derive(Default)]
pub struct Recorder {
    pub events: Mutex<Vec<Event>>,
}

#[derive(Clone)]
pub struct RecordingTrainer {
    pub log: Arc<Recorder>,
    pub good: bool,
}

struct RecordingClassifier {
    log: Arc<Recorder>,
    inner: Box<dyn Classifier>,
}

impl Classifier for RecordingClassifier {
    fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>> {
        let ids = rows.iter().map(|r| r[0] as usize).collect();
        self.log.events.lock().unwrap().push(Event::Predict(ids));
        self.inner.predict(rows)
    }
}

impl Trainer for RecordingTrainer {
    fn fit(&self, train: SampleView<'_>, rng: &mut Rng) -> Result<Box<dyn Classifier>> {
        let ids = train.rows().iter().map(|r| r[0] as usize).collect();
        self.log.events.lock().unwrap().push(Event::Fit(ids));
        Ok(Box::new(RecordingClassifier {
            log: Arc::clone(&self.log),
            inner: SignTrainer { good: self.good }.fit(train, rng)?,
        }))
    }
}

/// Two Gaussian clusters whose first coordinate differs by `sep` σ.
pub fn two_clusters(per: usize, dim: usize, sep: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = Rng::new(seed);
    let mut rows = Vec::new();
    let mut ids = Vec::new();
    for i in 0..2 * per {
        let c = i % 2;
        rows.push((0..dim).map(|d| rng.normal() + if d == 0 { c as f64 * sep } else { 0.0 }).collect());
        ids.push(c);
    }
    (rows, ids)
}

/// Agreement of a 2-means split (Lloyd iterations from the two farthest
/// points) with the true ids, up to label swap.
pub fn two_means_agreement(coords: &[[f64; 2]], ids: &[usize]) -> f64 {
    let d = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
    let first = coords[0];
    let far = *coords.iter().max_by(|a, b| d(**a, first).total_cmp(&d(**b, first))).unwrap();
    let other = *coords.iter().max_by(|a, b| d(**a, far).total_cmp(&d(**b, far))).unwrap();
    let mut centers = [far, other];
    let mut assign = vec![0; coords.len()];
    for _ in 0..50 {
        for (a, &c) in assign.iter_mut().zip(coords) {
            *a = usize::from(d(c, centers[1]) < d(c, centers[0]));
        }
        for (k, center) in centers.iter_mut().enumerate() {
            let members: Vec<&[f64; 2]> = coords.iter().zip(&assign).filter(|(_, &a)| a == k).map(|(c, _)| c).collect();
            if !members.is_empty() {
                let m = members.len() as f64;
                *center = [members.iter().map(|c| c[0]).sum::<f64>() / m, members.iter().map(|c| c[1]).sum::<f64>() / m];
            }
        }
    }
    let agree = assign.iter().zip(ids).filter(|(a, b)| a == b).count() as f64 / ids.len() as f64;
    agree.max(1.0 - agree)
}

