use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::Rng;

use super::model::{CnnConfig, CnnModel, LossKind};
use super::ops;
use super::tensor::Tensor3;

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: CnnModel,
    /// Mean training loss of each epoch.
    pub loss_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub classes: Vec<usize>,
    pub probabilities: Vec<Vec<f64>>,
}

/// `n / (C · n_class)` per class; classes absent from the data get weight 1.
pub fn class_weights(labels: &[usize], num_classes: usize) -> Vec<f64> {
    let mut counts = vec![0usize; num_classes];
    for &l in labels {
        counts[l] += 1;
    }
    let n = labels.len() as f64;
    counts
        .iter()
        .map(|&c| {
            if c == 0 {
                1.0
            } else {
                n / (num_classes as f64 * c as f64)
            }
        })
        .collect()
}

fn batch_tensor(rows: &[Vec<f64>], idx: &[usize]) -> Result<Tensor3> {
    let len = rows[idx[0]].len();
    let mut data = Vec::with_capacity(idx.len() * len);
    for &i in idx {
        data.extend_from_slice(&rows[i]);
    }
    Tensor3::from_vec(idx.len(), 1, len, data)
}

/// Mini-batch Adam training for a fixed number of epochs.
///
/// Weights are drawn from `rng` first, then each epoch draws a fresh
/// permutation and the dropout masks of its batches. The last partial batch
/// of an epoch is kept.
pub fn train(config: &CnnConfig, data: &LabeledDataset, rng: &mut Rng) -> Result<TrainOutput> {
    config.validate()?;
    let n = data.len();
    if n == 0 {
        return Err(Error::Argument("cannot train on an empty dataset".into()));
    }
    if config.num_classes != data.num_classes() {
        return Err(Error::Argument(format!(
            "config has {} classes, dataset has {}",
            config.num_classes,
            data.num_classes()
        )));
    }
    if config.batch_size > n {
        return Err(Error::Argument(format!(
            "batch size {} exceeds the {n} training samples",
            config.batch_size
        )));
    }
    let mut model = CnnModel::new(config, data.num_features(), rng)?;
    let weights = match config.loss {
        LossKind::Plain => None,
        LossKind::Weighted => Some(class_weights(data.labels(), config.num_classes)),
    };
    let rows = data.rows();
    let labels = data.labels();
    let mut loss_trace = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let order = rng.permutation(n);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let x = batch_tensor(rows, chunk)?;
            let y: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            model.forward_train(&x, rng)?;
            let (loss, grads) = model.backward(&y, weights.as_deref())?;
            model.adam_step(&grads)?;
            total += loss * chunk.len() as f64;
        }
        loss_trace.push(total / n as f64);
    }
    Ok(TrainOutput { model, loss_trace })
}

const PREDICT_CHUNK: usize = 64;

impl CnnModel {
    /// Class probabilities and argmax classes (lowest id on ties), dropout off.
    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Prediction> {
        let mut classes = Vec::with_capacity(rows.len());
        let mut probabilities = Vec::with_capacity(rows.len());
        for chunk in rows.chunks(PREDICT_CHUNK) {
            if let Some(r) = chunk.iter().find(|r| r.len() != self.input_len) {
                return Err(Error::Shape(format!(
                    "row of length {} for a model built for {}",
                    r.len(),
                    self.input_len
                )));
            }
            let logits = self.logits(&Tensor3::from_rows(chunk)?)?;
            for b in 0..logits.batch() {
                let z = logits.sample(b);
                classes.push(ops::argmax(z));
                probabilities.push(ops::softmax(z));
            }
        }
        Ok(Prediction {
            classes,
            probabilities,
        })
    }

    /// Mean batch loss in inference mode.
    pub fn loss(&self, rows: &[Vec<f64>], labels: &[usize], class_weights: Option<&[f64]>) -> Result<f64> {
        let logits = self.logits(&Tensor3::from_rows(rows)?)?;
        let c = self.num_classes();
        let mut total = 0.0;
        for (b, &y) in labels.iter().enumerate() {
            let mut target = vec![0.0; c];
            target[y] = class_weights.map_or(1.0, |w| w[y]);
            total += ops::cross_entropy(&target, &ops::softmax(logits.sample(b)))?;
        }
        Ok(total / labels.len() as f64)
    }
}
