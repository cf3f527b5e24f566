//! Uniform front for the three classifier families.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::baselines::{KnnConfig, KnnModel, PlsConfig, PlsModel, VarianceBlock};
use crate::checkpoint::{Checkpoint, NamedTensor};
use crate::data::SampleView;
use crate::error::{Error, Result};
use crate::eval::{Classifier, ParamSet, ParamValue, Trainer};
use crate::nn::{self, CnnConfig, CnnModel, LossKind};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "config", rename_all = "lowercase")]
pub enum Algorithm {
    Cnn(CnnConfig),
    Knn(KnnConfig),
    PlsDa(PlsConfig),
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Cnn(_) => "cnn",
            Algorithm::Knn(_) => "knn",
            Algorithm::PlsDa(_) => "plsda",
        }
    }

    /// Default configuration for an algorithm tag (`cnn`, `knn`, `plsda`).
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "cnn" => Ok(Algorithm::Cnn(CnnConfig::default())),
            "knn" => Ok(Algorithm::Knn(KnnConfig::default())),
            "plsda" | "pls-da" | "pls" => Ok(Algorithm::PlsDa(PlsConfig::default())),
            other => Err(Error::Argument(format!(
                "unknown algorithm {other:?} (expected cnn, knn or plsda)"
            ))),
        }
    }

    /// Copy with the named hyperparameters replaced.
    pub fn with_params(&self, params: &ParamSet) -> Result<Self> {
        let mut out = self.clone();
        for (key, value) in params.iter() {
            out.set(key, value)?;
        }
        Ok(out)
    }

    pub fn set(&mut self, key: &str, value: &ParamValue) -> Result<()> {
        let bad = || Error::Argument(format!("invalid value {value} for {key}"));
        let unknown = |algo: &str| Error::Argument(format!("unknown {algo} parameter {key:?}"));
        let as_usize = || value.as_usize().ok_or_else(bad);
        let as_f64 = || value.as_f64().ok_or_else(bad);
        match self {
            Algorithm::Knn(c) => match key {
                "k_neighbors" | "k" => c.k_neighbors = as_usize()?,
                _ => return Err(unknown("knn")),
            },
            Algorithm::PlsDa(c) => match key {
                "max_components" => c.max_components = as_usize()?,
                "variance_target" => c.variance_target = as_f64()?,
                "variance_block" => {
                    c.variance_block = match value.as_str() {
                        Some("x") | Some("X") => VarianceBlock::X,
                        Some("y") | Some("Y") => VarianceBlock::Y,
                        _ => return Err(bad()),
                    }
                }
                _ => return Err(unknown("plsda")),
            },
            Algorithm::Cnn(c) => match key {
                "learning_rate" | "lr" => c.learning_rate = as_f64()?,
                "epochs" => c.epochs = as_usize()?,
                "dropout_rate" | "dropout" => c.dropout_rate = as_f64()?,
                "batch_size" => c.batch_size = as_usize()?,
                "loss" => {
                    c.loss = match value.as_str() {
                        Some("plain") => LossKind::Plain,
                        Some("weighted") => LossKind::Weighted,
                        _ => return Err(bad()),
                    }
                }
                _ => return Err(unknown("cnn")),
            },
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Algorithm::Cnn(c) => c.validate(),
            Algorithm::Knn(c) if c.k_neighbors == 0 => {
                Err(Error::Argument("k_neighbors must be at least 1".into()))
            }
            Algorithm::PlsDa(c) if c.max_components == 0 => {
                Err(Error::Argument("max_components must be at least 1".into()))
            }
            Algorithm::PlsDa(c) if !(c.variance_target > 0.0 && c.variance_target <= 1.0) => Err(
                Error::Argument(format!("variance_target {} not in (0, 1]", c.variance_target)),
            ),
            _ => Ok(()),
        }
    }
}

impl Trainer for Algorithm {
    fn fit(&self, train: SampleView<'_>, rng: &mut Rng) -> Result<Box<dyn Classifier>> {
        let data = train.to_dataset();
        let model = match self {
            Algorithm::Cnn(c) => {
                let mut config = c.clone();
                config.num_classes = data.num_classes();
                TrainedModel::Cnn(nn::train(&config, &data, rng)?.model)
            }
            Algorithm::Knn(c) => TrainedModel::Knn(KnnModel::fit(&data, *c)?),
            Algorithm::PlsDa(c) => TrainedModel::PlsDa(PlsModel::fit(&data, *c)?),
        };
        Ok(Box::new(model))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Cnn(CnnModel),
    Knn(KnnModel),
    PlsDa(PlsModel),
}

fn matrix_tensor(name: &str, m: &DMatrix<f64>) -> NamedTensor {
    let data = m.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()).collect();
    NamedTensor::new(name, vec![m.nrows(), m.ncols()], data)
}

fn vector_tensor(name: &str, v: &[f64]) -> NamedTensor {
    NamedTensor::new(name, vec![v.len()], v.to_vec())
}

fn tensor_matrix(ck: &Checkpoint, name: &str) -> Result<DMatrix<f64>> {
    let t = ck.tensor(name)?;
    if t.shape.len() != 2 {
        return Err(Error::Checkpoint(format!("{name} is not a matrix")));
    }
    Ok(DMatrix::from_row_slice(t.shape[0], t.shape[1], &t.data))
}

fn tensor_vector(ck: &Checkpoint, name: &str) -> Result<Vec<f64>> {
    let t = ck.tensor(name)?;
    if t.shape.len() != 1 {
        return Err(Error::Checkpoint(format!("{name} is not a vector")));
    }
    Ok(t.data.clone())
}

fn meta_as<T: serde::de::DeserializeOwned>(ck: &Checkpoint, key: &str) -> Result<T> {
    serde_json::from_value(ck.meta(key)?.clone())
        .map_err(|e| Error::Checkpoint(format!("bad metadata field {key:?}: {e}")))
}

impl TrainedModel {
    pub fn algorithm(&self) -> &'static str {
        match self {
            TrainedModel::Cnn(_) => "cnn",
            TrainedModel::Knn(_) => "knn",
            TrainedModel::PlsDa(_) => "plsda",
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            TrainedModel::Cnn(m) => m.num_classes(),
            TrainedModel::Knn(m) => m.num_classes,
            TrainedModel::PlsDa(m) => m.num_classes(),
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(self.algorithm());
        let meta = &mut ck.metadata;
        match self {
            TrainedModel::Cnn(m) => {
                meta.insert("config".into(), serde_json::to_value(&m.config).unwrap());
                meta.insert("input_len".into(), Value::from(m.input_len));
                meta.insert("step".into(), Value::from(m.step));
                for p in m.params() {
                    ck.tensors.push(NamedTensor::new(&p.name, p.shape.clone(), p.value.clone()));
                    ck.tensors
                        .push(NamedTensor::new(format!("{}.adam_m", p.name), p.shape.clone(), p.m.clone()));
                    ck.tensors
                        .push(NamedTensor::new(format!("{}.adam_v", p.name), p.shape.clone(), p.v.clone()));
                }
            }
            TrainedModel::Knn(m) => {
                meta.insert("config".into(), serde_json::to_value(m.config).unwrap());
                meta.insert("num_classes".into(), Value::from(m.num_classes));
                let dim = m.rows.first().map_or(0, Vec::len);
                ck.tensors.push(NamedTensor::new(
                    "rows",
                    vec![m.rows.len(), dim],
                    m.rows.concat(),
                ));
                let labels: Vec<f64> = m.labels.iter().map(|&l| l as f64).collect();
                ck.tensors.push(vector_tensor("labels", &labels));
            }
            TrainedModel::PlsDa(m) => {
                meta.insert("config".into(), serde_json::to_value(m.config).unwrap());
                ck.tensors.push(vector_tensor("x_mean", m.x_mean.as_slice()));
                ck.tensors.push(vector_tensor("y_mean", m.y_mean.as_slice()));
                ck.tensors.push(matrix_tensor("weights", &m.weights));
                ck.tensors.push(matrix_tensor("x_loadings", &m.x_loadings));
                ck.tensors.push(matrix_tensor("y_loadings", &m.y_loadings));
                ck.tensors.push(vector_tensor("explained_x_variance", &m.explained_x_variance));
                ck.tensors.push(vector_tensor("explained_y_variance", &m.explained_y_variance));
            }
        }
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        match ck.algorithm.as_str() {
            "cnn" => {
                let config: CnnConfig = meta_as(ck, "config")?;
                let input_len: usize = meta_as(ck, "input_len")?;
                let mut model = CnnModel::new(&config, input_len, &mut Rng::new(0))?;
                model.step = meta_as(ck, "step")?;
                for p in model.params_mut() {
                    for (suffix, slot) in [("", &mut p.value), (".adam_m", &mut p.m), (".adam_v", &mut p.v)] {
                        let t = ck.tensor(&format!("{}{suffix}", p.name))?;
                        if t.shape != p.shape {
                            return Err(Error::Checkpoint(format!(
                                "tensor {} has shape {:?}, expected {:?}",
                                t.name, t.shape, p.shape
                            )));
                        }
                        slot.clone_from(&t.data);
                    }
                }
                Ok(TrainedModel::Cnn(model))
            }
            "knn" => {
                let config: KnnConfig = meta_as(ck, "config")?;
                let num_classes: usize = meta_as(ck, "num_classes")?;
                let rows = ck.tensor("rows")?;
                if rows.shape.len() != 2 || rows.shape[0] == 0 || rows.shape[1] == 0 {
                    return Err(Error::Checkpoint("KNN rows must be a nonempty matrix".into()));
                }
                let labels = tensor_vector(ck, "labels")?;
                if labels.len() != rows.shape[0] {
                    return Err(Error::Checkpoint("KNN labels do not match rows".into()));
                }
                Ok(TrainedModel::Knn(KnnModel {
                    config,
                    rows: rows.data.chunks(rows.shape[1]).map(<[f64]>::to_vec).collect(),
                    labels: labels.iter().map(|&l| l as usize).collect(),
                    num_classes,
                }))
            }
            "plsda" => {
                let config: PlsConfig = meta_as(ck, "config")?;
                let model = PlsModel::from_parts(
                    DVector::from_vec(tensor_vector(ck, "x_mean")?),
                    DVector::from_vec(tensor_vector(ck, "y_mean")?),
                    tensor_matrix(ck, "weights")?,
                    tensor_matrix(ck, "x_loadings")?,
                    tensor_matrix(ck, "y_loadings")?,
                    tensor_vector(ck, "explained_x_variance")?,
                    tensor_vector(ck, "explained_y_variance")?,
                    config,
                )
                .map_err(|e| Error::Checkpoint(e.to_string()))?;
                Ok(TrainedModel::PlsDa(model))
            }
            other => Err(Error::Checkpoint(format!("unknown algorithm tag {other:?}"))),
        }
    }

    /// Predicted classes plus a per-class score vector: softmax probabilities
    /// for the CNN, neighbour vote fractions for KNN, raw responses for PLS-DA.
    pub fn predict_scores(&self, rows: &[Vec<f64>]) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
        match self {
            TrainedModel::Cnn(m) => {
                let p = m.predict(rows)?;
                Ok((p.classes, p.probabilities))
            }
            TrainedModel::Knn(m) => {
                let classes = m.predict(rows)?;
                let votes = m.vote_fractions(rows)?;
                Ok((classes, votes))
            }
            TrainedModel::PlsDa(m) => {
                let p = m.predict(rows)?;
                Ok((p.classes, p.responses))
            }
        }
    }
}

impl Classifier for TrainedModel {
    fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>> {
        match self {
            TrainedModel::Cnn(m) => Ok(m.predict(rows)?.classes),
            TrainedModel::Knn(m) => m.predict(rows),
            TrainedModel::PlsDa(m) => Ok(m.predict(rows)?.classes),
        }
    }

    fn checkpoint(&self) -> Option<Checkpoint> {
        Some(self.to_checkpoint())
    }
}
