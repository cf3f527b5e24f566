//! Spectral classification toolkit.
//!
//! Savitzky-Golay filtering, a small 1D CNN trained with Adam, KNN and
//! PLS-DA baselines, k-fold and nested cross-validation, and exact t-SNE.
//! Everything is deterministic for a given seed.

pub mod algorithm;
pub mod baselines;
pub mod checkpoint;
pub mod data;
pub mod embed;
pub mod error;
pub mod eval;
pub mod nn;
pub mod preprocess;
pub mod rng;

pub use algorithm::{Algorithm, TrainedModel};
pub use baselines::{knn_predict, KnnConfig, KnnModel, PlsConfig, PlsModel};
pub use checkpoint::Checkpoint;
pub use data::{load_csv, save_csv, LabeledDataset, SampleView, Spectrum};
pub use embed::{tsne_embed, TsneConfig, TsneResult};
pub use error::{Error, Result};
pub use eval::{
    confusion, cross_validate, diagnosis_metrics, nested_cross_validate, shuffled_fold_indices,
    ConfusionMatrix, CvOptions, CvReport, HyperparamGrid,
};
pub use nn::{CnnConfig, CnnModel};
pub use preprocess::{apply_sg, sg_coefficients, SgFilterSpec};
pub use rng::Rng;
