//! Classical baselines: brute-force KNN and NIPALS PLS-DA.

mod knn;
mod pls;

pub use knn::{knn_predict, KnnConfig, KnnModel, KNN_K_GRID};
pub use pls::{
    choose_components, pls_fit, PlsConfig, PlsModel, PlsPrediction, VarianceBlock, NIPALS_MAX_ITER,
    NIPALS_TOL,
};
