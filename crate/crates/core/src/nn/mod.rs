//! One-dimensional convolutional network trained from scratch.
//!
//! Convolutions are valid cross-correlations with stride 1, pooling is
//! non-overlapping max pooling, dropout is inverted (scaled at training time),
//! and the output layer feeds a softmax with mean cross-entropy loss.
//! Gradients are computed by hand-written reverse-mode passes over cached
//! activations and applied with Adam.

mod model;
pub mod ops;
mod tensor;
mod train;

pub use model::{
    AdamParams, CnnConfig, CnnModel, ConvBlock, DropoutPlacement, Gradients, Layer, LossKind, Param,
};
pub use ops::{conv1d_forward, cross_entropy, dense_forward, maxpool1d, relu, softmax};
pub use tensor::Tensor3;
pub use train::{class_weights, train, Prediction, TrainOutput};
