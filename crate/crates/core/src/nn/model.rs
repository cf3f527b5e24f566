use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

use super::ops;
use super::tensor::Tensor3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvBlock {
    pub out_channels: usize,
    pub kernel_size: usize,
    pub pool_size: usize,
}

/// Where dropout layers are inserted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropoutPlacement {
    /// Once, between the flattened convolutional features and the first dense layer.
    AfterFeatures,
    /// After every hidden dense layer's activation.
    BetweenDense,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Plain,
    /// Inverse-frequency class weights `n / (C · n_class)`.
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CnnConfig {
    pub conv_blocks: Vec<ConvBlock>,
    pub dense_hidden: Vec<usize>,
    pub dropout_rate: f64,
    pub dropout_placement: DropoutPlacement,
    pub num_classes: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub loss: LossKind,
    pub adam: AdamParams,
    pub seed: u64,
}

impl Default for CnnConfig {
    /// conv(16, k5) → ReLU → pool 2 → conv(32, k5) → ReLU → pool 2 → dropout
    /// → dense 64 → ReLU → dense C.
    fn default() -> Self {
        CnnConfig {
            conv_blocks: vec![
                ConvBlock {
                    out_channels: 16,
                    kernel_size: 5,
                    pool_size: 2,
                },
                ConvBlock {
                    out_channels: 32,
                    kernel_size: 5,
                    pool_size: 2,
                },
            ],
            dense_hidden: vec![64],
            dropout_rate: 0.1,
            dropout_placement: DropoutPlacement::AfterFeatures,
            num_classes: 2,
            learning_rate: 1e-3,
            epochs: 200,
            batch_size: 8,
            loss: LossKind::Plain,
            adam: AdamParams::default(),
            seed: 42,
        }
    }
}

impl CnnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Argument(m));
        for (i, b) in self.conv_blocks.iter().enumerate() {
            if b.kernel_size == 0 || b.pool_size == 0 || b.out_channels == 0 {
                return bad(format!("conv block {i} has a zero size: {b:?}"));
            }
        }
        if self.dense_hidden.contains(&0) {
            return bad("dense layer widths must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout rate {} not in [0, 1)", self.dropout_rate));
        }
        if self.num_classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.num_classes));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad(format!("invalid learning rate {}", self.learning_rate));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch size must be at least 1".into());
        }
        let a = &self.adam;
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || a.eps <= 0.0 {
            return bad(format!("invalid Adam parameters {a:?}"));
        }
        Ok(())
    }
}

/// A learnable tensor with its Adam moment estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Param {
    fn new(name: String, shape: Vec<usize>, value: Vec<f64>) -> Self {
        let n = value.len();
        Param {
            name,
            shape,
            value,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    fn he(name: String, shape: Vec<usize>, fan_in: usize, rng: &mut Rng) -> Self {
        let std = (2.0 / fan_in as f64).sqrt();
        let n = shape.iter().product();
        Param::new(name, shape, (0..n).map(|_| rng.normal() * std).collect())
    }

    fn zeros(name: String, n: usize) -> Self {
        Param::new(name, vec![n], vec![0.0; n])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Layer {
    Conv {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        weight: Param,
        bias: Param,
    },
    Relu,
    MaxPool {
        size: usize,
    },
    Dropout {
        rate: f64,
    },
    Flatten,
    Dense {
        inputs: usize,
        outputs: usize,
        weight: Param,
        bias: Param,
    },
}

#[derive(Debug, Clone)]
enum Cache {
    Input(Tensor3),
    Positive(Vec<bool>),
    Pool {
        input_shape: (usize, usize, usize),
        argmax: Vec<usize>,
    },
    Mask(Vec<f64>),
    Shape(usize, usize),
}

#[derive(Debug, Clone)]
struct ForwardCache {
    layers: Vec<Cache>,
    probs: Vec<Vec<f64>>,
}

/// Gradient buffers in the same order as [`CnnModel::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Vec<f64>>);

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CnnModel {
    pub config: CnnConfig,
    pub input_len: usize,
    pub layers: Vec<Layer>,
    /// Number of Adam steps taken.
    pub step: u64,
    #[serde(skip)]
    cache: Option<ForwardCache>,
}

impl PartialEq for CnnModel {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.input_len == other.input_len
            && self.layers == other.layers
            && self.step == other.step
    }
}

impl CnnModel {
    /// Build the layer graph for inputs of `input_len` samples with
    /// He-initialized weights and zero biases.
    pub fn new(config: &CnnConfig, input_len: usize, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let mut layers = Vec::new();
        let mut channels = 1;
        let mut len = input_len;
        for (i, block) in config.conv_blocks.iter().enumerate() {
            if len < block.kernel_size {
                return Err(Error::Shape(format!(
                    "conv block {i}: length {len} is shorter than kernel {}",
                    block.kernel_size
                )));
            }
            let fan_in = channels * block.kernel_size;
            layers.push(Layer::Conv {
                in_channels: channels,
                out_channels: block.out_channels,
                kernel: block.kernel_size,
                weight: Param::he(
                    format!("conv{i}.weight"),
                    vec![block.out_channels, channels, block.kernel_size],
                    fan_in,
                    rng,
                ),
                bias: Param::zeros(format!("conv{i}.bias"), block.out_channels),
            });
            layers.push(Layer::Relu);
            len = len - block.kernel_size + 1;
            channels = block.out_channels;
            if block.pool_size > 1 {
                if len < block.pool_size {
                    return Err(Error::Shape(format!(
                        "conv block {i}: length {len} is shorter than pool {}",
                        block.pool_size
                    )));
                }
                layers.push(Layer::MaxPool {
                    size: block.pool_size,
                });
                len /= block.pool_size;
            }
        }
        layers.push(Layer::Flatten);
        let mut width = channels * len;
        if config.dropout_placement == DropoutPlacement::AfterFeatures {
            layers.push(Layer::Dropout {
                rate: config.dropout_rate,
            });
        }
        let widths = config
            .dense_hidden
            .iter()
            .copied()
            .chain(std::iter::once(config.num_classes));
        let n_dense = config.dense_hidden.len() + 1;
        for (i, out) in widths.enumerate() {
            layers.push(Layer::Dense {
                inputs: width,
                outputs: out,
                weight: Param::he(format!("dense{i}.weight"), vec![out, width], width, rng),
                bias: Param::zeros(format!("dense{i}.bias"), out),
            });
            if i + 1 < n_dense {
                layers.push(Layer::Relu);
                if config.dropout_placement == DropoutPlacement::BetweenDense {
                    layers.push(Layer::Dropout {
                        rate: config.dropout_rate,
                    });
                }
            }
            width = out;
        }
        Ok(CnnModel {
            config: config.clone(),
            input_len,
            layers,
            step: 0,
            cache: None,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut out = Vec::new();
        for layer in &self.layers {
            if let Layer::Conv { weight, bias, .. } | Layer::Dense { weight, bias, .. } = layer {
                out.push(weight);
                out.push(bias);
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            if let Layer::Conv { weight, bias, .. } | Layer::Dense { weight, bias, .. } = layer {
                out.push(weight);
                out.push(bias);
            }
        }
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }

    fn check_input(&self, x: &Tensor3) -> Result<()> {
        if x.channels() != 1 || x.length() != self.input_len {
            return Err(Error::Shape(format!(
                "model expects (batch, 1, {}), got {:?}",
                self.input_len,
                x.shape()
            )));
        }
        Ok(())
    }

    /// Runs layers `[0, stop)`; records backward caches when `record` is set.
    /// Dropout draws masks only when `rng` is given.
    fn run(
        &self,
        x: &Tensor3,
        stop: usize,
        mut rng: Option<&mut Rng>,
        mut record: Option<&mut Vec<Cache>>,
    ) -> Result<Tensor3> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in &self.layers[..stop] {
            let (next, cache) = match layer {
                Layer::Conv {
                    out_channels,
                    kernel,
                    weight,
                    bias,
                    ..
                } => {
                    let y = ops::conv1d_forward(&h, &weight.value, &bias.value, *out_channels, *kernel)?;
                    (y, Cache::Input(h))
                }
                Layer::Relu => {
                    let positive: Vec<bool> = h.data().iter().map(|&v| v > 0.0).collect();
                    for v in h.data_mut() {
                        *v = v.max(0.0);
                    }
                    (h, Cache::Positive(positive))
                }
                Layer::MaxPool { size } => {
                    let (y, argmax) = ops::maxpool1d(&h, *size)?;
                    (
                        y,
                        Cache::Pool {
                            input_shape: h.shape(),
                            argmax,
                        },
                    )
                }
                Layer::Dropout { rate } => match rng.as_deref_mut() {
                    Some(r) if *rate > 0.0 => {
                        let keep = 1.0 / (1.0 - rate);
                        let mask: Vec<f64> = (0..h.data().len())
                            .map(|_| if r.uniform() >= *rate { keep } else { 0.0 })
                            .collect();
                        for (v, m) in h.data_mut().iter_mut().zip(&mask) {
                            *v *= m;
                        }
                        (h, Cache::Mask(mask))
                    }
                    _ => {
                        let n = h.data().len();
                        (h, Cache::Mask(vec![1.0; n]))
                    }
                },
                Layer::Flatten => {
                    let (_, c, l) = h.shape();
                    (h.flatten(), Cache::Shape(c, l))
                }
                Layer::Dense {
                    outputs,
                    weight,
                    bias,
                    ..
                } => {
                    let b = h.batch();
                    let mut data = Vec::with_capacity(b * outputs);
                    for s in 0..b {
                        data.extend(ops::dense_forward(h.sample(s), &weight.value, &bias.value)?);
                    }
                    let y = Tensor3::from_vec(b, 1, *outputs, data)?;
                    (y, Cache::Input(h))
                }
            };
            debug_assert!(next.all_finite(), "non-finite activation after {layer:?}");
            if let Some(rec) = record.as_deref_mut() {
                rec.push(cache);
            }
            h = next;
        }
        Ok(h)
    }

    /// Inference-mode logits (dropout disabled).
    pub fn logits(&self, x: &Tensor3) -> Result<Tensor3> {
        self.run(x, self.layers.len(), None, None)
    }

    /// Training-mode forward pass. Caches everything [`CnnModel::backward`]
    /// needs and returns per-sample class probabilities.
    pub fn forward_train(&mut self, x: &Tensor3, rng: &mut Rng) -> Result<Vec<Vec<f64>>> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let logits = self.run(x, self.layers.len(), Some(rng), Some(&mut caches))?;
        let probs: Vec<Vec<f64>> = (0..logits.batch())
            .map(|b| ops::softmax(logits.sample(b)))
            .collect();
        self.cache = Some(ForwardCache {
            layers: caches,
            probs: probs.clone(),
        });
        Ok(probs)
    }

    /// Activations entering the output layer, one vector per row.
    pub fn features(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let x = Tensor3::from_rows(rows)?;
        let h = self.run(&x, self.layers.len() - 1, None, None)?;
        Ok((0..h.batch()).map(|b| h.sample(b).to_vec()).collect())
    }

    /// Mean (optionally class-weighted) cross-entropy of the cached forward
    /// pass and the exact gradient of every parameter. Consumes the cache.
    pub fn backward(
        &mut self,
        labels: &[usize],
        class_weights: Option<&[f64]>,
    ) -> Result<(f64, Gradients)> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::State("backward called without a cached forward pass".into()))?;
        let batch = cache.probs.len();
        if labels.len() != batch {
            return Err(Error::Shape(format!(
                "{} labels for a batch of {batch}",
                labels.len()
            )));
        }
        let c = self.num_classes();
        if let Some(i) = labels.iter().position(|&l| l >= c) {
            return Err(Error::Argument(format!("label {} out of range", labels[i])));
        }
        if let Some(w) = class_weights {
            if w.len() != c {
                return Err(Error::Shape(format!("{} class weights for {c} classes", w.len())));
            }
        }
        let mut loss = 0.0;
        let mut grad = Tensor3::zeros(batch, 1, c);
        for (b, (p, &y)) in cache.probs.iter().zip(labels).enumerate() {
            let weight = class_weights.map_or(1.0, |w| w[y]);
            let mut target = vec![0.0; c];
            target[y] = weight;
            loss += ops::cross_entropy(&target, p)?;
            // d(-w·ln softmax_y)/dz = w·(p - onehot_y)
            for k in 0..c {
                let onehot = if k == y { 1.0 } else { 0.0 };
                let idx = grad.idx(b, 0, k);
                grad.data_mut()[idx] = weight * (p[k] - onehot) / batch as f64;
            }
        }
        loss /= batch as f64;

        let mut grads_rev: Vec<Vec<f64>> = Vec::new();
        for (layer, cache) in self.layers.iter().zip(cache.layers).rev() {
            grad = match (layer, cache) {
                (
                    Layer::Conv {
                        kernel, weight, ..
                    },
                    Cache::Input(x),
                ) => {
                    let (dx, dw, db) = ops::conv1d_backward(&x, &weight.value, &grad, *kernel);
                    grads_rev.push(db);
                    grads_rev.push(dw);
                    dx
                }
                (Layer::Relu, Cache::Positive(pos)) => {
                    for (g, p) in grad.data_mut().iter_mut().zip(pos) {
                        if !p {
                            *g = 0.0;
                        }
                    }
                    grad
                }
                (Layer::MaxPool { .. }, Cache::Pool { input_shape, argmax }) => {
                    ops::maxpool1d_backward(input_shape, &argmax, &grad)
                }
                (Layer::Dropout { .. }, Cache::Mask(mask)) => {
                    for (g, m) in grad.data_mut().iter_mut().zip(mask) {
                        *g *= m;
                    }
                    grad
                }
                (Layer::Flatten, Cache::Shape(ch, len)) => grad.reshape(ch, len)?,
                (
                    Layer::Dense {
                        inputs,
                        outputs,
                        weight,
                        ..
                    },
                    Cache::Input(x),
                ) => {
                    let mut dw = vec![0.0; inputs * outputs];
                    let mut db = vec![0.0; *outputs];
                    let mut dx = Tensor3::zeros(batch, 1, *inputs);
                    for b in 0..batch {
                        let g = grad.sample(b);
                        let xs = x.sample(b);
                        let dxb = &mut dx.data_mut()[b * inputs..(b + 1) * inputs];
                        for o in 0..*outputs {
                            let go = g[o];
                            db[o] += go;
                            let wrow = &weight.value[o * inputs..(o + 1) * inputs];
                            let dwrow = &mut dw[o * inputs..(o + 1) * inputs];
                            for i in 0..*inputs {
                                dwrow[i] += go * xs[i];
                                dxb[i] += wrow[i] * go;
                            }
                        }
                    }
                    grads_rev.push(db);
                    grads_rev.push(dw);
                    dx
                }
                (layer, _) => {
                    return Err(Error::State(format!("cache does not match layer {layer:?}")))
                }
            };
        }
        grads_rev.reverse();
        Ok((loss, Gradients(grads_rev)))
    }

    /// One Adam update with bias correction; the step counter advances even
    /// when every gradient is zero.
    pub fn adam_step(&mut self, grads: &Gradients) -> Result<()> {
        let lr = self.config.learning_rate;
        let AdamParams { beta1, beta2, eps } = self.config.adam;
        {
            let params = self.params();
            if params.len() != grads.0.len()
                || params.iter().zip(&grads.0).any(|(p, g)| p.value.len() != g.len())
            {
                return Err(Error::Shape("gradients do not match parameters".into()));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (p, g) in self.params_mut().into_iter().zip(&grads.0) {
            for i in 0..g.len() {
                p.m[i] = beta1 * p.m[i] + (1.0 - beta1) * g[i];
                p.v[i] = beta2 * p.v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = p.m[i] / c1;
                let v_hat = p.v[i] / c2;
                p.value[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
