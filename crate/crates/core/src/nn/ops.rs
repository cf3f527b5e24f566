//! Forward and backward kernels for the layer types.

use crate::error::{Error, Result};

use super::tensor::Tensor3;

/// Valid cross-correlation, stride 1.
/// `weights` is (out_channels, in_channels, kernel) row-major.
pub fn conv1d_forward(
    x: &Tensor3,
    weights: &[f64],
    bias: &[f64],
    out_channels: usize,
    kernel: usize,
) -> Result<Tensor3> {
    let (batch, in_ch, len) = x.shape();
    if kernel == 0 || weights.len() != out_channels * in_ch * kernel {
        return Err(Error::Shape(format!(
            "conv weights of {} values do not match ({out_channels}, {in_ch}, {kernel})",
            weights.len()
        )));
    }
    if bias.len() != out_channels {
        return Err(Error::Shape(format!(
            "conv bias has {} values for {out_channels} channels",
            bias.len()
        )));
    }
    if len < kernel {
        return Err(Error::Shape(format!(
            "input length {len} is shorter than kernel {kernel}"
        )));
    }
    let out_len = len - kernel + 1;
    let mut out = Tensor3::zeros(batch, out_channels, out_len);
    let xd = x.data();
    let od = out.data_mut();
    for b in 0..batch {
        for o in 0..out_channels {
            let orow = &mut od[(b * out_channels + o) * out_len..][..out_len];
            orow.fill(bias[o]);
            for i in 0..in_ch {
                let xrow = &xd[(b * in_ch + i) * len..][..len];
                let wrow = &weights[(o * in_ch + i) * kernel..][..kernel];
                for (tau, &w) in wrow.iter().enumerate() {
                    for (ov, xv) in orow.iter_mut().zip(&xrow[tau..tau + out_len]) {
                        *ov += w * xv;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Returns (d input, d weights, d bias).
pub fn conv1d_backward(
    x: &Tensor3,
    weights: &[f64],
    grad_out: &Tensor3,
    kernel: usize,
) -> (Tensor3, Vec<f64>, Vec<f64>) {
    let (batch, in_ch, len) = x.shape();
    let (_, out_ch, out_len) = grad_out.shape();
    let mut dx = Tensor3::zeros(batch, in_ch, len);
    let mut dw = vec![0.0; weights.len()];
    let mut db = vec![0.0; out_ch];
    let xd = x.data();
    let gd = grad_out.data();
    let dxd = dx.data_mut();
    for b in 0..batch {
        for o in 0..out_ch {
            let grow = &gd[(b * out_ch + o) * out_len..][..out_len];
            db[o] += grow.iter().sum::<f64>();
            for i in 0..in_ch {
                let base = (b * in_ch + i) * len;
                let wbase = (o * in_ch + i) * kernel;
                for tau in 0..kernel {
                    let xs = &xd[base + tau..base + tau + out_len];
                    dw[wbase + tau] += grow.iter().zip(xs).map(|(g, x)| g * x).sum::<f64>();
                    let w = weights[wbase + tau];
                    for (dxv, g) in dxd[base + tau..base + tau + out_len].iter_mut().zip(grow) {
                        *dxv += w * g;
                    }
                }
            }
        }
    }
    (dx, dw, db)
}

/// Non-overlapping max pooling; a trailing partial window is dropped.
/// Returns the pooled tensor and, per output element, the flat input index of
/// the maximum (first occurrence wins on ties).
pub fn maxpool1d(x: &Tensor3, pool: usize) -> Result<(Tensor3, Vec<usize>)> {
    if pool == 0 {
        return Err(Error::Shape("pool size must be at least 1".into()));
    }
    let (batch, ch, len) = x.shape();
    let out_len = len / pool;
    if out_len == 0 {
        return Err(Error::Shape(format!(
            "input length {len} is shorter than pool size {pool}"
        )));
    }
    let mut out = Tensor3::zeros(batch, ch, out_len);
    let mut argmax = vec![0; batch * ch * out_len];
    let xd = x.data();
    for row in 0..batch * ch {
        for t in 0..out_len {
            let start = row * len + t * pool;
            let mut best = start;
            for j in start + 1..start + pool {
                if xd[j] > xd[best] {
                    best = j;
                }
            }
            let o = row * out_len + t;
            out.data_mut()[o] = xd[best];
            argmax[o] = best;
        }
    }
    Ok((out, argmax))
}

pub fn maxpool1d_backward(
    input_shape: (usize, usize, usize),
    argmax: &[usize],
    grad_out: &Tensor3,
) -> Tensor3 {
    let (b, c, l) = input_shape;
    let mut dx = Tensor3::zeros(b, c, l);
    for (&src, &g) in argmax.iter().zip(grad_out.data()) {
        dx.data_mut()[src] += g;
    }
    dx
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

/// `W x + b` for one sample; `w` is (outputs, inputs) row-major.
pub fn dense_forward(x: &[f64], w: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let outputs = b.len();
    if w.len() != outputs * x.len() {
        return Err(Error::Shape(format!(
            "dense weights of {} values do not match {} outputs x {} inputs",
            w.len(),
            outputs,
            x.len()
        )));
    }
    Ok(w.chunks_exact(x.len())
        .zip(b)
        .map(|(row, bias)| bias + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
        .collect())
}

/// Max-subtracted softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub const PROB_FLOOR: f64 = 1e-12;

/// `-Σ target_i · ln(prob_i)`, with probabilities clamped at 1e-12.
pub fn cross_entropy(target: &[f64], prob: &[f64]) -> Result<f64> {
    if target.len() != prob.len() {
        return Err(Error::Shape(format!(
            "target has {} classes, prediction has {}",
            target.len(),
            prob.len()
        )));
    }
    Ok(-target
        .iter()
        .zip(prob)
        .map(|(t, p)| if *t == 0.0 { 0.0 } else { t * p.max(PROB_FLOOR).ln() })
        .sum::<f64>())
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn naive_conv(x: &Tensor3, w: &[f64], b: &[f64], oc: usize, k: usize) -> Vec<f64> {
        let (nb, ic, l) = x.shape();
        let ol = l - k + 1;
        let mut out = Vec::new();
        for bi in 0..nb {
            for o in 0..oc {
                for t in 0..ol {
                    let mut s = b[o];
                    for i in 0..ic {
                        for tau in 0..k {
                            s += w[(o * ic + i) * k + tau] * x.get(bi, i, t + tau);
                        }
                    }
                    out.push(s);
                }
            }
        }
        out
    }

    #[test]
    fn identity_kernel() {
        let x = Tensor3::from_vec(1, 1, 4, vec![1.0, -2.0, 3.0, 0.5]).unwrap();
        let y = conv1d_forward(&x, &[1.0], &[0.0], 1, 1).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn first_difference_kernel() {
        let x = Tensor3::from_vec(1, 1, 4, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = conv1d_forward(&x, &[1.0, -1.0], &[0.0], 1, 2).unwrap();
        assert_eq!(y.data(), &[-1.0, -1.0, -1.0]);
    }

    #[test]
    fn conv_matches_triple_loop() {
        let mut rng = Rng::new(42);
        let x = Tensor3::from_vec(1, 2, 7, (0..14).map(|_| rng.normal()).collect()).unwrap();
        let w: Vec<f64> = (0..18).map(|_| rng.normal()).collect();
        let b: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
        let y = conv1d_forward(&x, &w, &b, 3, 3).unwrap();
        assert_eq!(y.shape(), (1, 3, 5));
        for (a, e) in y.data().iter().zip(naive_conv(&x, &w, &b, 3, 3)) {
            assert!((a - e).abs() <= 1e-12);
        }
    }

    #[test]
    fn conv_shape_errors() {
        let x = Tensor3::zeros(1, 2, 3);
        assert!(conv1d_forward(&x, &[0.0; 3], &[0.0], 1, 3).is_err());
        assert!(conv1d_forward(&x, &[0.0; 8], &[0.0], 1, 4).is_err());
    }

    #[test]
    fn pool_examples() {
        let x = Tensor3::from_vec(1, 1, 6, vec![3.0, 1.0, 4.0, 1.0, 5.0, 9.0]).unwrap();
        let (y, idx) = maxpool1d(&x, 2).unwrap();
        assert_eq!(y.data(), &[3.0, 4.0, 9.0]);
        assert_eq!(idx, vec![0, 2, 5]);
        let (y1, _) = maxpool1d(&x, 1).unwrap();
        assert_eq!(y1.data(), x.data());
    }

    #[test]
    fn pool_matches_windowed_max() {
        let mut rng = Rng::new(9);
        let x = Tensor3::from_vec(2, 3, 11, (0..66).map(|_| rng.normal()).collect()).unwrap();
        let (y, _) = maxpool1d(&x, 3).unwrap();
        assert_eq!(y.shape(), (2, 3, 3));
        for b in 0..2 {
            for c in 0..3 {
                for t in 0..3 {
                    let m = (0..3)
                        .map(|j| x.get(b, c, 3 * t + j))
                        .fold(f64::NEG_INFINITY, f64::max);
                    assert_eq!(y.get(b, c, t), m);
                }
            }
        }
    }

    #[test]
    fn relu_and_softmax() {
        assert_eq!(relu(&[-1.0, 0.0, 2.0]), vec![0.0, 0.0, 2.0]);
        let s = softmax(&[0.0, 0.0, 0.0]);
        for v in &s {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let s = softmax(&[1000.0, 0.0]);
        assert!((s[0] - 1.0).abs() <= 1e-12 && s[1] >= 0.0 && s[1] <= 1e-12);
        assert!(s.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn dense_shape_error() {
        assert!(dense_forward(&[1.0, 2.0], &[1.0; 3], &[0.0]).is_err());
        assert_eq!(
            dense_forward(&[1.0, 2.0], &[1.0, 1.0, 2.0, -1.0], &[0.5, 0.0]).unwrap(),
            vec![3.5, 0.0]
        );
    }

    #[test]
    fn cross_entropy_examples() {
        assert!(cross_entropy(&[1.0, 0.0], &[1.0, 1e-300]).unwrap().abs() < 1e-12);
        let l = cross_entropy(&[0.0, 1.0], &[0.5, 0.5]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        let l = cross_entropy(&[0.0, 0.0, 1.0], &[0.2, 0.3, 0.5]).unwrap();
        assert!((l - (-(0.5f64).ln())).abs() < 1e-15);
        assert!(cross_entropy(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn argmax_prefers_lowest_on_tie() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }
}
