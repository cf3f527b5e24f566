//! Savitzky-Golay smoothing and differentiation.
//!
//! Every output sample is a derivative of the least-squares polynomial fitted
//! to a window of `window` samples. Interior samples use the window centered
//! on them, which reduces to a fixed correlation kernel. The first and last
//! `window / 2` samples evaluate the polynomial fitted to the first (last)
//! full window at the off-center offset, so the output length equals the
//! input length.
//!
//! Fit weights come from a Householder QR of the Vandermonde design matrix
//! `A[j][k] = (j - h)^k`: the least-squares coefficient vector is
//! `R⁻¹ Qᵀ y`, so the weights that evaluate the `d`-th derivative at offset
//! `t` are `Q R⁻ᵀ b` with `b[k] = k!/(k-d)! · t^(k-d)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{LabeledDataset, Spectrum};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgFilterSpec {
    pub window: usize,
    pub degree: usize,
    pub deriv_order: usize,
    /// Sample spacing; derivatives are divided by `delta^deriv_order`.
    pub delta: f64,
}

impl Default for SgFilterSpec {
    /// Window 11, cubic fit, second derivative.
    fn default() -> Self {
        SgFilterSpec {
            window: 11,
            degree: 3,
            deriv_order: 2,
            delta: 1.0,
        }
    }
}

impl SgFilterSpec {
    pub fn new(window: usize, degree: usize, deriv_order: usize) -> Result<Self> {
        let spec = SgFilterSpec {
            window,
            degree,
            deriv_order,
            delta: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        self.delta = delta;
        self.validate()?;
        Ok(self)
    }

    pub fn half_width(&self) -> usize {
        self.window / 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::Argument(format!(
                "window must be odd and at least 3, got {}",
                self.window
            )));
        }
        if self.degree >= self.window {
            return Err(Error::Argument(format!(
                "degree {} must be smaller than window {}",
                self.degree, self.window
            )));
        }
        if self.deriv_order > self.degree {
            return Err(Error::Argument(format!(
                "derivative order {} exceeds degree {}",
                self.deriv_order, self.degree
            )));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::Argument(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// QR factors of the window design matrix, reused for every evaluation offset.
struct WindowFit {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    half: f64,
    spec: SgFilterSpec,
}

impl WindowFit {
    fn new(spec: &SgFilterSpec) -> Self {
        let h = spec.half_width() as f64;
        let ncoef = spec.degree + 1;
        let design = DMatrix::from_fn(spec.window, ncoef, |j, k| (j as f64 - h).powi(k as i32));
        let qr = design.qr();
        WindowFit {
            q: qr.q(),
            r: qr.r(),
            half: h,
            spec: *spec,
        }
    }

    /// Weights over the window that give the fitted derivative at `offset`
    /// (relative to the window center).
    fn weights_at(&self, offset: f64) -> Vec<f64> {
        let d = self.spec.deriv_order;
        let ncoef = self.spec.degree + 1;
        let b = DVector::from_fn(ncoef, |k, _| {
            if k < d {
                0.0
            } else {
                let falling: f64 = ((k - d + 1)..=k).map(|f| f as f64).product();
                falling * offset.powi((k - d) as i32)
            }
        });
        // Solve Rᵀ z = b; R is upper triangular so Rᵀ is lower.
        let z = self
            .r
            .transpose()
            .solve_lower_triangular(&b)
            .expect("design matrix has full column rank");
        let scale = self.spec.delta.powi(d as i32);
        (&self.q * z).iter().map(|w| w / scale).collect()
    }
}

/// Correlation weights `c` such that `Σ_j c[j]·x[i + j - h]` is the fitted
/// `deriv_order`-th derivative at sample `i`.
pub fn sg_coefficients(spec: &SgFilterSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    Ok(WindowFit::new(spec).weights_at(0.0))
}

fn filter_row(row: &[f64], fit: &WindowFit, center: &[f64]) -> Vec<f64> {
    let w = fit.spec.window;
    let h = fit.spec.half_width();
    let n = row.len();
    let mut out = vec![0.0; n];
    for i in h..n - h {
        out[i] = center
            .iter()
            .zip(&row[i - h..i + h + 1])
            .map(|(c, x)| c * x)
            .sum();
    }
    let head = &row[..w];
    let tail = &row[n - w..];
    for e in 0..h {
        // offset of sample e relative to the center of the first window
        let weights = fit.weights_at(e as f64 - fit.half);
        out[e] = weights.iter().zip(head).map(|(c, x)| c * x).sum();
        // mirrored offset for the last window
        let weights = fit.weights_at(fit.half - e as f64);
        out[n - 1 - e] = weights.iter().zip(tail).map(|(c, x)| c * x).sum();
    }
    out
}

/// Filter a single row of samples, preserving its length.
pub fn apply_sg_row(row: &[f64], spec: &SgFilterSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    if row.len() < spec.window {
        return Err(Error::Validation(format!(
            "row of length {} is shorter than window {}",
            row.len(),
            spec.window
        )));
    }
    let fit = WindowFit::new(spec);
    let center = fit.weights_at(0.0);
    Ok(filter_row(row, &fit, &center))
}

pub fn apply_sg_spectrum(spectrum: &Spectrum, spec: &SgFilterSpec) -> Result<Spectrum> {
    let filtered = apply_sg_row(spectrum.absorbances(), spec)?;
    Ok(spectrum.with_absorbances(filtered))
}

/// Filter every row of a dataset; labels and grid are unchanged.
pub fn apply_sg(data: &LabeledDataset, spec: &SgFilterSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    if data.num_features() < spec.window {
        return Err(Error::Validation(format!(
            "row 0 has length {}, shorter than window {}",
            data.num_features(),
            spec.window
        )));
    }
    let fit = WindowFit::new(spec);
    let center = fit.weights_at(0.0);
    let rows = data
        .rows()
        .iter()
        .map(|r| filter_row(r, &fit, &center))
        .collect();
    data.with_rows(rows)
}
