use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense (batch, channels, length) buffer in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor3 {
    shape: (usize, usize, usize),
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(batch: usize, channels: usize, length: usize) -> Self {
        Tensor3 {
            shape: (batch, channels, length),
            data: vec![0.0; batch * channels * length],
        }
    }

    pub fn from_vec(batch: usize, channels: usize, length: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != batch * channels * length {
            return Err(Error::Shape(format!(
                "buffer of {} values cannot hold shape ({batch}, {channels}, {length})",
                data.len()
            )));
        }
        Ok(Tensor3 {
            shape: (batch, channels, length),
            data,
        })
    }

    /// One single-channel sample per row.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let len = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != len) {
            return Err(Error::Shape(format!(
                "row {i} has length {}, expected {len}",
                rows[i].len()
            )));
        }
        let data = rows.iter().flatten().copied().collect();
        Tensor3::from_vec(rows.len(), 1, len, data)
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape.0
    }

    pub fn channels(&self) -> usize {
        self.shape.1
    }

    pub fn length(&self) -> usize {
        self.shape.2
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn idx(&self, b: usize, c: usize, t: usize) -> usize {
        (b * self.shape.1 + c) * self.shape.2 + t
    }

    #[inline]
    pub fn get(&self, b: usize, c: usize, t: usize) -> f64 {
        self.data[self.idx(b, c, t)]
    }

    /// Flattened features of sample `b`.
    pub fn sample(&self, b: usize) -> &[f64] {
        let n = self.shape.1 * self.shape.2;
        &self.data[b * n..(b + 1) * n]
    }

    /// Same buffer viewed as (batch, 1, channels * length).
    pub fn flatten(self) -> Tensor3 {
        let (b, c, l) = self.shape;
        Tensor3 {
            shape: (b, 1, c * l),
            data: self.data,
        }
    }

    pub fn reshape(self, channels: usize, length: usize) -> Result<Tensor3> {
        let b = self.shape.0;
        Tensor3::from_vec(b, channels, length, self.data)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
