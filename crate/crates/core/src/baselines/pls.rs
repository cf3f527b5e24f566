//! PLS-DA: PLS2 regression on one-hot class indicators, fitted with NIPALS.
//!
//! For each component, starting from the response column with the largest
//! sum of squares as `u`:
//!
//! ```text
//! repeat   w = Xᵀu / ‖Xᵀu‖ ;  t = Xw ;  q = Yᵀt / tᵀt ;  u = Yq / qᵀq
//! until    ‖t − t_prev‖ ≤ 1e-10 · ‖t‖   (at most 500 rounds)
//! p = Xᵀt / tᵀt ;  X ← X − t pᵀ ;  Y ← Y − t qᵀ
//! ```
//!
//! Component `a` explains `‖t_a‖²‖p_a‖²` of the centered X sum of squares
//! (and `‖t_a‖²‖q_a‖²` of Y). Predictions use `B = W (PᵀW)⁻¹ Qᵀ`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::ops::argmax;

pub const NIPALS_TOL: f64 = 1e-10;
pub const NIPALS_MAX_ITER: usize = 500;

/// Which block's explained variance decides the component count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceBlock {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlsConfig {
    pub variance_target: f64,
    pub max_components: usize,
    pub variance_block: VarianceBlock,
}

impl Default for PlsConfig {
    fn default() -> Self {
        PlsConfig {
            variance_target: 0.95,
            max_components: 20,
            variance_block: VarianceBlock::X,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlsModel {
    pub x_mean: DVector<f64>,
    pub y_mean: DVector<f64>,
    /// p × c
    pub weights: DMatrix<f64>,
    /// p × c
    pub x_loadings: DMatrix<f64>,
    /// C × c
    pub y_loadings: DMatrix<f64>,
    /// `W (PᵀW)⁻¹`, maps centered rows to scores; p × c
    pub rotations: DMatrix<f64>,
    /// p × C
    pub coefficients: DMatrix<f64>,
    pub explained_x_variance: Vec<f64>,
    pub explained_y_variance: Vec<f64>,
    pub config: PlsConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlsPrediction {
    pub classes: Vec<usize>,
    pub responses: Vec<Vec<f64>>,
    pub scores: Vec<Vec<f64>>,
}

struct Component {
    w: DVector<f64>,
    t: DVector<f64>,
    p: DVector<f64>,
    q: DVector<f64>,
}

fn nipals_component(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Option<Component> {
    let start = (0..y.ncols()).max_by(|&a, &b| {
        y.column(a)
            .norm_squared()
            .total_cmp(&y.column(b).norm_squared())
            .then(b.cmp(&a))
    })?;
    let mut u: DVector<f64> = y.column(start).into_owned();
    if u.norm() == 0.0 {
        return None;
    }
    let mut t_prev: Option<DVector<f64>> = None;
    let mut w = DVector::zeros(x.ncols());
    let mut t = DVector::zeros(x.nrows());
    let mut q = DVector::zeros(y.ncols());
    for _ in 0..NIPALS_MAX_ITER {
        w = x.tr_mul(&u);
        let wn = w.norm();
        if wn == 0.0 {
            return None;
        }
        w /= wn;
        t = x * &w;
        let tt = t.norm_squared();
        if tt == 0.0 {
            return None;
        }
        q = y.tr_mul(&t) / tt;
        let qq = q.norm_squared();
        if qq == 0.0 {
            return None;
        }
        u = y * &q / qq;
        if let Some(prev) = &t_prev {
            if (&t - prev).norm() <= NIPALS_TOL * t.norm() {
                break;
            }
        }
        t_prev = Some(t.clone());
    }
    let tt = t.norm_squared();
    let p = x.tr_mul(&t) / tt;
    Some(Component { w, t, p, q })
}

fn one_hot(labels: &[usize], c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(labels.len(), c, |i, j| if labels[i] == j { 1.0 } else { 0.0 })
}

fn center(m: &mut DMatrix<f64>) -> DVector<f64> {
    let mean = m.row_mean().transpose();
    for mut row in m.row_iter_mut() {
        row -= mean.transpose();
    }
    mean
}

impl PlsModel {
    pub fn fit(train: &LabeledDataset, config: PlsConfig) -> Result<Self> {
        let n = train.len();
        if n < 2 {
            return Err(Error::Argument(format!("PLS needs at least 2 rows, got {n}")));
        }
        if config.max_components == 0 {
            return Err(Error::Argument("max_components must be at least 1".into()));
        }
        if !(config.variance_target > 0.0 && config.variance_target <= 1.0) {
            return Err(Error::Argument(format!(
                "variance target {} not in (0, 1]",
                config.variance_target
            )));
        }
        let p = train.num_features();
        let mut x = DMatrix::from_fn(n, p, |i, j| train.rows()[i][j]);
        let mut y = one_hot(train.labels(), train.num_classes());
        let x_mean = center(&mut x);
        let y_mean = center(&mut y);
        let ss_x = x.norm_squared();
        let ss_y = y.norm_squared();
        if ss_x == 0.0 {
            return Err(Error::Validation("X has zero variance".into()));
        }
        if ss_y == 0.0 {
            return Err(Error::Validation(
                "training rows all belong to one class".into(),
            ));
        }

        let limit = config.max_components.min(n - 1).min(p);
        let mut comps = Vec::new();
        let mut ev_x = Vec::new();
        let mut ev_y = Vec::new();
        for _ in 0..limit {
            let Some(comp) = nipals_component(&x, &y) else {
                break;
            };
            let tt = comp.t.norm_squared();
            let ex = tt * comp.p.norm_squared() / ss_x;
            // Numerically exhausted X: nothing left to explain.
            if ex <= 1e-14 {
                break;
            }
            x -= &comp.t * comp.p.transpose();
            y -= &comp.t * comp.q.transpose();
            ev_x.push(ex);
            ev_y.push(tt * comp.q.norm_squared() / ss_y);
            comps.push(comp);
        }
        if comps.is_empty() {
            return Err(Error::Validation(
                "no PLS component could be extracted".into(),
            ));
        }
        let explained = match config.variance_block {
            VarianceBlock::X => &ev_x,
            VarianceBlock::Y => &ev_y,
        };
        let c = choose_components(explained, config.variance_target);
        comps.truncate(c);
        ev_x.truncate(c);
        ev_y.truncate(c);

        let weights = DMatrix::from_columns(&comps.iter().map(|k| k.w.clone()).collect::<Vec<_>>());
        let x_loadings =
            DMatrix::from_columns(&comps.iter().map(|k| k.p.clone()).collect::<Vec<_>>());
        let y_loadings =
            DMatrix::from_columns(&comps.iter().map(|k| k.q.clone()).collect::<Vec<_>>());
        Self::from_parts(x_mean, y_mean, weights, x_loadings, y_loadings, ev_x, ev_y, config)
    }

    /// Rebuild derived matrices from the stored factors.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        x_mean: DVector<f64>,
        y_mean: DVector<f64>,
        weights: DMatrix<f64>,
        x_loadings: DMatrix<f64>,
        y_loadings: DMatrix<f64>,
        explained_x_variance: Vec<f64>,
        explained_y_variance: Vec<f64>,
        config: PlsConfig,
    ) -> Result<Self> {
        let pw = x_loadings.tr_mul(&weights);
        let inv = pw
            .try_inverse()
            .ok_or_else(|| Error::Validation("PᵀW is singular".into()))?;
        let rotations = &weights * inv;
        let coefficients = &rotations * y_loadings.transpose();
        Ok(PlsModel {
            x_mean,
            y_mean,
            weights,
            x_loadings,
            y_loadings,
            rotations,
            coefficients,
            explained_x_variance,
            explained_y_variance,
            config,
        })
    }

    pub fn n_components(&self) -> usize {
        self.weights.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.y_mean.len()
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<PlsPrediction> {
        let p = self.x_mean.len();
        let mut out = PlsPrediction {
            classes: Vec::with_capacity(rows.len()),
            responses: Vec::with_capacity(rows.len()),
            scores: Vec::with_capacity(rows.len()),
        };
        for row in rows {
            if row.len() != p {
                return Err(Error::Shape(format!(
                    "row of length {} for a model fitted on {p} features",
                    row.len()
                )));
            }
            let xc = DVector::from_column_slice(row) - &self.x_mean;
            let scores = self.rotations.tr_mul(&xc);
            let response = self.coefficients.tr_mul(&xc) + &self.y_mean;
            let response: Vec<f64> = response.iter().copied().collect();
            out.classes.push(argmax(&response));
            out.responses.push(response);
            out.scores.push(scores.iter().copied().collect());
        }
        Ok(out)
    }
}

/// Smallest count whose cumulative explained fraction reaches `target`;
/// all components if it never does.
pub fn choose_components(explained: &[f64], target: f64) -> usize {
    let mut cum = 0.0;
    for (i, e) in explained.iter().enumerate() {
        cum += e;
        if cum >= target {
            return i + 1;
        }
    }
    explained.len()
}

pub fn pls_fit(train: &LabeledDataset, config: PlsConfig) -> Result<PlsModel> {
    PlsModel::fit(train, config)
}
