use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnConfig {
    pub k_neighbors: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig { k_neighbors: 3 }
    }
}

/// Search space for `k_neighbors` used by the nested search.
pub const KNN_K_GRID: [usize; 7] = [2, 3, 5, 10, 15, 20, 24];

/// A KNN "model" is its training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub config: KnnConfig,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl KnnModel {
    pub fn fit(train: &LabeledDataset, config: KnnConfig) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Argument("KNN needs at least one training row".into()));
        }
        if config.k_neighbors == 0 {
            return Err(Error::Argument("k_neighbors must be at least 1".into()));
        }
        if config.k_neighbors > train.len() {
            return Err(Error::Argument(format!(
                "k_neighbors {} exceeds {} training rows",
                config.k_neighbors,
                train.len()
            )));
        }
        Ok(KnnModel {
            config,
            rows: train.rows().to_vec(),
            labels: train.labels().to_vec(),
            num_classes: train.num_classes(),
        })
    }

    fn check_query(&self, q: &[f64]) -> Result<()> {
        let dim = self.rows[0].len();
        if q.len() != dim {
            return Err(Error::Shape(format!(
                "query of length {} for training rows of length {dim}",
                q.len()
            )));
        }
        Ok(())
    }

    pub fn predict(&self, queries: &[Vec<f64>]) -> Result<Vec<usize>> {
        queries
            .iter()
            .map(|q| {
                self.check_query(q)?;
                let (votes, nearest_class) = self.votes(q);
                let top = *votes.iter().max().expect("at least two classes");
                Ok(if votes[nearest_class] == top {
                    nearest_class
                } else {
                    votes.iter().position(|&v| v == top).expect("top exists")
                })
            })
            .collect()
    }

    /// Fraction of the k neighbours in each class, per query.
    pub fn vote_fractions(&self, queries: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let k = self.config.k_neighbors as f64;
        queries
            .iter()
            .map(|q| {
                self.check_query(q)?;
                Ok(self.votes(q).0.iter().map(|&v| v as f64 / k).collect())
            })
            .collect()
    }

    /// Per-class neighbour counts and the class of the single nearest row.
    fn votes(&self, query: &[f64]) -> (Vec<usize>, usize) {
        let k = self.config.k_neighbors;
        // Squared distances order the same as Euclidean ones.
        let mut dist: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let d = r.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                (d, i)
            })
            .collect();
        // Distance ties fall back to training-row index.
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        dist.select_nth_unstable_by(k - 1, order);
        let neighbors = &mut dist[..k];
        neighbors.sort_unstable_by(order);

        let mut votes = vec![0usize; self.num_classes];
        for &(_, i) in neighbors.iter() {
            votes[self.labels[i]] += 1;
        }
        (votes, self.labels[neighbors[0].1])
    }
}

/// Fit-and-predict convenience.
pub fn knn_predict(
    train: &LabeledDataset,
    config: KnnConfig,
    queries: &[Vec<f64>],
) -> Result<Vec<usize>> {
    KnnModel::fit(train, config)?.predict(queries)
}
