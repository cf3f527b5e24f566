//! Exact t-SNE for two-dimensional figure data.
//!
//! Rows are first put in a canonical (lexicographic) order, so the embedding
//! does not depend on input row order: permuting the rows permutes the output
//! the same way.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

pub const PERPLEXITY_TOL: f64 = 1e-5;
pub const PERPLEXITY_MAX_STEPS: usize = 50;
const MIN_GAIN: f64 = 0.01;
const INIT_STD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    /// Exaggeration applies to iterations `[0, exaggeration_iterations)`.
    pub exaggeration_iterations: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    /// First iteration using `final_momentum`.
    pub momentum_switch: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlPoint {
    pub iteration: usize,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsneResult {
    pub coords: Vec<[f64; 2]>,
    /// KL(P‖Q) of the initial layout, then every 50 iterations and at the end.
    pub kl_trace: Vec<KlPoint>,
}

/// Symmetrized joint affinities in input row order.
#[derive(Debug, Clone, PartialEq)]
pub struct Affinities {
    pub n: usize,
    /// Row-major n × n, zero diagonal.
    pub p: Vec<f64>,
    /// Per point, |ln(perplexity reached) − ln(target)|.
    pub log_perplexity_error: Vec<f64>,
}

fn squared_distances(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = rows[i]
                .iter()
                .zip(&rows[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Conditional distribution of one point for precision `beta`; returns
/// (probabilities, entropy in nats). `dist` excludes the point itself and is
/// shifted so its minimum is zero.
fn conditional(dist: &[f64], beta: f64, out: &mut [f64]) -> f64 {
    let mut sum = 0.0;
    for (o, &d) in out.iter_mut().zip(dist) {
        *o = (-beta * d).exp();
        sum += *o;
    }
    let mut weighted = 0.0;
    for (o, &d) in out.iter_mut().zip(dist) {
        *o /= sum;
        weighted += d * *o;
    }
    sum.ln() + beta * weighted
}

/// Bisection on the Gaussian precision of each point so the conditional
/// entropy equals ln(perplexity). Returns row-major conditional P and the
/// per-point entropy error.
fn conditional_affinities(dist: &[f64], n: usize, perplexity: f64) -> (Vec<f64>, Vec<f64>) {
    let target = perplexity.ln();
    let mut p = vec![0.0; n * n];
    let mut errors = vec![0.0; n];
    let mut others = vec![0.0; n - 1];
    let mut probs = vec![0.0; n - 1];
    for i in 0..n {
        let mut k = 0;
        for j in (0..n).filter(|&j| j != i) {
            others[k] = dist[i * n + j];
            k += 1;
        }
        let min = others.iter().copied().fold(f64::INFINITY, f64::min);
        others.iter_mut().for_each(|d| *d -= min);
        let mean = others.iter().sum::<f64>() / others.len() as f64;
        let mut beta = if mean > 0.0 { 1.0 / mean } else { 1.0 };
        let mut lo: Option<f64> = None;
        let mut hi: Option<f64> = None;
        let mut h = conditional(&others, beta, &mut probs);
        for _ in 0..PERPLEXITY_MAX_STEPS {
            let diff = h - target;
            if diff.abs() <= PERPLEXITY_TOL {
                break;
            }
            if diff > 0.0 {
                // entropy too high: sharpen
                lo = Some(beta);
                beta = hi.map_or(beta * 2.0, |h| (beta + h) / 2.0);
            } else {
                hi = Some(beta);
                beta = lo.map_or(beta / 2.0, |l| (beta + l) / 2.0);
            }
            h = conditional(&others, beta, &mut probs);
        }
        errors[i] = (h - target).abs();
        let mut k = 0;
        for j in (0..n).filter(|&j| j != i) {
            p[i * n + j] = probs[k];
            k += 1;
        }
    }
    (p, errors)
}

fn symmetrize(cond: &[f64], n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n * n];
    let scale = 1.0 / (2.0 * n as f64);
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) * scale;
        }
    }
    p
}

fn validate(n: usize, config: &TsneConfig) -> Result<()> {
    if n < 4 {
        return Err(Error::Argument(format!("t-SNE needs at least 4 rows, got {n}")));
    }
    if !(config.perplexity > 1.0) {
        return Err(Error::Argument(format!(
            "perplexity must exceed 1, got {}",
            config.perplexity
        )));
    }
    if config.perplexity >= n as f64 {
        return Err(Error::Argument(format!(
            "perplexity {} must be smaller than the number of rows {n}",
            config.perplexity
        )));
    }
    if config.iterations == 0 {
        return Err(Error::Argument("iterations must be at least 1".into()));
    }
    Ok(())
}

fn check_rows(rows: &[Vec<f64>]) -> Result<()> {
    let dim = rows.first().map_or(0, Vec::len);
    if let Some(i) = rows.iter().position(|r| r.len() != dim) {
        return Err(Error::Shape(format!(
            "row {i} has length {}, expected {dim}",
            rows[i].len()
        )));
    }
    Ok(())
}

pub fn joint_probabilities(rows: &[Vec<f64>], perplexity: f64) -> Result<Affinities> {
    check_rows(rows)?;
    let n = rows.len();
    validate(
        n,
        &TsneConfig {
            perplexity,
            ..TsneConfig::default()
        },
    )?;
    let dist = squared_distances(rows);
    let (cond, errors) = conditional_affinities(&dist, n, perplexity);
    Ok(Affinities {
        n,
        p: symmetrize(&cond, n),
        log_perplexity_error: errors,
    })
}

fn canonical_order(rows: &[Vec<f64>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| {
        rows[a]
            .iter()
            .zip(&rows[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// Student-t kernel values (row-major) and their off-diagonal sum.
fn student_t(y: &[[f64; 2]]) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut num = vec![0.0; n * n];
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            num[i * n + j] = v;
            num[j * n + i] = v;
            sum += 2.0 * v;
        }
    }
    (num, sum)
}

fn kl_divergence(p: &[f64], y: &[[f64; 2]]) -> f64 {
    let (num, sum) = student_t(y);
    p.iter()
        .zip(&num)
        .filter(|(&pij, _)| pij > 0.0)
        .map(|(&pij, &nij)| pij * (pij / (nij / sum).max(f64::MIN_POSITIVE)).ln())
        .sum()
}

pub fn tsne_embed(rows: &[Vec<f64>], config: &TsneConfig) -> Result<TsneResult> {
    check_rows(rows)?;
    let n = rows.len();
    validate(n, config)?;
    if !(config.learning_rate > 0.0) {
        return Err(Error::Argument("learning rate must be positive".into()));
    }

    let order = canonical_order(rows);
    let sorted: Vec<Vec<f64>> = order.iter().map(|&i| rows[i].clone()).collect();
    let dist = squared_distances(&sorted);
    let (cond, _) = conditional_affinities(&dist, n, config.perplexity);
    let p = symmetrize(&cond, n);

    let mut rng = Rng::new(config.seed);
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.normal() * INIT_STD, rng.normal() * INIT_STD])
        .collect();
    let mut update = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0; 2]; n];
    let mut kl_trace = vec![KlPoint {
        iteration: 0,
        kl: kl_divergence(&p, &y),
    }];

    for it in 0..config.iterations {
        let exaggeration = if it < config.exaggeration_iterations {
            config.early_exaggeration
        } else {
            1.0
        };
        let momentum = if it < config.momentum_switch {
            config.initial_momentum
        } else {
            config.final_momentum
        };
        let (num, sum) = student_t(&y);
        for i in 0..n {
            let mut grad = [0.0; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let nij = num[i * n + j];
                let coef = (exaggeration * p[i * n + j] - nij / sum) * nij;
                grad[0] += coef * (y[i][0] - y[j][0]);
                grad[1] += coef * (y[i][1] - y[j][1]);
            }
            for d in 0..2 {
                let g = 4.0 * grad[d];
                let gain = &mut gains[i][d];
                let next: f64 = if (g > 0.0) != (update[i][d] > 0.0) {
                    *gain + 0.2
                } else {
                    *gain * 0.8
                };
                *gain = next.max(MIN_GAIN);
                update[i][d] = momentum * update[i][d] - config.learning_rate * *gain * g;
            }
        }
        for (yi, ui) in y.iter_mut().zip(&update) {
            yi[0] += ui[0];
            yi[1] += ui[1];
        }
        let mx = y.iter().map(|v| v[0]).sum::<f64>() / n as f64;
        let my = y.iter().map(|v| v[1]).sum::<f64>() / n as f64;
        for v in &mut y {
            v[0] -= mx;
            v[1] -= my;
        }
        let done = it + 1;
        if done % 50 == 0 || done == config.iterations {
            kl_trace.push(KlPoint {
                iteration: done,
                kl: kl_divergence(&p, &y),
            });
        }
    }

    let mut coords = vec![[0.0; 2]; n];
    for (sorted_pos, &original) in order.iter().enumerate() {
        coords[original] = y[sorted_pos];
    }
    Ok(TsneResult { coords, kl_trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_rows(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = Rng::new(seed);
        (0..n).map(|_| (0..dim).map(|_| rng.normal()).collect()).collect()
    }

    #[test]
    fn rejects_bad_perplexity_and_tiny_inputs() {
        let rows = random_rows(10, 3, 0);
        let cfg = TsneConfig {
            perplexity: 10.0,
            ..TsneConfig::default()
        };
        assert!(matches!(tsne_embed(&rows, &cfg), Err(Error::Argument(_))));
        assert!(tsne_embed(&rows[..3], &TsneConfig::default()).is_err());
    }

    #[test]
    fn affinities_are_a_symmetric_distribution() {
        let rows = random_rows(40, 5, 1);
        let a = joint_probabilities(&rows, 10.0).unwrap();
        let total: f64 = a.p.iter().sum();
        assert!((total - 1.0).abs() <= 1e-9);
        for i in 0..a.n {
            assert_eq!(a.p[i * a.n + i], 0.0);
            for j in 0..a.n {
                assert!(a.p[i * a.n + j] >= 0.0);
                assert_eq!(a.p[i * a.n + j], a.p[j * a.n + i]);
            }
        }
        assert!(a.log_perplexity_error.iter().all(|&e| e <= PERPLEXITY_TOL));
    }

    #[test]
    fn same_seed_same_embedding() {
        let rows = random_rows(30, 4, 2);
        let cfg = TsneConfig {
            perplexity: 5.0,
            iterations: 120,
            ..TsneConfig::default()
        };
        let a = tsne_embed(&rows, &cfg).unwrap();
        let b = tsne_embed(&rows, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            a.kl_trace.iter().map(|k| k.iteration).collect::<Vec<_>>(),
            vec![0, 50, 100, 120]
        );
    }
}
