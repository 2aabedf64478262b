//! Exact O(n²) t-distributed stochastic neighbour embedding.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub n_iterations: usize,
    pub learning_rate: f64,
    pub output_dim: usize,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self { perplexity: 30.0, n_iterations: 1000, learning_rate: 200.0, output_dim: 2 }
    }
}

const MAX_POINTS: usize = 2000;
const EXAGGERATION: f64 = 4.0;
const EXAGGERATION_ITERS: usize = 100;
const MOMENTUM_SWITCH: usize = 250;

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub dim: usize,
    /// Row-major `n × dim` coordinates.
    pub points: Vec<f64>,
    pub cost: f64,
    /// Cost after every iteration, measured against the unexaggerated affinities.
    pub cost_history: Vec<f64>,
}

impl Embedding {
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `x,y,mode` rows for a two-dimensional embedding.
    pub fn write_csv<W: Write>(&self, mut w: W, modes: &[usize]) -> Result<()> {
        if self.dim != 2 || modes.len() != self.len() {
            return Err(invalid("CSV output needs a 2D embedding and one mode per point"));
        }
        writeln!(w, "x,y,mode")?;
        for (i, m) in modes.iter().enumerate() {
            let p = self.point(i);
            writeln!(w, "{},{},{m}", p[0], p[1])?;
        }
        Ok(())
    }
}

fn squared_distances<T: AsRef<[f64]>>(data: &[T]) -> Vec<f64> {
    let n = data.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = data[i].as_ref().iter().zip(data[j].as_ref()).map(|(a, b)| (a - b) * (a - b)).sum();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Conditional row `p_{·|i}` for precision `beta`; returns the entropy in nats.
fn conditional_row(dist: &[f64], i: usize, beta: f64, row: &mut [f64]) -> f64 {
    let min = dist.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &d)| d).fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    for (j, (r, &d)) in row.iter_mut().zip(dist).enumerate() {
        *r = if j == i { 0.0 } else { (-(d - min) * beta).exp() };
        sum += *r;
    }
    let mut h = 0.0;
    for (j, r) in row.iter_mut().enumerate() {
        *r /= sum;
        if j != i && *r > 0.0 {
            h -= *r * r.ln();
        }
    }
    h
}

/// Symmetrised affinities `p_ij = (p_{j|i} + p_{i|j}) / 2n` with each
/// bandwidth solved so that the perplexity matches.
pub fn tsne_affinities<T: AsRef<[f64]>>(data: &[T], perplexity: f64) -> Result<Vec<f64>> {
    let n = data.len();
    if n < 2 {
        return Err(Error::Empty("tSNE needs at least two points"));
    }
    if !(perplexity > 0.0 && perplexity < n as f64) {
        return Err(invalid(format!("perplexity {perplexity} must lie in (0, {n})")));
    }
    let dist = squared_distances(data);
    if dist.iter().all(|&d| d == 0.0) {
        return Err(Error::Degenerate("all tSNE inputs are identical".into()));
    }
    let target = perplexity.ln();
    let mut cond = vec![0.0; n * n];
    for i in 0..n {
        let drow = &dist[i * n..(i + 1) * n];
        let row = &mut cond[i * n..(i + 1) * n];
        let (mut lo, mut hi, mut beta) = (0.0f64, f64::INFINITY, 1.0f64);
        // scale the starting precision to the data
        let mean_d = drow.iter().sum::<f64>() / (n - 1) as f64;
        if mean_d > 0.0 {
            beta = 1.0 / mean_d;
        }
        for _ in 0..200 {
            let h = conditional_row(drow, i, beta, row);
            // perplexity within 1e-4 relative, i.e. entropy within ~1e-4 nats
            if (h - target).abs() < 1e-5 {
                break;
            }
            if h > target {
                lo = beta;
                beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
        }
    }
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) / (2.0 * n as f64);
        }
    }
    Ok(p)
}

/// `C = KL(P‖Q)` and its gradient with respect to the embedding `y`.
pub fn tsne_cost_gradient(p: &[f64], y: &[f64], dim: usize) -> (f64, Vec<f64>) {
    let n = y.len() / dim;
    let mut num = vec![0.0; n * n];
    let mut z = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let d: f64 = (0..dim).map(|k| (y[i * dim + k] - y[j * dim + k]).powi(2)).sum();
            let q = 1.0 / (1.0 + d);
            num[i * n + j] = q;
            num[j * n + i] = q;
            z += 2.0 * q;
        }
    }
    let mut cost = 0.0;
    let mut grad = vec![0.0; n * dim];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let pij = p[i * n + j];
            let qij = num[i * n + j] / z;
            if pij > 0.0 {
                cost += pij * (pij / qij.max(f64::MIN_POSITIVE)).ln();
            }
            let mult = 4.0 * (pij - qij) * num[i * n + j];
            for k in 0..dim {
                grad[i * dim + k] += mult * (y[i * dim + k] - y[j * dim + k]);
            }
        }
    }
    (cost, grad)
}

pub fn tsne_cost(p: &[f64], y: &[f64], dim: usize) -> f64 {
    tsne_cost_gradient(p, y, dim).0
}

pub fn tsne_embed<T: AsRef<[f64]>, R: Rng + ?Sized>(samples: &[T], cfg: &TsneConfig, rng: &mut R) -> Result<Embedding> {
    let n = samples.len();
    if n > MAX_POINTS {
        return Err(invalid(format!("tSNE is capped at {MAX_POINTS} points, got {n}")));
    }
    if cfg.output_dim == 0 || !(cfg.learning_rate > 0.0) {
        return Err(invalid("tSNE needs a positive output dimension and learning rate"));
    }
    if (n as f64) < 3.0 * cfg.perplexity {
        return Err(invalid(format!("{n} points are too few for perplexity {}", cfg.perplexity)));
    }
    let p = tsne_affinities(samples, cfg.perplexity)?;
    let dim = cfg.output_dim;
    let init = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y: Vec<f64> = (0..n * dim).map(|_| init.sample(rng)).collect();
    let mut update = vec![0.0; n * dim];
    let mut gains = vec![1.0f64; n * dim];
    let exaggerated: Vec<f64> = p.iter().map(|x| x * EXAGGERATION).collect();
    let mut history = Vec::with_capacity(cfg.n_iterations);
    for it in 0..cfg.n_iterations {
        let early = it < EXAGGERATION_ITERS;
        let (_, grad) = tsne_cost_gradient(if early { &exaggerated } else { &p }, &y, dim);
        let momentum = if it < MOMENTUM_SWITCH { 0.5 } else { 0.8 };
        for ((g, u), (gain, yi)) in grad.iter().zip(update.iter_mut()).zip(gains.iter_mut().zip(y.iter_mut())) {
            *gain = if (*g > 0.0) != (*u > 0.0) { *gain + 0.2 } else { (*gain * 0.8).max(0.01) };
            *u = momentum * *u - cfg.learning_rate * *gain * g;
            *yi += *u;
        }
        for k in 0..dim {
            let mean = (0..n).map(|i| y[i * dim + k]).sum::<f64>() / n as f64;
            (0..n).for_each(|i| y[i * dim + k] -= mean);
        }
        history.push(tsne_cost(&p, &y, dim));
    }
    let cost = history.last().copied().unwrap_or_else(|| tsne_cost(&p, &y, dim));
    Ok(Embedding { dim, points: y, cost, cost_history: history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn two_point_affinities_are_symmetric() {
        let p = tsne_affinities(&[vec![0.0, 1.0], vec![2.0, 0.5]], 1.0).unwrap();
        assert_eq!(p[1], p[2]);
        assert!((p[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn perplexity_is_matched() {
        let mut rng = seeded(1);
        let data: Vec<Vec<f64>> = (0..40).map(|_| (0..5).map(|_| rng.random::<f64>()).collect()).collect();
        let dist = squared_distances(&data);
        let n = data.len();
        // recover row conditionals from P is not possible, so re-solve one row directly
        let p = tsne_affinities(&data, 10.0).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let mut row = vec![0.0; n];
        let (mut lo, mut hi) = (1e-6, 1e6);
        for _ in 0..200 {
            let mid = (lo * hi as f64).sqrt();
            let h = conditional_row(&dist[..n], 0, mid, &mut row);
            if h > 10f64.ln() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let h = conditional_row(&dist[..n], 0, lo, &mut row);
        assert!((h.exp() - 10.0).abs() < 1e-4);
    }

    #[test]
    fn identical_inputs_are_degenerate() {
        let data = vec![vec![1.0, 2.0]; 10];
        assert!(matches!(tsne_affinities(&data, 3.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn too_many_points_rejected() {
        let data = vec![vec![0.0]; MAX_POINTS + 1];
        assert!(tsne_embed(&data, &TsneConfig::default(), &mut seeded(0)).is_err());
    }

    fn random_problem(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = seeded(seed);
        let data: Vec<Vec<f64>> = (0..n).map(|_| (0..4).map(|_| rng.random::<f64>()).collect()).collect();
        let p = tsne_affinities(&data, 3.0).unwrap();
        let y: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        (p, y)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (p, y) = random_problem(10, 2);
        let (_, grad) = tsne_cost_gradient(&p, &y, 2);
        let h = 1e-5;
        let mut num = vec![0.0; y.len()];
        for i in 0..y.len() {
            let (mut a, mut b) = (y.clone(), y.clone());
            a[i] += h;
            b[i] -= h;
            num[i] = (tsne_cost(&p, &a, 2) - tsne_cost(&p, &b, 2)) / (2.0 * h);
        }
        let diff: f64 = grad.iter().zip(&num).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = num.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(diff / norm < 1e-4, "relative error {}", diff / norm);
    }

    #[test]
    fn cost_is_lower_after_optimisation() {
        let mut rng = seeded(3);
        let data: Vec<Vec<f64>> = (0..60).map(|_| (0..6).map(|_| rng.random::<f64>()).collect()).collect();
        let cfg = TsneConfig { perplexity: 10.0, n_iterations: 400, ..TsneConfig::default() };
        let e = tsne_embed(&data, &cfg, &mut rng).unwrap();
        assert_eq!(e.cost_history.len(), 400);
        assert!(e.cost < e.cost_history[EXAGGERATION_ITERS]);
        assert!(e.cost < e.cost_history[0]);
    }

    #[test]
    fn too_few_points_for_perplexity() {
        let data = vec![vec![0.0], vec![1.0], vec![2.0]];
        assert!(tsne_embed(&data, &TsneConfig::default(), &mut seeded(0)).is_err());
    }
}
