//! FedAvg baseline on a synthetic linear-regression task.
//!
//! The model family behind the FL baseline is not fixed by the DTN setting;
//! linear regression is a stand-in chosen because its pooled optimum has a
//! closed form. Each round every entity takes one full-batch gradient step
//! from the current global weights, then the server averages the local
//! weights weighted by dataset size.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlError {
    #[error("dataset of entity {0} is empty; loss is undefined")]
    EmptyDataset(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("nothing to aggregate")]
    NoUpdates,
    #[error("learning rate must be finite and >= 0, got {0}")]
    InvalidStep(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("diverged at round {round} with eta = {eta}: loss {loss} exceeds 1e6 x initial")]
    Divergence { eta: f64, round: u32, loss: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: f64,
}

/// Training data `H_i` held by one entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalDataset {
    pub owner: String,
    pub samples: Vec<Sample>,
}

impl LocalDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub values: Vec<f64>,
    pub round: u32,
}

impl WeightVector {
    pub fn zeros(dim: usize) -> Self {
        WeightVector { values: vec![0.0; dim], round: 0 }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederatedRun {
    /// Rounds executed, `K`.
    pub rounds: u32,
    /// Global loss after each round; `loss_history.len() == rounds`.
    pub loss_history: Vec<f64>,
    pub initial_loss: f64,
    pub converged: bool,
    pub weights: WeightVector,
}

impl FederatedRun {
    /// Loss history as `round,global_loss` CSV.
    pub fn loss_csv(&self) -> String {
        let mut out = String::from("round,global_loss\n");
        for (i, loss) in self.loss_history.iter().enumerate() {
            writeln!(out, "{},{}", i + 1, loss).unwrap();
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FedAvgConfig {
    pub eta: f64,
    pub tolerance: f64,
    pub max_rounds: u32,
    /// Run local updates on the rayon pool. Results are identical either way.
    #[serde(default)]
    pub parallel: bool,
}

impl Default for FedAvgConfig {
    fn default() -> Self {
        FedAvgConfig { eta: 0.01, tolerance: 1e-6, max_rounds: 10_000, parallel: false }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dims(w: &WeightVector, d: &LocalDataset) -> Result<(), FlError> {
    if d.is_empty() {
        return Err(FlError::EmptyDataset(d.owner.clone()));
    }
    match d.samples.iter().find(|s| s.x.len() != w.dim()) {
        Some(s) => Err(FlError::DimensionMismatch { expected: w.dim(), got: s.x.len() }),
        None => Ok(()),
    }
}

/// Mean squared error `(1/|H_i|) * sum (y - w.x)^2`.
pub fn local_loss(w: &WeightVector, d: &LocalDataset) -> Result<f64, FlError> {
    check_dims(w, d)?;
    let sum: f64 = d.samples.iter().map(|s| (s.y - dot(&w.values, &s.x)).powi(2)).sum();
    Ok(sum / d.len() as f64)
}

/// Analytic gradient of [`local_loss`]: `-(2/|H_i|) * sum (y - w.x) x`.
pub fn local_gradient(w: &WeightVector, d: &LocalDataset) -> Result<Vec<f64>, FlError> {
    check_dims(w, d)?;
    let mut grad = vec![0.0; w.dim()];
    for s in &d.samples {
        let residual = s.y - dot(&w.values, &s.x);
        for (g, x) in grad.iter_mut().zip(&s.x) {
            *g -= 2.0 * residual * x;
        }
    }
    let n = d.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok(grad)
}

/// One full-batch step `w_i(t) = w(t-1) - eta * grad L_i(w(t-1))`.
pub fn local_update(w_prev: &WeightVector, d: &LocalDataset, eta: f64) -> Result<WeightVector, FlError> {
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(FlError::InvalidStep(eta));
    }
    let grad = local_gradient(w_prev, d)?;
    let values = w_prev.values.iter().zip(&grad).map(|(w, g)| w - eta * g).collect();
    Ok(WeightVector { values, round: w_prev.round + 1 })
}

/// Size-weighted average `w(t) = (1/|H_g|) * sum |H_i| w_i(t)`.
///
/// Each coordinate is clamped to the range of its inputs so rounding never
/// pushes the mean outside the convex hull.
pub fn global_aggregate(updates: &[(WeightVector, usize)]) -> Result<WeightVector, FlError> {
    let (first, _) = updates.first().ok_or(FlError::NoUpdates)?;
    let dim = first.dim();
    if let Some((w, _)) = updates.iter().find(|(w, _)| w.dim() != dim) {
        return Err(FlError::DimensionMismatch { expected: dim, got: w.dim() });
    }
    let total: usize = updates.iter().map(|(_, n)| n).sum();
    if total == 0 {
        return Err(FlError::NoUpdates);
    }
    let total = total as f64;
    let values = (0..dim)
        .map(|j| {
            let (mut lo, mut hi, mut acc) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
            for (w, n) in updates {
                let v = w.values[j];
                if *n > 0 {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                acc += *n as f64 * v;
            }
            (acc / total).clamp(lo, hi)
        })
        .collect();
    let round = updates.iter().map(|(w, _)| w.round).max().unwrap_or(0);
    Ok(WeightVector { values, round })
}

/// Size-weighted mean of local losses, i.e. the MSE over the pooled data.
pub fn global_loss(w: &WeightVector, entities: &[LocalDataset]) -> Result<f64, FlError> {
    let mut acc = 0.0;
    let mut total = 0usize;
    for d in entities {
        acc += local_loss(w, d)? * d.len() as f64;
        total += d.len();
    }
    if total == 0 {
        return Err(FlError::NoUpdates);
    }
    Ok(acc / total as f64)
}

/// Runs FedAvg from zero weights until the global loss changes by less than
/// `tolerance` in one round, or `max_rounds` is reached.
///
/// A zero learning rate never counts as convergence: nothing moved.
pub fn run_federated(entities: &[LocalDataset], cfg: &FedAvgConfig) -> Result<FederatedRun, FlError> {
    if !(cfg.tolerance.is_finite() && cfg.tolerance > 0.0) {
        return Err(FlError::InvalidConfig(format!("tolerance must be > 0, got {}", cfg.tolerance)));
    }
    if cfg.max_rounds == 0 {
        return Err(FlError::InvalidConfig("max_rounds must be >= 1".into()));
    }
    if !(cfg.eta.is_finite() && cfg.eta >= 0.0) {
        return Err(FlError::InvalidStep(cfg.eta));
    }
    let first = entities.first().ok_or(FlError::NoUpdates)?;
    let dim = first.samples.first().map(|s| s.x.len()).ok_or_else(|| FlError::EmptyDataset(first.owner.clone()))?;

    let mut w = WeightVector::zeros(dim);
    let initial_loss = global_loss(&w, entities)?;
    let blowup = initial_loss.max(f64::MIN_POSITIVE) * 1e6;
    let mut prev = initial_loss;
    let mut loss_history = Vec::new();
    let mut converged = false;

    for round in 1..=cfg.max_rounds {
        let step = |d: &LocalDataset| local_update(&w, d, cfg.eta).map(|u| (u, d.len()));
        let locals: Vec<(WeightVector, usize)> = if cfg.parallel {
            entities.par_iter().map(step).collect::<Result<_, _>>()?
        } else {
            entities.iter().map(step).collect::<Result<_, _>>()?
        };
        w = global_aggregate(&locals)?;
        let loss = global_loss(&w, entities)?;
        if !loss.is_finite() || loss > blowup {
            return Err(FlError::Divergence { eta: cfg.eta, round, loss });
        }
        loss_history.push(loss);
        if cfg.eta > 0.0 && (loss - prev).abs() < cfg.tolerance {
            converged = true;
            break;
        }
        prev = loss;
    }

    Ok(FederatedRun { rounds: loss_history.len() as u32, loss_history, initial_loss, converged, weights: w })
}

/// Shape of a synthetic IID regression task `y = w*.x + noise`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTask {
    pub entities: usize,
    pub samples_per_entity: usize,
    pub dim: usize,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SyntheticTask {
    fn default() -> Self {
        SyntheticTask { entities: 4, samples_per_entity: 64, dim: 4, noise_std: 0.1, seed: 0 }
    }
}

impl SyntheticTask {
    /// Per-entity datasets and the generating weights.
    pub fn generate(&self) -> (Vec<LocalDataset>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let truth: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let noise = Normal::new(0.0, self.noise_std.max(0.0)).expect("finite noise std");
        let datasets = (0..self.entities)
            .map(|i| {
                let mut local = ChaCha8Rng::seed_from_u64(rng.random());
                let samples = (0..self.samples_per_entity)
                    .map(|_| {
                        let x: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut local)).collect();
                        let y = dot(&truth, &x) + noise.sample(&mut local);
                        Sample { x, y }
                    })
                    .collect();
                LocalDataset { owner: format!("u{i}"), samples }
            })
            .collect();
        (datasets, truth)
    }
}

/// Convergence rounds `K` measured on a synthetic task.
pub fn measure_rounds(task: &SyntheticTask, cfg: &FedAvgConfig) -> Result<FederatedRun, FlError> {
    let (data, _) = task.generate();
    run_federated(&data, cfg)
}
