use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{MetricVector, Trainer};
use crate::error::{Error, Result};
use crate::metrics::MetricId;

/// Parameters of the synthetic multi-metric simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    /// `gains[a][j]`: how much pulling arm `a` moves metric `j`.
    pub gains: Vec<Vec<f64>>,
    pub learn_rate: f64,
    pub noise_std: f64,
    /// Starting value of every metric.
    pub init: f64,
}

impl SyntheticConfig {
    /// `G = diag(diag)` with the given step size and noise; metrics start at 0.
    pub fn diagonal(diag: &[f64], learn_rate: f64, noise_std: f64) -> Self {
        let k = diag.len();
        let gains = (0..k)
            .map(|a| (0..k).map(|j| if a == j { diag[a] } else { 0.0 }).collect())
            .collect();
        Self {
            gains,
            learn_rate,
            noise_std,
            init: 0.0,
        }
    }

    pub fn identity(k: usize, learn_rate: f64, noise_std: f64) -> Self {
        Self::diagonal(&vec![1.0; k], learn_rate, noise_std)
    }

    pub fn num_metrics(&self) -> usize {
        self.gains.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.gains.len();
        if k == 0 {
            return Err(Error::invalid("gain matrix is empty"));
        }
        if let Some(row) = self.gains.iter().find(|row| row.len() != k) {
            return Err(Error::invalid(format!(
                "gain matrix must be {k}x{k}, found a row of length {}",
                row.len()
            )));
        }
        if self.gains.iter().flatten().any(|g| !g.is_finite()) {
            return Err(Error::invalid("gain matrix has non-finite entries"));
        }
        if !(self.learn_rate > 0.0 && self.learn_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learn_rate {} must be > 0",
                self.learn_rate
            )));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::invalid(format!(
                "noise_std {} must be >= 0",
                self.noise_std
            )));
        }
        if !(0.0..=1.0).contains(&self.init) {
            return Err(Error::invalid(format!("init {} outside [0, 1]", self.init)));
        }
        Ok(())
    }
}

/// Metrics in `[0, 1]` that improve with diminishing returns when their arm
/// is pulled, plus seeded Gaussian noise.
///
/// `m_j <- clamp(m_j + lr * G[a][j] * (1 - m_j) + N(0, sigma), 0, 1)`
#[derive(Debug, Clone)]
pub struct SyntheticTrainer {
    ids: Vec<MetricId>,
    metrics: Vec<f64>,
    config: SyntheticConfig,
    noise: Option<Normal<f64>>,
    rng: ChaCha8Rng,
}

impl SyntheticTrainer {
    pub fn new(config: SyntheticConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let k = config.num_metrics();
        let names: Vec<String> = (0..k).map(|i| format!("m{i}")).collect();
        let noise = (config.noise_std > 0.0)
            .then(|| Normal::new(0.0, config.noise_std).expect("validated std"));
        Ok(Self {
            ids: MetricId::dense(&names),
            metrics: vec![config.init; k],
            config,
            noise,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn metrics(&self) -> &[f64] {
        &self.metrics
    }

    pub fn config(&self) -> &SyntheticConfig {
        &self.config
    }
}

impl Trainer for SyntheticTrainer {
    fn metric_ids(&self) -> &[MetricId] {
        &self.ids
    }

    fn step(&mut self, metric: usize) -> Result<()> {
        let gains = self.config.gains.get(metric).ok_or_else(|| {
            Error::invalid(format!(
                "metric {metric} out of range for {}",
                self.ids.len()
            ))
        })?;
        for (m, g) in self.metrics.iter_mut().zip(gains) {
            let noise = match &self.noise {
                Some(dist) => dist.sample(&mut self.rng),
                None => 0.0,
            };
            *m = (*m + self.config.learn_rate * g * (1.0 - *m) + noise).clamp(0.0, 1.0);
        }
        Ok(())
    }

    fn evaluate(&self) -> MetricVector {
        MetricVector::new(self.metrics.clone())
    }
}
