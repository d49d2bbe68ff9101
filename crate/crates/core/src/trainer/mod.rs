//! Optimization targets driven by the schedulers.
//!
//! A [`Trainer`] exposes `K` metrics. Each scheduler step asks the trainer to
//! optimize one of them, and at round boundaries asks for all `K` validation
//! values.

mod synthetic;
mod toy;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::MetricId;

pub use synthetic::{SyntheticConfig, SyntheticTrainer};
pub use toy::{
    cross_entropy_gradient, reinforce_gradient, reinforce_step, Example, SampleResult, ToyConfig,
    ToyPolicy, ToyTask, ToyTrainer,
};

/// Validation values for all `K` metrics, indexed by [`MetricId::index`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MetricVector(Vec<f64>);

impl MetricVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<usize> for MetricVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Something a scheduler can train.
///
/// `evaluate` must not touch parameters and must be deterministic for fixed
/// parameters.
pub trait Trainer {
    fn metric_ids(&self) -> &[MetricId];

    /// One optimization step on the RL loss of metric `metric`.
    fn step(&mut self, metric: usize) -> Result<()>;

    fn evaluate(&self) -> MetricVector;

    fn num_metrics(&self) -> usize {
        self.metric_ids().len()
    }
}

impl<T: Trainer + ?Sized> Trainer for &mut T {
    fn metric_ids(&self) -> &[MetricId] {
        (**self).metric_ids()
    }

    fn step(&mut self, metric: usize) -> Result<()> {
        (**self).step(metric)
    }

    fn evaluate(&self) -> MetricVector {
        (**self).evaluate()
    }
}

impl<T: Trainer + ?Sized> Trainer for Box<T> {
    fn metric_ids(&self) -> &[MetricId] {
        (**self).metric_ids()
    }

    fn step(&mut self, metric: usize) -> Result<()> {
        (**self).step(metric)
    }

    fn evaluate(&self) -> MetricVector {
        (**self).evaluate()
    }
}
