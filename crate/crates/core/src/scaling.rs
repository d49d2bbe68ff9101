//! Quantile-window reward scaling.
//!
//! A raw metric value is mapped into `[0, 1]` against the lower and upper
//! quantiles of that metric's recent history: 0 below the lower quantile, 1
//! above the upper one, linear in between. The value being scaled is never
//! part of its own history, so callers scale first and observe second.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

pub const DEFAULT_WINDOW: usize = 100;
pub const DEFAULT_LO_LEVEL: f64 = 0.2;
pub const DEFAULT_HI_LEVEL: f64 = 0.8;

/// Returned when the window is empty or both quantiles coincide with the value.
pub const NEUTRAL_REWARD: f64 = 0.5;

/// Linear-interpolation quantile at fractional rank `level * (m - 1)`.
pub fn quantile(values: &[f64], level: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("quantile of an empty list"));
    }
    if !(0.0..=1.0).contains(&level) {
        return Err(Error::invalid(format!(
            "quantile level {level} outside [0, 1]"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&sorted, level))
}

fn quantile_sorted(sorted: &[f64], level: f64) -> f64 {
    let rank = level * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Bounded FIFO history of one metric plus its quantile levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileScaler {
    window: VecDeque<f64>,
    capacity: usize,
    lo_level: f64,
    hi_level: f64,
}

impl Default for QuantileScaler {
    fn default() -> Self {
        Self::new(DEFAULT_WINDOW).expect("default window is valid")
    }
}

impl QuantileScaler {
    /// 20th/80th quantile levels.
    pub fn new(capacity: usize) -> Result<Self> {
        Self::with_levels(capacity, DEFAULT_LO_LEVEL, DEFAULT_HI_LEVEL)
    }

    pub fn with_levels(capacity: usize, lo_level: f64, hi_level: f64) -> Result<Self> {
        if capacity < 2 {
            return Err(Error::invalid(format!(
                "scaler window capacity {capacity} must be at least 2"
            )));
        }
        if !(0.0 <= lo_level && lo_level < hi_level && hi_level <= 1.0) {
            return Err(Error::invalid(format!(
                "quantile levels must satisfy 0 <= lo < hi <= 1, got {lo_level}, {hi_level}"
            )));
        }
        Ok(Self {
            window: VecDeque::with_capacity(capacity),
            capacity,
            lo_level,
            hi_level,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn levels(&self) -> (f64, f64) {
        (self.lo_level, self.hi_level)
    }

    /// Oldest first.
    pub fn window(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.window.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    /// Appends `value`, evicting the oldest entry once full.
    pub fn observe(&mut self, value: f64) -> Result<()> {
        ensure_finite("observed reward", value)?;
        if self.window.len() == self.capacity {
            self.window.pop_front();
        }
        self.window.push_back(value);
        Ok(())
    }

    /// Current `(q_lo, q_hi)`, or `None` for an empty window.
    pub fn quantiles(&self) -> Option<(f64, f64)> {
        if self.window.is_empty() {
            return None;
        }
        let mut sorted: Vec<f64> = self.window.iter().copied().collect();
        sorted.sort_by(f64::total_cmp);
        Some((
            quantile_sorted(&sorted, self.lo_level),
            quantile_sorted(&sorted, self.hi_level),
        ))
    }

    /// Scales `value` against the current window without recording it.
    pub fn scale(&self, value: f64) -> Result<f64> {
        ensure_finite("scaled reward", value)?;
        let Some((lo, hi)) = self.quantiles() else {
            return Ok(NEUTRAL_REWARD);
        };
        Ok(if value < lo {
            0.0
        } else if value > hi {
            1.0
        } else if hi > lo {
            ((value - lo) / (hi - lo)).clamp(0.0, 1.0)
        } else {
            NEUTRAL_REWARD
        })
    }

    /// `scale(value)` followed by `observe(value)`.
    pub fn scale_then_observe(&mut self, value: f64) -> Result<f64> {
        let scaled = self.scale(value)?;
        self.observe(value)?;
        Ok(scaled)
    }
}
