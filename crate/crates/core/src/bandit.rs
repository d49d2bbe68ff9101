//! Exp3 adversarial bandit.
//!
//! Arm `i` is drawn with probability
//!
//! ```text
//! p(i) = (1 - gamma) * w_i / sum_j w_j + gamma / K
//! ```
//!
//! and after observing a reward `r` in `[0, 1]` for the chosen arm, only that
//! arm's weight moves: `w_i <- w_i * exp(gamma * (r / p(i)) / K)`.
//!
//! Weights are kept in log space and shifted so the largest log-weight is 0
//! after every update. The shift cancels in the normalisation above, so it
//! never changes a probability, but it stops the weights from overflowing in
//! long runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const REWARD_TOLERANCE: f64 = 1e-9;

/// Seedable Exp3 state.
///
/// Single-writer: mutate from one thread at a time. The type is `Send`, so a
/// state can be moved to a worker thread.
#[derive(Debug, Clone)]
pub struct Exp3 {
    gamma: f64,
    log_weights: Vec<f64>,
    round: u64,
    seed: u64,
    rng: ChaCha8Rng,
}

/// What an [`Exp3::update`] did, for logging and tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exp3Update {
    pub arm: usize,
    /// `p(arm)` recomputed from the weights at update time.
    pub probability: f64,
    /// Importance-weighted reward `r / p(arm)`.
    pub estimated_reward: f64,
    /// Amount added to `ln w_arm` before the renormalising shift.
    pub log_increment: f64,
}

/// Serializable snapshot sufficient for a deterministic resume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp3Snapshot {
    pub gamma: f64,
    pub log_weights: Vec<f64>,
    pub round: u64,
    pub seed: u64,
    /// ChaCha word position of the arm-sampling generator.
    pub rng_word_pos: u128,
}

impl Exp3 {
    /// All weights start at 1.
    pub fn new(num_arms: usize, gamma: f64, seed: u64) -> Result<Self> {
        if num_arms == 0 {
            return Err(Error::invalid("Exp3 needs at least one arm"));
        }
        check_gamma(gamma)?;
        Ok(Self {
            gamma,
            log_weights: vec![0.0; num_arms],
            round: 0,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Builds a state with explicit (natural-log) weights, round 0.
    pub fn from_log_weights(log_weights: Vec<f64>, gamma: f64, seed: u64) -> Result<Self> {
        if log_weights.is_empty() {
            return Err(Error::invalid("Exp3 needs at least one arm"));
        }
        check_gamma(gamma)?;
        if let Some(w) = log_weights.iter().find(|w| !w.is_finite()) {
            return Err(Error::invalid(format!("log-weight {w} is not finite")));
        }
        Ok(Self {
            gamma,
            log_weights,
            round: 0,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn num_arms(&self) -> usize {
        self.log_weights.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Number of updates applied so far.
    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Arm-selection distribution for the current weights.
    pub fn probabilities(&self) -> Vec<f64> {
        let k = self.num_arms() as f64;
        let max = self
            .log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let shifted: Vec<f64> = self.log_weights.iter().map(|w| (w - max).exp()).collect();
        let total: f64 = shifted.iter().sum();
        shifted
            .into_iter()
            .map(|w| (1.0 - self.gamma) * (w / total) + self.gamma / k)
            .collect()
    }

    /// Draws an arm from [`probabilities`](Self::probabilities).
    ///
    /// Inverse CDF: a uniform `u` in `[0, 1)` picks the first arm whose
    /// cumulative probability exceeds `u`; if rounding leaves the total just
    /// below `u`, the last arm absorbs the residue.
    pub fn choose_arm(&mut self) -> (usize, f64) {
        let probs = self.probabilities();
        let u: f64 = self.rng.random();
        let arm = sample_index(&probs, u);
        (arm, probs[arm])
    }

    /// Applies the importance-weighted multiplicative update for `arm`.
    ///
    /// Rewards must lie in `[0, 1]` (with a 1e-9 tolerance; values inside the
    /// tolerance band are clamped).
    pub fn update(&mut self, arm: usize, reward: f64) -> Result<Exp3Update> {
        if arm >= self.num_arms() {
            return Err(Error::invalid(format!(
                "arm {arm} out of range for {} arms",
                self.num_arms()
            )));
        }
        if !(-REWARD_TOLERANCE..=1.0 + REWARD_TOLERANCE).contains(&reward) {
            return Err(Error::invalid(format!("reward {reward} outside [0, 1]")));
        }
        let reward = reward.clamp(0.0, 1.0);
        let probability = self.probabilities()[arm];
        let estimated_reward = reward / probability;
        let log_increment = self.gamma * estimated_reward / self.num_arms() as f64;
        self.log_weights[arm] += log_increment;
        self.renormalize();
        self.round += 1;
        Ok(Exp3Update {
            arm,
            probability,
            estimated_reward,
            log_increment,
        })
    }

    fn renormalize(&mut self) {
        let max = self
            .log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        for w in &mut self.log_weights {
            *w -= max;
        }
    }

    pub fn snapshot(&self) -> Exp3Snapshot {
        Exp3Snapshot {
            gamma: self.gamma,
            log_weights: self.log_weights.clone(),
            round: self.round,
            seed: self.seed,
            rng_word_pos: self.rng.get_word_pos(),
        }
    }

    pub fn restore(snapshot: &Exp3Snapshot) -> Result<Self> {
        let mut state =
            Self::from_log_weights(snapshot.log_weights.clone(), snapshot.gamma, snapshot.seed)?;
        state.round = snapshot.round;
        state.rng.set_word_pos(snapshot.rng_word_pos);
        Ok(state)
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if (0.0..=1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::invalid(format!("gamma {gamma} outside [0, 1]")))
    }
}

/// Inverse-CDF lookup shared by every sampler in the crate.
pub(crate) fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut cumulative = 0.0;
    for (i, p) in probs.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return i;
        }
    }
    probs.len() - 1
}
