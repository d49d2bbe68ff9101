//! Training controllers that decide which metric's RL loss to optimize next.
//!
//! All schedulers share one loop: evaluate once before training (this warms
//! the per-metric scalers), then after every `n_bandit` completed steps (and,
//! for HM-Bandit, every `n_controller` completed steps) evaluate again, scale
//! each metric against its own history, record the round and let the
//! scheduler pick the next arm. A step index that is a boundary for both
//! rounds is evaluated once; the bandit update runs before the controller
//! decision.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bandit::Exp3;
use crate::error::{Error, Result};
use crate::scaling::QuantileScaler;
use crate::trainer::{MetricVector, Trainer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchedulerKind {
    /// One metric for the whole run.
    Single,
    /// Round-robin over metrics, one bandit round each.
    Alternate,
    /// Uniformly random metric each round.
    Random,
    /// One Exp3 rewarded with the mean scaled validation metric.
    Sm,
    /// Argmin controller over one Exp3 per target metric.
    Hm,
}

impl SchedulerKind {
    pub const ALL: [SchedulerKind; 5] = [
        SchedulerKind::Single,
        SchedulerKind::Alternate,
        SchedulerKind::Random,
        SchedulerKind::Sm,
        SchedulerKind::Hm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchedulerKind::Single => "single",
            SchedulerKind::Alternate => "alternate",
            SchedulerKind::Random => "random",
            SchedulerKind::Sm => "sm",
            SchedulerKind::Hm => "hm",
        }
    }

    /// Runs this scheduler. `metric` is only used by [`SchedulerKind::Single`].
    pub fn run<T: Trainer>(
        self,
        trainer: &mut T,
        metric: usize,
        config: &ScheduleConfig,
    ) -> Result<RunLog> {
        match self {
            SchedulerKind::Single => run_single_reward(trainer, metric, config),
            SchedulerKind::Alternate => run_alternate(trainer, config),
            SchedulerKind::Random => run_random(trainer, config),
            SchedulerKind::Sm => run_sm_bandit(trainer, config),
            SchedulerKind::Hm => run_hm_bandit(trainer, config),
        }
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchedulerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheduler {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub n_train: usize,
    pub n_bandit: usize,
    /// Only used by HM-Bandit.
    pub n_controller: usize,
    pub gamma: f64,
    pub scaler_window: usize,
    pub seed: u64,
}

impl ScheduleConfig {
    /// Short-round profile: gamma 0.15, bandit rounds of 10 steps, controller
    /// rounds of 30.
    pub fn short_rounds(n_train: usize, seed: u64) -> Self {
        Self {
            n_train,
            n_bandit: 10,
            n_controller: 30,
            gamma: 0.15,
            scaler_window: crate::scaling::DEFAULT_WINDOW,
            seed,
        }
    }

    /// Long-round profile: gamma 0.1, bandit rounds of 100 steps, controller
    /// rounds of 300.
    pub fn long_rounds(n_train: usize, seed: u64) -> Self {
        Self {
            n_bandit: 100,
            n_controller: 300,
            gamma: 0.1,
            ..Self::short_rounds(n_train, seed)
        }
    }

    /// Step of the last evaluation: `n_train` when it falls on a round
    /// boundary, otherwise the last boundary before it.
    pub fn final_eval_step(&self, kind: SchedulerKind) -> usize {
        let last = |n: usize| self.n_train - self.n_train % n.max(1);
        if kind == SchedulerKind::Hm {
            last(self.n_bandit).max(last(self.n_controller))
        } else {
            last(self.n_bandit)
        }
    }

    pub fn validate(&self, kind: SchedulerKind) -> Result<()> {
        if self.n_bandit == 0 {
            return Err(Error::invalid("n_bandit must be >= 1"));
        }
        if kind == SchedulerKind::Hm && self.n_controller < self.n_bandit {
            return Err(Error::invalid(format!(
                "n_controller ({}) must be >= n_bandit ({})",
                self.n_controller, self.n_bandit
            )));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::invalid(format!(
                "gamma {} outside [0, 1]",
                self.gamma
            )));
        }
        if self.scaler_window < 2 {
            return Err(Error::invalid("scaler_window must be >= 2"));
        }
        Ok(())
    }
}

/// One evaluation event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// Trainer steps completed before this evaluation.
    pub step: usize,
    /// Active child bandit after this event (HM only).
    pub controller: Option<usize>,
    /// True when the controller made a decision at this step (HM only).
    pub controller_decision: bool,
    /// Arm active from this step on.
    pub arm: usize,
    /// Distribution `arm` was drawn from.
    pub probabilities: Vec<f64>,
    pub raw: MetricVector,
    /// Each metric scaled against its own history, excluding this value.
    pub scaled: Vec<f64>,
    /// Reward fed to a bandit at this step, if any.
    pub bandit_reward: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub scheduler: SchedulerKind,
    pub config: ScheduleConfig,
    pub metric_names: Vec<String>,
    pub records: Vec<RoundRecord>,
}

impl RunLog {
    pub fn final_metrics(&self) -> &MetricVector {
        &self
            .records
            .last()
            .expect("a run always has an initial record")
            .raw
    }

    /// Trainer steps spent on each arm.
    pub fn arm_steps(&self) -> Vec<usize> {
        let mut steps = vec![0; self.metric_names.len()];
        for (i, r) in self.records.iter().enumerate() {
            let end = self
                .records
                .get(i + 1)
                .map_or(self.config.n_train, |next| next.step);
            steps[r.arm] += end - r.step;
        }
        steps
    }

    /// Controller choices, one per controller round.
    pub fn controller_choices(&self) -> impl Iterator<Item = usize> + '_ {
        self.records
            .iter()
            .filter(|r| r.controller_decision)
            .filter_map(|r| r.controller)
    }
}

/// Index of the smallest value; ties go to the lowest index.
pub fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// SplitMix64 finalizer, used to give each random component its own stream.
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn one_hot(k: usize, arm: usize) -> Vec<f64> {
    let mut p = vec![0.0; k];
    p[arm] = 1.0;
    p
}

/// Per-scheduler arm selection logic plugged into [`drive`].
trait ArmSchedule {
    fn arm(&self) -> usize;
    fn probabilities(&self) -> Vec<f64>;
    fn controller(&self) -> Option<usize> {
        None
    }
    /// Called at every evaluation after training started. Returns the reward
    /// fed to a bandit, if any.
    fn on_round(
        &mut self,
        bandit_round: bool,
        controller_round: bool,
        scaled: &[f64],
    ) -> Result<Option<f64>>;
}

fn drive<T, S>(
    trainer: &mut T,
    kind: SchedulerKind,
    config: &ScheduleConfig,
    mut schedule: S,
) -> Result<RunLog>
where
    T: Trainer,
    S: ArmSchedule,
{
    let k = trainer.num_metrics();
    let mut scalers = (0..k)
        .map(|_| QuantileScaler::new(config.scaler_window))
        .collect::<Result<Vec<_>>>()?;
    let mut records = Vec::with_capacity(config.n_train / config.n_bandit + 1);
    let (raw, scaled) = evaluate_scaled(trainer, &mut scalers, 0)?;
    records.push(RoundRecord {
        step: 0,
        controller: schedule.controller(),
        controller_decision: false,
        arm: schedule.arm(),
        probabilities: schedule.probabilities(),
        raw,
        scaled,
        bandit_reward: None,
    });

    for step in 1..=config.n_train {
        trainer.step(schedule.arm())?;
        let bandit_round = step % config.n_bandit == 0;
        let controller_round = kind == SchedulerKind::Hm && step % config.n_controller == 0;
        if !(bandit_round || controller_round) {
            continue;
        }
        let (raw, scaled) = evaluate_scaled(trainer, &mut scalers, step)?;
        let bandit_reward = schedule.on_round(bandit_round, controller_round, &scaled)?;
        records.push(RoundRecord {
            step,
            controller: schedule.controller(),
            controller_decision: controller_round,
            arm: schedule.arm(),
            probabilities: schedule.probabilities(),
            raw,
            scaled,
            bandit_reward,
        });
    }

    Ok(RunLog {
        scheduler: kind,
        config: config.clone(),
        metric_names: trainer
            .metric_ids()
            .iter()
            .map(|m| m.name.clone())
            .collect(),
        records,
    })
}

/// Evaluates, then scales each metric against its window before observing it.
fn evaluate_scaled<T: Trainer>(
    trainer: &T,
    scalers: &mut [QuantileScaler],
    step: usize,
) -> Result<(MetricVector, Vec<f64>)> {
    let raw = trainer.evaluate();
    if raw.len() != scalers.len() || !raw.is_finite() {
        return Err(Error::NonFinite {
            context: format!("validation metrics at step {step}: {:?}", raw.values()),
            value: raw
                .values()
                .iter()
                .copied()
                .find(|v| !v.is_finite())
                .unwrap_or(f64::NAN),
        });
    }
    let scaled = scalers
        .iter_mut()
        .zip(raw.values())
        .map(|(s, &v)| s.scale_then_observe(v))
        .collect::<Result<Vec<_>>>()?;
    Ok((raw, scaled))
}

struct Fixed {
    k: usize,
    arm: usize,
}

impl ArmSchedule for Fixed {
    fn arm(&self) -> usize {
        self.arm
    }
    fn probabilities(&self) -> Vec<f64> {
        one_hot(self.k, self.arm)
    }
    fn on_round(&mut self, _: bool, _: bool, _: &[f64]) -> Result<Option<f64>> {
        Ok(None)
    }
}

struct RoundRobin {
    k: usize,
    round: usize,
}

impl ArmSchedule for RoundRobin {
    fn arm(&self) -> usize {
        self.round % self.k
    }
    fn probabilities(&self) -> Vec<f64> {
        one_hot(self.k, self.arm())
    }
    fn on_round(&mut self, bandit_round: bool, _: bool, _: &[f64]) -> Result<Option<f64>> {
        if bandit_round {
            self.round += 1;
        }
        Ok(None)
    }
}

struct Uniform {
    k: usize,
    arm: usize,
    rng: ChaCha8Rng,
}

impl ArmSchedule for Uniform {
    fn arm(&self) -> usize {
        self.arm
    }
    fn probabilities(&self) -> Vec<f64> {
        vec![1.0 / self.k as f64; self.k]
    }
    fn on_round(&mut self, bandit_round: bool, _: bool, _: &[f64]) -> Result<Option<f64>> {
        if bandit_round {
            self.arm = self.rng.random_range(0..self.k);
        }
        Ok(None)
    }
}

struct SingleBandit {
    bandit: Exp3,
    arm: usize,
}

impl ArmSchedule for SingleBandit {
    fn arm(&self) -> usize {
        self.arm
    }
    fn probabilities(&self) -> Vec<f64> {
        self.bandit.probabilities()
    }
    fn on_round(&mut self, bandit_round: bool, _: bool, scaled: &[f64]) -> Result<Option<f64>> {
        if !bandit_round {
            return Ok(None);
        }
        let reward = scaled.iter().sum::<f64>() / scaled.len() as f64;
        self.bandit.update(self.arm, reward)?;
        self.arm = self.bandit.choose_arm().0;
        Ok(Some(reward))
    }
}

struct Hierarchical {
    children: Vec<Exp3>,
    active: usize,
    arm: usize,
}

impl ArmSchedule for Hierarchical {
    fn arm(&self) -> usize {
        self.arm
    }
    fn probabilities(&self) -> Vec<f64> {
        self.children[self.active].probabilities()
    }
    fn controller(&self) -> Option<usize> {
        Some(self.active)
    }
    fn on_round(
        &mut self,
        bandit_round: bool,
        controller_round: bool,
        scaled: &[f64],
    ) -> Result<Option<f64>> {
        let mut reward = None;
        if bandit_round {
            let r = scaled[self.active];
            let child = &mut self.children[self.active];
            child.update(self.arm, r)?;
            self.arm = child.choose_arm().0;
            reward = Some(r);
        }
        if controller_round {
            self.active = argmin(scaled);
            self.arm = self.children[self.active].choose_arm().0;
        }
        Ok(reward)
    }
}

fn check_metrics<T: Trainer>(trainer: &T) -> Result<usize> {
    match trainer.num_metrics() {
        0 => Err(Error::invalid("trainer exposes no metrics")),
        k => Ok(k),
    }
}

/// Optimizes `metric` for the whole run.
pub fn run_single_reward<T: Trainer>(
    trainer: &mut T,
    metric: usize,
    config: &ScheduleConfig,
) -> Result<RunLog> {
    config.validate(SchedulerKind::Single)?;
    let k = check_metrics(trainer)?;
    if metric >= k {
        return Err(Error::invalid(format!(
            "metric {metric} out of range for {k} metrics"
        )));
    }
    drive(
        trainer,
        SchedulerKind::Single,
        config,
        Fixed { k, arm: metric },
    )
}

/// Round `t` optimizes metric `t mod K`.
pub fn run_alternate<T: Trainer>(trainer: &mut T, config: &ScheduleConfig) -> Result<RunLog> {
    config.validate(SchedulerKind::Alternate)?;
    let k = check_metrics(trainer)?;
    drive(
        trainer,
        SchedulerKind::Alternate,
        config,
        RoundRobin { k, round: 0 },
    )
}

/// Each round optimizes a uniformly drawn metric.
pub fn run_random<T: Trainer>(trainer: &mut T, config: &ScheduleConfig) -> Result<RunLog> {
    config.validate(SchedulerKind::Random)?;
    let k = check_metrics(trainer)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 2));
    let arm = rng.random_range(0..k);
    drive(
        trainer,
        SchedulerKind::Random,
        config,
        Uniform { k, arm, rng },
    )
}

/// Single multi-reward bandit.
pub fn run_sm_bandit<T: Trainer>(trainer: &mut T, config: &ScheduleConfig) -> Result<RunLog> {
    config.validate(SchedulerKind::Sm)?;
    let k = check_metrics(trainer)?;
    let mut bandit = Exp3::new(k, config.gamma, derive_seed(config.seed, 1))?;
    let arm = bandit.choose_arm().0;
    drive(
        trainer,
        SchedulerKind::Sm,
        config,
        SingleBandit { bandit, arm },
    )
}

/// Hierarchical multi-reward bandit. Child bandits keep their weights while
/// inactive.
pub fn run_hm_bandit<T: Trainer>(trainer: &mut T, config: &ScheduleConfig) -> Result<RunLog> {
    config.validate(SchedulerKind::Hm)?;
    let k = check_metrics(trainer)?;
    let mut children = (0..k)
        .map(|j| Exp3::new(k, config.gamma, derive_seed(config.seed, 100 + j as u64)))
        .collect::<Result<Vec<_>>>()?;
    let arm = children[0].choose_arm().0;
    drive(
        trainer,
        SchedulerKind::Hm,
        config,
        Hierarchical {
            children,
            active: 0,
            arm,
        },
    )
}
