//! Dynamic multi-reward optimization with multi-armed bandits.
//!
//! When a model can be trained against several reward metrics, a bandit
//! decides which metric's RL loss to optimize next, using validation
//! performance as feedback. This crate provides:
//!
//! - [`bandit`]: the Exp3 adversarial bandit.
//! - [`scaling`]: quantile-window scaling of raw metric values into `[0, 1]`.
//! - [`metrics`]: ROUGE-L, BLEU and keyword coverage over token sequences.
//! - [`trainer`]: the [`Trainer`](trainer::Trainer) contract plus a synthetic
//!   simulator and a toy REINFORCE text generator.
//! - [`schedulers`]: single-reward, round-robin, random, SM-Bandit and
//!   HM-Bandit training loops.
//! - [`harness`]: configuration, multi-seed runs, CSV/JSON output and
//!   comparison tables.
//!
//! ```
//! use dorb::schedulers::{run_sm_bandit, ScheduleConfig};
//! use dorb::trainer::{SyntheticConfig, SyntheticTrainer};
//!
//! let mut trainer = SyntheticTrainer::new(SyntheticConfig::identity(3, 0.05, 0.0), 7)?;
//! let log = run_sm_bandit(&mut trainer, &ScheduleConfig::short_rounds(500, 7))?;
//! assert_eq!(log.records.len(), 51);
//! assert!(log.final_metrics().min() > 0.5);
//! # Ok::<(), dorb::Error>(())
//! ```

pub mod bandit;
mod error;
pub mod harness;
pub mod metrics;
pub mod scaling;
pub mod schedulers;
pub mod trainer;

pub use error::{Error, Result};

// The guide's code listings compile and run as doctests.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/exp3.md")]
    pub mod exp3 {}
    #[doc = include_str!("../../../book/src/scaling.md")]
    pub mod scaling {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    pub mod metrics {}
    #[doc = include_str!("../../../book/src/trainers.md")]
    pub mod trainers {}
    #[doc = include_str!("../../../book/src/schedulers.md")]
    pub mod schedulers {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub mod experiments {}
}
