use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedulers::{ScheduleConfig, SchedulerKind};
use crate::trainer::{SyntheticConfig, ToyConfig};

pub const DEFAULT_N_TRAIN: usize = 2000;
pub const DEFAULT_GAMMA: f64 = 0.15;
pub const DEFAULT_N_BANDIT: usize = 10;
pub const DEFAULT_N_CONTROLLER: usize = 30;
pub const DEFAULT_LEARN_RATE: f64 = 0.05;
pub const DEFAULT_NOISE_STD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnvKind {
    #[serde(rename = "synthetic")]
    Synthetic,
    #[serde(rename = "toy-textgen")]
    ToyTextgen,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Synthetic => "synthetic",
            EnvKind::ToyTextgen => "toy-textgen",
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synthetic" => Ok(EnvKind::Synthetic),
            "toy-textgen" | "toy" => Ok(EnvKind::ToyTextgen),
            other => Err(Error::Config(format!("unknown env {other:?}"))),
        }
    }
}

/// Synthetic environment keys as written in a config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticInput {
    pub gains: Option<Vec<Vec<f64>>>,
    /// Shorthand for a diagonal gain matrix.
    pub gain_diag: Option<Vec<f64>>,
    pub learn_rate: Option<f64>,
    pub noise_std: Option<f64>,
    pub init: Option<f64>,
}

/// Unvalidated configuration, from a file, from flags, or both merged.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigInput {
    pub scheduler: Option<String>,
    pub env: Option<String>,
    #[serde(alias = "K")]
    pub k: Option<usize>,
    /// Metric optimized by the `single` scheduler.
    pub metric: Option<usize>,
    pub seed: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    /// Run seeds `seed, seed + 1, ..., seed + n_seeds - 1`.
    pub n_seeds: Option<usize>,
    pub n_train: Option<usize>,
    pub n_bandit: Option<usize>,
    pub n_controller: Option<usize>,
    pub gamma: Option<f64>,
    pub window: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub dump_task: Option<bool>,
    pub synthetic: Option<SyntheticInput>,
    pub toy: Option<ToyConfig>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($field:ident),*) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field; } )*
    };
}

impl ConfigInput {
    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Fields set in `top` win.
    pub fn merge(mut self, top: ConfigInput) -> Self {
        overlay!(
            self,
            top,
            scheduler,
            env,
            k,
            metric,
            seed,
            seeds,
            n_seeds,
            n_train,
            n_bandit,
            n_controller,
            gamma,
            window,
            out_dir,
            dump_task,
            synthetic,
            toy
        );
        self
    }

    /// Applies defaults and validates.
    pub fn resolve(self) -> Result<ExperimentConfig> {
        let scheduler: SchedulerKind = self
            .scheduler
            .as_deref()
            .ok_or_else(|| missing("scheduler"))?
            .parse()?;
        let env: EnvKind = self.env.as_deref().ok_or_else(|| missing("env"))?.parse()?;

        let seeds = match (self.seeds, self.n_seeds) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either `seeds` or `n_seeds`, not both".into(),
                ))
            }
            (Some(list), None) => list,
            (None, Some(n)) => {
                let base = self.seed.unwrap_or(0);
                (0..n as u64).map(|i| base + i).collect()
            }
            (None, None) => vec![self.seed.ok_or_else(|| missing("seed"))?],
        };
        if seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        let mut unique = seeds.clone();
        unique.sort_unstable();
        unique.dedup();
        if unique.len() != seeds.len() {
            return Err(Error::Config("seed list has duplicates".into()));
        }

        let (num_metrics, synthetic, toy) = match env {
            EnvKind::Synthetic => {
                let k = self.k.ok_or_else(|| missing("k"))?;
                let input = self.synthetic.unwrap_or_default();
                let gains = match (input.gains, input.gain_diag) {
                    (Some(_), Some(_)) => {
                        return Err(Error::Config(
                            "give either `gains` or `gain_diag`, not both".into(),
                        ))
                    }
                    (Some(g), None) => g,
                    (None, Some(d)) => SyntheticConfig::diagonal(&d, 1.0, 0.0).gains,
                    (None, None) => SyntheticConfig::identity(k, 1.0, 0.0).gains,
                };
                if gains.len() != k || gains.iter().any(|r| r.len() != k) {
                    return Err(Error::Config(format!("gain matrix is not {k}x{k}")));
                }
                let synthetic = SyntheticConfig {
                    gains,
                    learn_rate: input.learn_rate.unwrap_or(DEFAULT_LEARN_RATE),
                    noise_std: input.noise_std.unwrap_or(DEFAULT_NOISE_STD),
                    init: input.init.unwrap_or(0.0),
                };
                synthetic
                    .validate()
                    .map_err(|e| Error::Config(e.to_string()))?;
                if self.toy.is_some() {
                    return Err(Error::Config(
                        "`toy` section given for the synthetic env".into(),
                    ));
                }
                (k, Some(synthetic), None)
            }
            EnvKind::ToyTextgen => {
                if let Some(k) = self.k.filter(|&k| k != 3) {
                    return Err(Error::Config(format!(
                        "toy-textgen has 3 metrics (rouge_l, bleu, coverage), config says K = {k}"
                    )));
                }
                if self.synthetic.is_some() {
                    return Err(Error::Config(
                        "`synthetic` section given for the toy-textgen env".into(),
                    ));
                }
                (3, None, Some(self.toy.unwrap_or_default()))
            }
        };

        let metric = self.metric.unwrap_or(0);
        if metric >= num_metrics {
            return Err(Error::Config(format!(
                "metric {metric} out of range for K = {num_metrics}"
            )));
        }

        let schedule = ScheduleConfig {
            n_train: self.n_train.unwrap_or(DEFAULT_N_TRAIN),
            n_bandit: self.n_bandit.unwrap_or(DEFAULT_N_BANDIT),
            n_controller: self.n_controller.unwrap_or(DEFAULT_N_CONTROLLER),
            gamma: self.gamma.unwrap_or(DEFAULT_GAMMA),
            scaler_window: self.window.unwrap_or(crate::scaling::DEFAULT_WINDOW),
            seed: seeds[0],
        };
        schedule
            .validate(scheduler)
            .map_err(|e| Error::Config(e.to_string()))?;

        Ok(ExperimentConfig {
            scheduler,
            env,
            num_metrics,
            metric,
            schedule,
            synthetic,
            toy,
            seeds,
            out_dir: self.out_dir.unwrap_or_else(|| PathBuf::from("runs")),
            dump_task: self.dump_task.unwrap_or(false),
        })
    }
}

fn missing(key: &str) -> Error {
    Error::Config(format!("missing required key `{key}`"))
}

/// Validated experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scheduler: SchedulerKind,
    pub env: EnvKind,
    pub num_metrics: usize,
    pub metric: usize,
    /// `schedule.seed` is replaced per run.
    pub schedule: ScheduleConfig,
    pub synthetic: Option<SyntheticConfig>,
    pub toy: Option<ToyConfig>,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub dump_task: bool,
}

/// Reads `path` (if any), overlays `flags`, then resolves.
pub fn parse_config(path: Option<&Path>, flags: ConfigInput) -> Result<ExperimentConfig> {
    let base = match path {
        Some(p) => ConfigInput::from_file(p)?,
        None => ConfigInput::default(),
    };
    base.merge(flags).resolve()
}
