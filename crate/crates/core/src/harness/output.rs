//! On-disk formats: `trace_<seed>.csv`, `summary_<seed>.json`, `aggregate.json`.
//!
//! Trace columns, in order:
//!
//! ```text
//! step, controller_index, arm, p_0 .. p_{K-1}, raw_m_0 .. raw_m_{K-1}, scaled_r
//! ```
//!
//! `controller_index` is empty outside HM-Bandit runs and `scaled_r` is empty
//! when no bandit was rewarded at that step. Floats use Rust's shortest
//! round-trip formatting, so identical runs produce identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{EnvKind, ExperimentConfig};
use crate::error::{Error, Result};
use crate::schedulers::{RoundRecord, SchedulerKind};

pub fn trace_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("trace_{seed}.csv"))
}

pub fn summary_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("summary_{seed}.json"))
}

pub fn aggregate_path(dir: &Path) -> PathBuf {
    dir.join("aggregate.json")
}

/// One CSV row per evaluation event.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub controller_index: Option<usize>,
    pub arm: usize,
    pub probabilities: Vec<f64>,
    pub raw: Vec<f64>,
    pub scaled_r: Option<f64>,
}

impl From<&RoundRecord> for TraceRow {
    fn from(r: &RoundRecord) -> Self {
        Self {
            step: r.step,
            controller_index: r.controller,
            arm: r.arm,
            probabilities: r.probabilities.clone(),
            raw: r.raw.values().to_vec(),
            scaled_r: r.bandit_reward,
        }
    }
}

pub fn trace_header(k: usize) -> Vec<String> {
    let mut h = vec!["step".to_string(), "controller_index".into(), "arm".into()];
    h.extend((0..k).map(|i| format!("p_{i}")));
    h.extend((0..k).map(|i| format!("raw_m_{i}")));
    h.push("scaled_r".into());
    h
}

pub fn write_trace(path: &Path, k: usize, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(trace_header(k))?;
    for row in rows {
        let mut rec = vec![
            row.step.to_string(),
            row.controller_index
                .map(|c| c.to_string())
                .unwrap_or_default(),
            row.arm.to_string(),
        ];
        rec.extend(row.probabilities.iter().map(|p| p.to_string()));
        rec.extend(row.raw.iter().map(|v| v.to_string()));
        rec.push(row.scaled_r.map(|r| r.to_string()).unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let bad = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let width = header.len();
    if width < 4 || (width - 4) % 2 != 0 {
        return Err(bad(format!("unexpected column count {width}")));
    }
    let k = (width - 4) / 2;
    if header.iter().collect::<Vec<_>>() != trace_header(k) {
        return Err(bad("unexpected header".into()));
    }
    let num = |s: &str| -> Result<f64> { s.parse().map_err(|e| bad(format!("{s:?}: {e}"))) };
    let int = |s: &str| -> Result<usize> { s.parse().map_err(|e| bad(format!("{s:?}: {e}"))) };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let col = |i: usize| rec.get(i).unwrap_or("");
        rows.push(TraceRow {
            step: int(col(0))?,
            controller_index: match col(1) {
                "" => None,
                s => Some(int(s)?),
            },
            arm: int(col(2))?,
            probabilities: (0..k).map(|i| num(col(3 + i))).collect::<Result<_>>()?,
            raw: (0..k).map(|i| num(col(3 + k + i))).collect::<Result<_>>()?,
            scaled_r: match col(3 + 2 * k) {
                "" => None,
                s => Some(num(s)?),
            },
        });
    }
    Ok(rows)
}

/// Checks the trace invariants: simplex rows, rewards in `[0, 1]`, strictly
/// increasing steps and the expected final step (see
/// [`ScheduleConfig::final_eval_step`](crate::schedulers::ScheduleConfig::final_eval_step)).
pub fn validate_trace(rows: &[TraceRow], final_step: usize) -> std::result::Result<(), String> {
    if rows.is_empty() {
        return Err("trace is empty".into());
    }
    for row in rows {
        let total: f64 = row.probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-6
            || row
                .probabilities
                .iter()
                .any(|&p| !(0.0..=1.0 + 1e-9).contains(&p))
        {
            return Err(format!(
                "step {}: probabilities {:?} are not a simplex",
                row.step, row.probabilities
            ));
        }
        if row.arm >= row.probabilities.len() {
            return Err(format!("step {}: arm {} out of range", row.step, row.arm));
        }
        if let Some(r) = row.scaled_r {
            if !(0.0..=1.0).contains(&r) {
                return Err(format!(
                    "step {}: scaled reward {r} outside [0, 1]",
                    row.step
                ));
            }
        }
    }
    if let Some(w) = rows.windows(2).find(|w| w[0].step >= w[1].step) {
        return Err(format!(
            "steps not increasing: {} then {}",
            w[0].step, w[1].step
        ));
    }
    let last = rows.last().unwrap().step;
    if last != final_step {
        return Err(format!("final step {last}, expected {final_step}"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmStartInfo {
    pub steps: usize,
    pub rouge_l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub scheduler: SchedulerKind,
    pub env: EnvKind,
    pub status: RunStatus,
    pub error: Option<String>,
    pub metric_names: Vec<String>,
    pub final_metrics: Option<Vec<f64>>,
    pub mean_of_metrics: Option<f64>,
    pub min_of_metrics: Option<f64>,
    /// Trainer steps spent on each arm.
    pub arm_steps: Option<Vec<usize>>,
    pub warm_start: Option<WarmStartInfo>,
    pub config: ExperimentConfig,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation (n - 1); 0 for a single seed.
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Stat { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricStat {
    pub name: String,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub scheduler: SchedulerKind,
    pub env: EnvKind,
    pub metric_names: Vec<String>,
    pub seeds: Vec<u64>,
    pub failed_seeds: Vec<u64>,
    pub metrics: Vec<MetricStat>,
    pub mean_of_metrics: Option<Stat>,
    pub min_of_metrics: Option<Stat>,
}

impl Aggregate {
    pub fn from_summaries(
        config: &ExperimentConfig,
        metric_names: Vec<String>,
        summaries: &[SeedSummary],
    ) -> Self {
        let ok: Vec<&SeedSummary> = summaries
            .iter()
            .filter(|s| s.status == RunStatus::Ok)
            .collect();
        let metrics = metric_names
            .iter()
            .enumerate()
            .filter_map(|(i, name)| {
                let vals: Vec<f64> = ok
                    .iter()
                    .filter_map(|s| s.final_metrics.as_ref().map(|m| m[i]))
                    .collect();
                Stat::of(&vals).map(|st| MetricStat {
                    name: name.clone(),
                    mean: st.mean,
                    std: st.std,
                })
            })
            .collect();
        let collect = |f: fn(&SeedSummary) -> Option<f64>| -> Vec<f64> {
            ok.iter().filter_map(|s| f(s)).collect()
        };
        Self {
            scheduler: config.scheduler,
            env: config.env,
            metric_names,
            seeds: summaries.iter().map(|s| s.seed).collect(),
            failed_seeds: summaries
                .iter()
                .filter(|s| s.status == RunStatus::Failed)
                .map(|s| s.seed)
                .collect(),
            metrics,
            mean_of_metrics: Stat::of(&collect(|s| s.mean_of_metrics)),
            min_of_metrics: Stat::of(&collect(|s| s.min_of_metrics)),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
