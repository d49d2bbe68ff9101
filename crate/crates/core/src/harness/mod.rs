//! Experiment orchestration: build a trainer per seed, run a scheduler,
//! persist traces and summaries, aggregate across seeds and compare runs.

mod config;
mod output;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    parse_config, ConfigInput, EnvKind, ExperimentConfig, SyntheticInput, DEFAULT_GAMMA,
    DEFAULT_LEARN_RATE, DEFAULT_NOISE_STD, DEFAULT_N_BANDIT, DEFAULT_N_CONTROLLER, DEFAULT_N_TRAIN,
};
pub use output::{
    aggregate_path, read_json, read_trace, summary_path, trace_header, trace_path, validate_trace,
    write_json, write_trace, Aggregate, MetricStat, RunStatus, SeedSummary, Stat, TraceRow,
    WarmStartInfo,
};

use crate::bandit::Exp3;
use crate::error::{Error, Result};
use crate::metrics::{bleu, lcs_length, rouge_l_f1};
use crate::scaling::{quantile, QuantileScaler};
use crate::schedulers::{RunLog, ScheduleConfig, SchedulerKind};
use crate::trainer::{SyntheticConfig, SyntheticTrainer, ToyPolicy, ToyTask, ToyTrainer, Trainer};

/// Result of one seed, before it is written out.
struct SeedRun {
    log: RunLog,
    warm_start: Option<WarmStartInfo>,
}

fn run_seed(config: &ExperimentConfig, seed: u64) -> Result<SeedRun> {
    let schedule = ScheduleConfig {
        seed,
        ..config.schedule.clone()
    };
    match config.env {
        EnvKind::Synthetic => {
            let synthetic = config.synthetic.clone().expect("resolved synthetic config");
            let mut trainer = SyntheticTrainer::new(synthetic, seed)?;
            let log = config
                .scheduler
                .run(&mut trainer, config.metric, &schedule)?;
            Ok(SeedRun {
                log,
                warm_start: None,
            })
        }
        EnvKind::ToyTextgen => {
            let toy = config.toy.clone().expect("resolved toy config");
            let mut trainer = ToyTrainer::new(toy, seed)?;
            if config.dump_task {
                let task = trainer.task();
                ToyTask::write_examples(
                    &task.train,
                    &config.out_dir.join(format!("task_{seed}_train.tsv")),
                )?;
                ToyTask::write_examples(
                    &task.validation,
                    &config.out_dir.join(format!("task_{seed}_validation.tsv")),
                )?;
            }
            let steps = trainer.warm_start()?;
            let warm_start = Some(WarmStartInfo {
                steps,
                rouge_l: trainer.evaluate()[0],
            });
            let log = config
                .scheduler
                .run(&mut trainer, config.metric, &schedule)?;
            Ok(SeedRun { log, warm_start })
        }
    }
}

fn metric_names(config: &ExperimentConfig) -> Vec<String> {
    match config.env {
        EnvKind::Synthetic => (0..config.num_metrics).map(|i| format!("m{i}")).collect(),
        EnvKind::ToyTextgen => crate::metrics::TextMetric::ALL
            .iter()
            .map(|m| m.name().to_string())
            .collect(),
    }
}

/// Runs every seed (in parallel), writing `trace_<seed>.csv`,
/// `summary_<seed>.json` and `aggregate.json` into `config.out_dir`.
///
/// A seed whose run fails is recorded as failed in its summary; the other
/// seeds still run and the aggregate covers the successful ones.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Aggregate> {
    fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    let names = metric_names(config);

    let summaries = config
        .seeds
        .par_iter()
        .map(|&seed| -> Result<SeedSummary> {
            let started = Instant::now();
            let outcome = run_seed(config, seed);
            let wall_time_secs = started.elapsed().as_secs_f64();
            let summary = match outcome {
                Ok(run) => {
                    let rows: Vec<TraceRow> = run.log.records.iter().map(TraceRow::from).collect();
                    write_trace(
                        &trace_path(&config.out_dir, seed),
                        config.num_metrics,
                        &rows,
                    )?;
                    let fin = run.log.final_metrics();
                    SeedSummary {
                        seed,
                        scheduler: config.scheduler,
                        env: config.env,
                        status: RunStatus::Ok,
                        error: None,
                        metric_names: names.clone(),
                        final_metrics: Some(fin.values().to_vec()),
                        mean_of_metrics: Some(fin.mean()),
                        min_of_metrics: Some(fin.min()),
                        arm_steps: Some(run.log.arm_steps()),
                        warm_start: run.warm_start,
                        config: config.clone(),
                        wall_time_secs,
                    }
                }
                Err(e) => SeedSummary {
                    seed,
                    scheduler: config.scheduler,
                    env: config.env,
                    status: RunStatus::Failed,
                    error: Some(e.to_string()),
                    metric_names: names.clone(),
                    final_metrics: None,
                    mean_of_metrics: None,
                    min_of_metrics: None,
                    arm_steps: None,
                    warm_start: None,
                    config: config.clone(),
                    wall_time_secs,
                },
            };
            write_json(&summary_path(&config.out_dir, seed), &summary)?;
            Ok(summary)
        })
        .collect::<Result<Vec<_>>>()?;

    let aggregate = Aggregate::from_summaries(config, names, &summaries);
    write_json(&aggregate_path(&config.out_dir), &aggregate)?;
    Ok(aggregate)
}

/// One row of a [`compare`] table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub run: String,
    pub scheduler: SchedulerKind,
    pub env: EnvKind,
    pub seeds: usize,
    pub metrics: Vec<MetricStat>,
    pub mean_of_metrics: Option<Stat>,
    pub min_of_metrics: Option<Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub metric_names: Vec<String>,
    pub rows: Vec<ComparisonRow>,
}

fn fmt_stat(s: Option<(f64, f64)>) -> String {
    match s {
        Some((m, sd)) => format!("{m:.4} ± {sd:.4}"),
        None => "n/a".to_string(),
    }
}

impl Comparison {
    /// Columns: run, scheduler, env, seeds, then mean/std per metric, then
    /// mean-of-metrics and min-of-metrics mean/std.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![
            "run".to_string(),
            "scheduler".into(),
            "env".into(),
            "seeds".into(),
        ];
        for n in &self.metric_names {
            header.push(format!("{n}_mean"));
            header.push(format!("{n}_std"));
        }
        header.extend(
            [
                "mean_of_metrics_mean",
                "mean_of_metrics_std",
                "min_of_metrics_mean",
                "min_of_metrics_std",
            ]
            .map(String::from),
        );
        w.write_record(&header)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for row in &self.rows {
            let mut rec = vec![
                row.run.clone(),
                row.scheduler.to_string(),
                row.env.to_string(),
                row.seeds.to_string(),
            ];
            for m in &row.metrics {
                rec.push(m.mean.to_string());
                rec.push(m.std.to_string());
            }
            for s in [row.mean_of_metrics, row.min_of_metrics] {
                rec.push(opt(s.map(|s| s.mean)));
                rec.push(opt(s.map(|s| s.std)));
            }
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Aligned plain-text table.
    pub fn to_text(&self) -> String {
        let mut header = vec!["run".to_string(), "scheduler".into(), "seeds".into()];
        header.extend(self.metric_names.iter().cloned());
        header.push("mean_of_metrics".into());
        header.push("min_of_metrics".into());
        let mut table = vec![header];
        for row in &self.rows {
            let mut cells = vec![
                row.run.clone(),
                row.scheduler.to_string(),
                row.seeds.to_string(),
            ];
            cells.extend(row.metrics.iter().map(|m| fmt_stat(Some((m.mean, m.std)))));
            cells.push(fmt_stat(row.mean_of_metrics.map(|s| (s.mean, s.std))));
            cells.push(fmt_stat(row.min_of_metrics.map(|s| (s.mean, s.std))));
            table.push(cells);
        }
        let widths: Vec<usize> = (0..table[0].len())
            .map(|c| {
                table
                    .iter()
                    .map(|r| r[c].chars().count())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        for row in &table {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(cell, &w)| format!("{cell:<w$}"))
                .collect();
            writeln!(out, "{}", line.join("  ").trim_end()).unwrap();
        }
        out
    }
}

/// Builds a comparison table from completed run directories.
pub fn compare<P: AsRef<Path>>(run_dirs: &[P]) -> Result<Comparison> {
    if run_dirs.len() < 2 {
        return Err(Error::invalid("compare needs at least two run directories"));
    }
    let mut metric_names: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for dir in run_dirs {
        let dir = dir.as_ref();
        if !dir.is_dir() {
            return Err(Error::io(
                dir,
                std::io::Error::new(std::io::ErrorKind::NotFound, "run directory not found"),
            ));
        }
        let agg: Aggregate = read_json(&aggregate_path(dir))?;
        match &metric_names {
            None => metric_names = Some(agg.metric_names.clone()),
            Some(names) if *names != agg.metric_names => {
                return Err(Error::Mismatch(format!(
                    "{} has metrics {:?}, expected {:?}",
                    dir.display(),
                    agg.metric_names,
                    names
                )))
            }
            Some(_) => {}
        }
        rows.push(ComparisonRow {
            run: dir.display().to_string(),
            scheduler: agg.scheduler,
            env: agg.env,
            seeds: agg.seeds.len() - agg.failed_seeds.len(),
            metrics: agg.metrics,
            mean_of_metrics: agg.mean_of_metrics,
            min_of_metrics: agg.min_of_metrics,
        });
    }
    Ok(Comparison {
        metric_names: metric_names.unwrap_or_default(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfTestResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: impl Into<String>) -> SelfTestResult {
    SelfTestResult {
        name,
        passed,
        detail: detail.into(),
    }
}

/// Fast built-in sanity checks of every module.
pub fn selftest() -> Vec<SelfTestResult> {
    let mut out = Vec::new();

    let mut b = Exp3::new(3, 0.1, 0).expect("valid");
    let u = b.update(0, 1.0).expect("valid");
    let lw = b.log_weights();
    let ratio = (lw[0] - lw[1]).exp();
    out.push(check(
        "exp3_update",
        (u.estimated_reward - 3.0).abs() < 1e-12 && (ratio - 0.1f64.exp()).abs() < 1e-12,
        format!("w0/w1 = {ratio}"),
    ));

    let mut b = Exp3::new(4, 0.2, 1).expect("valid");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ok = true;
    for _ in 0..1000 {
        let p = b.probabilities();
        ok &= (p.iter().sum::<f64>() - 1.0).abs() < 1e-9 && p.iter().all(|&x| x >= 0.05 - 1e-12);
        let (arm, _) = b.choose_arm();
        ok &= b.update(arm, rng.random::<f64>()).is_ok();
    }
    out.push(check("exp3_simplex", ok, "1000 rounds"));

    let q = quantile(&[1.0, 2.0, 3.0, 4.0], 0.2).unwrap_or(f64::NAN);
    let mut s = QuantileScaler::new(10).expect("valid");
    s.observe(0.0).and_then(|_| s.observe(1.0)).expect("finite");
    let scaled = [0.1, 0.5, 0.9].map(|v| s.scale(v).unwrap_or(f64::NAN));
    out.push(check(
        "quantile_scaling",
        (q - 1.6).abs() < 1e-12
            && scaled[0] == 0.0
            && (scaled[1] - 0.5).abs() < 1e-12
            && scaled[2] == 1.0,
        format!("q = {q}, scaled = {scaled:?}"),
    ));

    let f1 = rouge_l_f1(&[0, 2, 3], &[0, 1, 2, 3]);
    let b1 = bleu(&[0, 0, 1], &[0, 1, 2], 1);
    out.push(check(
        "metrics",
        lcs_length(&[0, 1, 2, 3], &[0, 2, 3]) == 3
            && (f1 - 6.0 / 7.0).abs() < 1e-12
            && (b1 - 2.0 / 3.0).abs() < 1e-12,
        format!("rouge_l = {f1}, bleu1 = {b1}"),
    ));

    let mut t = SyntheticTrainer::new(SyntheticConfig::identity(3, 0.05, 0.0), 0).expect("valid");
    let mut ok = true;
    for step in 1..=100 {
        ok &= t.step(0).is_ok();
        ok &= (t.metrics()[0] - (1.0 - 0.95f64.powi(step))).abs() < 1e-12;
    }
    out.push(check("synthetic_recurrence", ok, "100 steps"));

    let run = |seed| {
        let mut t =
            SyntheticTrainer::new(SyntheticConfig::identity(3, 0.05, 0.0), seed).expect("valid");
        crate::schedulers::run_sm_bandit(&mut t, &ScheduleConfig::short_rounds(300, seed))
    };
    let replay = matches!((run(3), run(3)), (Ok(a), Ok(b)) if a == b);
    out.push(check("sm_replay", replay, "two identical SM runs"));

    let mut policy = ToyPolicy::zeros(5, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for w in policy.theta_mut() {
        *w = rng.random_range(-1.0..1.0);
    }
    let input = [1, 4, 0, 2];
    let output = policy.sample_sequence(&input, &mut rng).tokens;
    let mut grad = vec![0.0; policy.theta().len()];
    policy.accumulate_log_prob_grad(&input, &output, 1.0, &mut grad);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        // Only coordinates touched by active features carry signal.
        let feature = if rng.random_bool(0.5) {
            20
        } else {
            rng.random_range(0..4) * 5 + input[0] as usize
        };
        let idx = policy.index(feature, rng.random_range(0..4), rng.random_range(0..5));
        let h = 1e-5;
        let mut plus = policy.clone();
        plus.theta_mut()[idx] += h;
        let mut minus = policy.clone();
        minus.theta_mut()[idx] -= h;
        let fd = (plus.log_prob(&input, &output) - minus.log_prob(&input, &output)) / (2.0 * h);
        worst = worst.max((fd - grad[idx]).abs() / fd.abs().max(grad[idx].abs()).max(1e-8));
    }
    out.push(check(
        "log_prob_gradient",
        worst < 1e-4,
        format!("max relative error {worst:.2e}"),
    ));

    out
}

/// Directory for a named run under `root`.
pub fn run_dir(root: &Path, name: &str) -> PathBuf {
    root.join(name)
}
