//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Oracles here are written independently of the library code. The process
//! exits 0 after reporting so `cargo test` stays usable while a criterion is
//! failing; set `ACCEPTANCE_STRICT=1` to exit 1 on any failure.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use dorb::bandit::Exp3;
use dorb::harness::{
    self, compare, read_trace, run_experiment, trace_path, validate_trace, ConfigInput,
    SyntheticInput,
};
use dorb::metrics::{bleu, lcs_length, ngram_counts, rouge_l_f1, Token};
use dorb::scaling::QuantileScaler;
use dorb::schedulers::{
    run_hm_bandit, run_single_reward, run_sm_bandit, ScheduleConfig, SchedulerKind,
};
use dorb::trainer::{
    reinforce_gradient, Example, SyntheticConfig, SyntheticTrainer, ToyConfig, ToyPolicy,
    ToyTrainer, Trainer,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

// ---------------------------------------------------------------- AC1

fn exp3_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let k = rng.random_range(1..=10);
        let gamma = if case % 10 == 0 {
            [0.0, 1.0][case / 10 % 2]
        } else {
            rng.random::<f64>()
        };
        let w: Vec<f64> = (0..k).map(|_| rng.random_range(1e-3..10.0)).collect();
        let total: f64 = w.iter().sum();
        let expected: Vec<f64> = w
            .iter()
            .map(|wi| (1.0 - gamma) * wi / total + gamma / k as f64)
            .collect();
        let b = Exp3::from_log_weights(w.iter().map(|x| x.ln()).collect(), gamma, 0).unwrap();
        for (p, e) in b.probabilities().iter().zip(&expected) {
            worst = worst.max((p - e).abs());
        }
    }
    let mut b = Exp3::new(3, 0.1, 0).unwrap();
    let u = b.update(0, 1.0).unwrap();
    let w0 = (0.0f64 + u.log_increment).exp();
    let lw = b.log_weights();
    let ratio = (lw[0] - lw[1]).exp();
    let ok =
        worst <= 1e-12 && (w0 - 0.1f64.exp()).abs() < 1e-12 && (ratio - 0.1f64.exp()).abs() < 1e-12;
    outcome(ok, format!("max |p - oracle| = {worst:.1e}, w0 = {w0:.15}"))
}

// ---------------------------------------------------------------- AC2

fn exp3_fuzz() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut bandit = Exp3::new(5, 0.2, 3).unwrap();
    let mut violations = 0;
    let mut worst_sum: f64 = 0.0;
    for round in 0..10_000 {
        if round % 1000 == 0 {
            let k = rng.random_range(1..=12);
            let gamma = rng.random_range(0.0..=1.0);
            bandit = Exp3::new(k, gamma, round).unwrap();
        }
        let p = bandit.probabilities();
        let floor = bandit.gamma() / p.len() as f64;
        let sum: f64 = p.iter().sum();
        worst_sum = worst_sum.max((sum - 1.0).abs());
        if (sum - 1.0).abs() > 1e-9 || p.iter().any(|&x| !(x >= floor - 1e-12 && x <= 1.0 + 1e-12))
        {
            violations += 1;
        }
        let (arm, _) = bandit.choose_arm();
        // Adversarial-ish rewards: mostly random, sometimes extreme.
        let r = match rng.random_range(0..4) {
            0 => 1.0,
            1 => 0.0,
            _ => rng.random::<f64>(),
        };
        bandit.update(arm, r).unwrap();
    }
    outcome(
        violations == 0,
        format!("{violations} violations, max |sum - 1| = {worst_sum:.1e}"),
    )
}

// ---------------------------------------------------------------- AC3

fn exp3_bernoulli() -> Outcome {
    let means = [0.8, 0.5, 0.2];
    let mut best_freq = Vec::new();
    let mut rewards = Vec::new();
    for seed in 0..20u64 {
        let mut bandit = Exp3::new(3, 0.1, seed).unwrap();
        let mut env = ChaCha8Rng::seed_from_u64(10_000 + seed);
        let (mut best, mut total) = (0usize, 0.0);
        for _ in 0..5000 {
            let (arm, _) = bandit.choose_arm();
            let r = if env.random::<f64>() < means[arm] {
                1.0
            } else {
                0.0
            };
            best += usize::from(arm == 0);
            total += r;
            bandit.update(arm, r).unwrap();
        }
        best_freq.push(best as f64 / 5000.0);
        rewards.push(total / 5000.0);
    }
    let (f, r) = (mean(&best_freq), mean(&rewards));
    outcome(
        f > 0.5 && r > 0.65,
        format!("best-arm frequency {f:.3}, mean reward {r:.3}"),
    )
}

// ---------------------------------------------------------------- AC4

/// Sort-based quantile: linear interpolation at rank level * (m - 1).
fn oracle_quantile(window: &[f64], level: f64) -> f64 {
    let mut s = window.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = level * (s.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    s[lo] + (rank - lo as f64) * (s[hi] - s[lo])
}

fn oracle_scale(window: &[f64], v: f64) -> f64 {
    if window.is_empty() {
        return 0.5;
    }
    let lo = oracle_quantile(window, 0.2);
    let hi = oracle_quantile(window, 0.8);
    if hi <= lo {
        0.5
    } else if v <= lo {
        0.0
    } else if v >= hi {
        1.0
    } else {
        (v - lo) / (hi - lo)
    }
}

fn scaler_with(window: &[f64]) -> QuantileScaler {
    let mut s = QuantileScaler::new(window.len().max(1)).unwrap();
    for &v in window {
        s.observe(v).unwrap();
    }
    s
}

fn quantile_scaling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst: f64 = 0.0;
    let mut branch_hits = [0usize; 3];
    let mut equivariance_worst: f64 = 0.0;
    for _ in 0..1000 {
        let m = rng.random_range(2..=100);
        let window: Vec<f64> = (0..m).map(|_| rng.random_range(-5.0..5.0)).collect();
        let scaler = scaler_with(&window);
        for _ in 0..5 {
            let probe = rng.random_range(-6.0..6.0);
            let got = scaler.scale(probe).unwrap();
            let want = oracle_scale(&window, probe);
            worst = worst.max((got - want).abs());
            branch_hits[if want == 0.0 {
                0
            } else if want == 1.0 {
                2
            } else {
                1
            }] += 1;

            let a = rng.random_range(0.1..10.0);
            let b = rng.random_range(-10.0..10.0);
            let moved: Vec<f64> = window.iter().map(|x| a * x + b).collect();
            let moved_got = scaler_with(&moved).scale(a * probe + b).unwrap();
            equivariance_worst = equivariance_worst.max((moved_got - got).abs());
        }
    }
    // Explicit clamp branches on a fixed window: q_lo = 1.8, q_hi = 4.2.
    let fixed = scaler_with(&[1.0, 2.0, 3.0, 4.0, 5.0]);
    let clamps = fixed.scale(1.0).unwrap() == 0.0 && fixed.scale(9.0).unwrap() == 1.0;
    let ok = worst <= 1e-12
        && equivariance_worst <= 1e-9
        && clamps
        && branch_hits.iter().all(|&h| h > 0);
    outcome(
        ok,
        format!(
            "max |scale - oracle| = {worst:.1e}, equivariance {equivariance_worst:.1e}, branches (0/mid/1) {branch_hits:?}"
        ),
    )
}

// ---------------------------------------------------------------- AC5 / AC6

fn synthetic_runs(
    diag: &[f64],
) -> (
    Vec<dorb::schedulers::RunLog>,
    Vec<dorb::schedulers::RunLog>,
    Vec<Vec<dorb::schedulers::RunLog>>,
) {
    let mk =
        |seed| SyntheticTrainer::new(SyntheticConfig::diagonal(diag, 0.05, 0.01), seed).unwrap();
    let mut sm = Vec::new();
    let mut hm = Vec::new();
    let mut single = vec![Vec::new(); diag.len()];
    for seed in 0..10u64 {
        let cfg = ScheduleConfig::short_rounds(2000, seed);
        sm.push(run_sm_bandit(&mut mk(seed), &cfg).unwrap());
        hm.push(run_hm_bandit(&mut mk(seed), &cfg).unwrap());
        for (arm, runs) in single.iter_mut().enumerate() {
            runs.push(run_single_reward(&mut mk(seed), arm, &cfg).unwrap());
        }
    }
    (sm, hm, single)
}

fn sm_dominance() -> Outcome {
    let (sm, _, single) = synthetic_runs(&[1.0, 1.0, 1.0]);
    let sm_mean = mean(
        &sm.iter()
            .map(|l| l.final_metrics().mean())
            .collect::<Vec<_>>(),
    );
    let singles: Vec<f64> = single
        .iter()
        .map(|runs| {
            mean(
                &runs
                    .iter()
                    .map(|l| l.final_metrics().mean())
                    .collect::<Vec<_>>(),
            )
        })
        .collect();
    let best = singles.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    outcome(
        sm_mean - best >= 0.05,
        format!(
            "SM mean-of-metrics {sm_mean:.3}, single-arm {singles:.3?}, margin {:.3}",
            sm_mean - best
        ),
    )
}

fn hm_controller() -> Outcome {
    let (_, hm, single) = synthetic_runs(&[1.0, 1.0, 0.25]);
    let choices: Vec<usize> = hm
        .iter()
        .flat_map(|l| l.controller_choices().collect::<Vec<_>>())
        .collect();
    let slow = choices.iter().filter(|&&c| c == 2).count() as f64 / choices.len() as f64;
    let hm_min = mean(
        &hm.iter()
            .map(|l| l.final_metrics().min())
            .collect::<Vec<_>>(),
    );
    let singles: Vec<f64> = single
        .iter()
        .map(|runs| {
            mean(
                &runs
                    .iter()
                    .map(|l| l.final_metrics().min())
                    .collect::<Vec<_>>(),
            )
        })
        .collect();
    let min_ok = singles.iter().all(|&s| hm_min >= s);
    outcome(
        slow >= 0.6 && min_ok,
        format!(
            "slow-metric child chosen in {:.1}% of {} controller rounds (need >= 60%); HM min-of-metrics {hm_min:.3} vs single-arm {singles:.3?}",
            100.0 * slow,
            choices.len()
        ),
    )
}

// ---------------------------------------------------------------- AC7

fn all_sequences(max_len: usize, alphabet: Token) -> Vec<Vec<Token>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for t in 0..alphabet {
                let mut s2: Vec<Token> = s.clone();
                s2.push(t);
                next.push(s2);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Every subsequence of `s`, by choosing an index subset (with repeats).
fn subsequences(s: &[Token]) -> Vec<Vec<Token>> {
    (0u32..1 << s.len())
        .map(|mask| {
            (0..s.len())
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| s[i])
                .collect()
        })
        .collect()
}

fn is_subsequence(needle: &[Token], hay: &[Token]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|t| it.any(|h| h == t))
}

fn lcs_exhaustive(a: &[Token], b: &[Token]) -> usize {
    let mut subs = subsequences(a);
    subs.sort_by_key(|s| std::cmp::Reverse(s.len()));
    subs.iter()
        .find(|s| is_subsequence(s, b))
        .map_or(0, |s| s.len())
}

fn naive_ngram(cand: &[Token], reference: &[Token], n: usize) -> (usize, usize) {
    if cand.len() < n {
        return (0, 0);
    }
    let count = |seq: &[Token], g: &[Token]| seq.windows(n).filter(|w| *w == g).count();
    let mut seen: Vec<&[Token]> = Vec::new();
    let mut clipped = 0;
    for g in cand.windows(n) {
        if seen.contains(&g) {
            continue;
        }
        seen.push(g);
        clipped += count(cand, g).min(count(reference, g));
    }
    (clipped, cand.len() + 1 - n)
}

fn metric_oracles() -> Outcome {
    // Exhaustive pairs up to length 6 (1093 sequences); random pairs up to 8.
    let short = all_sequences(6, 3);
    let mut lcs_bad = 0usize;
    let mut pairs = 0usize;
    for (i, a) in short.iter().enumerate() {
        for b in &short[i..] {
            // One oracle call covers both orders.
            let want = lcs_exhaustive(a, b);
            pairs += 2;
            lcs_bad +=
                usize::from(lcs_length(a, b) != want) + usize::from(lcs_length(b, a) != want);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let random_seq = |rng: &mut ChaCha8Rng, lo: usize| -> Vec<Token> {
        let n = rng.random_range(lo..=8);
        (0..n).map(|_| rng.random_range(0..3)).collect()
    };
    for _ in 0..20_000 {
        let a = random_seq(&mut rng, 7);
        let b = random_seq(&mut rng, 0);
        pairs += 1;
        if lcs_length(&a, &b) != lcs_exhaustive(&a, &b) {
            lcs_bad += 1;
        }
    }

    let mut bleu_bad = 0;
    for _ in 0..500 {
        let mk = |rng: &mut ChaCha8Rng| -> Vec<Token> {
            let n = rng.random_range(0..=12);
            (0..n).map(|_| rng.random_range(0..4)).collect()
        };
        let (c, r) = (mk(&mut rng), mk(&mut rng));
        for n in 1..=4 {
            let got = ngram_counts(&c, &r, n);
            if (got.clipped, got.total) != naive_ngram(&c, &r, n) {
                bleu_bad += 1;
            }
        }
    }

    let f1 = rouge_l_f1(&[1, 3, 4], &[1, 2, 3, 4]);
    let b1 = bleu(&[1, 1, 2], &[1, 2, 3], 1);
    let examples = f1 == 6.0 / 7.0 && (b1 - 2.0 / 3.0).abs() < 1e-15;
    outcome(
        lcs_bad == 0 && bleu_bad == 0 && examples,
        format!("{lcs_bad}/{pairs} LCS mismatches, {bleu_bad}/2000 n-gram mismatches, ROUGE-L {f1}, BLEU-1 {b1}"),
    )
}

// ---------------------------------------------------------------- AC8

fn reinforce_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for _ in 0..10 {
        let vocab = rng.random_range(2..=6);
        let len = rng.random_range(1..=5);
        let mut policy = ToyPolicy::zeros(vocab, len);
        for w in policy.theta_mut() {
            *w = rng.random_range(-1.5..1.5);
        }
        let batch: Vec<Example> = (0..3)
            .map(|_| {
                Example::reverse(
                    (0..len)
                        .map(|_| rng.random_range(0..vocab as Token))
                        .collect(),
                )
            })
            .collect();
        let refs: Vec<&Example> = batch.iter().collect();
        // A reward that is a smooth-free but deterministic function of the output.
        let reward =
            |ex: &Example, out: &[Token]| rouge_l_f1(out, &ex.reference) + 0.1 * out[0] as f64;
        let sample_seed = rng.random::<u64>();
        let grad = reinforce_gradient(
            &policy,
            &refs,
            reward,
            &mut ChaCha8Rng::seed_from_u64(sample_seed),
        );

        // Oracle: replay the same samples, then differentiate the surrogate
        // loss -(1/B) sum (r(w) - r(g)) log p(w) numerically.
        let mut replay = ChaCha8Rng::seed_from_u64(sample_seed);
        let terms: Vec<(Vec<Token>, Vec<Token>, f64)> = refs
            .iter()
            .map(|ex| {
                let w = policy.sample_sequence(&ex.input, &mut replay).tokens;
                let g = policy.greedy_sequence(&ex.input);
                let adv = reward(ex, &w) - reward(ex, &g);
                (ex.input.clone(), w, adv)
            })
            .collect();
        let surrogate = |p: &ToyPolicy| -> f64 {
            -terms
                .iter()
                .map(|(x, w, adv)| adv * p.log_prob(x, w))
                .sum::<f64>()
                / terms.len() as f64
        };
        let active: Vec<usize> = (0..grad.len()).filter(|&i| grad[i].abs() > 1e-6).collect();
        for _ in 0..20 {
            let idx = if active.is_empty() {
                rng.random_range(0..grad.len())
            } else {
                active[rng.random_range(0..active.len())]
            };
            let h = 1e-5;
            let mut plus = policy.clone();
            plus.theta_mut()[idx] += h;
            let mut minus = policy.clone();
            minus.theta_mut()[idx] -= h;
            let fd = (surrogate(&plus) - surrogate(&minus)) / (2.0 * h);
            let denom = fd.abs().max(grad[idx].abs());
            let err = if denom < 1e-9 {
                (fd - grad[idx]).abs()
            } else {
                (fd - grad[idx]).abs() / denom
            };
            worst = worst.max(err);
            checked += 1;
        }
    }

    let mut policy = ToyPolicy::zeros(5, 4);
    for w in policy.theta_mut() {
        *w = rng.random_range(-1.0..1.0);
    }
    let batch: Vec<Example> = (0..8)
        .map(|i| Example::reverse(vec![i % 5, 1, 2, 3]))
        .collect();
    let refs: Vec<&Example> = batch.iter().collect();
    let constant = reinforce_gradient(&policy, &refs, |_, _| 0.7, &mut rng);
    let zero = constant.iter().all(|&g| g == 0.0);
    outcome(
        worst < 1e-4 && zero,
        format!("max relative error {worst:.1e} over {checked} coordinates; constant-reward gradient exactly zero: {zero}"),
    )
}

// ---------------------------------------------------------------- AC9

fn toy_learning() -> Outcome {
    let cfg = ToyConfig::default();
    let mut gains = Vec::new();
    let mut single_means = vec![Vec::new(); 3];
    let mut sm_means = Vec::new();
    for seed in 0..5u64 {
        let warm = |seed| {
            let mut t = ToyTrainer::new(cfg.clone(), seed).unwrap();
            t.warm_start().unwrap();
            t
        };
        let schedule = ScheduleConfig::short_rounds(2000, seed);
        for (metric, means) in single_means.iter_mut().enumerate() {
            let mut t = warm(seed);
            let start = t.evaluate()[0];
            let log = run_single_reward(&mut t, metric, &schedule).unwrap();
            if metric == 0 {
                gains.push(log.final_metrics()[0] - start);
            }
            means.push(log.final_metrics().mean());
        }
        sm_means.push(
            run_sm_bandit(&mut warm(seed), &schedule)
                .unwrap()
                .final_metrics()
                .mean(),
        );
    }
    let min_gain = gains.iter().copied().fold(f64::INFINITY, f64::min);
    let singles: Vec<f64> = single_means.iter().map(|m| mean(m)).collect();
    let best = singles.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sm = mean(&sm_means);
    outcome(
        min_gain >= 0.2 && sm >= best - 0.02,
        format!(
            "ROUGE-L gain min {min_gain:.3} (need >= 0.2); SM mean-of-metrics {sm:.3} vs single-reward {singles:.3?} (need >= {:.3})",
            best - 0.02
        ),
    )
}

// ---------------------------------------------------------------- AC10

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        fs::copy(entry.path(), to.join(entry.file_name())).unwrap();
    }
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let config = |dir: &Path, scheduler: &str, noise: f64| {
        ConfigInput {
            scheduler: Some(scheduler.into()),
            env: Some("synthetic".into()),
            k: Some(3),
            seed: Some(5),
            n_seeds: Some(3),
            n_train: Some(500),
            out_dir: Some(dir.to_path_buf()),
            synthetic: Some(SyntheticInput {
                noise_std: Some(noise),
                ..Default::default()
            }),
            ..Default::default()
        }
        .resolve()
        .unwrap()
    };
    let mut problems = Vec::new();
    let mut traces = 0;
    for kind in SchedulerKind::ALL {
        for noise in [0.0, 0.01] {
            let a = root.path().join(format!("{kind}-{noise}-a"));
            let b = root.path().join(format!("{kind}-{noise}-b"));
            let cfg_a = config(&a, kind.name(), noise);
            run_experiment(&cfg_a).unwrap();
            run_experiment(&config(&b, kind.name(), noise)).unwrap();
            for seed in 5..8 {
                traces += 1;
                let (ta, tb) = (trace_path(&a, seed), trace_path(&b, seed));
                if fs::read(&ta).unwrap() != fs::read(&tb).unwrap() {
                    problems.push(format!("{kind} sigma={noise} seed {seed}: traces differ"));
                }
                let rows = read_trace(&ta).unwrap();
                if let Err(e) = validate_trace(&rows, cfg_a.schedule.final_eval_step(kind)) {
                    problems.push(format!("{kind} seed {seed}: {e}"));
                }
            }
        }
    }
    let original = root.path().join("sm-0-a");
    let copy = root.path().join("sm-copy");
    copy_dir(&original, &copy);
    let table = compare(&[&original, &copy]).unwrap();
    let strip = |r: &harness::ComparisonRow| harness::ComparisonRow {
        run: String::new(),
        ..r.clone()
    };
    if strip(&table.rows[0]) != strip(&table.rows[1]) {
        problems.push("compare rows differ for copies of one run".into());
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            format!("{traces} traces reproduced and validated; compare rows identical")
        } else {
            problems.join("; ")
        },
    )
}

type Criterion = (&'static str, &'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        (
            "AC1",
            "Exp3 probabilities and update",
            Duration::from_secs(1),
            exp3_oracle,
        ),
        (
            "AC2",
            "Exp3 simplex and exploration floor",
            Duration::from_secs(5),
            exp3_fuzz,
        ),
        (
            "AC3",
            "Exp3 on Bernoulli arms",
            Duration::from_secs(10),
            exp3_bernoulli,
        ),
        (
            "AC4",
            "quantile scaling",
            Duration::from_secs(2),
            quantile_scaling,
        ),
        (
            "AC5",
            "SM-Bandit beats single-arm on mean",
            Duration::from_secs(30),
            sm_dominance,
        ),
        (
            "AC6",
            "HM-Bandit controller targets slow metric",
            Duration::from_secs(30),
            hm_controller,
        ),
        (
            "AC7",
            "metric oracles",
            Duration::from_secs(10),
            metric_oracles,
        ),
        (
            "AC8",
            "REINFORCE gradient",
            Duration::from_secs(5),
            reinforce_checks,
        ),
        (
            "AC9",
            "toy end-to-end learning",
            Duration::from_secs(300),
            toy_learning,
        ),
        (
            "AC10",
            "determinism and trace integrity",
            Duration::from_secs(10),
            determinism,
        ),
    ];
    let only: Option<String> = std::env::args().skip(1).find(|a| a.starts_with("AC"));
    let mut failed = 0;
    for (id, name, budget, check) in criteria {
        if only.as_deref().is_some_and(|o| o != id) {
            continue;
        }
        let started = Instant::now();
        let result = check();
        let elapsed = started.elapsed();
        let in_time = elapsed <= budget;
        let passed = result.passed && in_time;
        failed += usize::from(!passed);
        println!(
            "{} {id} {name}: {} [{:.2}s / {}s{}]",
            if passed { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { ", over budget" }
        );
    }
    println!("{failed} criteria failed");
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}
