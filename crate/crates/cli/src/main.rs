//! `dorb` command-line runner.
//!
//! Exit codes: 0 on success, 1 for configuration or usage errors, 2 when a
//! run fails at runtime (including any failed seed).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dorb::harness::{self, ConfigInput, RunStatus};

#[derive(Parser)]
#[command(
    name = "dorb",
    version,
    about = "Multi-reward bandit scheduling experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Run one scheduler over one or more seeds.
    Run(RunArgs),
    /// Tabulate the aggregates of finished runs.
    Compare {
        /// Run directories (each holding an aggregate.json).
        #[arg(required = true, num_args = 2..)]
        runs: Vec<PathBuf>,
        /// Print CSV instead of an aligned table.
        #[arg(long)]
        csv: bool,
    },
    /// Quick built-in sanity checks.
    Selftest,
}

#[derive(Args)]
struct RunArgs {
    /// TOML (or .json) experiment file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// single | alternate | random | sm | hm
    #[arg(long)]
    scheduler: Option<String>,
    /// synthetic | toy-textgen
    #[arg(long)]
    env: Option<String>,
    /// Seed, or the first seed when used with --seeds.
    #[arg(long)]
    seed: Option<u64>,
    /// Run N consecutive seeds starting at --seed (default 0).
    #[arg(long, value_name = "N")]
    seeds: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_bandit: Option<usize>,
    #[arg(long)]
    n_controller: Option<usize>,
    /// Quantile-scaling window length.
    #[arg(long)]
    window: Option<usize>,
    /// Number of metrics for the synthetic env.
    #[arg(long)]
    k: Option<usize>,
    /// Metric optimized by the single-reward scheduler.
    #[arg(long)]
    metric: Option<usize>,
    /// Write the generated toy task as TSV files next to the traces.
    #[arg(long)]
    dump_task: bool,
}

impl RunArgs {
    fn flags(&self) -> ConfigInput {
        ConfigInput {
            scheduler: self.scheduler.clone(),
            env: self.env.clone(),
            k: self.k,
            metric: self.metric,
            seed: self.seed,
            n_seeds: self.seeds,
            n_train: self.n_train,
            n_bandit: self.n_bandit,
            n_controller: self.n_controller,
            gamma: self.gamma,
            window: self.window,
            out_dir: self.out_dir.clone(),
            dump_task: self.dump_task.then_some(true),
            ..Default::default()
        }
    }
}

fn fail(err: dorb::Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(if err.is_config() { 1 } else { 2 })
}

fn run(args: RunArgs) -> ExitCode {
    let flags = args.flags();
    let mut base = match &args.config {
        Some(p) => match ConfigInput::from_file(p) {
            Ok(c) => c,
            Err(e) => return fail(e),
        },
        None => ConfigInput::default(),
    };
    // Seeds given on the command line replace the file's seed list.
    if flags.n_seeds.is_some() || flags.seed.is_some() {
        base.seeds = None;
        base.n_seeds = None;
    }
    let config = match base.merge(flags).resolve() {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let aggregate = match harness::run_experiment(&config) {
        Ok(a) => a,
        Err(e) => return fail(e),
    };
    for seed in &aggregate.failed_seeds {
        let summary: Result<harness::SeedSummary, _> =
            harness::read_json(&harness::summary_path(&config.out_dir, *seed));
        let reason = summary
            .ok()
            .filter(|s| s.status == RunStatus::Failed)
            .and_then(|s| s.error)
            .unwrap_or_default();
        eprintln!("seed {seed} failed: {reason}");
    }
    println!(
        "{} on {}: {} seed(s) -> {}",
        config.scheduler,
        config.env,
        config.seeds.len(),
        config.out_dir.display()
    );
    for m in &aggregate.metrics {
        println!("  {:<10} {:.4} ± {:.4}", m.name, m.mean, m.std);
    }
    if let Some(s) = aggregate.mean_of_metrics {
        println!("  {:<10} {:.4} ± {:.4}", "mean", s.mean, s.std);
    }
    if let Some(s) = aggregate.min_of_metrics {
        println!("  {:<10} {:.4} ± {:.4}", "min", s.mean, s.std);
    }
    if aggregate.failed_seeds.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage_error = e.use_stderr();
            let _ = e.print();
            return if usage_error {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match cli.command {
        Command::Run(args) => run(args),
        Command::Compare { runs, csv } => match harness::compare(&runs) {
            Ok(table) if csv => match table.to_csv() {
                Ok(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            },
            Ok(table) => {
                print!("{}", table.to_text());
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Selftest => {
            let results = harness::selftest();
            for r in &results {
                println!(
                    "{} {}: {}",
                    if r.passed { "ok  " } else { "FAIL" },
                    r.name,
                    r.detail
                );
            }
            if results.iter().all(|r| r.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
    }
}
