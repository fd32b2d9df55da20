//! Benchmark experiments: regret and cumulative time per iteration.

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand, ValueEnum};
use preftree::benchmarks::{run_benchmark_experiment_with, BenchmarkFunction, SUITE};
use preftree::{Execution, RunConfig, Strategy};
use preftree_cli::{mean_curve, plot_curves, read_regret_csv, regret_rows, write_regret_csv, Metric};

#[derive(Parser)]
#[command(about = "Run and plot preference-optimization benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Acquisition {
    Qeubo,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotMetric {
    Regret,
    Seconds,
}

#[derive(Subcommand)]
enum Command {
    /// Independent runs of one function; writes run,iteration,regret,cum_seconds.
    Run {
        #[arg(long)]
        function: String,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        /// Model-driven queries after the initial pairs.
        #[arg(long, default_value_t = 200)]
        iterations: usize,
        #[arg(long, default_value_t = 20)]
        initial_pairs: usize,
        #[arg(long, value_enum, default_value = "qeubo")]
        acquisition: Acquisition,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run everything on one thread; timing curves are only meaningful this way.
        #[arg(long)]
        sequential: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean curves (±1 std) of one or more results files as SVG.
    Plot {
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "regret")]
        metric: PlotMetric,
        #[arg(long)]
        title: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Names of the standard suite.
    List,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            function,
            runs,
            iterations,
            initial_pairs,
            acquisition,
            seed,
            sequential,
            out,
        } => {
            if runs == 0 {
                bail!("--runs must be at least 1");
            }
            let f = BenchmarkFunction::by_name(&function)?;
            let cfg = RunConfig {
                initial_pairs,
                iterations,
                ..RunConfig::default()
            }
            .with_seed(seed);
            let strategy = match acquisition {
                Acquisition::Qeubo => Strategy::Qeubo,
                Acquisition::Random => Strategy::Random,
            };
            let exec = if sequential { Execution::Sequential } else { Execution::default() };
            let report = run_benchmark_experiment_with(&f, runs, &cfg, strategy, exec)
                .map_err(|e| anyhow::anyhow!("run failed after {} answers: {}", e.partial.len(), e.source))?;
            write_regret_csv(&out, &regret_rows(&report))?;
            let finals = report.final_regrets();
            let mean = finals.iter().sum::<f64>() / finals.len() as f64;
            let seconds = report.mean_seconds();
            println!(
                "{} {} runs={} budget={} mean final regret {:.6} mean total time {:.3}s -> {}",
                f.name(),
                strategy,
                runs,
                cfg.budget(),
                mean,
                seconds.last().copied().unwrap_or(0.0),
                out.display()
            );
        }
        Command::Plot {
            inputs,
            metric,
            title,
            out,
        } => {
            let metric = match metric {
                PlotMetric::Regret => Metric::Regret,
                PlotMetric::Seconds => Metric::Seconds,
            };
            let mut series = Vec::new();
            for path in &inputs {
                let rows = read_regret_csv(path)?;
                let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                series.push((label, mean_curve(&rows, metric)));
            }
            let y_label = match metric {
                Metric::Regret => "regret",
                Metric::Seconds => "cumulative seconds",
            };
            let title = title.unwrap_or_else(|| y_label.to_string());
            plot_curves(&out, &title, y_label, &series)?;
            println!("wrote {}", out.display());
        }
        Command::List => {
            for name in SUITE {
                let f = BenchmarkFunction::by_name(name)?;
                println!("{:<14} d={} max={}", f.name(), f.dimension(), f.known_max_value() + 0.0);
            }
        }
    }
    Ok(())
}
