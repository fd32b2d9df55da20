//! Simulated ranking sessions on the sushi preference data.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use preftree::sushi::session::summarize;
use preftree::sushi::synthetic::{generate, SyntheticConfig};
use preftree::sushi::{
    item_schema, load_sushi_data, run_cold_sessions, run_warm_start_experiment, user_schema, write_sushi_data,
    SessionConfig, SushiData, UserRanking, WarmStartConfig,
};
use preftree::{Execution, Strategy};
use preftree_cli::{sushi_rows, write_sushi_csv};

#[derive(Parser)]
#[command(about = "Sushi ranking experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dataset {
    A,
    B,
}

#[derive(Clone, Copy, ValueEnum)]
enum Acquisition {
    Qeubo,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Simulates sessions and writes mode,user,query,rho_regret,kendall_tau.
    Eval {
        #[arg(long, value_enum, ignore_case = true, default_value = "a")]
        dataset: Dataset,
        #[arg(long, default_value_t = 100)]
        users: usize,
        #[arg(long, value_enum, default_value = "qeubo")]
        acquisition: Acquisition,
        #[arg(long, value_enum, default_value = "off")]
        warm_start: Toggle,
        #[arg(long, default_value_t = 30)]
        queries: usize,
        /// Users per cohort refresh in warm-start mode.
        #[arg(long, default_value_t = 50)]
        batch_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory with the sushi3 files; defaults to $SUSHI3_DIR, then to
        /// generated synthetic data.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Writes a synthetic data set in the sushi3 file formats.
    Synth {
        #[arg(long, default_value_t = 5000)]
        users: usize,
        #[arg(long, default_value_t = 2003)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(data_dir: Option<PathBuf>) -> Result<SushiData> {
    let dir = data_dir.or_else(|| std::env::var_os("SUSHI3_DIR").map(PathBuf::from));
    match dir {
        Some(dir) => load_sushi_data(&dir).with_context(|| format!("loading sushi3 files from {}", dir.display())),
        None => {
            eprintln!("no sushi3 directory given: using generated synthetic data");
            Ok(generate(&SyntheticConfig::default()))
        }
    }
}

fn print_summary(label: &str, curves: &[preftree::sushi::UserCurve]) {
    let (mean, _) = summarize(curves);
    let at: Vec<String> = [0, 5, 10, 20, 30]
        .iter()
        .filter(|&&q| q < mean.len())
        .map(|&q| format!("q{q}={:.3}", mean[q]))
        .collect();
    println!("{label}: {} users, mean rho-regret {}", curves.len(), at.join(" "));
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Eval {
            dataset,
            users,
            acquisition,
            warm_start,
            queries,
            batch_size,
            seed,
            data_dir,
            out,
        } => {
            let data = load(data_dir)?;
            let rankings: &[UserRanking] = match dataset {
                Dataset::A => &data.rankings_a,
                Dataset::B => &data.rankings_b,
            };
            if users == 0 || users > rankings.len() {
                bail!("--users must be between 1 and {}", rankings.len());
            }
            let session = SessionConfig {
                queries,
                strategy: match acquisition {
                    Acquisition::Qeubo => Strategy::Qeubo,
                    Acquisition::Random => Strategy::Random,
                },
                seed,
                ..SessionConfig::default()
            };
            let items = data.item_instances();
            let rows = match warm_start {
                Toggle::Off => {
                    let curves = run_cold_sessions(&rankings[..users], &items, &item_schema(), &session, Execution::default())?;
                    print_summary("cold", &curves);
                    sushi_rows("cold", &curves)
                }
                Toggle::On => {
                    if batch_size == 0 {
                        bail!("--batch-size must be at least 1");
                    }
                    let paired: Vec<_> = rankings[..users]
                        .iter()
                        .map(|r| (data.users[r.user_id].features(), r.clone()))
                        .collect();
                    let cfg = WarmStartConfig {
                        batch_size,
                        ..WarmStartConfig::default()
                    };
                    let report = run_warm_start_experiment(
                        &paired,
                        &user_schema(),
                        &items,
                        &item_schema(),
                        &session,
                        &cfg,
                        Execution::default(),
                    )?;
                    if report.measured.is_empty() {
                        bail!("no users beyond the first batch of {batch_size}; raise --users");
                    }
                    let (cold, warm) = (report.cold_curves(), report.warm_curves());
                    print_summary("cold", &cold);
                    print_summary("warm", &warm);
                    let (qc, qw) = report.mean_queries_to_threshold();
                    println!("mean queries to rho-regret <= {}: cold {qc:.2}, warm {qw:.2}", cfg.threshold);
                    let mut rows = sushi_rows("cold", &cold);
                    rows.extend(sushi_rows("warm", &warm));
                    rows
                }
            };
            write_sushi_csv(&out, &rows)?;
            println!("wrote {}", out.display());
        }
        Command::Synth { users, seed, out } => {
            let data = generate(&SyntheticConfig {
                users,
                seed,
                ..SyntheticConfig::default()
            });
            std::fs::create_dir_all(&out)?;
            write_sushi_data(&out, &data)?;
            println!("wrote {} users and {} items to {}", data.users.len(), data.items.len(), out.display());
        }
    }
    Ok(())
}
