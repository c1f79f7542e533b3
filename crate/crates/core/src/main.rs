use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use fedq::federation::Simulation;
use fedq::harness::{
    compare_files, export_metrics, parse_config, parse_grid, run_sweep, unix_now, MetricsFormat, RunManifest,
    RunSummary, OUT_DIR_ENV,
};

#[derive(Parser)]
#[command(
    name = "fedq",
    version,
    about = "Federated learning simulator with adaptive quantization and local DP"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its metrics and manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = OUT_DIR_ENV, default_value = "runs")]
        out: PathBuf,
        #[arg(long, default_value = "csv", value_parser = ["csv", "jsonl"])]
        format: String,
        /// Run clients one after another instead of on the thread pool.
        #[arg(long)]
        serial: bool,
    },
    /// Compare two metrics files (or run directories): bit reduction and best rounds.
    Compare {
        baseline: PathBuf,
        variant: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Run a Cartesian grid of experiments derived from one config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// e.g. "epsilon=off,1e2,1e4;schedule=static:32,cosine,dynamic"
        #[arg(long)]
        grid: String,
        #[arg(long, env = OUT_DIR_ENV, default_value = "runs")]
        out: PathBuf,
    },
}

fn metrics_path(p: &Path) -> Result<PathBuf> {
    if !p.is_dir() {
        return Ok(p.to_path_buf());
    }
    ["metrics.csv", "metrics.jsonl"]
        .iter()
        .map(|f| p.join(f))
        .find(|f| f.exists())
        .with_context(|| format!("{} contains no metrics.csv or metrics.jsonl", p.display()))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            out,
            format,
            serial,
        } => {
            let mut cfg = parse_config(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if serial {
                cfg.parallel = false;
            }
            let format: MetricsFormat = format.parse()?;
            let started = unix_now();
            let records = Simulation::new(cfg.clone())?.run()?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let metrics = out.join(format!("metrics.{}", format.extension()));
            export_metrics(&records, format, &metrics)?;
            let manifest = out.join("manifest.json");
            RunManifest::new(&cfg, started, vec![metrics.clone()]).write(&manifest)?;

            let s = RunSummary::of(&records);
            println!("rounds        {}", s.rounds);
            println!(
                "total bits    {} (uplink {}, downlink {})",
                s.total_bits, s.uplink_bits, s.downlink_bits
            );
            match (s.best_test_acc, s.best_round) {
                (Some(acc), Some(t)) => println!("best test acc {acc:.6} at round {t}"),
                _ => println!("best test acc n/a"),
            }
            println!("metrics       {}", metrics.display());
            println!("manifest      {}", manifest.display());
        }
        Command::Compare {
            baseline,
            variant,
            json,
        } => {
            let s = compare_files(&metrics_path(&baseline)?, &metrics_path(&variant)?)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&s)?);
            } else {
                println!("baseline bits {}", s.baseline.total_bits);
                println!("variant bits  {}", s.variant.total_bits);
                println!("bit ratio     {:.6}", s.bit_ratio);
                println!("reduction     {:.4}%", 100.0 * s.reduction);
                for (name, r) in [("baseline", &s.baseline), ("variant", &s.variant)] {
                    match (r.best_test_acc, r.best_round) {
                        (Some(acc), Some(t)) => println!("{name:<9} best test acc {acc:.6} at round {t}"),
                        _ => println!("{name:<9} best test acc n/a"),
                    }
                }
            }
        }
        Command::Sweep { config, grid, out } => {
            let cfg = parse_config(&config)?;
            let axes = parse_grid(&grid)?;
            let results = run_sweep(&cfg, &axes, &out)?;
            for (cell, s) in &results {
                let settings: Vec<String> = cell.settings.iter().map(|(k, v)| format!("{k}={v}")).collect();
                println!(
                    "cell {:03} [{}] total_bits={} best_test_acc={}",
                    cell.index,
                    settings.join(" "),
                    s.total_bits,
                    s.best_test_acc.map_or("n/a".to_string(), |a| format!("{a:.6}"))
                );
            }
            println!("summary {}", out.join("summary.csv").display());
        }
    }
    Ok(())
}
