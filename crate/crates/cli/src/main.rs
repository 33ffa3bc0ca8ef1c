use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use wmpot_cli::commands::{self, Failure, Options};
use wmpot_cli::config::{parse_seeds, ExperimentConfig, Method};

/// Output root used when neither `--out` nor the config names one.
const OUT_ENV: &str = "WMPOT_OUT";

#[derive(Parser)]
#[command(name = "wmpot", version, about = "Continuous domain adaptation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write each seed's domains as CSV files plus a manifest.
    Generate(Common),
    /// Report the Wasserstein curriculum and its agreement with the metadata order.
    Curriculum(Common),
    /// Run adaptation methods over seeds and write per-seed metrics and aggregates.
    Run(Common),
    /// Run the partitioning, ordering and path-consistency ablations.
    Ablate(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON). Defaults to the half-moon rotation benchmark.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seeds as `0..100`, `7` or `1,2,3`; overrides the config.
    #[arg(long)]
    seeds: Option<String>,
    /// Worker threads for seed-level parallelism.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Methods to run (comma separated); overrides the config.
    #[arg(long, value_delimiter = ',')]
    method: Vec<String>,
}

impl Common {
    fn resolve(&self, command: &str) -> anyhow::Result<(ExperimentConfig, Options)> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = &self.seeds {
            cfg.seeds = parse_seeds(s)?;
        }
        if !self.method.is_empty() {
            cfg.methods = self.method.iter().map(|m| m.parse()).collect::<anyhow::Result<Vec<Method>>>()?;
        }
        let out = self
            .out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .or_else(|| std::env::var_os(OUT_ENV).map(|root| PathBuf::from(root).join(command)))
            .unwrap_or_else(|| PathBuf::from("wmpot-out").join(command));
        Ok((cfg, Options { out, jobs: self.jobs }))
    }
}

fn report_failures(failures: &[Failure]) -> ExitCode {
    for f in failures {
        eprintln!("seed {} {}: {}", f.seed, f.cell, f.error);
    }
    if failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("{} cell(s) failed", failures.len());
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Generate(c) => {
            let (cfg, opts) = c.resolve("generate")?;
            let manifests = commands::generate(&cfg, &opts)?;
            for m in manifests {
                println!("{}", m.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Curriculum(c) => {
            let (cfg, opts) = c.resolve("curriculum")?;
            let r = commands::curriculum(&cfg, &opts)?;
            for s in &r.seeds {
                println!(
                    "seed {}: {} (tau {})",
                    s.seed,
                    s.w_order.join(" -> "),
                    s.kendall_tau.map_or("n/a".into(), |t| format!("{t:.3}"))
                );
            }
            if let Some(rate) = r.agreement_rate {
                println!("agreement with metadata order: {:.1}%", 100.0 * rate);
            }
            Ok(report_failures(&r.failures))
        }
        Command::Run(c) => {
            let (cfg, opts) = c.resolve("run")?;
            let r = commands::run(&cfg, &opts)?;
            println!("{:<12} {:<10} {:>12} {:>12}", "method", "metric", "mean", "variance");
            for a in &r.aggregates {
                println!("{:<12} {:<10} {:>12.6} {:>12.3e}", a.method, a.metric, a.mean, a.variance);
            }
            println!("results in {}", opts.out.display());
            Ok(report_failures(&r.failures))
        }
        Command::Ablate(c) => {
            let (cfg, opts) = c.resolve("ablate")?;
            let r = commands::ablate(&cfg, &opts).context("ablation")?;
            for arm in &r.arms {
                for a in &arm.aggregates {
                    println!("{:<12} {:<10} {:<10} {:>10.6}", arm.arm.name(), a.method, a.metric, a.mean);
                }
            }
            Ok(report_failures(&r.failures))
        }
    }
}
