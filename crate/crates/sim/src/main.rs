use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use chanpred_sim::report;
use chanpred_sim::runner::run_scenario;
use chanpred_sim::selftest;
use chanpred_sim::spec::ConfigFile;

/// Link-level simulator for uplink-aided downlink channel prediction in
/// FDD massive MIMO.
#[derive(Parser)]
#[command(name = "chanpred", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute the scenario described by a configuration file.
    Run {
        /// Scenario configuration (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory for report.csv and manifest.json.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Expand the sweep grid of a configuration file and run every point.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the built-in invariant suite; exits non-zero on failure.
    Selftest {
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("thread pool already initialized")?;
    }
    Ok(())
}

fn execute(points: Vec<chanpred_sim::spec::ScenarioSpec>, out: &std::path::Path) -> Result<()> {
    let mut runs = Vec::with_capacity(points.len());
    for spec in points {
        eprintln!(
            "running scenario '{}' ({} drops)...",
            spec.scenario_id, spec.drops
        );
        let run = run_scenario(&spec)?;
        eprintln!(
            "  nmse {:.2} dB (stale {:.2} dB), se {:.3} (stale {:.3}), bound {}, {} failed, {:.2}s",
            run.aggregate_nmse_db,
            run.aggregate_nmse_stale_db,
            run.mean_se,
            run.mean_se_stale,
            run.bound_outcome.as_str(),
            run.failed_drops,
            run.wall_clock_s
        );
        if run.flagged {
            eprintln!("  warning: more than 5% of drops failed");
        }
        runs.push((spec, run));
    }
    report::write_outputs(out, &runs)?;
    eprintln!(
        "wrote {} and {}",
        out.join("report.csv").display(),
        out.join("manifest.json").display()
    );
    Ok(())
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run {
            config,
            seed,
            threads,
            out,
        } => {
            init_threads(threads)?;
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let mut file = ConfigFile::parse(&text)?;
            if let Some(s) = seed {
                file.scenario.seed = s;
            }
            let spec = file.resolve("base")?;
            execute(vec![spec], &out)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Sweep {
            config,
            seed,
            threads,
            out,
        } => {
            init_threads(threads)?;
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let mut file = ConfigFile::parse(&text)?;
            if let Some(s) = seed {
                file.scenario.seed = s;
            }
            let points = file.expand_sweep()?;
            execute(points, &out)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Selftest { threads } => {
            init_threads(threads)?;
            let mut all_pass = true;
            for check in selftest::run_all() {
                let status = if check.pass { "pass" } else { "FAIL" };
                println!("{status}  {:<24} {}", check.name, check.detail);
                all_pass &= check.pass;
            }
            if all_pass {
                println!("selftest: all checks passed");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("selftest: FAILURES detected");
                Ok(ExitCode::FAILURE)
            }
        }
    }
}
