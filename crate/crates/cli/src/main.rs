use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uavmec_cli::checks::{self, Criterion};
use uavmec_cli::summary::{all_checks, render_table};
use uavmec_cli::{load_config, run_experiment, ExperimentConfig, Summary, Verdict};

#[derive(Parser)]
#[command(name = "uavmec", version, about = "UAV edge-computing controller simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scheme x seed x sweep grid and write slots.csv, metrics.json and the config echo.
    Run {
        /// Config file of `dotted.key = value` lines; defaults apply without one.
        config: Option<PathBuf>,
        /// Override one key, e.g. `-s sim.T=2000`. Repeatable; later ones win.
        #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Mean ± sample std per scheme over seeds, plus the ordering checks.
    Summarize {
        #[arg(required = true)]
        metrics: Vec<PathBuf>,
    },
    /// Reduced versions of the property and determinism checks.
    Selftest,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, overrides } => run(config, &overrides),
        Command::Summarize { metrics } => summarize(&metrics),
        Command::Selftest => selftest(),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(config: Option<PathBuf>, overrides: &[String]) -> anyhow::Result<bool> {
    let cfg = load_config(config.as_deref(), overrides)?;
    let (files, failed) = run_experiment(&cfg)?;
    println!("wrote {}", files.slots.display());
    println!("wrote {}", files.metrics.display());
    println!("wrote {}", files.echo.display());
    if failed > 0 {
        eprintln!("{failed} episodes failed; see metrics.json for the reasons");
    }
    Ok(failed == 0)
}

fn summarize(paths: &[PathBuf]) -> anyhow::Result<bool> {
    let s = Summary::load(paths)?;
    print!("{}", render_table(&s));
    let checks = all_checks(&s);
    for c in &checks {
        println!("{c}");
    }
    Ok(checks.iter().all(|c| c.verdict != Verdict::Fail))
}

fn selftest() -> anyhow::Result<bool> {
    let dir = std::env::temp_dir().join(format!("uavmec-selftest-{}", std::process::id()));
    let mut det_cfg = ExperimentConfig::default();
    det_cfg.seeds = vec![1, 2];
    det_cfg.scenario.horizon = 10;
    let results = vec![
        Criterion::run(1, "potential identity", None, || checks::potential_identity(100, 1)),
        Criterion::run(2, "equilibrium certification", None, || checks::nash_certification(50, 2)),
        Criterion::run(3, "allocation optimality", None, || checks::allocation_optimality(20, 1000, 3)),
        Criterion::run(4, "Taylor minorants", None, || checks::minorant_checks(10, 1000, 4)),
        Criterion::run(5, "trajectory rounds", None, || checks::sca_behaviour(40, 0.5, 5)),
        Criterion::run(7, "drift-plus-penalty bound", None, || checks::queue_stability(100, &[1]).1),
        Criterion::run(11, "determinism", None, || {
            checks::determinism(&det_cfg, &dir.join("a"), &dir.join("b"))
        }),
    ];
    let _ = std::fs::remove_dir_all(&dir);
    for r in &results {
        print!("{}", r.report());
    }
    Ok(results.iter().all(Criterion::passed))
}
