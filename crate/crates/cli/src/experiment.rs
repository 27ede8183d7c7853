//! Runs the scheme x seed x sweep grid and writes the result files.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use uavmec::sim::{generate_scenario, run_episode_on, Episode, Metrics, SchemeKind};

use crate::config::ExperimentConfig;

pub const SLOTS_FILE: &str = "slots.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const ECHO_FILE: &str = "config_echo.conf";

/// One episode of the grid.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub scheme: SchemeKind,
    pub seed: u64,
    pub sweep_value: Option<f64>,
    pub episode: Result<Episode<f64>, String>,
}

/// Time averages and terminal backlogs of one episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub time_average_ud_cost: f64,
    pub time_average_uav_energy: f64,
    pub time_average_workload: f64,
    pub time_average_compute_energy: f64,
    pub time_average_propulsion_energy: f64,
    pub time_average_offloads: f64,
    pub final_q_compute: f64,
    pub final_q_propulsion: f64,
}

impl From<&Metrics<f64>> for RunMetrics {
    fn from(m: &Metrics<f64>) -> Self {
        Self {
            time_average_ud_cost: m.time_average_ud_cost,
            time_average_uav_energy: m.time_average_uav_energy,
            time_average_workload: m.time_average_workload,
            time_average_compute_energy: m.time_average_compute_energy,
            time_average_propulsion_energy: m.time_average_propulsion_energy,
            time_average_offloads: m.time_average_offloads,
            final_q_compute: m.final_q_compute,
            final_q_propulsion: m.final_q_propulsion,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Error,
}

/// One `metrics.json` entry, keyed by scheme, seed and sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub scheme: String,
    pub seed: u64,
    pub sweep_key: Option<String>,
    pub sweep_value: Option<f64>,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<RunMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub runs: Vec<RunEntry>,
}

#[derive(Serialize)]
struct SlotRow<'a> {
    scheme: &'a str,
    seed: u64,
    sweep_value: Option<f64>,
    t: usize,
    #[serde(rename = "C_s")]
    cost: f64,
    #[serde(rename = "E_c")]
    e_compute: f64,
    #[serde(rename = "E_p")]
    e_propulsion: f64,
    workload: f64,
    #[serde(rename = "Q_c")]
    q_compute: f64,
    #[serde(rename = "Q_p")]
    q_propulsion: f64,
    offload_count: usize,
    uav_x: f64,
    uav_y: f64,
}

/// Run every (sweep point, scheme, seed) episode on a pool of `cfg.threads`
/// workers. The result order follows the grid, not completion order.
pub fn run_grid(cfg: &ExperimentConfig) -> anyhow::Result<Vec<RunOutcome>> {
    let sweep = cfg.sweep()?;
    let points: Vec<Option<f64>> = match &sweep {
        Some(s) => s.values.iter().map(|&v| Some(v)).collect(),
        None => vec![None],
    };
    let mut jobs = Vec::new();
    for &point in &points {
        let scenario = cfg.scenario_at(sweep.as_ref().zip(point).map(|(s, v)| (s.key.as_str(), v)))?;
        for &scheme in &cfg.schemes {
            for &seed in &cfg.seeds {
                jobs.push((scenario.clone(), scheme, seed, point));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .context("building the worker pool")?;
    let outcomes = pool.install(|| {
        jobs.par_iter()
            .map(|(scenario, scheme, seed, point)| {
                let world = generate_scenario(scenario, *seed);
                let episode = run_episode_on(*scheme, scenario, &world, *seed).map_err(|e| {
                    log::error!("{scheme} seed {seed}: {e}");
                    e.to_string()
                });
                RunOutcome {
                    scheme: *scheme,
                    seed: *seed,
                    sweep_value: *point,
                    episode,
                }
            })
            .collect()
    });
    Ok(outcomes)
}

pub fn metrics_file(cfg: &ExperimentConfig, outcomes: &[RunOutcome]) -> MetricsFile {
    let key = (!cfg.sweep_key.is_empty()).then(|| cfg.sweep_key.clone());
    let runs = outcomes
        .iter()
        .map(|o| {
            let (status, reason, metrics) = match &o.episode {
                Ok(ep) => (RunStatus::Ok, None, Some(RunMetrics::from(&ep.metrics))),
                Err(e) => (RunStatus::Error, Some(e.clone()), None),
            };
            RunEntry {
                scheme: o.scheme.name().to_string(),
                seed: o.seed,
                sweep_key: key.clone(),
                sweep_value: o.sweep_value,
                status,
                reason,
                metrics,
            }
        })
        .collect();
    MetricsFile { runs }
}

pub fn write_slots_csv(path: &Path, outcomes: &[RunOutcome]) -> anyhow::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    for o in outcomes {
        let Ok(ep) = &o.episode else { continue };
        for r in &ep.records {
            w.serialize(SlotRow {
                scheme: o.scheme.name(),
                seed: o.seed,
                sweep_value: o.sweep_value,
                t: r.t,
                cost: r.system_cost,
                e_compute: r.e_compute,
                e_propulsion: r.e_propulsion,
                workload: r.workload,
                q_compute: r.q_compute,
                q_propulsion: r.q_propulsion,
                offload_count: r.offload_count,
                uav_x: r.uav_position.x,
                uav_y: r.uav_position.y,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Paths of the three files one run writes.
#[derive(Debug, Clone)]
pub struct OutputFiles {
    pub slots: PathBuf,
    pub metrics: PathBuf,
    pub echo: PathBuf,
}

pub fn write_outputs(cfg: &ExperimentConfig, outcomes: &[RunOutcome], dir: &Path) -> anyhow::Result<OutputFiles> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let files = OutputFiles {
        slots: dir.join(SLOTS_FILE),
        metrics: dir.join(METRICS_FILE),
        echo: dir.join(ECHO_FILE),
    };
    write_slots_csv(&files.slots, outcomes)?;
    let mut json = serde_json::to_string_pretty(&metrics_file(cfg, outcomes))?;
    json.push('\n');
    fs::write(&files.metrics, json).with_context(|| format!("writing {}", files.metrics.display()))?;
    let mut f = fs::File::create(&files.echo).with_context(|| format!("creating {}", files.echo.display()))?;
    f.write_all(cfg.echo().as_bytes())?;
    Ok(files)
}

/// Run the grid and write all outputs to `cfg.output_dir`.
///
/// Returns the file paths and the number of episodes that failed.
pub fn run_experiment(cfg: &ExperimentConfig) -> anyhow::Result<(OutputFiles, usize)> {
    let outcomes = run_grid(cfg)?;
    let failed = outcomes.iter().filter(|o| o.episode.is_err()).count();
    let files = write_outputs(cfg, &outcomes, &cfg.output_dir)?;
    Ok((files, failed))
}
