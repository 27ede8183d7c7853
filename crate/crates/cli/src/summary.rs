//! Seed statistics over `metrics.json` files and the scheme-ordering checks.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;

use anyhow::Context as _;

use crate::experiment::{MetricsFile, RunMetrics, RunStatus};

/// Display order: expected best to worst cost.
pub const SCHEME_ORDER: [&str; 5] = ["OJOA", "FLP", "OCQ", "ERA", "ELC"];
/// Schemes that use the UAV as an edge server.
pub const OFFLOADING: [&str; 4] = ["OJOA", "FLP", "OCQ", "ERA"];

pub const DATA_SIZE_KEY: &str = "task.data_max";
pub const V_KEY: &str = "energy.v";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Option<Stat> {
        let n = xs.len();
        if n == 0 {
            return None;
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Stat { mean, std, n })
    }
}

/// Metric columns of the summary table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    UdCost,
    UavEnergy,
    Workload,
    ComputeEnergy,
    PropulsionEnergy,
    FinalQc,
    FinalQp,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::UdCost,
        Metric::UavEnergy,
        Metric::Workload,
        Metric::ComputeEnergy,
        Metric::PropulsionEnergy,
        Metric::FinalQc,
        Metric::FinalQp,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Metric::UdCost => "ud_cost",
            Metric::UavEnergy => "uav_energy_J",
            Metric::Workload => "workload_Gcyc",
            Metric::ComputeEnergy => "E_c_J",
            Metric::PropulsionEnergy => "E_p_J",
            Metric::FinalQc => "Q_c(T)",
            Metric::FinalQp => "Q_p(T)",
        }
    }

    pub fn get(self, m: &RunMetrics) -> f64 {
        match self {
            Metric::UdCost => m.time_average_ud_cost,
            Metric::UavEnergy => m.time_average_uav_energy,
            Metric::Workload => m.time_average_workload,
            Metric::ComputeEnergy => m.time_average_compute_energy,
            Metric::PropulsionEnergy => m.time_average_propulsion_energy,
            Metric::FinalQc => m.final_q_compute,
            Metric::FinalQp => m.final_q_propulsion,
        }
    }

    fn scale(self) -> f64 {
        if self == Metric::Workload {
            1e-9
        } else {
            1.0
        }
    }
}

/// Successful runs grouped by sweep point and scheme, keyed by seed.
#[derive(Debug, Clone, Default)]
pub struct Summary {
    pub sweep_key: Option<String>,
    /// Sweep values in ascending order; a single `None` without a sweep.
    pub points: Vec<Option<f64>>,
    cells: BTreeMap<(usize, String), BTreeMap<u64, RunMetrics>>,
    /// `(scheme, seed, sweep value, reason)` of failed runs.
    pub failures: Vec<(String, u64, Option<f64>, String)>,
}

impl Summary {
    pub fn from_files(files: &[MetricsFile]) -> Summary {
        let mut s = Summary::default();
        let mut points: Vec<Option<f64>> = Vec::new();
        for run in files.iter().flat_map(|f| &f.runs) {
            if s.sweep_key.is_none() {
                s.sweep_key = run.sweep_key.clone();
            }
            if !points.iter().any(|p| same_point(*p, run.sweep_value)) {
                points.push(run.sweep_value);
            }
        }
        points.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        s.points = points;
        for run in files.iter().flat_map(|f| &f.runs) {
            let idx = s.point_index(run.sweep_value).expect("point collected above");
            match (run.status, run.metrics) {
                (RunStatus::Ok, Some(m)) => {
                    s.cells.entry((idx, run.scheme.clone())).or_default().insert(run.seed, m);
                }
                _ => s.failures.push((
                    run.scheme.clone(),
                    run.seed,
                    run.sweep_value,
                    run.reason.clone().unwrap_or_else(|| "no metrics recorded".into()),
                )),
            }
        }
        s
    }

    pub fn load(paths: &[impl AsRef<Path>]) -> anyhow::Result<Summary> {
        let mut files = Vec::new();
        for p in paths {
            let p = p.as_ref();
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            files.push(serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?);
        }
        Ok(Summary::from_files(&files))
    }

    fn point_index(&self, v: Option<f64>) -> Option<usize> {
        self.points.iter().position(|p| same_point(*p, v))
    }

    /// Per-seed values of one metric.
    pub fn seeds(&self, point: usize, scheme: &str) -> Option<&BTreeMap<u64, RunMetrics>> {
        self.cells.get(&(point, scheme.to_string())).filter(|m| !m.is_empty())
    }

    pub fn stat(&self, point: usize, scheme: &str, metric: Metric) -> Option<Stat> {
        let runs = self.seeds(point, scheme)?;
        Stat::of(&runs.values().map(|m| metric.get(m)).collect::<Vec<_>>())
    }

    fn mean(&self, point: usize, scheme: &str, metric: Metric) -> Option<f64> {
        self.stat(point, scheme, metric).map(|s| s.mean)
    }

    pub fn schemes(&self) -> Vec<String> {
        let mut present: Vec<String> = self.cells.keys().map(|(_, s)| s.clone()).collect();
        present.dedup();
        let mut out: Vec<String> = SCHEME_ORDER.iter().map(|s| s.to_string()).collect();
        for s in present {
            if !out.contains(&s) {
                out.push(s);
            }
        }
        out
    }
}

fn same_point(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => x.to_bits() == y.to_bits(),
        _ => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// Not evaluated because some scheme or point has no data.
    Gap,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Gap => "GAP",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: String) -> Self {
        Check {
            name: name.into(),
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            detail,
        }
    }

    fn gap(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            verdict: Verdict::Gap,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", self.verdict, self.name, self.detail)
    }
}

/// Orderings expected of a single configuration run with all five schemes.
pub fn scheme_checks(s: &Summary, point: usize) -> Vec<Check> {
    let mut out = Vec::new();
    let cost = Metric::UdCost;

    let name = "mean cost order OJOA < FLP < OCQ < ERA < ELC";
    let means: Option<Vec<f64>> = SCHEME_ORDER.iter().map(|k| s.mean(point, k, cost)).collect();
    match means {
        Some(m) => {
            let ok = m.windows(2).all(|w| w[0] < w[1]);
            let shown: Vec<String> = SCHEME_ORDER.iter().zip(&m).map(|(k, v)| format!("{k} {v:.4}")).collect();
            out.push(Check::new(name, ok, shown.join(", ")));
        }
        None => out.push(Check::gap(name, "missing scheme data")),
    }

    for other in ["FLP", "OCQ", "ERA", "ELC"] {
        out.push(per_seed(s, point, "OJOA", other, &format!("per-seed cost OJOA <= {other}")));
    }
    for other in ["FLP", "OCQ", "ERA"] {
        out.push(per_seed(s, point, other, "ELC", &format!("per-seed cost {other} <= ELC")));
    }

    for metric in [Metric::Workload, Metric::ComputeEnergy] {
        let name = format!("ERA lowest mean {} among offloading schemes", metric.label());
        let Some(era) = s.mean(point, "ERA", metric) else {
            out.push(Check::gap(name, "no ERA data"));
            continue;
        };
        let others: Vec<(&str, f64)> = OFFLOADING[..3]
            .iter()
            .filter_map(|k| s.mean(point, k, metric).map(|v| (*k, v)))
            .collect();
        if others.len() < 3 {
            out.push(Check::gap(name, "missing scheme data"));
            continue;
        }
        let ok = others.iter().all(|(_, v)| era < *v);
        let shown: Vec<String> = others.iter().map(|(k, v)| format!("{k} {:.4}", v * metric.scale())).collect();
        out.push(Check::new(name, ok, format!("ERA {:.4} vs {}", era * metric.scale(), shown.join(", "))));
    }
    out
}

/// `lo` no worse than `hi` on every common seed.
fn per_seed(s: &Summary, point: usize, lo: &str, hi: &str, name: &str) -> Check {
    let (Some(a), Some(b)) = (s.seeds(point, lo), s.seeds(point, hi)) else {
        return Check::gap(name, "missing scheme data");
    };
    let mut worst = f64::INFINITY;
    let mut worst_seed = 0;
    let mut n = 0;
    let mut bad = 0;
    for (seed, ma) in a {
        let Some(mb) = b.get(seed) else { continue };
        n += 1;
        let margin = mb.time_average_ud_cost - ma.time_average_ud_cost;
        if margin < 0.0 {
            bad += 1;
        }
        if margin < worst {
            worst = margin;
            worst_seed = *seed;
        }
    }
    if n == 0 {
        return Check::gap(name, "no common seeds");
    }
    Check::new(
        name,
        bad == 0,
        format!("{bad}/{n} seeds violate, smallest margin {worst:.4} (seed {worst_seed})"),
    )
}

fn monotone(values: &[f64], increasing: bool) -> bool {
    values.windows(2).all(|w| if increasing { w[1] >= w[0] } else { w[1] <= w[0] })
}

fn series(s: &Summary, scheme: &str, metric: Metric) -> Option<Vec<f64>> {
    (0..s.points.len()).map(|p| s.mean(p, scheme, metric)).collect()
}

fn show(values: &[f64], scale: f64) -> String {
    values.iter().map(|v| format!("{:.4}", v * scale)).collect::<Vec<_>>().join(" -> ")
}

/// Trends expected when the maximum task size is swept.
pub fn data_size_checks(s: &Summary) -> Vec<Check> {
    let mut out = Vec::new();
    for scheme in SCHEME_ORDER {
        for metric in [Metric::UdCost, Metric::UavEnergy, Metric::Workload] {
            let name = format!("{scheme} mean {} non-decreasing in data size", metric.label());
            match series(s, scheme, metric) {
                Some(v) => out.push(Check::new(name, monotone(&v, true), show(&v, metric.scale()))),
                None => out.push(Check::gap(name, "missing sweep point")),
            }
        }
    }
    let name = "OJOA/OCQ/ERA cost spread < 10% at the smallest data size";
    let costs: Option<Vec<f64>> = ["OJOA", "OCQ", "ERA"].iter().map(|k| s.mean(0, k, Metric::UdCost)).collect();
    match costs {
        Some(c) => {
            let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let spread = (hi - lo) / lo;
            out.push(Check::new(
                name,
                spread < 0.1,
                format!("spread {:.2}% ({})", 100.0 * spread, show(&c, 1.0).replace(" -> ", ", ")),
            ));
        }
        None => out.push(Check::gap(name, "missing scheme data")),
    }
    out
}

/// Cost/backlog trade-off expected when `V` is swept.
pub fn v_checks(s: &Summary) -> Vec<Check> {
    let mut out = Vec::new();
    let rules = [
        (Metric::UdCost, false, "OJOA mean cost non-increasing in V"),
        (Metric::FinalQc, true, "OJOA mean Q_c(T) non-decreasing in V"),
        (Metric::FinalQp, true, "OJOA mean Q_p(T) non-decreasing in V"),
    ];
    for (metric, increasing, name) in rules {
        match series(s, "OJOA", metric) {
            Some(v) => out.push(Check::new(name, monotone(&v, increasing), show(&v, 1.0))),
            None => out.push(Check::gap(name, "missing sweep point")),
        }
    }
    out
}

/// Every check that applies to the runs in `s`.
pub fn all_checks(s: &Summary) -> Vec<Check> {
    match s.sweep_key.as_deref() {
        None => scheme_checks(s, 0),
        Some(DATA_SIZE_KEY) => data_size_checks(s),
        Some(V_KEY) => v_checks(s),
        Some(_) => Vec::new(),
    }
}

/// Mean ± sample std table, one block per sweep point, gaps marked `n/a`.
pub fn render_table(s: &Summary) -> String {
    let mut out = String::new();
    for (p, point) in s.points.iter().enumerate() {
        if let (Some(key), Some(v)) = (&s.sweep_key, point) {
            let _ = writeln!(out, "{key} = {v}");
        }
        let _ = write!(out, "{:<6} {:>3}", "scheme", "n");
        for m in Metric::ALL {
            let _ = write!(out, " {:>22}", m.label());
        }
        out.push('\n');
        for scheme in s.schemes() {
            let n = s.seeds(p, &scheme).map_or(0, |r| r.len());
            let _ = write!(out, "{scheme:<6} {n:>3}");
            for m in Metric::ALL {
                let cell = match s.stat(p, &scheme, m) {
                    Some(st) => format!("{:.4} ± {:.4}", st.mean * m.scale(), st.std * m.scale()),
                    None => "n/a".to_string(),
                };
                let _ = write!(out, " {cell:>22}");
            }
            out.push('\n');
        }
        out.push('\n');
    }
    for (scheme, seed, v, reason) in &s.failures {
        let at = v.map(|x| format!(" at {x}")).unwrap_or_default();
        let _ = writeln!(out, "failed: {scheme} seed {seed}{at}: {reason}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::RunEntry;

    fn metrics(cost: f64) -> RunMetrics {
        RunMetrics {
            time_average_ud_cost: cost,
            time_average_uav_energy: 0.0,
            time_average_workload: 0.0,
            time_average_compute_energy: 0.0,
            time_average_propulsion_energy: 0.0,
            time_average_offloads: 0.0,
            final_q_compute: 0.0,
            final_q_propulsion: 0.0,
        }
    }

    fn entry(scheme: &str, seed: u64, cost: f64) -> RunEntry {
        RunEntry {
            scheme: scheme.into(),
            seed,
            sweep_key: None,
            sweep_value: None,
            status: RunStatus::Ok,
            reason: None,
            metrics: Some(metrics(cost)),
        }
    }

    #[test]
    fn single_seed_has_zero_std() {
        let s = Summary::from_files(&[MetricsFile {
            runs: vec![entry("OJOA", 1, 3.5)],
        }]);
        let st = s.stat(0, "OJOA", Metric::UdCost).unwrap();
        assert_eq!((st.mean, st.std, st.n), (3.5, 0.0, 1));
    }

    #[test]
    fn two_seeds_mean_and_sample_std() {
        let s = Summary::from_files(&[MetricsFile {
            runs: vec![entry("FLP", 1, 2.0), entry("FLP", 2, 4.0)],
        }]);
        let st = s.stat(0, "FLP", Metric::UdCost).unwrap();
        assert_eq!(st.mean, 3.0);
        assert_eq!(st.std, 2f64.sqrt());
    }

    #[test]
    fn missing_schemes_are_gaps() {
        let s = Summary::from_files(&[MetricsFile {
            runs: vec![entry("OJOA", 1, 1.0), entry("ELC", 1, 2.0)],
        }]);
        let checks = scheme_checks(&s, 0);
        assert_eq!(checks[0].verdict, Verdict::Gap);
        assert!(checks.iter().any(|c| c.name == "per-seed cost OJOA <= ELC" && c.verdict == Verdict::Pass));
        assert!(render_table(&s).contains("n/a"));
    }
}
