//! Flat `dotted.key = value` configuration with provenance-tagged defaults.
//!
//! A file is a list of `key = value` lines. `[section]` headers prefix the keys
//! that follow them, `#` starts a comment. Values use TOML literal syntax
//! (`1e-9`, `true`, `[1, 2, 3]`, `"OJOA"`); a bare word is taken as a string.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;
use uavmec::sim::{ScenarioConfig, SchemeKind};

/// Environment variable that overrides `output.dir`.
pub const OUT_DIR_ENV: &str = "UAVMEC_OUT_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{origin}:{line}: {msg}")]
    Syntax { origin: String, line: usize, msg: String },
    #[error("{origin}:{line}: unknown key `{key}`")]
    UnknownKey { origin: String, line: usize, key: String },
    #[error("{origin}:{line}: `{key}` expects {expected}, got `{got}`")]
    Type {
        origin: String,
        line: usize,
        key: String,
        expected: &'static str,
        got: String,
    },
    #[error("invalid configuration")]
    Invalid(#[from] uavmec::Error),
    #[error("`sweep.key` = `{key}` {msg}")]
    Sweep { key: String, msg: String },
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Where a default value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    /// Nominal scenario value.
    Nominal,
    /// Chosen here where no nominal value exists.
    Default,
    /// Moved away from the first-choice default after calibration runs.
    Calibrated,
}

impl Origin {
    fn label(self) -> &'static str {
        match self {
            Origin::Nominal => "nominal",
            Origin::Default => "default",
            Origin::Calibrated => "calibrated",
        }
    }
}

/// Every recognised key, in echo order.
pub const KEYS: &[(&str, Origin)] = &[
    ("sim.M", Origin::Nominal),
    ("sim.T", Origin::Nominal),
    ("sim.tau", Origin::Default),
    ("sim.seeds", Origin::Default),
    ("sim.schemes", Origin::Nominal),
    ("sim.threads", Origin::Default),
    ("area.width", Origin::Nominal),
    ("area.height", Origin::Nominal),
    ("channel.xi1", Origin::Default),
    ("channel.xi2", Origin::Default),
    ("channel.kappa", Origin::Default),
    ("channel.beta0", Origin::Default),
    ("channel.mu", Origin::Default),
    ("channel.noise_power", Origin::Default),
    ("channel.bandwidth", Origin::Nominal),
    ("uav.height", Origin::Nominal),
    ("uav.v_max", Origin::Nominal),
    ("uav.f_max", Origin::Nominal),
    ("uav.initial_x", Origin::Nominal),
    ("uav.initial_y", Origin::Nominal),
    ("uav.c1", Origin::Default),
    ("uav.c2", Origin::Default),
    ("uav.c3", Origin::Default),
    ("uav.c4", Origin::Default),
    ("uav.u_tip", Origin::Default),
    ("uav.varpi", Origin::Calibrated),
    ("ud.tx_power", Origin::Nominal),
    ("ud.gamma", Origin::Default),
    ("ud.kappa_eff", Origin::Default),
    ("ud.f_local_choices", Origin::Nominal),
    ("task.data_min", Origin::Nominal),
    ("task.data_max", Origin::Nominal),
    ("task.intensity_min", Origin::Nominal),
    ("task.intensity_max", Origin::Nominal),
    ("task.deadline", Origin::Nominal),
    ("mobility.alpha", Origin::Default),
    ("mobility.mean_speed_max", Origin::Default),
    ("mobility.sigma", Origin::Default),
    ("energy.budget_total", Origin::Default),
    ("energy.compute_fraction", Origin::Default),
    ("energy.v", Origin::Calibrated),
    ("scheme.era_plans_trajectory", Origin::Default),
    ("scheme.flp_x", Origin::Default),
    ("scheme.flp_y", Origin::Default),
    ("scheme.elc_hover_energy", Origin::Default),
    ("sweep.key", Origin::Default),
    ("sweep.values", Origin::Default),
    ("output.dir", Origin::Default),
    ("output.sca_trace", Origin::Default),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub key: String,
    pub values: Vec<f64>,
}

/// A full experiment: the scenario plus the grid to run it on.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig<f64>,
    pub seeds: Vec<u64>,
    pub schemes: Vec<SchemeKind>,
    /// Worker threads; 0 lets the pool pick.
    pub threads: usize,
    pub sweep_key: String,
    pub sweep_values: Vec<f64>,
    pub output_dir: PathBuf,
    set_keys: BTreeSet<&'static str>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            seeds: (1..=10).collect(),
            schemes: SchemeKind::ALL.to_vec(),
            threads: 0,
            sweep_key: String::new(),
            sweep_values: Vec::new(),
            output_dir: PathBuf::from("out"),
            set_keys: BTreeSet::new(),
        }
    }
}

/// Mutable view of one config field.
enum Slot<'a> {
    F64(&'a mut f64),
    Usize(&'a mut usize),
    Bool(&'a mut bool),
    F64List(&'a mut Vec<f64>),
    Seeds(&'a mut Vec<u64>),
    Schemes(&'a mut Vec<SchemeKind>),
    Text(&'a mut String),
    Path(&'a mut PathBuf),
}

fn slot<'a>(cfg: &'a mut ExperimentConfig, key: &str) -> Option<Slot<'a>> {
    let s = &mut cfg.scenario;
    Some(match key {
        "sim.M" => Slot::Usize(&mut s.num_uds),
        "sim.T" => Slot::Usize(&mut s.horizon),
        "sim.tau" => Slot::F64(&mut s.tau),
        "sim.seeds" => Slot::Seeds(&mut cfg.seeds),
        "sim.schemes" => Slot::Schemes(&mut cfg.schemes),
        "sim.threads" => Slot::Usize(&mut cfg.threads),
        "area.width" => Slot::F64(&mut s.area.width),
        "area.height" => Slot::F64(&mut s.area.height),
        "channel.xi1" => Slot::F64(&mut s.channel.xi1),
        "channel.xi2" => Slot::F64(&mut s.channel.xi2),
        "channel.kappa" => Slot::F64(&mut s.channel.kappa),
        "channel.beta0" => Slot::F64(&mut s.channel.beta0),
        "channel.mu" => Slot::F64(&mut s.channel.mu),
        "channel.noise_power" => Slot::F64(&mut s.channel.noise_power),
        "channel.bandwidth" => Slot::F64(&mut s.channel.bandwidth),
        "uav.height" => Slot::F64(&mut s.uav.height),
        "uav.v_max" => Slot::F64(&mut s.uav.v_max),
        "uav.f_max" => Slot::F64(&mut s.uav.f_max),
        "uav.initial_x" => Slot::F64(&mut s.uav.initial_position.x),
        "uav.initial_y" => Slot::F64(&mut s.uav.initial_position.y),
        "uav.c1" => Slot::F64(&mut s.uav.c1),
        "uav.c2" => Slot::F64(&mut s.uav.c2),
        "uav.c3" => Slot::F64(&mut s.uav.c3),
        "uav.c4" => Slot::F64(&mut s.uav.c4),
        "uav.u_tip" => Slot::F64(&mut s.uav.u_tip),
        "uav.varpi" => Slot::F64(&mut s.uav.varpi),
        "ud.tx_power" => Slot::F64(&mut s.devices.tx_power),
        "ud.gamma" => Slot::F64(&mut s.devices.gamma),
        "ud.kappa_eff" => Slot::F64(&mut s.devices.kappa_eff),
        "ud.f_local_choices" => Slot::F64List(&mut s.devices.f_local_choices),
        "task.data_min" => Slot::F64(&mut s.tasks.data_min),
        "task.data_max" => Slot::F64(&mut s.tasks.data_max),
        "task.intensity_min" => Slot::F64(&mut s.tasks.intensity_min),
        "task.intensity_max" => Slot::F64(&mut s.tasks.intensity_max),
        "task.deadline" => Slot::F64(&mut s.tasks.deadline),
        "mobility.alpha" => Slot::F64(&mut s.mobility.alpha),
        "mobility.mean_speed_max" => Slot::F64(&mut s.mobility.mean_speed_max),
        "mobility.sigma" => Slot::F64(&mut s.mobility.sigma),
        "energy.budget_total" => Slot::F64(&mut s.energy.budget_total),
        "energy.compute_fraction" => Slot::F64(&mut s.energy.compute_fraction),
        "energy.v" => Slot::F64(&mut s.energy.v_param),
        "scheme.era_plans_trajectory" => Slot::Bool(&mut s.schemes.era_plans_trajectory),
        "scheme.flp_x" => Slot::F64(&mut s.schemes.flp_position.x),
        "scheme.flp_y" => Slot::F64(&mut s.schemes.flp_position.y),
        "scheme.elc_hover_energy" => Slot::Bool(&mut s.schemes.elc_hover_energy),
        "sweep.key" => Slot::Text(&mut cfg.sweep_key),
        "sweep.values" => Slot::F64List(&mut cfg.sweep_values),
        "output.dir" => Slot::Path(&mut cfg.output_dir),
        "output.sca_trace" => Slot::Bool(&mut s.trace_sca),
        _ => return None,
    })
}

/// Parse a value in TOML literal syntax, falling back to a plain string.
fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    }
}

fn as_f64(v: &toml::Value) -> Option<f64> {
    match v {
        toml::Value::Float(x) => Some(*x),
        toml::Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn as_u64(v: &toml::Value) -> Option<u64> {
    match v {
        toml::Value::Integer(i) => u64::try_from(*i).ok(),
        _ => None,
    }
}

fn list<U>(v: &toml::Value, f: impl Fn(&toml::Value) -> Option<U>) -> Option<Vec<U>> {
    match v {
        toml::Value::Array(items) => items.iter().map(f).collect(),
        other => f(other).map(|x| vec![x]),
    }
}

fn parse_schemes(v: &toml::Value) -> Option<Vec<SchemeKind>> {
    let names: Vec<String> = match v {
        toml::Value::String(s) => s.split(',').map(str::to_string).collect(),
        toml::Value::Array(items) => items
            .iter()
            .map(|i| i.as_str().map(str::to_string))
            .collect::<Option<_>>()?,
        _ => return None,
    };
    names.iter().map(|n| n.parse().ok()).collect()
}

/// Describe a rejected value for error messages.
fn shown(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn assign(slot: Slot<'_>, v: &toml::Value) -> Result<(), &'static str> {
    match slot {
        Slot::F64(x) => *x = as_f64(v).ok_or("a number")?,
        Slot::Usize(x) => *x = as_u64(v).and_then(|n| usize::try_from(n).ok()).ok_or("a non-negative integer")?,
        Slot::Bool(x) => *x = v.as_bool().ok_or("true or false")?,
        Slot::F64List(x) => *x = list(v, as_f64).ok_or("a list of numbers")?,
        Slot::Seeds(x) => *x = list(v, as_u64).ok_or("a list of non-negative integers")?,
        Slot::Schemes(x) => *x = parse_schemes(v).ok_or("a list of scheme names (OJOA, ELC, ERA, FLP, OCQ)")?,
        Slot::Text(x) => *x = v.as_str().ok_or("a string")?.to_string(),
        Slot::Path(x) => *x = PathBuf::from(v.as_str().ok_or("a path string")?),
    }
    Ok(())
}

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn render(slot: Slot<'_>) -> String {
    let join = |items: Vec<String>| format!("[{}]", items.join(", "));
    match slot {
        Slot::F64(x) => fmt_f64(*x),
        Slot::Usize(x) => x.to_string(),
        Slot::Bool(x) => x.to_string(),
        Slot::F64List(x) => join(x.iter().map(|&v| fmt_f64(v)).collect()),
        Slot::Seeds(x) => join(x.iter().map(u64::to_string).collect()),
        Slot::Schemes(x) => join(x.iter().map(|k| format!("\"{k}\"")).collect()),
        Slot::Text(x) => toml::Value::String(x.clone()).to_string(),
        Slot::Path(x) => toml::Value::String(x.display().to_string()).to_string(),
    }
}

impl ExperimentConfig {
    /// Set one key from its raw text. `origin` and `line` only label errors.
    pub fn set(&mut self, key: &str, raw: &str, origin: &str, line: usize) -> Result<(), ConfigError> {
        let Some(&(name, _)) = KEYS.iter().find(|(k, _)| *k == key) else {
            return Err(ConfigError::UnknownKey {
                origin: origin.to_string(),
                line,
                key: key.to_string(),
            });
        };
        let value = parse_value(raw);
        let slot = slot(self, name).expect("every listed key has a slot");
        assign(slot, &value).map_err(|expected| ConfigError::Type {
            origin: origin.to_string(),
            line,
            key: key.to_string(),
            expected,
            got: shown(&value),
        })?;
        self.set_keys.insert(name);
        Ok(())
    }

    /// Apply the lines of a config document.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), ConfigError> {
        let mut section = String::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line = i + 1;
            let content = strip_comment(raw_line).trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                    origin: origin.to_string(),
                    line,
                    msg: "unterminated section header".into(),
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = split_assignment(content).ok_or_else(|| ConfigError::Syntax {
                origin: origin.to_string(),
                line,
                msg: format!("expected `key = value`, got `{content}`"),
            })?;
            let full = if section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            self.set(&full, value, origin, line)?;
        }
        Ok(())
    }

    /// Resolved sweep, if any.
    pub fn sweep(&self) -> Result<Option<Sweep>, ConfigError> {
        if self.sweep_key.is_empty() {
            if !self.sweep_values.is_empty() {
                return Err(ConfigError::Sweep {
                    key: String::new(),
                    msg: "is empty but sweep.values is set".into(),
                });
            }
            return Ok(None);
        }
        let err = |msg: &str| ConfigError::Sweep {
            key: self.sweep_key.clone(),
            msg: msg.to_string(),
        };
        if self.sweep_values.is_empty() {
            return Err(err("needs a non-empty sweep.values"));
        }
        let mut probe = self.clone();
        match slot(&mut probe, &self.sweep_key) {
            Some(Slot::F64(_)) => {}
            Some(Slot::Usize(_)) => {
                if self.sweep_values.iter().any(|v| v.fract() != 0.0 || *v < 0.0) {
                    return Err(err("takes whole non-negative values only"));
                }
            }
            Some(_) => return Err(err("is not a numeric scenario key")),
            None => return Err(err("is not a known key")),
        }
        if self.sweep_key.starts_with("sim.") && self.sweep_key != "sim.M" && self.sweep_key != "sim.T" && self.sweep_key != "sim.tau" {
            return Err(err("is not a scenario parameter"));
        }
        Ok(Some(Sweep {
            key: self.sweep_key.clone(),
            values: self.sweep_values.clone(),
        }))
    }

    /// Scenario for one sweep point.
    pub fn scenario_at(&self, sweep: Option<(&str, f64)>) -> Result<ScenarioConfig<f64>, ConfigError> {
        let mut c = self.clone();
        if let Some((key, value)) = sweep {
            c.set(key, &fmt_f64(value), "sweep", 0)
                .or_else(|_| c.set(key, &format!("{}", value as i64), "sweep", 0))?;
        }
        Ok(c.scenario)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.scenario.validate()?;
        if self.seeds.is_empty() {
            return Err(uavmec::Error::invalid("sim.seeds", "must not be empty").into());
        }
        if self.schemes.is_empty() {
            return Err(uavmec::Error::invalid("sim.schemes", "must not be empty").into());
        }
        if let Some(sweep) = self.sweep()? {
            for &v in &sweep.values {
                self.scenario_at(Some((&sweep.key, v)))?.validate()?;
            }
        }
        Ok(())
    }

    /// Effective configuration as a loadable document, each line tagged with
    /// where its value came from.
    pub fn echo(&self) -> String {
        let mut c = self.clone();
        let mut out = String::from("# effective configuration\n");
        for &(key, origin) in KEYS {
            let tag = if self.set_keys.contains(key) { "set" } else { origin.label() };
            let value = render(slot(&mut c, key).expect("every listed key has a slot"));
            let _ = writeln!(out, "{key} = {value}  # {tag}");
        }
        out
    }
}

fn strip_comment(line: &str) -> &str {
    // a `#` inside a quoted string is not a comment
    let mut quoted = false;
    for (i, ch) in line.char_indices() {
        match ch {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn split_assignment(line: &str) -> Option<(&str, &str)> {
    let (k, v) = line.split_once('=')?;
    let (k, v) = (k.trim(), v.trim());
    (!k.is_empty() && !v.is_empty()).then_some((k, v))
}

/// Defaults, then the file, then the output-directory variable, then the
/// `key=value` overrides in order. The result is validated.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = path {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.apply_text(&text, &path.display().to_string())?;
    }
    if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
        if !dir.is_empty() {
            cfg.output_dir = PathBuf::from(dir);
            cfg.set_keys.insert("output.dir");
        }
    }
    for (i, o) in overrides.iter().enumerate() {
        let (k, v) = split_assignment(o).ok_or_else(|| ConfigError::Syntax {
            origin: "override".into(),
            line: i + 1,
            msg: format!("expected `key=value`, got `{o}`"),
        })?;
        cfg.set(k, v, "override", i + 1)?;
    }
    cfg.validate()?;
    Ok(cfg)
}
