//! TOML experiment configuration.
//!
//! Every key has a default, so an empty file is a valid config. Unknown keys
//! and type errors are reported with the offending key and line. Any key can
//! also be set from the environment as `BEAMTRACK_<SECTION>_<KEY>`, for
//! example `BEAMTRACK_AGENT_GAMMA=0.99`; the value is parsed as a TOML value
//! and falls back to a plain string.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelConfig;
use crate::parallel::Exec;
use crate::rl::AgentConfig;
use crate::scenario::ScenarioConfig;
use crate::trackers::{PointingState, TrackerKind, TrackerParams};

pub const ENV_PREFIX: &str = "BEAMTRACK_";
pub const SECTIONS: [&str; 6] = ["experiment", "scenario", "channel", "tracker", "agent", "sweep"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Ekf,
    Pf,
    DdpgTrain,
    DdpgEval,
}

impl Mode {
    pub fn tracker(self) -> Option<TrackerKind> {
        match self {
            Mode::Ekf => Some(TrackerKind::Ekf),
            Mode::Pf => Some(TrackerKind::Pf),
            _ => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Ekf => "ekf",
            Mode::Pf => "pf",
            Mode::DdpgTrain => "ddpg-train",
            Mode::DdpgEval => "ddpg-eval",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub mode: Mode,
    pub seeds: Vec<u64>,
    /// `synthetic-los`, `synthetic-multipath` or `trace:<path>`.
    pub source: String,
    /// Greedy evaluation episodes after DDPG training, or for `ddpg-eval`.
    pub eval_episodes: usize,
    /// Actor checkpoint for `ddpg-eval`.
    pub checkpoint: String,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            mode: Mode::Ekf,
            seeds: vec![0],
            source: "synthetic-los".into(),
            eval_episodes: 5,
            checkpoint: String::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerSection {
    pub tracking_interval: f64,
    pub sigma_u2: f64,
    pub particles: usize,
    /// Correction threshold (rad); 0 selects `2 / n_r`.
    pub phi_threshold: f64,
}

impl Default for TrackerSection {
    fn default() -> Self {
        let p = TrackerParams::default();
        Self { tracking_interval: p.tracking_interval, sigma_u2: p.sigma_u2, particles: p.particles, phi_threshold: 0.0 }
    }
}

impl TrackerSection {
    pub fn params(&self, exec: Exec) -> TrackerParams {
        TrackerParams {
            tracking_interval: self.tracking_interval,
            sigma_u2: self.sigma_u2,
            particles: self.particles,
            phi_threshold: (self.phi_threshold > 0.0).then_some(self.phi_threshold),
            exec,
        }
    }

    pub fn threshold(&self, n_r: usize) -> f64 {
        if self.phi_threshold > 0.0 {
            self.phi_threshold
        } else {
            PointingState::default_threshold(n_r)
        }
    }
}

/// At most one list may be non-empty; it becomes the sweep axis.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub tracking_interval: Vec<f64>,
    /// Array size, applied to both ends.
    pub antennas: Vec<usize>,
    pub gamma: Vec<f64>,
    /// `[lr_actor, lr_critic]` pairs.
    pub learning_rates: Vec<[f64; 2]>,
}

/// One value on a sweep axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SweepValue {
    None,
    TrackingInterval(f64),
    Antennas(usize),
    Gamma(f64),
    LearningRates(f64, f64),
}

impl SweepValue {
    pub fn axis(&self) -> &'static str {
        match self {
            SweepValue::None => "none",
            SweepValue::TrackingInterval(_) => "tracking_interval",
            SweepValue::Antennas(_) => "antennas",
            SweepValue::Gamma(_) => "gamma",
            SweepValue::LearningRates(..) => "learning_rates",
        }
    }

    pub fn label(&self) -> String {
        match self {
            SweepValue::None => String::new(),
            SweepValue::TrackingInterval(v) | SweepValue::Gamma(v) => v.to_string(),
            SweepValue::Antennas(n) => n.to_string(),
            SweepValue::LearningRates(a, c) => format!("{a}/{c}"),
        }
    }
}

impl SweepSection {
    pub fn axes_in_use(&self) -> Vec<&'static str> {
        let mut used = Vec::new();
        if !self.tracking_interval.is_empty() {
            used.push("tracking_interval");
        }
        if !self.antennas.is_empty() {
            used.push("antennas");
        }
        if !self.gamma.is_empty() {
            used.push("gamma");
        }
        if !self.learning_rates.is_empty() {
            used.push("learning_rates");
        }
        used
    }

    pub fn values(&self) -> Vec<SweepValue> {
        let mut v: Vec<SweepValue> = Vec::new();
        v.extend(self.tracking_interval.iter().map(|x| SweepValue::TrackingInterval(*x)));
        v.extend(self.antennas.iter().map(|x| SweepValue::Antennas(*x)));
        v.extend(self.gamma.iter().map(|x| SweepValue::Gamma(*x)));
        v.extend(self.learning_rates.iter().map(|[a, c]| SweepValue::LearningRates(*a, *c)));
        v
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub scenario: ScenarioConfig,
    pub channel: ChannelConfig,
    pub tracker: TrackerSection,
    pub agent: AgentConfig,
    pub sweep: SweepSection,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{}{}{message}", fmt_line(*line), fmt_key(key))]
    Parse { line: Option<usize>, key: Option<String>, message: String },
    #[error("{}key `{key}`: {message}", fmt_line(*line))]
    Range { key: String, line: Option<usize>, message: String },
    #[error("environment variable {var}: {message}")]
    Env { var: String, message: String },
}

fn fmt_line(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

fn fmt_key(key: &Option<String>) -> String {
    key.as_ref().map(|k| format!("key `{k}`: ")).unwrap_or_default()
}

/// 1-based line of byte offset `pos`.
fn line_of(text: &str, pos: usize) -> usize {
    text[..pos.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

/// The key written on `line`, or the table name for a header line.
fn key_on_line(text: &str, line: usize) -> Option<String> {
    let l = text.lines().nth(line.checked_sub(1)?)?.trim();
    if l.starts_with('[') {
        return Some(l.trim_matches(|c| c == '[' || c == ']').trim().to_string());
    }
    l.split_once('=').map(|(k, _)| k.trim().trim_matches('"').to_string())
}

/// Line where `section.key` is set, if the text sets it.
fn find_key_line(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let l = raw.trim();
        if l.starts_with('[') {
            current = l.trim_matches(|c| c == '[' || c == ']').trim().to_string();
        } else if let Some((k, _)) = l.split_once('=') {
            if current == section && k.trim().trim_matches('"') == key {
                return Some(i + 1);
            }
        }
    }
    None
}

fn from_toml_error(text: &str, e: toml::de::Error) -> ConfigError {
    let line = e.span().map(|s| line_of(text, s.start));
    let key = line.and_then(|l| key_on_line(text, l));
    ConfigError::Parse { line, key, message: e.message().trim().to_string() }
}

/// Parses config text, applying `overrides` as `(variable, value)` pairs.
/// Only variables starting with [`ENV_PREFIX`] are considered.
pub fn parse_config<I>(text: &str, overrides: I) -> Result<ExperimentConfig, ConfigError>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| from_toml_error(text, e))?;
    let overrides: Vec<(String, String)> = overrides.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    if !overrides.is_empty() {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| from_toml_error(text, e))?;
        for (var, value) in &overrides {
            apply_override(&mut table, var, value)?;
        }
        cfg = ExperimentConfig::deserialize(table).map_err(|e| ConfigError::Env {
            var: overrides.iter().map(|(k, _)| k.as_str()).collect::<Vec<_>>().join(", "),
            message: e.message().trim().to_string(),
        })?;
    }
    validate(&cfg).map_err(|(section, key, message)| {
        let var = format!("{ENV_PREFIX}{section}_{key}").to_ascii_uppercase();
        if overrides.iter().any(|(k, _)| k.eq_ignore_ascii_case(&var)) {
            return ConfigError::Env { var, message: format!("{section}.{key} {message}") };
        }
        ConfigError::Range { line: find_key_line(text, section, key), key: format!("{section}.{key}"), message }
    })?;
    Ok(cfg)
}

fn apply_override(table: &mut toml::Table, var: &str, value: &str) -> Result<(), ConfigError> {
    let rest = var[ENV_PREFIX.len()..].to_ascii_lowercase();
    let err = |m: &str| ConfigError::Env { var: var.to_string(), message: m.to_string() };
    let (section, key) = SECTIONS
        .iter()
        .find_map(|s| rest.strip_prefix(s).and_then(|k| k.strip_prefix('_')).map(|k| (*s, k)))
        .ok_or_else(|| err("expected BEAMTRACK_<SECTION>_<KEY> with a known section"))?;
    if key.is_empty() {
        return Err(err("missing key"));
    }
    let parsed = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let entry = table.entry(section.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
    entry.as_table_mut().ok_or_else(|| err("section is not a table"))?.insert(key.to_string(), parsed);
    Ok(())
}

/// Reads `path` (or the defaults when `None`) and applies the process
/// environment overrides.
pub fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, ConfigError> {
    let text = match path {
        Some(p) => {
            std::fs::read_to_string(p).map_err(|source| ConfigError::Io { path: p.display().to_string(), source })?
        }
        None => String::new(),
    };
    parse_config(&text, std::env::vars())
}

/// The full default config as TOML.
pub fn emit_defaults() -> String {
    toml::to_string(&ExperimentConfig::default()).expect("default config serialises")
}

type Invalid = (&'static str, &'static str, String);

fn check(ok: bool, section: &'static str, key: &'static str, msg: impl FnOnce() -> String) -> Result<(), Invalid> {
    if ok {
        Ok(())
    } else {
        Err((section, key, msg()))
    }
}

/// Range checks, naming the first offending key.
pub fn validate(cfg: &ExperimentConfig) -> Result<(), Invalid> {
    let e = &cfg.experiment;
    check(!e.seeds.is_empty(), "experiment", "seeds", || "at least one seed is required".into())?;
    check(
        e.source == "synthetic-los" || e.source == "synthetic-multipath" || e.source.strip_prefix("trace:").is_some_and(|p| !p.is_empty()),
        "experiment",
        "source",
        || format!("expected synthetic-los, synthetic-multipath or trace:<path>, got {:?}", e.source),
    )?;
    check(e.eval_episodes > 0, "experiment", "eval_episodes", || "must be positive".into())?;
    check(e.mode != Mode::DdpgEval || !e.checkpoint.is_empty(), "experiment", "checkpoint", || {
        "ddpg-eval needs an actor checkpoint".into()
    })?;

    let s = &cfg.scenario;
    check(s.h_c > 0.0, "scenario", "h_c", || format!("must be > 0, got {}", s.h_c))?;
    check(s.h_r >= 0.0, "scenario", "h_r", || format!("must be >= 0, got {}", s.h_r))?;
    check(s.slot_duration > 0.0, "scenario", "slot_duration", || format!("must be > 0, got {}", s.slot_duration))?;
    check(s.total_time > 0.0, "scenario", "total_time", || format!("must be > 0, got {}", s.total_time))?;
    check(s.initial_velocity >= 0.0, "scenario", "initial_velocity", || {
        format!("must be >= 0, got {}", s.initial_velocity)
    })?;
    if let Err(err) = s.validate() {
        return Err(("scenario", "phases", err.to_string()));
    }

    let c = &cfg.channel;
    check(c.n_t > 0, "channel", "n_t", || "must be positive".into())?;
    check(c.n_r > 0, "channel", "n_r", || "must be positive".into())?;
    check(c.d_over_lambda > 0.0, "channel", "d_over_lambda", || format!("must be > 0, got {}", c.d_over_lambda))?;
    check((0.0..=1.0).contains(&c.rho), "channel", "rho", || format!("must be in [0, 1], got {}", c.rho))?;
    check(c.noise_variance >= 0.0, "channel", "noise_variance", || format!("must be >= 0, got {}", c.noise_variance))?;
    check(c.snr_threshold_db.is_finite(), "channel", "snr_threshold_db", || "must be finite".into())?;
    check(c.multipath_paths > 0, "channel", "multipath_paths", || "must be positive".into())?;
    check(c.reflection_coeff >= 0.0, "channel", "reflection_coeff", || "must be >= 0".into())?;

    let t = &cfg.tracker;
    check(t.tracking_interval > 0.0, "tracker", "tracking_interval", || {
        format!("must be > 0, got {}", t.tracking_interval)
    })?;
    check(t.sigma_u2 >= 0.0, "tracker", "sigma_u2", || format!("must be >= 0, got {}", t.sigma_u2))?;
    check(t.particles > 0, "tracker", "particles", || "must be positive".into())?;
    check(t.phi_threshold >= 0.0, "tracker", "phi_threshold", || "must be >= 0 (0 selects 2/n_r)".into())?;

    let a = &cfg.agent;
    check((0.0..1.0).contains(&a.gamma), "agent", "gamma", || format!("must be in [0, 1), got {}", a.gamma))?;
    check(a.lr_actor >= 0.0, "agent", "lr_actor", || format!("must be >= 0, got {}", a.lr_actor))?;
    check(a.lr_critic >= 0.0, "agent", "lr_critic", || format!("must be >= 0, got {}", a.lr_critic))?;
    check((0.0..=1.0).contains(&a.tau_mix), "agent", "tau_mix", || format!("must be in [0, 1], got {}", a.tau_mix))?;
    check(a.batch_size > 0, "agent", "batch_size", || "must be positive".into())?;
    check(a.replay_capacity >= a.batch_size, "agent", "replay_capacity", || "must be >= batch_size".into())?;
    check(a.hidden_units >= 20, "agent", "hidden_units", || "must be at least 20".into())?;
    check(a.slots_per_step >= 2, "agent", "slots_per_step", || "must be at least 2".into())?;
    check(a.episodes > 0, "agent", "episodes", || "must be positive".into())?;
    check(a.max_steps > 0, "agent", "max_steps", || "must be positive".into())?;
    check(a.noise_sigma >= 0.0, "agent", "noise_sigma", || "must be >= 0".into())?;
    check((0.0..=1.0).contains(&a.noise_decay), "agent", "noise_decay", || "must be in [0, 1]".into())?;
    check(a.reward_scale > 0.0 && a.reward_scale.is_finite(), "agent", "reward_scale", || "must be > 0".into())?;
    check(a.packet_bonus.is_finite(), "agent", "packet_bonus", || "must be finite".into())?;

    let w = &cfg.sweep;
    let used = w.axes_in_use();
    check(used.len() <= 1, "sweep", used.get(1).copied().unwrap_or("tracking_interval"), || {
        format!("only one sweep axis may be set, found {}", used.join(", "))
    })?;
    check(w.tracking_interval.iter().all(|v| *v > 0.0), "sweep", "tracking_interval", || "values must be > 0".into())?;
    check(w.antennas.iter().all(|v| *v > 0), "sweep", "antennas", || "values must be > 0".into())?;
    check(w.gamma.iter().all(|v| (0.0..1.0).contains(v)), "sweep", "gamma", || "values must be in [0, 1)".into())?;
    check(w.learning_rates.iter().flatten().all(|v| *v >= 0.0), "sweep", "learning_rates", || "values must be >= 0".into())?;
    Ok(())
}
