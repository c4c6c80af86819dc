//! Multipath trace files.
//!
//! UTF-8 text, one record per line, comma separated:
//!
//! ```text
//! step_index, position_m, n_paths, {gain_re, gain_im, aoa_rad, aod_rad} x n_paths
//! ```
//!
//! Lines starting with `#` are comments. Step indices start at 0 and increase
//! by one. Floats are written in shortest round-trip form, so a written trace
//! reloads bit-identically.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use super::source::multipath_angles;
use super::{ChannelConfig, ChannelSnapshot, GainProcess, PathComponent};
use crate::scenario::ScenarioConfig;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("cannot read trace {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("trace contains no records")]
    NoRecords,
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: {message}")]
    Format { line: u64, message: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub step: usize,
    pub position: f64,
    pub snapshot: ChannelSnapshot,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    /// Where the trace came from, for labelling output rows.
    pub origin: String,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    /// Last record at or before `position`; the first record before the trace starts.
    pub fn at_position(&self, position: f64) -> &TraceRecord {
        let idx = self.records.partition_point(|r| r.position <= position);
        &self.records[idx.saturating_sub(1)]
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: u64, name: &str) -> Result<T, TraceError> {
    let raw = rec.get(i).ok_or_else(|| TraceError::Parse { line, message: format!("missing field {name}") })?;
    raw.trim()
        .parse()
        .map_err(|_| TraceError::Parse { line, message: format!("invalid {name} {:?}", raw.trim()) })
}

/// Parses trace text. `origin` only labels the result.
pub fn parse_trace(text: &str, origin: &str) -> Result<Trace, TraceError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| TraceError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        let step: usize = field(&rec, 0, line, "step_index")?;
        let position: f64 = field(&rec, 1, line, "position_m")?;
        let n_paths: usize = field(&rec, 2, line, "n_paths")?;
        if n_paths == 0 {
            return Err(TraceError::Parse { line, message: "n_paths must be at least 1".into() });
        }
        if rec.len() != 3 + 4 * n_paths {
            return Err(TraceError::Parse {
                line,
                message: format!("expected {} fields for {n_paths} paths, found {}", 3 + 4 * n_paths, rec.len()),
            });
        }
        let mut paths = Vec::with_capacity(n_paths);
        for p in 0..n_paths {
            let b = 3 + 4 * p;
            let re: f64 = field(&rec, b, line, "gain_re")?;
            let im: f64 = field(&rec, b + 1, line, "gain_im")?;
            let aoa: f64 = field(&rec, b + 2, line, "aoa_rad")?;
            let aod: f64 = field(&rec, b + 3, line, "aod_rad")?;
            paths.push(PathComponent { gain: Complex64::new(re, im), aoa, aod });
        }
        if step != records.len() {
            return Err(TraceError::Format {
                line,
                message: format!("step index {step} out of order, expected {}", records.len()),
            });
        }
        records.push(TraceRecord { step, position, snapshot: ChannelSnapshot { slot: step, paths } });
    }
    if records.is_empty() {
        return Err(TraceError::NoRecords);
    }
    Ok(Trace { origin: origin.to_string(), records })
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Trace, TraceError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| TraceError::Io { path: path.display().to_string(), source })?;
    parse_trace(&text, &path.display().to_string())
}

pub fn write_trace<W: Write>(mut out: W, trace: &Trace) -> io::Result<()> {
    writeln!(out, "# step_index,position_m,n_paths,{{gain_re,gain_im,aoa_rad,aod_rad}}xn_paths")?;
    for r in &trace.records {
        write!(out, "{},{},{}", r.step, r.position, r.snapshot.paths.len())?;
        for p in &r.snapshot.paths {
            write!(out, ",{},{},{},{}", p.gain.re, p.gain.im, p.aoa, p.aod)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Records needed to cover the whole route of `scenario` at `spacing` metres.
pub fn route_records(scenario: &ScenarioConfig, spacing: f64) -> usize {
    let route = scenario.state_at(scenario.total_time).map(|s| s.s).unwrap_or(0.0);
    (route / spacing - 1e-9).ceil().max(0.0) as usize + 1
}

/// Synthetic stand-in for a ray-tracing export: the multipath geometry of the
/// scenario sampled every `spacing` metres for `n` records, with each path's
/// gain following an AR(1) process from record to record.
pub fn generate_trace<R: Rng + ?Sized>(
    cfg: &ChannelConfig,
    scenario: &ScenarioConfig,
    paths: usize,
    spacing: f64,
    n: usize,
    rng: &mut R,
) -> Trace {
    let mut gains: Vec<GainProcess> = (0..paths.max(1))
        .map(|_| GainProcess::new(Complex64::new(1.0, 0.0), cfg.rho))
        .collect();
    let mut records = Vec::with_capacity(n);
    for step in 0..n {
        if step > 0 {
            for g in &mut gains {
                *g = g.evolve(rng);
            }
        }
        let position = step as f64 * spacing;
        let comps = multipath_angles(position, scenario, gains.len())
            .into_iter()
            .zip(&gains)
            .enumerate()
            .map(|(l, ((aoa, aod), g))| {
                let scale = if l == 0 { 1.0 } else { cfg.reflection_coeff };
                PathComponent { gain: g.alpha * scale, aoa, aod }
            })
            .collect();
        records.push(TraceRecord { step, position, snapshot: ChannelSnapshot { slot: step, paths: comps } });
    }
    Trace { origin: "generated".into(), records }
}
