use std::io::Write;
use std::path::Path;

use super::{build_source, ExperimentConfig, HarnessError, Mode, SweepValue};
use crate::channel::ChannelSource;
use crate::link::DelayLedger;
use crate::neural::checkpoint;
use crate::parallel::{map_bounded, Exec};
use crate::rl::{evaluate, evaluate_policy, train, Action, Normalizer};
use crate::trackers::run_tracked_episode;

pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: [&str; 17] = [
    "schema_version",
    "mode",
    "source",
    "sweep_axis",
    "sweep_value",
    "seed",
    "tracking_interval",
    "antennas",
    "gamma",
    "lr_actor",
    "lr_critic",
    "avg_delay_ms",
    "successful_packets",
    "tracking_slots",
    "failed_slots",
    "total_slots",
    "error",
];

/// One job of a sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub value: SweepValue,
    pub seed: u64,
}

/// Outcome of one sweep point. `ledger` is `None` when the run failed and
/// `error` says why.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub mode: Mode,
    pub source: String,
    pub sweep: SweepValue,
    pub seed: u64,
    pub tracking_interval: f64,
    pub antennas: usize,
    pub gamma: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub avg_delay_ms: Option<f64>,
    pub ledger: Option<DelayLedger>,
    pub error: Option<String>,
}

impl ResultRow {
    pub fn is_error(&self) -> bool {
        self.error.is_some()
    }

    fn record(&self) -> Vec<String> {
        let opt = |v: Option<String>| v.unwrap_or_default();
        let l = self.ledger;
        vec![
            SCHEMA_VERSION.to_string(),
            self.mode.to_string(),
            self.source.clone(),
            self.sweep.axis().to_string(),
            self.sweep.label(),
            self.seed.to_string(),
            self.tracking_interval.to_string(),
            self.antennas.to_string(),
            self.gamma.to_string(),
            self.lr_actor.to_string(),
            self.lr_critic.to_string(),
            opt(self.avg_delay_ms.map(|d| d.to_string())),
            opt(l.map(|l| l.successful_packets.to_string())),
            opt(l.map(|l| l.tracking_slots.to_string())),
            opt(l.map(|l| l.failed_slots.to_string())),
            opt(l.map(|l| l.total_delay_slots.to_string())),
            opt(self.error.clone()),
        ]
    }
}

/// Every (axis value, seed) pair, axis-major.
pub fn expand_points(cfg: &ExperimentConfig) -> Vec<SweepPoint> {
    let mut values = cfg.sweep.values();
    if values.is_empty() {
        values.push(SweepValue::None);
    }
    values
        .into_iter()
        .flat_map(|value| cfg.experiment.seeds.iter().map(move |&seed| SweepPoint { value, seed }))
        .collect()
}

/// `cfg` with the sweep value applied.
fn configure(cfg: &ExperimentConfig, value: SweepValue) -> ExperimentConfig {
    let mut c = cfg.clone();
    match value {
        SweepValue::None => {}
        SweepValue::TrackingInterval(t) => c.tracker.tracking_interval = t,
        SweepValue::Antennas(m) => {
            c.channel.n_t = m;
            c.channel.n_r = m;
        }
        SweepValue::Gamma(g) => c.agent.gamma = g,
        SweepValue::LearningRates(a, cr) => {
            c.agent.lr_actor = a;
            c.agent.lr_critic = cr;
        }
    }
    c
}

fn run_ledger(cfg: &ExperimentConfig, source: &ChannelSource, seed: u64, exec: Exec) -> Result<DelayLedger, HarnessError> {
    match cfg.experiment.mode {
        Mode::Ekf | Mode::Pf => {
            let kind = cfg.experiment.mode.tracker().expect("tracker mode");
            let params = cfg.tracker.params(exec);
            Ok(run_tracked_episode(kind, &cfg.scenario, &cfg.channel, source, &params, seed)?.ledger)
        }
        Mode::DdpgTrain => {
            let run = train(&cfg.agent, &cfg.scenario, &cfg.channel, source, seed, false)?;
            let report =
                evaluate(&run.agent, &cfg.scenario, &cfg.channel, source, cfg.experiment.eval_episodes, seed)?;
            Ok(report.ledger)
        }
        Mode::DdpgEval => {
            let actor = checkpoint::load(Path::new(&cfg.experiment.checkpoint))?;
            if actor.input_dim() != 4 || actor.output_dim() != 2 {
                return Err(HarnessError::ActorShape(actor.dims()));
            }
            let norm = Normalizer::new(cfg.channel.noise_variance, cfg.agent.slots_per_step);
            let report = evaluate_policy(
                &cfg.scenario,
                &cfg.channel,
                source,
                cfg.agent.slots_per_step,
                cfg.experiment.eval_episodes,
                seed,
                |o| {
                    let out = actor.predict(&norm.observation(o))?;
                    Ok(Action::new(out[0], out[1]))
                },
            )?;
            Ok(report.ledger)
        }
    }
}

/// Runs one sweep point. Failures become error rows.
pub fn run_point(cfg: &ExperimentConfig, source: &ChannelSource, point: &SweepPoint, exec: Exec) -> ResultRow {
    let c = configure(cfg, point.value);
    let result = run_ledger(&c, source, point.seed, exec);
    let (avg_delay_ms, ledger, error) = match result {
        Ok(l) => (Some(l.average_delay_ms_or_episode(c.scenario.slot_duration)), Some(l), None),
        Err(e) => (None, None, Some(e.to_string())),
    };
    ResultRow {
        mode: c.experiment.mode,
        source: c.experiment.source.clone(),
        sweep: point.value,
        seed: point.seed,
        tracking_interval: c.tracker.tracking_interval,
        antennas: c.channel.n_r,
        gamma: c.agent.gamma,
        lr_actor: c.agent.lr_actor,
        lr_critic: c.agent.lr_critic,
        avg_delay_ms,
        ledger,
        error,
    }
}

/// Runs every point with at most `jobs` workers (0 means all cores). Rows
/// are handed to `on_row` in point order as soon as they are available.
pub fn run_sweep<F>(cfg: &ExperimentConfig, jobs: usize, mut on_row: F) -> Result<Vec<ResultRow>, HarnessError>
where
    F: FnMut(&ResultRow) -> Result<(), HarnessError>,
{
    let source = build_source(cfg)?;
    let points = expand_points(cfg);
    let chunk = if jobs == 0 { crate::parallel::available_workers() } else { jobs }.max(1);
    // Points already run in parallel; keep the particle loops sequential
    // unless there is only one worker.
    let exec = if chunk == 1 { Exec::Parallel } else { Exec::Sequential };
    let mut rows = Vec::with_capacity(points.len());
    for batch in points.chunks(chunk) {
        for row in map_bounded(jobs, batch, |p| run_point(cfg, &source, p, exec)) {
            on_row(&row)?;
            rows.push(row);
        }
    }
    Ok(rows)
}

/// CSV writer for result rows; writes the header on creation.
pub struct RowWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> RowWriter<W> {
    pub fn new(out: W) -> Result<Self, HarnessError> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(CSV_HEADER)?;
        inner.flush()?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, row: &ResultRow) -> Result<(), HarnessError> {
        self.inner.write_record(row.record())?;
        self.inner.flush()?;
        Ok(())
    }
}

pub fn write_rows<W: Write>(out: W, rows: &[ResultRow]) -> Result<(), HarnessError> {
    let mut w = RowWriter::new(out)?;
    for r in rows {
        w.write(r)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::parse_config;

    fn quick(text: &str) -> ExperimentConfig {
        let mut cfg = parse_config(text, Vec::new()).unwrap();
        cfg.scenario.total_time = 1.0;
        cfg.scenario.phases[0].duration = 1.0;
        cfg.scenario.phases.truncate(1);
        cfg
    }

    #[test]
    fn one_point_two_seeds_gives_two_rows() {
        let cfg = quick("[experiment]\nseeds = [1, 2]\n");
        let points = expand_points(&cfg);
        assert_eq!(points.len(), 2);
        let rows = run_sweep(&cfg, 1, |_| Ok(())).unwrap();
        assert_eq!(rows.len(), 2);
        for r in &rows {
            let l = r.ledger.unwrap();
            assert!(l.is_conserved());
            assert_eq!(l.slots(), 200);
            assert!(r.avg_delay_ms.unwrap() >= 5.0);
        }
    }

    #[test]
    fn axis_major_expansion() {
        let cfg = quick("[experiment]\nseeds = [7, 8]\n[sweep]\nantennas = [8, 16, 32]\n");
        let p = expand_points(&cfg);
        assert_eq!(p.len(), 6);
        assert_eq!(p[1], SweepPoint { value: SweepValue::Antennas(8), seed: 8 });
        assert_eq!(p[2], SweepPoint { value: SweepValue::Antennas(16), seed: 7 });
        let row = run_point(&cfg, &ChannelSource::SyntheticLos, &p[5], Exec::Sequential);
        assert_eq!(row.antennas, 32);
        assert!(!row.is_error());
    }

    #[test]
    fn failed_points_become_error_rows() {
        // 0.0123 s is not a whole number of slots.
        let cfg = quick("[experiment]\nseeds = [1]\n[sweep]\ntracking_interval = [0.0123, 0.1]\n");
        let rows = run_sweep(&cfg, 1, |_| Ok(())).unwrap();
        assert!(rows[0].is_error() && rows[0].ledger.is_none());
        assert!(!rows[1].is_error());
        let mut buf = Vec::new();
        write_rows(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER.join(","));
        assert!(lines[1].starts_with("1,ekf,synthetic-los,tracking_interval,0.0123,1,"));
        assert!(lines[1].contains(",,,,,"), "{}", lines[1]);
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn worker_count_does_not_change_rows() {
        let cfg = quick("[experiment]\nseeds = [1, 2, 3]\nmode = \"pf\"\n[tracker]\nparticles = 50\n");
        let a = run_sweep(&cfg, 1, |_| Ok(())).unwrap();
        let b = run_sweep(&cfg, 3, |_| Ok(())).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rows_stream_in_order() {
        let cfg = quick("[experiment]\nseeds = [4, 5, 6]\n");
        let mut seen = Vec::new();
        run_sweep(&cfg, 2, |r| {
            seen.push(r.seed);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![4, 5, 6]);
    }

    #[test]
    fn missing_checkpoint_is_an_error_row() {
        let cfg = quick("[experiment]\nmode = \"ddpg-eval\"\ncheckpoint = \"/nonexistent/actor.btnn\"\n");
        let rows = run_sweep(&cfg, 1, |_| Ok(())).unwrap();
        assert!(rows[0].is_error());
    }
}
