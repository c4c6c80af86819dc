//! `beamtrack` command line.
//!
//! Every verb reads the same TOML config (`--config`, defaults otherwise),
//! then applies `BEAMTRACK_<SECTION>_<KEY>` environment overrides and
//! finally `--seed`. Output goes to `--out` or stdout.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use beamtrack::channel::{generate_trace, route_records, write_trace};
use beamtrack::harness::{
    build_source, emit_defaults, emit_plot_data, load_config, run_sweep, ExperimentConfig, Mode, RowWriter,
    SweepSection,
};
use beamtrack::neural::checkpoint;
use beamtrack::rl::{train, write_training_log};
use beamtrack::rng::{stream, stream_rng};

#[derive(Parser)]
#[command(name = "beamtrack", version, about = "mmWave V2X beam-tracking simulator")]
struct Cli {
    /// TOML experiment config; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Replaces the config's seed list with this single seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Concurrent sweep points; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment once per seed, ignoring `[sweep]`.
    Run,
    /// Run the `[sweep]` axis for every seed.
    Sweep {
        /// Also write tab-separated plot data here.
        #[arg(long)]
        plot: Option<PathBuf>,
        /// Figure label written into the plot data.
        #[arg(long, default_value = "sweep")]
        figure: String,
    },
    /// Train a DDPG agent and write the per-episode log as CSV.
    Train {
        /// Save the trained actor here.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Fill the wall_seconds column (makes the log non-reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Evaluate a saved actor greedily.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Write a synthetic multipath trace covering the configured route.
    GenTrace {
        /// Record count; by default enough to cover the route.
        #[arg(long)]
        records: Option<usize>,
        /// Distance between records (m).
        #[arg(long, default_value_t = 0.5)]
        spacing: f64,
    },
    /// Print the full default config.
    EmitDefaults,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn sweep_rows(cfg: &ExperimentConfig, jobs: usize, out: Option<&Path>) -> Result<Vec<beamtrack::harness::ResultRow>> {
    let mut w = RowWriter::new(output(out)?)?;
    let rows = run_sweep(cfg, jobs, |r| w.write(r))?;
    for r in rows.iter().filter(|r| r.is_error()) {
        eprintln!("seed {} {}: {}", r.seed, r.sweep.label(), r.error.as_deref().unwrap_or_default());
    }
    Ok(rows)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Command::EmitDefaults = cli.command {
        let mut out = output(cli.out.as_deref())?;
        out.write_all(emit_defaults().as_bytes())?;
        out.flush()?;
        return Ok(());
    }
    let mut cfg = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.experiment.seeds = vec![seed];
    }
    let out = cli.out.as_deref();

    match cli.command {
        Command::Run => {
            cfg.sweep = SweepSection::default();
            sweep_rows(&cfg, cli.jobs, out)?;
        }
        Command::Sweep { plot, figure } => {
            let rows = sweep_rows(&cfg, cli.jobs, out)?;
            if let Some(p) = plot {
                let mut w = output(Some(&p))?;
                emit_plot_data(&rows, &figure, &mut w)?;
                w.flush()?;
            }
        }
        Command::Train { checkpoint: ckpt, timing } => {
            let source = build_source(&cfg)?;
            let seed = cfg.experiment.seeds[0];
            let run = train(&cfg.agent, &cfg.scenario, &cfg.channel, &source, seed, timing)?;
            let mut w = output(out)?;
            write_training_log(&mut w, &run.log)?;
            w.flush()?;
            if let Some(p) = ckpt {
                checkpoint::save(&p, &run.agent.actor)?;
            }
        }
        Command::Eval { checkpoint: ckpt } => {
            if let Some(p) = ckpt {
                cfg.experiment.checkpoint = p.display().to_string();
            }
            if cfg.experiment.checkpoint.is_empty() {
                bail!("eval needs --checkpoint or experiment.checkpoint");
            }
            cfg.experiment.mode = Mode::DdpgEval;
            cfg.sweep = SweepSection::default();
            sweep_rows(&cfg, cli.jobs, out)?;
        }
        Command::GenTrace { records, spacing } => {
            if spacing.is_nan() || spacing <= 0.0 {
                bail!("--spacing must be positive");
            }
            let n = records.unwrap_or_else(|| route_records(&cfg.scenario, spacing));
            let mut rng = stream_rng(cfg.experiment.seeds[0], stream::TRACE);
            let trace = generate_trace(&cfg.channel, &cfg.scenario, cfg.channel.multipath_paths, spacing, n, &mut rng);
            let mut w = output(out)?;
            write_trace(&mut w, &trace)?;
            w.flush()?;
        }
        Command::EmitDefaults => unreachable!(),
    }
    Ok(())
}
